#include "fractalsea/image.hpp"

#include "fractalsea/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace fractalsea {

RgbdPatch::RgbdPatch(int width, int height, float fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(kChannels) * static_cast<std::size_t>(std::max(width, 0)) *
                static_cast<std::size_t>(std::max(height, 0)),
            fill) {
    if (width < 0 || height < 0) throw DomainError("negative patch dimensions");
}

float RgbdPatch::luma(int x, int y) const { return fractalsea::luma(at(0, x, y), at(1, x, y), at(2, x, y)); }

RgbdPatch RgbdPatch::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_)
        throw DomainError("crop window outside patch");
    RgbdPatch out(w, h);
    for (int ch = 0; ch < kChannels; ++ch)
        for (int y = 0; y < h; ++y)
            std::copy_n(plane(ch) + static_cast<std::size_t>(y0 + y) * width_ + x0, w,
                        out.plane(ch) + static_cast<std::size_t>(y) * w);
    return out;
}

void RgbdPatch::normalize_depth() {
    float *d = plane(kDepth);
    const auto [lo, hi] = std::minmax_element(d, d + pixel_count());
    if (lo == d + pixel_count()) return;
    const float mn = *lo, mx = *hi;
    if (!(mx > mn)) return;
    const double inv = 1.0 / (static_cast<double>(mx) - mn);
    for (std::size_t i = 0; i < pixel_count(); ++i) d[i] = static_cast<float>((d[i] - static_cast<double>(mn)) * inv);
    // Exact endpoints regardless of rounding.
    d[lo - d] = 0.0f;
    d[hi - d] = 1.0f;
}

PixelMask::PixelMask(int width, int height, bool fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

std::size_t PixelMask::known_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// --- PNG ------------------------------------------------------------------------------------

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
}

std::uint16_t quantize16(double v) {
    return static_cast<std::uint16_t>(std::clamp(std::floor(v * 65535.0 + 0.5), 0.0, 65535.0));
}

// rows: height rows of tightly packed bytes (16-bit samples big-endian).
void write_png(const std::string &path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::uint8_t> &bytes, std::size_t row_bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * row_bytes));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw IoError("write failed for '" + path + "'");
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> bytes;
    std::size_t row_bytes = 0;
};

DecodedPng read_png(const std::string &path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path + "'");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError("'" + path + "' is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialisation failed for '" + path + "'");
    }
    DecodedPng out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decoding failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    out.row_bytes = png_get_rowbytes(png, info);
    out.bytes.resize(out.row_bytes * out.height);
    for (int y = 0; y < out.height; ++y) png_read_row(png, out.bytes.data() + y * out.row_bytes, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

double sample(const DecodedPng &img, int x, int y, int c) {
    const std::uint8_t *row = img.bytes.data() + static_cast<std::size_t>(y) * img.row_bytes;
    if (img.bit_depth == 16) {
        const std::size_t i = (static_cast<std::size_t>(x) * img.channels + c) * 2;
        return ((row[i] << 8) | row[i + 1]) / 65535.0;
    }
    return row[static_cast<std::size_t>(x) * img.channels + c] / 255.0;
}

} // namespace

void write_rgb_png(const RgbdPatch &patch, const std::string &path) {
    const int w = patch.width(), h = patch.height();
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] = quantize8(patch.at(c, x, y));
    write_png(path, w, h, PNG_COLOR_TYPE_RGB, 8, bytes, static_cast<std::size_t>(w) * 3);
}

void write_gray16_png(const std::vector<float> &values, int width, int height, const std::string &path) {
    if (values.size() != static_cast<std::size_t>(width) * height) throw DomainError("gray16 size mismatch");
    std::vector<std::uint8_t> bytes(values.size() * 2);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint16_t q = quantize16(values[i]);
        bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
    }
    write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 16, bytes, static_cast<std::size_t>(width) * 2);
}

void write_depth_png(const RgbdPatch &patch, const std::string &path) {
    const float *d = patch.plane(RgbdPatch::kDepth);
    write_gray16_png(std::vector<float>(d, d + patch.pixel_count()), patch.width(), patch.height(), path);
}

void write_patch_pngs(const RgbdPatch &patch, const std::string &prefix) {
    write_rgb_png(patch, prefix + "_rgb.png");
    write_depth_png(patch, prefix + "_depth.png");
}

RgbdPatch read_patch_pngs(const std::string &prefix) {
    const auto rgb = read_png(prefix + "_rgb.png");
    const auto depth = read_png(prefix + "_depth.png");
    if (rgb.channels < 3) throw IoError(prefix + "_rgb.png: expected an RGB image");
    if (depth.width != rgb.width || depth.height != rgb.height)
        throw IoError(prefix + ": RGB and depth images differ in size");
    RgbdPatch patch(rgb.width, rgb.height);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x) {
            for (int c = 0; c < 3; ++c) patch.at(c, x, y) = static_cast<float>(sample(rgb, x, y, c));
            patch.at(RgbdPatch::kDepth, x, y) = static_cast<float>(sample(depth, x, y, 0));
        }
    return patch;
}

void write_rgb_png(const RgbImage &image, const std::string &path) {
    std::vector<std::uint8_t> bytes(image.rgb.size());
    std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(), quantize8);
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, bytes, static_cast<std::size_t>(image.width) * 3);
}

RgbImage read_rgb_png(const std::string &path) {
    const auto png = read_png(path);
    RgbImage img(png.width, png.height);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = sample(png, x, y, png.channels >= 3 ? c : 0);
    return img;
}

void write_rgbd_raw(const RgbdPatch &patch, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const std::int32_t dims[2] = {patch.width(), patch.height()};
    out.write("RGBD", 4);
    out.write(reinterpret_cast<const char *>(dims), sizeof dims);
    out.write(reinterpret_cast<const char *>(patch.data().data()),
              static_cast<std::streamsize>(patch.data().size() * sizeof(float)));
    if (!out) throw IoError("write failed for '" + path + "'");
}

RgbdPatch read_rgbd_raw(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[4];
    std::int32_t dims[2];
    in.read(magic, 4);
    in.read(reinterpret_cast<char *>(dims), sizeof dims);
    if (!in || std::memcmp(magic, "RGBD", 4) != 0 || dims[0] < 0 || dims[1] < 0)
        throw IoError("'" + path + "' is not an RGBD raster");
    RgbdPatch patch(dims[0], dims[1]);
    for (int ch = 0; ch < RgbdPatch::kChannels; ++ch)
        in.read(reinterpret_cast<char *>(patch.plane(ch)),
                static_cast<std::streamsize>(patch.pixel_count() * sizeof(float)));
    if (!in) throw IoError("'" + path + "' is truncated");
    return patch;
}

} // namespace fractalsea
