#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fractalsea {

// Planar RGBD raster. Channels 0..2 hold RGB, channel 3 relative depth; all in [0, 1].
class RgbdPatch {
public:
    static constexpr int kChannels = 4;
    static constexpr int kDepth = 3;

    RgbdPatch() = default;
    RgbdPatch(int width, int height, float fill = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    float &at(int ch, int x, int y) { return data_[index(ch, x, y)]; }
    float at(int ch, int x, int y) const { return data_[index(ch, x, y)]; }
    float luma(int x, int y) const;

    float *plane(int ch) { return data_.data() + static_cast<std::size_t>(ch) * pixel_count(); }
    const float *plane(int ch) const { return data_.data() + static_cast<std::size_t>(ch) * pixel_count(); }
    const std::vector<float> &data() const noexcept { return data_; }

    // Copy of the w x h window starting at (x0, y0).
    RgbdPatch crop(int x0, int y0, int w, int h) const;

    // Rescales depth so that min -> 0 and max -> 1; constant depth is left unchanged.
    void normalize_depth();

    bool operator==(const RgbdPatch &) const = default;

private:
    std::size_t index(int ch, int x, int y) const {
        return static_cast<std::size_t>(ch) * pixel_count() + static_cast<std::size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

// Per-pixel known flags: true marks a known (kept) pixel.
class PixelMask {
public:
    PixelMask() = default;
    PixelMask(int width, int height, bool fill);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool known(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool known) { bits_[static_cast<std::size_t>(y) * width_ + x] = known ? 1 : 0; }
    std::size_t known_count() const;
    std::size_t unknown_count() const { return bits_.size() - known_count(); }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

inline float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

// 8-bit RGB PNG and 16-bit grayscale PNG for depth. Quantization rounds half up.
void write_rgb_png(const RgbdPatch &patch, const std::string &path);
void write_depth_png(const RgbdPatch &patch, const std::string &path);
void write_gray16_png(const std::vector<float> &values, int width, int height, const std::string &path);
// Writes PREFIX_rgb.png and PREFIX_depth.png.
void write_patch_pngs(const RgbdPatch &patch, const std::string &prefix);
RgbdPatch read_patch_pngs(const std::string &prefix);

// Raw RGB image in [0, 1] doubles, interleaved, as used by the splat renderer.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> rgb; // (y * width + x) * 3 + c

    RgbImage() = default;
    RgbImage(int w, int h, double fill = 0.0) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}
    double &at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

void write_rgb_png(const RgbImage &image, const std::string &path);
RgbImage read_rgb_png(const std::string &path);

// Lossless float32 little-endian dump: magic "RGBD", int32 width, int32 height, planar data.
void write_rgbd_raw(const RgbdPatch &patch, const std::string &path);
RgbdPatch read_rgbd_raw(const std::string &path);

} // namespace fractalsea
