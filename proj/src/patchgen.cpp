#include "fractalsea/patchgen.hpp"

#include "fractalsea/blend.hpp"
#include "fractalsea/error.hpp"
#include "fractalsea/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fractalsea {

namespace {

constexpr double kReferenceSide = 224.0;
constexpr int kOctaves = 5;
constexpr std::array<double, 3> kSand = {0.82, 0.74, 0.55};
constexpr std::array<double, 3> kReef = {0.16, 0.40, 0.47};

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double lattice(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
    return rng::uniform(seed, 0xA11CEULL, static_cast<std::uint64_t>(octave), rng::as_key(ix), rng::as_key(iy));
}

double value_noise(std::uint64_t seed, int octave, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = fade(x - fx), ty = fade(y - fy);
    const double a = lattice(seed, octave, ix, iy), b = lattice(seed, octave, ix + 1, iy);
    const double c = lattice(seed, octave, ix, iy + 1), d = lattice(seed, octave, ix + 1, iy + 1);
    return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

void check_latent(const LatentVector &latent) {
    if (latent.size() < 2) throw DomainError("reference generator needs a latent of dimension >= 2");
    for (double v : latent)
        if (!std::isfinite(v)) throw DomainError("latent must be finite");
}

} // namespace

float detail_noise(std::uint64_t seed, int x, int y) {
    const double s = 40.0 / kReferenceSide;
    const double v = 0.65 * value_noise(seed ^ 0xD37A11ULL, 16, x * s, y * s) +
                     0.35 * value_noise(seed ^ 0xD37A11ULL, 17, x * 2.0 * s, y * 2.0 * s);
    return static_cast<float>(2.0 * v - 1.0);
}

RgbdPatch reference_generate(const LatentVector &latent, std::uint64_t seed, int width, int height) {
    check_latent(latent);
    if (width < 2 || height < 2) throw DomainError("generated patches must be at least 2x2");
    const double roughness = std::exp2(0.7 * std::clamp(latent[0], -3.0, 3.0));
    const double base_freq = 6.0 * roughness / kReferenceSide;
    const double grain_amp = 0.03 * roughness;
    const double t = std::clamp(0.5 + 0.5 * latent[1], 0.0, 1.0);

    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> hf(n);
    double norm = 0.0;
    for (int o = 0; o < kOctaves; ++o) norm += std::pow(0.5, o);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0, amp = 1.0, freq = base_freq;
            for (int o = 0; o < kOctaves; ++o) {
                acc += amp * value_noise(seed, o, x * freq, y * freq);
                amp *= 0.5;
                freq *= 2.0;
            }
            hf[static_cast<std::size_t>(y) * width + x] = acc / norm;
        }
    const auto [lo, hi] = std::minmax_element(hf.begin(), hf.end());
    const double mn = *lo, range = *hi - *lo;
    for (double &v : hf) v = range > 0.0 ? (v - mn) / range : 0.5;

    RgbdPatch patch(width, height);
    std::array<double, 3> base;
    for (int c = 0; c < 3; ++c) base[c] = (1.0 - t) * kSand[c] + t * kReef[c];
    // Slopes are measured per 1% of the reference side; light comes from the top-left.
    const double slope_scale = kReferenceSide / 100.0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto at = [&](int xx, int yy) {
                xx = std::clamp(xx, 0, width - 1);
                yy = std::clamp(yy, 0, height - 1);
                return hf[static_cast<std::size_t>(yy) * width + xx];
            };
            const double h = at(x, y);
            const double gx = 0.5 * (at(x + 1, y) - at(x - 1, y)) * slope_scale;
            const double gy = 0.5 * (at(x, y + 1) - at(x, y - 1)) * slope_scale;
            const double shade = std::clamp(0.8 + 1.5 * (gx + gy) * 0.7071067811865476, 0.25, 1.2);
            const double grain = grain_amp * (rng::uniform(seed, 0x6EA1ULL, static_cast<std::uint64_t>(x),
                                                      static_cast<std::uint64_t>(y)) - 0.5);
            for (int c = 0; c < 3; ++c)
                patch.at(c, x, y) = static_cast<float>(std::clamp(base[c] * (0.55 + 0.45 * h) * shade + grain, 0.0, 1.0));
            patch.at(RgbdPatch::kDepth, x, y) = static_cast<float>(1.0 - h);
        }
    patch.normalize_depth();
    return patch;
}

RgbdPatch reference_inpaint(const RgbdPatch &patch, const PixelMask &mask, const InpaintMode &mode, std::uint64_t seed,
                            const ReferenceGeneratorOptions &options) {
    const int w = patch.width(), h = patch.height();
    if (mask.width() != w || mask.height() != h) throw DomainError("mask and patch dimensions differ");
    const std::size_t known = mask.known_count();
    if (known == patch.pixel_count()) return patch;
    if (known == 0) throw DomainError("inpainting needs at least one known pixel; use generate instead");
    if (mode.is_conditional()) check_latent(mode.latent);

    const std::size_t n = patch.pixel_count();
    std::vector<std::uint8_t> known_bits(n), unknown_bits(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            known_bits[i] = mask.known(x, y) ? 1 : 0;
            unknown_bits[i] = 1 - known_bits[i];
        }
    const auto dist = distance_to(w, h, known_bits);
    const int band = std::max(options.blend_bandwidth, 1);

    RgbdPatch out = patch;
    if (mode.is_conditional()) {
        // Generated content corrected by a harmonic offset that matches the known pixels at the
        // boundary and fades to zero `band` pixels into the unknown region.
        const RgbdPatch fill = reference_generate(mode.latent, seed, w, h);
        std::vector<std::vector<float>> offset(RgbdPatch::kChannels, std::vector<float>(n, 0.0f));
        std::vector<std::uint8_t> region(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (known_bits[i]) {
                for (int c = 0; c < RgbdPatch::kChannels; ++c)
                    offset[c][i] = patch.plane(c)[i] - fill.plane(c)[i];
            } else if (dist[i] <= band) {
                region[i] = 1;
            }
        }
        std::array<float *, RgbdPatch::kChannels> planes;
        for (int c = 0; c < RgbdPatch::kChannels; ++c) planes[c] = offset[c].data();
        laplace_fill(w, h, region, planes);
        for (std::size_t i = 0; i < n; ++i) {
            if (known_bits[i]) continue;
            for (int c = 0; c < RgbdPatch::kChannels; ++c) {
                const float o = region[i] ? offset[c][i] : 0.0f;
                out.plane(c)[i] = std::clamp(fill.plane(c)[i] + o, 0.0f, 1.0f);
            }
        }
    } else {
        std::array<float *, RgbdPatch::kChannels> planes;
        for (int c = 0; c < RgbdPatch::kChannels; ++c) planes[c] = out.plane(c);
        laplace_fill(w, h, unknown_bits, planes);
        const float amp = static_cast<float>(options.detail_amplitude);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (known_bits[i]) continue;
                const float taper = std::min(1.0f, static_cast<float>(dist[i]) / static_cast<float>(band));
                const float detail = amp * taper * detail_noise(seed, x, y);
                for (int c = 0; c < 3; ++c) out.plane(c)[i] = std::clamp(out.plane(c)[i] + detail, 0.0f, 1.0f);
                out.plane(RgbdPatch::kDepth)[i] =
                    std::clamp(out.plane(RgbdPatch::kDepth)[i] - 0.5f * detail, 0.0f, 1.0f);
            }
    }
    // Known pixels are restored verbatim so the laplace pass can never alter them.
    for (int c = 0; c < RgbdPatch::kChannels; ++c)
        for (std::size_t i = 0; i < n; ++i)
            if (known_bits[i]) out.plane(c)[i] = patch.plane(c)[i];
    return out;
}

RgbdPatch ReferenceGenerator::generate(const LatentVector &latent, std::uint64_t seed, int width, int height) const {
    return reference_generate(latent, seed, width, height);
}

RgbdPatch ReferenceGenerator::inpaint(const RgbdPatch &patch, const PixelMask &mask, const InpaintMode &mode,
                                      std::uint64_t seed) const {
    return reference_inpaint(patch, mask, mode, seed, options_);
}

RgbdPatch naive_fill(const ConditionalGenerator &generator, const RgbdPatch &patch, const PixelMask &mask,
                     const LatentVector &latent, std::uint64_t seed) {
    if (mask.width() != patch.width() || mask.height() != patch.height())
        throw DomainError("mask and patch dimensions differ");
    const RgbdPatch fill = generator.generate(latent, seed, patch.width(), patch.height());
    RgbdPatch out = patch;
    for (int y = 0; y < patch.height(); ++y)
        for (int x = 0; x < patch.width(); ++x)
            if (!mask.known(x, y))
                for (int c = 0; c < RgbdPatch::kChannels; ++c) out.at(c, x, y) = fill.at(c, x, y);
    return out;
}

} // namespace fractalsea
