#pragma once

#include "fractalsea/image.hpp"
#include "fractalsea/latent_field.hpp"

#include <cstdint>
#include <string>

namespace fractalsea {

inline constexpr int kDefaultPatchSize = 224;

struct InpaintMode {
    enum class Kind { Conditional, Unconditional };
    Kind kind = Kind::Unconditional;
    LatentVector latent; // used only when conditional

    static InpaintMode conditional(LatentVector latent) { return {Kind::Conditional, std::move(latent)}; }
    static InpaintMode unconditional() { return {Kind::Unconditional, {}}; }
    bool is_conditional() const { return kind == Kind::Conditional; }
};

// Conditional patch generator I ~ P(I | latent) plus mask-based inpainting.
// Implementations are deterministic in their arguments and never modify known pixels.
class ConditionalGenerator {
public:
    virtual ~ConditionalGenerator() = default;

    virtual RgbdPatch generate(const LatentVector &latent, std::uint64_t seed, int width = kDefaultPatchSize,
                               int height = kDefaultPatchSize) const = 0;
    virtual RgbdPatch inpaint(const RgbdPatch &patch, const PixelMask &mask, const InpaintMode &mode,
                              std::uint64_t seed) const = 0;
    // Whether concurrent calls on one instance are allowed.
    virtual bool concurrent_safe() const = 0;
    virtual std::string name() const = 0;
};

struct ReferenceGeneratorOptions {
    int blend_bandwidth = 8;        // pixels of Laplace blending beside known pixels (conditional mode)
    double detail_amplitude = 0.04; // high-frequency detail injected by unconditional fills
};

// Procedural stand-in for a trained diffusion model.
//
// latent[0] sets roughness r = 2^(0.7 * clamp(latent[0], -3, 3)): the base frequency of a
// 5-octave value-noise heightfield is 6r cycles per 224 pixels and the per-pixel grain amplitude
// is 0.03r. latent[1] picks the palette position t = clamp(0.5 + 0.5 * latent[1], 0, 1) between
// a sand and a reef palette. RGB is the palette colour modulated by height and by directional
// slope shading, plus the grain.
// Depth is 1 - normalized height, so depth spans exactly [0, 1]. Further latent entries are ignored.
class ReferenceGenerator final : public ConditionalGenerator {
public:
    explicit ReferenceGenerator(ReferenceGeneratorOptions options = {}) : options_(options) {}

    RgbdPatch generate(const LatentVector &latent, std::uint64_t seed, int width = kDefaultPatchSize,
                       int height = kDefaultPatchSize) const override;
    RgbdPatch inpaint(const RgbdPatch &patch, const PixelMask &mask, const InpaintMode &mode,
                      std::uint64_t seed) const override;
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "reference"; }

    const ReferenceGeneratorOptions &options() const noexcept { return options_; }

private:
    ReferenceGeneratorOptions options_;
};

RgbdPatch reference_generate(const LatentVector &latent, std::uint64_t seed, int width = kDefaultPatchSize,
                             int height = kDefaultPatchSize);
RgbdPatch reference_inpaint(const RgbdPatch &patch, const PixelMask &mask, const InpaintMode &mode, std::uint64_t seed,
                            const ReferenceGeneratorOptions &options = {});

// Unblended baseline: unknown pixels are pasted straight from generate(latent, seed).
RgbdPatch naive_fill(const ConditionalGenerator &generator, const RgbdPatch &patch, const PixelMask &mask,
                     const LatentVector &latent, std::uint64_t seed);

// Zero-mean detail texture in [-1, 1] used to re-inject high frequencies into smooth fills.
float detail_noise(std::uint64_t seed, int x, int y);

} // namespace fractalsea
