#pragma once

#include "fractalsea/embedding.hpp"
#include "fractalsea/latent_field.hpp"
#include "fractalsea/patchgen.hpp"
#include "fractalsea/stitcher.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fractalsea {

inline constexpr const char *kVersion = "0.1.0";

// A pipeline stage failed. error.json in the output directory records the stage.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string &what)
        : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
    const std::string &stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "fractalsea_out";
    int rows = 4, cols = 4;
    Pattern pattern = Pattern::Parallel;
    FillMode inpaint_mode = FillMode::Unconditional;
    unsigned workers = 1;
    std::string generator = "reference";
    int patch_size = kDefaultPatchSize;

    // Latent field.
    int levels = 3;
    double scale_s = 0.6;
    double decay = 0.5;
    double cell_extent = 1.0;
    std::array<LatentVector, 4> corners{LatentVector{-1.0, -1.0}, LatentVector{1.0, -1.0}, LatentVector{-1.0, 1.0},
                                        LatentVector{1.0, 1.0}};

    // PCA calibration corpus.
    int pca_corpus = 200;
    int pca_dim = 2;

    // Any of "pointcloud", "elevation", "splat".
    std::vector<std::string> exports{"pointcloud", "elevation", "splat"};
    int cloud_stride = 4;
    double height_scale = 32.0;
    double splat_opacity = 0.8;

    bool eval = true;

    // Throws ValidationError.
    void validate() const;
};

// Strict parse: unknown keys raise ValidationError naming the key. Missing keys keep defaults.
PipelineConfig config_from_json(const std::string &text);
// output_dir is omitted when include_output_dir is false; artifacts do not depend on it.
std::string config_to_json(const PipelineConfig &config, bool include_output_dir = true);
PipelineConfig load_config(const std::string &path);

std::unique_ptr<ConditionalGenerator> make_generator(const std::string &name);

// Latents uniform in [-range, range]^latent_dim, one patch per latent; PCA of the extracted
// features with a readout fitted back to the latents.
PcaModel calibrate_pca(const ConditionalGenerator &generator, const FeatureExtractor &extractor, int corpus_size,
                       int pca_dim, std::size_t latent_dim, std::uint64_t seed, int patch_size = kDefaultPatchSize,
                       double range = 1.0);

std::string sha256_hex(const std::string &bytes);
std::string sha256_file(const std::string &path);

struct PipelineResult {
    std::string output_dir;
    std::vector<std::string> artifacts; // relative paths, sorted
};

// field -> pca -> stitch -> fuse -> splat -> eval, then manifest.json. On failure writes
// error.json and throws StageError.
PipelineResult run_pipeline(const PipelineConfig &config);

} // namespace fractalsea
