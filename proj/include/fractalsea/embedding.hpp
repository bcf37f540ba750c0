#pragma once

#include "fractalsea/image.hpp"
#include "fractalsea/latent_field.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fractalsea {

using FeatureVector = std::vector<double>;

// Deterministic feature extractor: same patch, same features.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual FeatureVector extract(const RgbdPatch &patch) const = 0;
    virtual std::size_t feature_dim() const = 0;
};

// Sixteen image statistics, all computed on [0, 1] values:
//   [0..3]   mean of R, G, B, depth
//   [4..7]   standard deviation of R, G, B, depth
//   [8..11]  gradient energy: luma horizontal, luma vertical, depth horizontal, depth vertical
//   [12..15] mean luma of the 2x2 blocks (TL, TR, BL, BR)
// Gradient energy is the mean squared forward difference with differences measured per
// 1/kGradientUnits of the patch side, so it does not depend on the patch resolution.
class ReferenceExtractor final : public FeatureExtractor {
public:
    static constexpr std::size_t kDim = 16;
    static constexpr double kGradientUnits = 10.0;

    FeatureVector extract(const RgbdPatch &patch) const override;
    std::size_t feature_dim() const override { return kDim; }
};

FeatureVector reference_extract(const RgbdPatch &patch);

// Affine map from projected PCA coordinates to generator latent coordinates:
// latent = weights * projected + offset. Fitted by least squares on a calibration corpus.
struct LatentReadout {
    std::vector<std::vector<double>> weights; // latent_dim rows x pca_dim columns
    std::vector<double> offset;               // latent_dim

    LatentVector apply(std::span<const double> projected) const;
};

struct PcaModel {
    std::vector<double> mean;                     // D
    std::vector<std::vector<double>> components;  // d rows of length D, orthonormal
    std::vector<double> explained_variance;       // d, descending
    bool rank_deficient = false;                  // fewer than d non-trivial directions
    std::optional<LatentReadout> readout;

    std::size_t input_dim() const { return mean.size(); }
    std::size_t latent_dim() const { return components.size(); }
};

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns eigenvalues in descending
// order with matching unit eigenvectors (as rows); ties keep the lower original index first.
struct SymmetricEigen {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
    int sweeps = 0;
};
SymmetricEigen jacobi_eigen(std::vector<std::vector<double>> matrix, int max_sweeps = 100);

// Sample covariance with divisor max(N - 1, 1).
std::vector<std::vector<double>> covariance(std::span<const FeatureVector> corpus, std::vector<double> *mean_out = nullptr);

PcaModel fit_pca(std::span<const FeatureVector> corpus, std::size_t d);
LatentVector project(const PcaModel &model, std::span<const double> feature);
// Inverse map for a latent: mean + components^T * latent.
FeatureVector reconstruct(const PcaModel &model, std::span<const double> latent);

// Projected coordinates, passed through the readout when one is attached.
LatentVector predict_latent(const PcaModel &model, std::span<const double> feature);

LatentReadout fit_readout(std::span<const LatentVector> projected, std::span<const LatentVector> targets);

// CSV with a label in the first column: one "mean" row, d "component" rows, one
// "variance" row, then optionally one "readout" row per latent dimension holding the
// weight row followed by the offset. A trailing "rank_deficient,1" row marks degenerate fits.
void write_pca_csv(const PcaModel &model, std::ostream &out);
PcaModel read_pca_csv(std::istream &in);
void save_pca(const PcaModel &model, const std::string &path);
PcaModel load_pca(const std::string &path);

} // namespace fractalsea
