#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fractalsea {

using LatentVector = std::vector<double>;

struct FractalParams {
    int levels = 4;        // grid side = 2^levels + 1
    double scale_s = 0.6;  // initial noise amplitude
    double decay = 0.5;    // amplitude multiplier per recursion level
    std::uint64_t seed = 0;
    // Top-left, top-right, bottom-left, bottom-right.
    std::array<LatentVector, 4> corner_latents{LatentVector{0.0, 0.0}, LatentVector{0.0, 0.0},
                                               LatentVector{0.0, 0.0}, LatentVector{0.0, 0.0}};
    double cell_extent = 1.0; // world units per grid cell

    std::size_t dim() const { return corner_latents[0].size(); }
    void validate() const;
};

inline constexpr int kMaxFieldLevels = 14;

// Square grid of latent vectors produced by diamond-square subdivision.
// Vertex (x, y): x is the column, y the row; (0, 0) is the top-left corner.
class LatentField {
public:
    LatentField(FractalParams params, std::vector<double> values);

    const FractalParams &params() const noexcept { return params_; }
    int resolution() const noexcept { return resolution_; }
    std::size_t dim() const noexcept { return dim_; }
    double cell_extent() const noexcept { return params_.cell_extent; }
    // Side length of the domain in world units.
    double extent() const noexcept { return params_.cell_extent * (resolution_ - 1); }

    std::span<const double> at(int x, int y) const;
    std::span<const double> values() const noexcept { return values_; }

private:
    FractalParams params_;
    int resolution_;
    std::size_t dim_;
    std::vector<double> values_;
};

// Noise amplitude used at recursion level k: scale_s * decay^k.
double level_scale(const FractalParams &params, int level);

LatentField generate_field(const FractalParams &params, unsigned workers = 1);

// Bilinear query in world coordinates, x along columns and y along rows.
LatentVector sample_latent(const LatentField &field, double x, double y);
// Same query with (u, v) in [0, 1]^2 over the whole domain.
LatentVector sample_latent_normalized(const LatentField &field, double u, double v);

namespace detail {

// Mutable working grid used by the two subdivision steps. Unset vertices hold NaN.
struct FieldGrid {
    int resolution = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    FieldGrid(int resolution, std::size_t dim);
    double *at(int x, int y) { return values.data() + (static_cast<std::size_t>(y) * resolution + x) * dim; }
    const double *at(int x, int y) const {
        return values.data() + (static_cast<std::size_t>(y) * resolution + x) * dim;
    }
    bool populated(int x, int y) const;
};

// Recursion level k works on squares of side 2^(levels-k).
void diamond_step(FieldGrid &grid, int level, int levels, double scale, std::uint64_t seed,
                  unsigned workers = 1);
void square_step(FieldGrid &grid, int level, int levels, double scale, std::uint64_t seed,
                 unsigned workers = 1);

// The standard normal draw attached to one vertex component.
double vertex_noise(std::uint64_t seed, int level, int x, int y, std::size_t component);

} // namespace detail

// CSV serialization. Line 1: key=value header; line 2: corners; then one row
// per vertex in row-major order: x,y,v0..v{d-1}. Values use 17 significant digits.
void write_field_csv(const LatentField &field, std::ostream &out);
LatentField read_field_csv(std::istream &in);
void save_field(const LatentField &field, const std::string &path);
LatentField load_field(const std::string &path);

// Corner file: four CSV rows (TL, TR, BL, BR), each with d values.
std::array<LatentVector, 4> load_corners(const std::string &path);

} // namespace fractalsea
