#pragma once

#include "fractalsea/image.hpp"
#include "fractalsea/terrain.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fractalsea {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

double sigmoid(double x);
// Inverse of sigmoid; 0 and 1 map to -inf and +inf.
double logit(double p);

struct Gaussian {
    Vec3 position{};
    Vec3 log_scale{};                         // scale = exp(log_scale)
    std::array<double, 4> rotation{1, 0, 0, 0}; // unit quaternion (w, x, y, z)
    double opacity_logit = 0.0;
    Vec3 color_logit{};

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 color() const { return {sigmoid(color_logit[0]), sigmoid(color_logit[1]), sigmoid(color_logit[2])}; }
    void set_opacity(double a) { opacity_logit = logit(a); }
    void set_color(const Vec3 &c) {
        for (int k = 0; k < 3; ++k) color_logit[k] = logit(c[k]);
    }
    void set_isotropic_scale(double s);
    // R diag(scale^2) R^T.
    Mat3 covariance() const;
};

struct GaussianCloud {
    std::vector<Gaussian> gaussians;
    bool positions_frozen = true;
};

struct Camera {
    enum class Model { Orthographic, Pinhole };
    Model model = Model::Orthographic;
    int width = 0, height = 0;
    // Pinhole: focal lengths in pixels. Orthographic: pixels per world unit.
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; // world -> camera, orthonormal
    Vec3 translation{};                               // x_cam = R x_world + t

    void validate() const;

    // Looks straight down the world -z axis from `height_above` units above z = 0; world (x, y)
    // maps to pixel (x, y) * pixels_per_unit, matching the map raster layout.
    static Camera top_down(int width, int height, double pixels_per_unit = 1.0, double height_above = 1000.0);
};

struct RenderSettings {
    Vec3 background{0.0, 0.0, 0.0};
    double covariance_dilation = 0.3; // added to the projected covariance diagonal, pixels^2
    double cutoff_sigma = 3.0;        // footprint truncated at this Mahalanobis radius
    unsigned workers = 1;             // pixel rows rendered concurrently; output does not depend on it
};

// One Gaussian as seen by a camera.
struct ProjectedGaussian {
    std::uint32_t index = 0;
    double depth = 0.0;
    double mean_x = 0.0, mean_y = 0.0;
    double conic[3] = {0, 0, 0}; // inverse 2D covariance (a, b, c) for [[a, b], [b, c]]
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive pixel bounding box
};

// Projects and depth-sorts the cloud (ascending depth, ties by Gaussian index).
std::vector<ProjectedGaussian> project_cloud(const GaussianCloud &cloud, const Camera &camera,
                                             const RenderSettings &settings = {});

struct CompositeTerm {
    std::uint32_t index = 0;
    double falloff = 0.0;         // exp(-0.5 d^T Sigma^-1 d)
    double alpha = 0.0;           // effective opacity alpha_i * falloff
    double transmittance = 0.0;   // prod_{j<i} (1 - alpha_j)
};

struct PixelComposite {
    std::vector<CompositeTerm> terms; // front to back
    double residual_transmittance = 1.0;
    Vec3 color{};
};

PixelComposite composite_pixel(const GaussianCloud &cloud, const std::vector<ProjectedGaussian> &projected, int x, int y,
                               const RenderSettings &settings = {});

RgbImage render(const GaussianCloud &cloud, const Camera &camera, const RenderSettings &settings = {});

struct AppearanceGradient {
    std::vector<double> opacity;            // d/d alpha_i
    std::vector<Vec3> color;                // d/d c_i
    std::vector<double> opacity_logit;      // d/d opacity_logit_i
    std::vector<Vec3> color_logit;          // d/d color_logit_i
};

// Gradient of sum_{pixels, channels} upstream * render with respect to appearance parameters.
AppearanceGradient backprop_render(const GaussianCloud &cloud, const Camera &camera, const RgbImage &upstream,
                                   const RenderSettings &settings = {});

// Linear beta schedule, beta from 1e-4 to 2e-2 over 1000 steps; alpha_bar(t) = prod_{s<=t} (1 - beta_s).
class NoiseSchedule {
public:
    explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);
    int steps() const { return static_cast<int>(alpha_bar_.size()); }
    double alpha_bar(int t) const;

private:
    std::vector<double> alpha_bar_;
};

class DenoiserOracle {
public:
    virtual ~DenoiserOracle() = default;
    virtual RgbImage predict_noise(const RgbImage &noisy, int t) const = 0;
    virtual const NoiseSchedule &schedule() const = 0;
};

// Knows the clean image x0: eps_hat = (x_t - sqrt(ab) x0) / sqrt(1 - ab).
class GroundTruthDenoiser final : public DenoiserOracle {
public:
    explicit GroundTruthDenoiser(RgbImage target, NoiseSchedule schedule = NoiseSchedule());
    RgbImage predict_noise(const RgbImage &noisy, int t) const override;
    const NoiseSchedule &schedule() const override { return schedule_; }
    const RgbImage &target() const { return target_; }

private:
    RgbImage target_;
    NoiseSchedule schedule_;
};

using WeightFn = std::function<double(int t, const NoiseSchedule &)>;
inline double constant_weight(int, const NoiseSchedule &) { return 1.0; }

struct SdsResult {
    AppearanceGradient gradient;
    RgbImage render;
    RgbImage residual; // w(t) (eps_hat - eps)
    double mean_squared_residual = 0.0;
};

// The seeded noise eps added for the SDS step: standard normal per (t, x, y, channel).
double sds_noise(std::uint64_t seed, int t, int x, int y, int channel);

SdsResult sds_gradient(const GaussianCloud &cloud, const Camera &camera, const DenoiserOracle &oracle, int t,
                       const WeightFn &weight, std::uint64_t noise_seed, const RenderSettings &settings = {});

struct RefineOptions {
    int iterations = 100;
    double step_size = 0.5;
    int t_min = 20;  // inclusive timestep range sampled uniformly each iteration
    int t_max = 980;
    std::uint64_t seed = 0;
    WeightFn weight = constant_weight;
    RenderSettings render{};
    // Called after every update with the iteration index and the current cloud.
    std::function<void(int, const GaussianCloud &)> on_iteration;
};

struct RefineResult {
    GaussianCloud cloud;
    std::vector<double> loss_trace; // mean squared residual per iteration, averaged over cameras
};

// Plain gradient descent on opacity and colour logits; positions, scales and rotations are untouched.
RefineResult refine(const GaussianCloud &cloud, const std::vector<Camera> &cameras, const DenoiserOracle &oracle,
                    const RefineOptions &options);

// One Gaussian per point, positions frozen. A non-positive init_scale selects the mean
// nearest-neighbour distance (1.0 for a single point).
GaussianCloud init_from_pointcloud(const PointCloud &pc, double init_scale = 0.0, double init_opacity = 0.8);
double mean_nearest_neighbor_distance(const std::vector<Vec3> &points);

// PLY with properties x y z scale_0..2 (log) rot_0..3 opacity (logit) color_0..2 (logit).
void save_cloud(const GaussianCloud &cloud, const std::string &path);
GaussianCloud load_cloud(const std::string &path);

std::string camera_to_json(const Camera &camera);
Camera camera_from_json(const std::string &text);
void save_camera(const Camera &camera, const std::string &path);
Camera load_camera(const std::string &path);

} // namespace fractalsea
