#include "fractalsea/splat.hpp"

#include "fractalsea/error.hpp"
#include "fractalsea/parallel.hpp"
#include "fractalsea/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace fractalsea {

using nlohmann::json;

namespace {

constexpr int kTile = 16;

Mat3 multiply(const Mat3 &a, const Mat3 &b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

Mat3 transpose(const Mat3 &a) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
    return r;
}

Mat3 quaternion_matrix(std::array<double, 4> q) {
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(n > 0)) throw DomainError("zero quaternion");
    for (double &v : q) v /= n;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return Mat3{{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                 {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                 {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

struct Binned {
    std::vector<ProjectedGaussian> projected;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> bins; // indices into projected, front to back
};

Binned bin_cloud(const GaussianCloud &cloud, const Camera &camera, const RenderSettings &settings) {
    Binned b;
    b.projected = project_cloud(cloud, camera, settings);
    b.tiles_x = (camera.width + kTile - 1) / kTile;
    b.tiles_y = (camera.height + kTile - 1) / kTile;
    b.bins.resize(static_cast<std::size_t>(b.tiles_x) * b.tiles_y);
    for (std::uint32_t k = 0; k < b.projected.size(); ++k) {
        const auto &p = b.projected[k];
        for (int ty = p.y0 / kTile; ty <= p.y1 / kTile; ++ty)
            for (int tx = p.x0 / kTile; tx <= p.x1 / kTile; ++tx)
                b.bins[static_cast<std::size_t>(ty) * b.tiles_x + tx].push_back(k);
    }
    return b;
}

// Front-to-back terms for one pixel from a depth-sorted candidate list.
template <typename Range>
void gather_terms(const GaussianCloud &cloud, const std::vector<ProjectedGaussian> &projected, const Range &candidates,
                  int x, int y, const RenderSettings &settings, std::vector<CompositeTerm> &terms,
                  double &transmittance) {
    const double cutoff2 = settings.cutoff_sigma * settings.cutoff_sigma;
    terms.clear();
    transmittance = 1.0;
    for (std::uint32_t k : candidates) {
        const auto &p = projected[k];
        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
        const double dx = x - p.mean_x, dy = y - p.mean_y;
        const double power = p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
        if (power > cutoff2) continue;
        CompositeTerm term;
        term.index = p.index;
        term.falloff = std::exp(-0.5 * power);
        term.alpha = cloud.gaussians[p.index].opacity() * term.falloff;
        term.transmittance = transmittance;
        terms.push_back(term);
        transmittance *= 1.0 - term.alpha;
    }
}

Vec3 shade(const GaussianCloud &cloud, const std::vector<CompositeTerm> &terms, double transmittance,
           const RenderSettings &settings) {
    Vec3 c{};
    for (const auto &t : terms) {
        const Vec3 col = cloud.gaussians[t.index].color();
        for (int k = 0; k < 3; ++k) c[k] += col[k] * t.alpha * t.transmittance;
    }
    for (int k = 0; k < 3; ++k) c[k] += settings.background[k] * transmittance;
    return c;
}

struct AllIndices {
    std::size_t n;
    struct It {
        std::uint32_t i;
        std::uint32_t operator*() const { return i; }
        It &operator++() {
            ++i;
            return *this;
        }
        bool operator!=(const It &o) const { return i != o.i; }
    };
    It begin() const { return {0}; }
    It end() const { return {static_cast<std::uint32_t>(n)}; }
};

void check_image(const RgbImage &img, int w, int h, const char *what) {
    if (img.width != w || img.height != h || img.rgb.size() != static_cast<std::size_t>(w) * h * 3)
        throw DomainError(std::string(what) + " dimensions do not match the camera");
}

} // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("logit argument outside [0, 1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::log(p / (1.0 - p));
}

void Gaussian::set_isotropic_scale(double s) {
    if (!(s > 0) || !std::isfinite(s)) throw DomainError("scale must be positive");
    log_scale = {std::log(s), std::log(s), std::log(s)};
}

Mat3 Gaussian::covariance() const {
    const Mat3 r = quaternion_matrix(rotation);
    Mat3 rs{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rs[i][j] = r[i][j] * std::exp(2.0 * log_scale[j]);
    return multiply(rs, transpose(r));
}

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw DomainError("camera image dimensions must be positive");
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy))
        throw DomainError("camera intrinsics must be finite");
    if (model == Model::Pinhole ? !(fx > 0 && fy > 0) : (fx == 0 || fy == 0))
        throw DomainError("camera focal scale must be nonzero (positive for pinhole)");
    const Mat3 rtr = multiply(transpose(rotation), rotation);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)) > 1e-9)
                throw DomainError("camera rotation is not orthonormal");
    for (double t : translation)
        if (!std::isfinite(t)) throw DomainError("camera translation must be finite");
}

Camera Camera::top_down(int width, int height, double pixels_per_unit, double height_above) {
    Camera c;
    c.model = Model::Orthographic;
    c.width = width;
    c.height = height;
    c.fx = c.fy = pixels_per_unit;
    c.rotation = Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, -1}}};
    c.translation = {0.0, 0.0, height_above};
    c.validate();
    return c;
}

std::vector<ProjectedGaussian> project_cloud(const GaussianCloud &cloud, const Camera &camera,
                                             const RenderSettings &settings) {
    camera.validate();
    const Mat3 &R = camera.rotation;
    const bool pinhole = camera.model == Camera::Model::Pinhole;
    std::vector<ProjectedGaussian> out;
    out.reserve(cloud.gaussians.size());
    for (std::uint32_t i = 0; i < cloud.gaussians.size(); ++i) {
        const Gaussian &g = cloud.gaussians[i];
        Vec3 m{};
        for (int r = 0; r < 3; ++r)
            m[r] = R[r][0] * g.position[0] + R[r][1] * g.position[1] + R[r][2] * g.position[2] + camera.translation[r];
        double J[2][3] = {{camera.fx, 0, 0}, {0, camera.fy, 0}};
        ProjectedGaussian p;
        p.index = i;
        p.depth = m[2];
        if (pinhole) {
            if (!(m[2] > 1e-6)) continue;
            const double z = m[2];
            p.mean_x = camera.fx * m[0] / z + camera.cx;
            p.mean_y = camera.fy * m[1] / z + camera.cy;
            J[0][0] = camera.fx / z;
            J[0][2] = -camera.fx * m[0] / (z * z);
            J[1][1] = camera.fy / z;
            J[1][2] = -camera.fy * m[1] / (z * z);
        } else {
            p.mean_x = camera.fx * m[0] + camera.cx;
            p.mean_y = camera.fy * m[1] + camera.cy;
        }
        const Mat3 cov_cam = multiply(multiply(R, g.covariance()), transpose(R));
        double JS[2][3] = {};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 3; ++b)
                for (int k = 0; k < 3; ++k) JS[a][b] += J[a][k] * cov_cam[k][b];
        double s[2][2] = {};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int k = 0; k < 3; ++k) s[a][b] += JS[a][k] * J[b][k];
        const double sa = s[0][0] + settings.covariance_dilation;
        const double sb = 0.5 * (s[0][1] + s[1][0]);
        const double sc = s[1][1] + settings.covariance_dilation;
        const double det = sa * sc - sb * sb;
        if (!(det > 0) || !std::isfinite(det)) continue;
        p.conic[0] = sc / det;
        p.conic[1] = -sb / det;
        p.conic[2] = sa / det;
        const double mid = 0.5 * (sa + sc);
        const double lambda = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = settings.cutoff_sigma * std::sqrt(lambda);
        const double fx0 = std::ceil(p.mean_x - radius), fx1 = std::floor(p.mean_x + radius);
        const double fy0 = std::ceil(p.mean_y - radius), fy1 = std::floor(p.mean_y + radius);
        if (!std::isfinite(fx0) || !std::isfinite(fy0) || !std::isfinite(fx1) || !std::isfinite(fy1)) continue;
        if (fx1 < 0 || fy1 < 0 || fx0 > camera.width - 1 || fy0 > camera.height - 1) continue;
        p.x0 = static_cast<int>(std::max(0.0, fx0));
        p.x1 = static_cast<int>(std::min<double>(camera.width - 1, fx1));
        p.y0 = static_cast<int>(std::max(0.0, fy0));
        p.y1 = static_cast<int>(std::min<double>(camera.height - 1, fy1));
        if (p.x0 > p.x1 || p.y0 > p.y1) continue;
        out.push_back(p);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ProjectedGaussian &a, const ProjectedGaussian &b) { return a.depth < b.depth; });
    return out;
}

PixelComposite composite_pixel(const GaussianCloud &cloud, const std::vector<ProjectedGaussian> &projected, int x, int y,
                               const RenderSettings &settings) {
    PixelComposite pc;
    gather_terms(cloud, projected, AllIndices{projected.size()}, x, y, settings, pc.terms, pc.residual_transmittance);
    pc.color = shade(cloud, pc.terms, pc.residual_transmittance, settings);
    return pc;
}

RgbImage render(const GaussianCloud &cloud, const Camera &camera, const RenderSettings &settings) {
    const Binned b = bin_cloud(cloud, camera, settings);
    RgbImage img(camera.width, camera.height);
    parallel_for(static_cast<std::size_t>(camera.height), settings.workers, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        std::vector<CompositeTerm> terms;
        double T = 1.0;
        for (int x = 0; x < camera.width; ++x) {
            const auto &bin = b.bins[static_cast<std::size_t>(y / kTile) * b.tiles_x + x / kTile];
            gather_terms(cloud, b.projected, bin, x, y, settings, terms, T);
            const Vec3 c = shade(cloud, terms, T, settings);
            for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
        }
    });
    return img;
}

AppearanceGradient backprop_render(const GaussianCloud &cloud, const Camera &camera, const RgbImage &upstream,
                                   const RenderSettings &settings) {
    check_image(upstream, camera.width, camera.height, "upstream gradient");
    const Binned b = bin_cloud(cloud, camera, settings);
    const std::size_t n = cloud.gaussians.size();
    AppearanceGradient g;
    g.opacity.assign(n, 0.0);
    g.color.assign(n, Vec3{});
    std::vector<Vec3> colors(n);
    for (std::size_t i = 0; i < n; ++i) colors[i] = cloud.gaussians[i].color();

    std::vector<CompositeTerm> terms;
    double T = 1.0;
    // Raster order, single writer: the reduction order is fixed.
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            const double up[3] = {upstream.at(x, y, 0), upstream.at(x, y, 1), upstream.at(x, y, 2)};
            if (up[0] == 0.0 && up[1] == 0.0 && up[2] == 0.0) continue;
            const auto &bin = b.bins[static_cast<std::size_t>(y / kTile) * b.tiles_x + x / kTile];
            gather_terms(cloud, b.projected, bin, x, y, settings, terms, T);
            // behind = colour composited behind term i, normalized by its transmittance.
            Vec3 behind = settings.background;
            for (std::size_t k = terms.size(); k-- > 0;) {
                const CompositeTerm &t = terms[k];
                const Vec3 &c = colors[t.index];
                double d_alpha = 0.0;
                for (int ch = 0; ch < 3; ++ch) {
                    g.color[t.index][ch] += up[ch] * t.alpha * t.transmittance;
                    d_alpha += up[ch] * t.transmittance * (c[ch] - behind[ch]);
                }
                g.opacity[t.index] += d_alpha * t.falloff;
                for (int ch = 0; ch < 3; ++ch) behind[ch] = c[ch] * t.alpha + (1.0 - t.alpha) * behind[ch];
            }
        }

    g.opacity_logit.resize(n);
    g.color_logit.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = cloud.gaussians[i].opacity();
        g.opacity_logit[i] = g.opacity[i] * a * (1.0 - a);
        for (int ch = 0; ch < 3; ++ch) g.color_logit[i][ch] = g.color[i][ch] * colors[i][ch] * (1.0 - colors[i][ch]);
    }
    return g;
}

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw DomainError("schedule needs at least one step");
    if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end)) throw DomainError("invalid beta range");
    alpha_bar_.resize(static_cast<std::size_t>(steps));
    double prod = 1.0;
    for (int s = 0; s < steps; ++s) {
        const double beta = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * s / (steps - 1);
        prod *= 1.0 - beta;
        alpha_bar_[static_cast<std::size_t>(s)] = prod;
    }
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t >= steps()) throw DomainError("timestep " + std::to_string(t) + " outside schedule");
    return alpha_bar_[static_cast<std::size_t>(t)];
}

GroundTruthDenoiser::GroundTruthDenoiser(RgbImage target, NoiseSchedule schedule)
    : target_(std::move(target)), schedule_(std::move(schedule)) {}

RgbImage GroundTruthDenoiser::predict_noise(const RgbImage &noisy, int t) const {
    check_image(noisy, target_.width, target_.height, "noisy image");
    const double ab = schedule_.alpha_bar(t);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    RgbImage eps(noisy.width, noisy.height);
    for (std::size_t i = 0; i < eps.rgb.size(); ++i) eps.rgb[i] = (noisy.rgb[i] - sa * target_.rgb[i]) / sb;
    return eps;
}

double sds_noise(std::uint64_t seed, int t, int x, int y, int channel) {
    return rng::normal(seed, rng::as_key(t), rng::as_key(x), rng::as_key(y), rng::as_key(channel));
}

SdsResult sds_gradient(const GaussianCloud &cloud, const Camera &camera, const DenoiserOracle &oracle, int t,
                       const WeightFn &weight, std::uint64_t noise_seed, const RenderSettings &settings) {
    const NoiseSchedule &sched = oracle.schedule();
    const double ab = sched.alpha_bar(t);
    const double w = weight ? weight(t, sched) : 1.0;
    SdsResult r;
    r.render = render(cloud, camera, settings);
    RgbImage noise(camera.width, camera.height), noisy(camera.width, camera.height);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double e = sds_noise(noise_seed, t, x, y, c);
                noise.at(x, y, c) = e;
                noisy.at(x, y, c) = sa * r.render.at(x, y, c) + sb * e;
            }
    const RgbImage predicted = oracle.predict_noise(noisy, t);
    check_image(predicted, camera.width, camera.height, "predicted noise");
    r.residual = RgbImage(camera.width, camera.height);
    double sq = 0.0;
    for (std::size_t i = 0; i < noise.rgb.size(); ++i) {
        r.residual.rgb[i] = w * (predicted.rgb[i] - noise.rgb[i]);
        sq += r.residual.rgb[i] * r.residual.rgb[i];
    }
    r.mean_squared_residual = noise.rgb.empty() ? 0.0 : sq / static_cast<double>(noise.rgb.size());
    r.gradient = backprop_render(cloud, camera, r.residual, settings);
    return r;
}

RefineResult refine(const GaussianCloud &cloud, const std::vector<Camera> &cameras, const DenoiserOracle &oracle,
                    const RefineOptions &options) {
    if (options.iterations < 0) throw DomainError("iterations must be >= 0");
    if (!std::isfinite(options.step_size) || options.step_size < 0) throw DomainError("step size must be >= 0");
    const int steps = oracle.schedule().steps();
    if (options.t_min < 0 || options.t_max >= steps || options.t_min > options.t_max)
        throw DomainError("timestep range outside schedule");
    if (options.iterations > 0 && cameras.empty()) throw DomainError("refine needs at least one camera");
    for (const auto &cam : cameras) cam.validate();

    RefineResult result;
    result.cloud = cloud;
    const std::size_t n = cloud.gaussians.size();
    const int span = options.t_max - options.t_min + 1;
    for (int it = 0; it < options.iterations; ++it) {
        const double u = rng::uniform(options.seed, rng::as_key(it), 0x7453ULL);
        const int t = options.t_min + std::min(span - 1, static_cast<int>(u * span));
        std::vector<double> d_opacity(n, 0.0);
        std::vector<Vec3> d_color(n, Vec3{});
        double loss = 0.0;
        for (std::size_t c = 0; c < cameras.size(); ++c) {
            const std::uint64_t noise_seed = rng::hash_key(options.seed, {static_cast<std::uint64_t>(it), c});
            const SdsResult s = sds_gradient(result.cloud, cameras[c], oracle, t, options.weight, noise_seed,
                                             options.render);
            loss += s.mean_squared_residual;
            for (std::size_t i = 0; i < n; ++i) {
                d_opacity[i] += s.gradient.opacity_logit[i];
                for (int ch = 0; ch < 3; ++ch) d_color[i][ch] += s.gradient.color_logit[i][ch];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            Gaussian &g = result.cloud.gaussians[i];
            g.opacity_logit -= options.step_size * d_opacity[i];
            for (int ch = 0; ch < 3; ++ch) g.color_logit[ch] -= options.step_size * d_color[i][ch];
        }
        result.loss_trace.push_back(loss / static_cast<double>(cameras.size()));
        if (options.on_iteration) options.on_iteration(it, result.cloud);
    }
    return result;
}

double mean_nearest_neighbor_distance(const std::vector<Vec3> &points) {
    const std::size_t n = points.size();
    if (n < 2) return 0.0;
    Vec3 lo = points[0], hi = points[0];
    for (const auto &p : points)
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
    if (!(extent > 0)) return 0.0;
    // Points are typically a 2.5D sheet, so size cells for n points spread over a square.
    const double cell = extent / std::max(1.0, std::sqrt(static_cast<double>(n)));
    auto cell_of = [&](const Vec3 &p, int k) { return static_cast<std::int64_t>(std::floor((p[k] - lo[k]) / cell)); };
    auto key = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        return rng::hash_key(0, {rng::as_key(x), rng::as_key(y), rng::as_key(z)});
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
    for (std::uint32_t i = 0; i < n; ++i) grid[key(cell_of(points[i], 0), cell_of(points[i], 1), cell_of(points[i], 2))].push_back(i);
    const std::int64_t max_ring = static_cast<std::int64_t>(std::ceil(extent / cell)) + 1;

    double total = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const Vec3 &p = points[i];
        const std::int64_t cx = cell_of(p, 0), cy = cell_of(p, 1), cz = cell_of(p, 2);
        double best = std::numeric_limits<double>::infinity();
        for (std::int64_t r = 0; r <= max_ring; ++r) {
            for (std::int64_t dz = -r; dz <= r; ++dz)
                for (std::int64_t dy = -r; dy <= r; ++dy)
                    for (std::int64_t dx = -r; dx <= r; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                        const auto it = grid.find(key(cx + dx, cy + dy, cz + dz));
                        if (it == grid.end()) continue;
                        for (std::uint32_t j : it->second) {
                            if (j == i) continue;
                            const double ddx = points[j][0] - p[0], ddy = points[j][1] - p[1], ddz = points[j][2] - p[2];
                            best = std::min(best, std::sqrt(ddx * ddx + ddy * ddy + ddz * ddz));
                        }
                    }
            // Anything in ring r+1 or beyond is at least r cells away.
            if (best <= static_cast<double>(r) * cell) break;
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

GaussianCloud init_from_pointcloud(const PointCloud &pc, double init_scale, double init_opacity) {
    if (pc.points.empty()) throw DomainError("cannot initialize Gaussians from an empty point cloud");
    if (!(init_opacity >= 0.0 && init_opacity <= 1.0)) throw DomainError("initial opacity outside [0, 1]");
    double scale = init_scale;
    if (!(scale > 0)) {
        std::vector<Vec3> pts;
        pts.reserve(pc.points.size());
        for (const auto &p : pc.points) pts.push_back(p.position);
        scale = mean_nearest_neighbor_distance(pts);
        if (!(scale > 0)) scale = 1.0;
    }
    GaussianCloud cloud;
    cloud.positions_frozen = true;
    cloud.gaussians.reserve(pc.points.size());
    for (const auto &p : pc.points) {
        Gaussian g;
        g.position = p.position;
        g.set_isotropic_scale(scale);
        g.set_opacity(init_opacity);
        Vec3 c{};
        for (int k = 0; k < 3; ++k) c[k] = std::clamp(p.color[k], 0.0, 1.0);
        g.set_color(c);
        cloud.gaussians.push_back(g);
    }
    return cloud;
}

void save_cloud(const GaussianCloud &cloud, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "ply\nformat ascii 1.0\ncomment positions_frozen " << (cloud.positions_frozen ? 1 : 0) << "\n";
    out << "element vertex " << cloud.gaussians.size() << "\n";
    for (const char *name : {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
                             "opacity", "color_0", "color_1", "color_2"})
        out << "property double " << name << "\n";
    out << "end_header\n";
    char buf[32];
    for (const auto &g : cloud.gaussians) {
        std::string line;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            if (!line.empty()) line += ' ';
            line += buf;
        };
        for (double v : g.position) put(v);
        for (double v : g.log_scale) put(v);
        for (double v : g.rotation) put(v);
        put(g.opacity_logit);
        for (double v : g.color_logit) put(v);
        out << line << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

GaussianCloud load_cloud(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw IoError(path + ": not a PLY file");
    GaussianCloud cloud;
    std::size_t count = 0;
    std::vector<std::string> props;
    bool header_done = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw IoError(path + ": only ascii PLY is supported");
        } else if (word == "comment") {
            std::string tag;
            int v = 1;
            if (ls >> tag >> v && tag == "positions_frozen") cloud.positions_frozen = v != 0;
        } else if (word == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex") throw IoError(path + ": unexpected element " + name);
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(name);
        } else if (word == "end_header") {
            header_done = true;
            break;
        }
    }
    const std::vector<std::string> expected = {"x",     "y",     "z",     "scale_0", "scale_1", "scale_2", "rot_0",
                                               "rot_1", "rot_2", "rot_3", "opacity", "color_0", "color_1", "color_2"};
    if (!header_done || props != expected) throw IoError(path + ": not a Gaussian cloud PLY");
    cloud.gaussians.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw IoError(path + ": truncated vertex list");
        std::istringstream ls(line);
        double v[14];
        for (double &x : v) {
            std::string tok;
            if (!(ls >> tok)) throw IoError(path + ": short vertex row");
            x = std::strtod(tok.c_str(), nullptr);
        }
        Gaussian &g = cloud.gaussians[i];
        g.position = {v[0], v[1], v[2]};
        g.log_scale = {v[3], v[4], v[5]};
        g.rotation = {v[6], v[7], v[8], v[9]};
        g.opacity_logit = v[10];
        g.color_logit = {v[11], v[12], v[13]};
    }
    return cloud;
}

std::string camera_to_json(const Camera &c) {
    json j;
    j["model"] = c.model == Camera::Model::Pinhole ? "pinhole" : "orthographic";
    j["width"] = c.width;
    j["height"] = c.height;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    json r = json::array();
    for (const auto &row : c.rotation)
        for (double v : row) r.push_back(v);
    j["rotation"] = r;
    j["translation"] = c.translation;
    return j.dump(2);
}

Camera camera_from_json(const std::string &text) {
    try {
        const json j = json::parse(text);
        Camera c;
        const std::string model = j.value("model", "orthographic");
        if (model == "pinhole")
            c.model = Camera::Model::Pinhole;
        else if (model == "orthographic")
            c.model = Camera::Model::Orthographic;
        else
            throw ValidationError("unknown camera model '" + model + "'");
        c.width = j.at("width");
        c.height = j.at("height");
        c.fx = j.at("fx");
        c.fy = j.at("fy");
        c.cx = j.value("cx", 0.0);
        c.cy = j.value("cy", 0.0);
        if (j.contains("rotation")) {
            const auto r = j.at("rotation").get<std::vector<double>>();
            if (r.size() != 9) throw ValidationError("camera rotation needs 9 entries");
            for (int i = 0; i < 9; ++i) c.rotation[i / 3][i % 3] = r[static_cast<std::size_t>(i)];
        }
        if (j.contains("translation")) {
            const auto t = j.at("translation").get<std::vector<double>>();
            if (t.size() != 3) throw ValidationError("camera translation needs 3 entries");
            c.translation = {t[0], t[1], t[2]};
        }
        try {
            c.validate();
        } catch (const DomainError &e) {
            throw ValidationError(e.what());
        }
        return c;
    } catch (const json::exception &e) {
        throw ValidationError(std::string("invalid camera JSON: ") + e.what());
    }
}

void save_camera(const Camera &camera, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << camera_to_json(camera) << "\n";
}

Camera load_camera(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return camera_from_json(ss.str());
}

} // namespace fractalsea
