#include "fractalsea/latent_field.hpp"

#include "fractalsea/error.hpp"
#include "fractalsea/parallel.hpp"
#include "fractalsea/rng.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fractalsea {

namespace {

bool all_finite(const LatentVector &v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

void FractalParams::validate() const {
    if (levels < 0) throw DomainError("levels must be >= 0");
    if (levels > kMaxFieldLevels)
        throw DomainError("levels " + std::to_string(levels) + " exceeds the limit of " +
                          std::to_string(kMaxFieldLevels));
    if (!std::isfinite(scale_s) || scale_s < 0.0) throw DomainError("scale must be finite and >= 0");
    if (!std::isfinite(decay) || decay <= 0.0 || decay > 1.0) throw DomainError("decay must lie in (0, 1]");
    if (!std::isfinite(cell_extent) || cell_extent <= 0.0) throw DomainError("cell extent must be > 0");
    const std::size_t d = corner_latents[0].size();
    if (d == 0) throw DomainError("latent dimension must be >= 1");
    for (const auto &c : corner_latents) {
        if (c.size() != d) throw DomainError("corner latents differ in dimension");
        if (!all_finite(c)) throw DomainError("corner latents must be finite");
    }
}

LatentField::LatentField(FractalParams params, std::vector<double> values)
    : params_(std::move(params)), resolution_((1 << params_.levels) + 1), dim_(params_.dim()),
      values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(resolution_) * resolution_ * dim_)
        throw DomainError("latent field value count does not match resolution and dimension");
}

std::span<const double> LatentField::at(int x, int y) const {
    if (x < 0 || y < 0 || x >= resolution_ || y >= resolution_)
        throw DomainError("vertex (" + std::to_string(x) + ", " + std::to_string(y) + ") outside field");
    return {values_.data() + (static_cast<std::size_t>(y) * resolution_ + x) * dim_, dim_};
}

double level_scale(const FractalParams &params, int level) {
    return params.scale_s * std::pow(params.decay, level);
}

namespace detail {

FieldGrid::FieldGrid(int resolution_, std::size_t dim_)
    : resolution(resolution_), dim(dim_),
      values(static_cast<std::size_t>(resolution_) * resolution_ * dim_,
             std::numeric_limits<double>::quiet_NaN()) {}

bool FieldGrid::populated(int x, int y) const { return !std::isnan(at(x, y)[0]); }

double vertex_noise(std::uint64_t seed, int level, int x, int y, std::size_t component) {
    return rng::normal(seed, static_cast<std::uint64_t>(level), static_cast<std::uint64_t>(x),
                       static_cast<std::uint64_t>(y), component);
}

namespace {

void set_center(FieldGrid &grid, int cx, int cy, const int (*nbr)[2], int count, int level,
                double scale, std::uint64_t seed) {
    double *dst = grid.at(cx, cy);
    for (std::size_t k = 0; k < grid.dim; ++k) {
        double sum = 0.0;
        for (int i = 0; i < count; ++i) sum += grid.at(nbr[i][0], nbr[i][1])[k];
        double value = sum / count;
        if (scale != 0.0) value += scale * vertex_noise(seed, level, cx, cy, k);
        dst[k] = value;
    }
}

} // namespace

void diamond_step(FieldGrid &grid, int level, int levels, double scale, std::uint64_t seed,
                  unsigned workers) {
    const int step = 1 << (levels - level);
    const int half = step / 2;
    const int squares = (grid.resolution - 1) / step;
    parallel_for(static_cast<std::size_t>(squares) * squares, workers, [&](std::size_t idx) {
        const int x0 = static_cast<int>(idx % squares) * step;
        const int y0 = static_cast<int>(idx / squares) * step;
        const int corners[4][2] = {{x0, y0}, {x0 + step, y0}, {x0, y0 + step}, {x0 + step, y0 + step}};
        for (const auto &c : corners) {
            assert(grid.populated(c[0], c[1]) && "diamond step on an unpopulated corner");
            if (!grid.populated(c[0], c[1])) std::abort();
        }
        set_center(grid, x0 + half, y0 + half, corners, 4, level, scale, seed);
    });
}

void square_step(FieldGrid &grid, int level, int levels, double scale, std::uint64_t seed,
                 unsigned workers) {
    const int step = 1 << (levels - level);
    const int half = step / 2;
    const int n = grid.resolution - 1;
    // Diamond centers are the vertices at multiples of `half` whose coordinate sum is an odd multiple.
    const int rows = n / half + 1;
    parallel_for(static_cast<std::size_t>(rows), workers, [&](std::size_t row) {
        const int y = static_cast<int>(row) * half;
        const int start = ((y / half) % 2 == 0) ? half : 0;
        for (int x = start; x <= n; x += step) {
            int nbr[4][2];
            int count = 0;
            const bool on_vertical_edge = (x == 0 || x == n);
            const bool on_horizontal_edge = (y == 0 || y == n);
            if (on_horizontal_edge) {
                // Two collinear neighbours along the boundary.
                nbr[count][0] = x - half, nbr[count][1] = y, ++count;
                nbr[count][0] = x + half, nbr[count][1] = y, ++count;
            } else if (on_vertical_edge) {
                nbr[count][0] = x, nbr[count][1] = y - half, ++count;
                nbr[count][0] = x, nbr[count][1] = y + half, ++count;
            } else {
                nbr[count][0] = x - half, nbr[count][1] = y, ++count;
                nbr[count][0] = x + half, nbr[count][1] = y, ++count;
                nbr[count][0] = x, nbr[count][1] = y - half, ++count;
                nbr[count][0] = x, nbr[count][1] = y + half, ++count;
            }
            for (int i = 0; i < count; ++i) {
                assert(grid.populated(nbr[i][0], nbr[i][1]) && "square step on an unpopulated vertex");
                if (!grid.populated(nbr[i][0], nbr[i][1])) std::abort();
            }
            set_center(grid, x, y, nbr, count, level, scale, seed);
        }
    });
}

} // namespace detail

LatentField generate_field(const FractalParams &params, unsigned workers) {
    params.validate();
    const int res = (1 << params.levels) + 1;
    const int n = res - 1;
    detail::FieldGrid grid(res, params.dim());
    const auto put = [&](int x, int y, const LatentVector &v) {
        std::copy(v.begin(), v.end(), grid.at(x, y));
    };
    put(0, 0, params.corner_latents[0]);
    put(n, 0, params.corner_latents[1]);
    put(0, n, params.corner_latents[2]);
    put(n, n, params.corner_latents[3]);
    for (int level = 0; level < params.levels; ++level) {
        const double s = level_scale(params, level);
        detail::diamond_step(grid, level, params.levels, s, params.seed, workers);
        detail::square_step(grid, level, params.levels, s, params.seed, workers);
    }
    return LatentField(params, std::move(grid.values));
}

LatentVector sample_latent(const LatentField &field, double x, double y) {
    const double extent = field.extent();
    if (!(x >= 0.0 && y >= 0.0 && x <= extent && y <= extent))
        throw DomainError("latent query outside field extent");
    const int n = field.resolution() - 1;
    const double gx = x / field.cell_extent();
    const double gy = y / field.cell_extent();
    const int x0 = std::min(static_cast<int>(std::floor(gx)), std::max(n - 1, 0));
    const int y0 = std::min(static_cast<int>(std::floor(gy)), std::max(n - 1, 0));
    const double fx = gx - x0;
    const double fy = gy - y0;
    LatentVector out(field.dim());
    if (n == 0) {
        auto v = field.at(0, 0);
        return LatentVector(v.begin(), v.end());
    }
    const auto a = field.at(x0, y0);
    const auto b = field.at(x0 + 1, y0);
    const auto c = field.at(x0, y0 + 1);
    const auto d = field.at(x0 + 1, y0 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        // Exact vertex hits return stored values without round-off.
        if (fx == 0.0 && fy == 0.0) out[k] = a[k];
        else if (fx == 1.0 && fy == 0.0) out[k] = b[k];
        else if (fx == 0.0 && fy == 1.0) out[k] = c[k];
        else if (fx == 1.0 && fy == 1.0) out[k] = d[k];
        else out[k] = (1 - fx) * (1 - fy) * a[k] + fx * (1 - fy) * b[k] + (1 - fx) * fy * c[k] + fx * fy * d[k];
    }
    return out;
}

LatentVector sample_latent_normalized(const LatentField &field, double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
        throw DomainError("normalized latent query outside [0, 1]");
    return sample_latent(field, std::min(u * field.extent(), field.extent()),
                         std::min(v * field.extent(), field.extent()));
}

// --- serialization --------------------------------------------------------------------------

namespace {

void write_vec(std::ostream &out, const LatentVector &v) {
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? ";" : "") << v[k];
}

LatentVector parse_vec(const std::string &s, char sep) {
    LatentVector v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size() && tok.find_first_not_of(" \t\r", used) != std::string::npos)
                throw std::invalid_argument(tok);
        } catch (const std::exception &) {
            throw IoError("malformed number '" + tok + "'");
        }
    }
    return v;
}

} // namespace

void write_field_csv(const LatentField &field, std::ostream &out) {
    const auto &p = field.params();
    out << std::setprecision(17);
    out << "levels=" << p.levels << ",dim=" << field.dim() << ",scale=" << p.scale_s << ",decay=" << p.decay
        << ",seed=" << p.seed << ",cell_extent=" << p.cell_extent << "\n";
    out << "corners";
    for (const auto &c : p.corner_latents) {
        out << ",";
        write_vec(out, c);
    }
    out << "\n";
    const int res = field.resolution();
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            out << x << "," << y;
            for (double v : field.at(x, y)) out << "," << v;
            out << "\n";
        }
}

LatentField read_field_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("field file is empty");
    FractalParams p;
    std::size_t dim = 0;
    {
        std::stringstream ss(line);
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw IoError("malformed field header entry '" + kv + "'");
            const std::string key = kv.substr(0, eq);
            const std::string val = kv.substr(eq + 1);
            try {
                if (key == "levels") p.levels = std::stoi(val);
                else if (key == "dim") dim = std::stoul(val);
                else if (key == "scale") p.scale_s = std::stod(val);
                else if (key == "decay") p.decay = std::stod(val);
                else if (key == "seed") p.seed = std::stoull(val);
                else if (key == "cell_extent") p.cell_extent = std::stod(val);
                else throw IoError("unknown field header key '" + key + "'");
            } catch (const IoError &) {
                throw;
            } catch (const std::exception &) {
                throw IoError("malformed value for '" + key + "'");
            }
        }
    }
    if (!std::getline(in, line) || line.rfind("corners,", 0) != 0) throw IoError("missing corners line");
    {
        std::stringstream ss(line.substr(8));
        std::string tok;
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ss, tok, ',')) throw IoError("corners line needs four latents");
            p.corner_latents[i] = parse_vec(tok, ';');
        }
    }
    p.validate();
    if (p.dim() != dim) throw IoError("corner dimension disagrees with header");
    const int res = (1 << p.levels) + 1;
    std::vector<double> values(static_cast<std::size_t>(res) * res * dim);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            if (!std::getline(in, line)) throw IoError("field file truncated");
            const auto v = parse_vec(line, ',');
            if (v.size() != dim + 2 || static_cast<int>(v[0]) != x || static_cast<int>(v[1]) != y)
                throw IoError("unexpected vertex row '" + line + "'");
            std::copy(v.begin() + 2, v.end(), values.begin() + (static_cast<std::size_t>(y) * res + x) * dim);
        }
    return LatentField(p, std::move(values));
}

void save_field(const LatentField &field, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_field_csv(field, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

LatentField load_field(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return read_field_csv(in);
    } catch (const IoError &e) {
        throw IoError(path + ": " + e.what());
    }
}

std::array<LatentVector, 4> load_corners(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::array<LatentVector, 4> corners;
    std::string line;
    int i = 0;
    while (i < 4 && std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        corners[i++] = parse_vec(line, ',');
    }
    if (i != 4) throw IoError(path + ": expected four corner rows (TL, TR, BL, BR)");
    return corners;
}

} // namespace fractalsea
