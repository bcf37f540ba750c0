#include "fractalsea/embedding.hpp"

#include "fractalsea/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fractalsea {

// --- reference extractor --------------------------------------------------------------------

FeatureVector ReferenceExtractor::extract(const RgbdPatch &patch) const { return reference_extract(patch); }

FeatureVector reference_extract(const RgbdPatch &patch) {
    if (patch.empty()) throw DomainError("cannot extract features from an empty patch");
    const int w = patch.width(), h = patch.height();
    const double n = static_cast<double>(patch.pixel_count());
    FeatureVector f(ReferenceExtractor::kDim, 0.0);

    for (int ch = 0; ch < 4; ++ch) {
        const float *p = patch.plane(ch);
        double sum = 0.0;
        for (std::size_t i = 0; i < patch.pixel_count(); ++i) sum += p[i];
        const double mean = sum / n;
        double var = 0.0;
        for (std::size_t i = 0; i < patch.pixel_count(); ++i) var += (p[i] - mean) * (p[i] - mean);
        f[ch] = mean;
        f[4 + ch] = std::sqrt(var / n);
    }

    std::vector<double> lum(patch.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = patch.luma(x, y);
    const float *depth = patch.plane(RgbdPatch::kDepth);

    const double sx = w / ReferenceExtractor::kGradientUnits;
    const double sy = h / ReferenceExtractor::kGradientUnits;
    double lh = 0, lv = 0, dh = 0, dv = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double a = (lum[i + 1] - lum[i]) * sx;
            const double b = (static_cast<double>(depth[i + 1]) - depth[i]) * sx;
            lh += a * a;
            dh += b * b;
        }
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double a = (lum[i + w] - lum[i]) * sy;
            const double b = (static_cast<double>(depth[i + w]) - depth[i]) * sy;
            lv += a * a;
            dv += b * b;
        }
    const double nh = static_cast<double>(std::max(w - 1, 1)) * h;
    const double nv = static_cast<double>(std::max(h - 1, 1)) * w;
    f[8] = w > 1 ? lh / nh : 0.0;
    f[9] = h > 1 ? lv / nv : 0.0;
    f[10] = w > 1 ? dh / nh : 0.0;
    f[11] = h > 1 ? dv / nv : 0.0;

    const int mx = std::max(w / 2, 1), my = std::max(h / 2, 1);
    const int xs[3] = {0, std::min(mx, w), w};
    const int ys[3] = {0, std::min(my, h), h};
    for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
            double sum = 0.0;
            std::size_t count = 0;
            for (int y = ys[by]; y < ys[by + 1]; ++y)
                for (int x = xs[bx]; x < xs[bx + 1]; ++x) {
                    sum += lum[static_cast<std::size_t>(y) * w + x];
                    ++count;
                }
            f[12 + by * 2 + bx] = count ? sum / static_cast<double>(count) : f[0];
        }
    return f;
}

// --- Jacobi eigen-solver --------------------------------------------------------------------

SymmetricEigen jacobi_eigen(std::vector<std::vector<double>> a, int max_sweeps) {
    const std::size_t n = a.size();
    for (const auto &row : a)
        if (row.size() != n) throw DomainError("matrix must be square");
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off == 0.0) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p][q];
                if (apq == 0.0) continue;
                // Past the first sweeps, drop elements below the diagonal's precision.
                if (sweep > 3 && std::abs(a[p][p]) + 100.0 * std::abs(apq) == std::abs(a[p][p]) &&
                    std::abs(a[q][q]) + 100.0 * std::abs(apq) == std::abs(a[q][q])) {
                    a[p][q] = a[q][p] = 0.0;
                    continue;
                }
                const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = a[q][p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });
    SymmetricEigen out;
    out.sweeps = sweep;
    for (std::size_t i : order) {
        out.values.push_back(a[i][i]);
        std::vector<double> vec(n);
        for (std::size_t k = 0; k < n; ++k) vec[k] = v[k][i];
        out.vectors.push_back(std::move(vec));
    }
    return out;
}

// --- PCA ------------------------------------------------------------------------------------

std::vector<std::vector<double>> covariance(std::span<const FeatureVector> corpus, std::vector<double> *mean_out) {
    if (corpus.empty()) throw DomainError("empty corpus");
    const std::size_t dim = corpus[0].size();
    std::vector<double> mean(dim, 0.0);
    for (const auto &f : corpus) {
        if (f.size() != dim) throw DomainError("corpus features differ in dimension");
        for (std::size_t k = 0; k < dim; ++k) {
            if (!std::isfinite(f[k])) throw DomainError("corpus contains non-finite features");
            mean[k] += f[k];
        }
    }
    for (double &m : mean) m /= static_cast<double>(corpus.size());
    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto &f : corpus)
        for (std::size_t i = 0; i < dim; ++i) {
            const double di = f[i] - mean[i];
            for (std::size_t j = i; j < dim; ++j) cov[i][j] += di * (f[j] - mean[j]);
        }
    const double denom = static_cast<double>(std::max<std::size_t>(corpus.size() - 1, 1));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) cov[j][i] = cov[i][j] = cov[i][j] / denom;
    if (mean_out) *mean_out = std::move(mean);
    return cov;
}

PcaModel fit_pca(std::span<const FeatureVector> corpus, std::size_t d) {
    if (d == 0) throw DomainError("PCA dimension must be >= 1");
    if (corpus.size() < d) throw DomainError("corpus smaller than the PCA dimension");
    PcaModel model;
    const auto cov = covariance(corpus, &model.mean);
    const std::size_t dim = model.mean.size();
    if (d > dim) throw DomainError("PCA dimension exceeds feature dimension");

    const auto eig = jacobi_eigen(cov);
    const double top = std::max(eig.values.front(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double ev = eig.values[i];
        if (top <= 0.0 || ev <= 1e-12 * top) {
            model.rank_deficient = true;
            model.components.emplace_back(dim, 0.0);
            model.explained_variance.push_back(0.0);
            continue;
        }
        auto vec = eig.vectors[i];
        std::size_t arg = 0;
        for (std::size_t k = 1; k < dim; ++k)
            if (std::abs(vec[k]) > std::abs(vec[arg])) arg = k;
        if (vec[arg] < 0.0)
            for (double &x : vec) x = -x;
        model.components.push_back(std::move(vec));
        model.explained_variance.push_back(ev);
    }
    return model;
}

LatentVector project(const PcaModel &model, std::span<const double> feature) {
    if (feature.size() != model.input_dim())
        throw DomainError("feature dimension " + std::to_string(feature.size()) + " does not match PCA input dimension " +
                          std::to_string(model.input_dim()));
    LatentVector out(model.latent_dim(), 0.0);
    for (std::size_t r = 0; r < out.size(); ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < feature.size(); ++k) acc += model.components[r][k] * (feature[k] - model.mean[k]);
        out[r] = acc;
    }
    return out;
}

FeatureVector reconstruct(const PcaModel &model, std::span<const double> latent) {
    if (latent.size() != model.latent_dim()) throw DomainError("latent dimension does not match PCA model");
    FeatureVector f = model.mean;
    for (std::size_t r = 0; r < latent.size(); ++r)
        for (std::size_t k = 0; k < f.size(); ++k) f[k] += latent[r] * model.components[r][k];
    return f;
}

LatentVector LatentReadout::apply(std::span<const double> projected) const {
    LatentVector out(offset);
    for (std::size_t r = 0; r < out.size(); ++r) {
        if (weights[r].size() != projected.size()) throw DomainError("readout input dimension mismatch");
        for (std::size_t k = 0; k < projected.size(); ++k) out[r] += weights[r][k] * projected[k];
    }
    return out;
}

LatentVector predict_latent(const PcaModel &model, std::span<const double> feature) {
    auto p = project(model, feature);
    return model.readout ? model.readout->apply(p) : p;
}

LatentReadout fit_readout(std::span<const LatentVector> projected, std::span<const LatentVector> targets) {
    if (projected.empty() || projected.size() != targets.size())
        throw DomainError("readout needs matching, non-empty projected and target sets");
    const std::size_t n = projected.size();
    const std::size_t in = projected[0].size();
    const std::size_t out = targets[0].size();
    Eigen::MatrixXd design(n, in + 1);
    Eigen::MatrixXd y(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        if (projected[i].size() != in || targets[i].size() != out) throw DomainError("readout sample dimension mismatch");
        for (std::size_t k = 0; k < in; ++k) design(i, k) = projected[i][k];
        design(i, in) = 1.0;
        for (std::size_t k = 0; k < out; ++k) y(i, k) = targets[i][k];
    }
    const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(y);
    LatentReadout r;
    r.weights.assign(out, std::vector<double>(in));
    r.offset.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t k = 0; k < in; ++k) r.weights[o][k] = coef(k, o);
        r.offset[o] = coef(in, o);
    }
    return r;
}

// --- serialization --------------------------------------------------------------------------

namespace {

void write_row(std::ostream &out, const char *label, const std::vector<double> &row) {
    out << label;
    for (double v : row) out << "," << v;
    out << "\n";
}

std::vector<double> parse_row(const std::string &rest) {
    std::vector<double> v;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception &) {
            throw IoError("malformed number '" + tok + "' in PCA file");
        }
    }
    return v;
}

} // namespace

void write_pca_csv(const PcaModel &model, std::ostream &out) {
    out << std::setprecision(17);
    write_row(out, "mean", model.mean);
    for (const auto &c : model.components) write_row(out, "component", c);
    write_row(out, "variance", model.explained_variance);
    if (model.readout)
        for (std::size_t r = 0; r < model.readout->offset.size(); ++r) {
            auto row = model.readout->weights[r];
            row.push_back(model.readout->offset[r]);
            write_row(out, "readout", row);
        }
    if (model.rank_deficient) out << "rank_deficient,1\n";
}

PcaModel read_pca_csv(std::istream &in) {
    PcaModel model;
    std::string line;
    bool have_mean = false, have_var = false;
    LatentReadout readout;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const std::string label = line.substr(0, comma);
        const auto row = comma == std::string::npos ? std::vector<double>{} : parse_row(line.substr(comma + 1));
        if (label == "mean") model.mean = row, have_mean = true;
        else if (label == "component") model.components.push_back(row);
        else if (label == "variance") model.explained_variance = row, have_var = true;
        else if (label == "readout") {
            if (row.empty()) throw IoError("empty readout row");
            readout.weights.emplace_back(row.begin(), row.end() - 1);
            readout.offset.push_back(row.back());
        } else if (label == "rank_deficient") model.rank_deficient = true;
        else throw IoError("unknown PCA row label '" + label + "'");
    }
    if (!have_mean || !have_var || model.components.empty()) throw IoError("PCA file is missing rows");
    if (model.explained_variance.size() != model.components.size()) throw IoError("PCA variance row has wrong length");
    for (const auto &c : model.components)
        if (c.size() != model.mean.size()) throw IoError("PCA component row has wrong length");
    if (!readout.offset.empty()) {
        for (const auto &w : readout.weights)
            if (w.size() != model.components.size()) throw IoError("readout row has wrong length");
        model.readout = std::move(readout);
    }
    return model;
}

void save_pca(const PcaModel &model, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_pca_csv(model, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

PcaModel load_pca(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return read_pca_csv(in);
    } catch (const IoError &e) {
        throw IoError(path + ": " + e.what());
    }
}

} // namespace fractalsea
