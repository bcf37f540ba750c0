#include "fractalsea/eval.hpp"

#include "fractalsea/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace fractalsea {

using nlohmann::json;

const char *const kReportScopeNote =
    "latent MSE follows the reference-embedding (DINO-style) branch only; no CLIP branch is evaluated";

namespace {

LatentVector embed(const RgbdPatch &tile, const FeatureExtractor &extractor, const PcaModel *pca) {
    const FeatureVector f = extractor.extract(tile);
    if (!pca) return f;
    if (pca->input_dim() != f.size()) throw DomainError("PCA input dimension does not match the extractor");
    return project(*pca, f);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

LatentMseResult latent_mse(const TerrainMap &map, const StitchPlan &plan, const FeatureExtractor &extractor,
                           const PcaModel &pca) {
    if (pca.input_dim() != extractor.feature_dim())
        throw DomainError("PCA input dimension " + std::to_string(pca.input_dim()) + " does not match extractor dimension " +
                          std::to_string(extractor.feature_dim()));
    LatentMseResult r;
    for (TaskId id : plan.vertex_tasks()) {
        const StitchTask &task = plan.tasks[id];
        const LatentVector predicted = predict_latent(pca, extractor.extract(tile_of(map, task)));
        if (predicted.size() != task.latent.size())
            throw DomainError("predicted latent dimension " + std::to_string(predicted.size()) +
                              " does not match plan latent dimension " + std::to_string(task.latent.size()));
        double se = 0.0;
        for (std::size_t k = 0; k < predicted.size(); ++k) se += (predicted[k] - task.latent[k]) * (predicted[k] - task.latent[k]);
        r.tiles.push_back({id, task.row, task.col, predicted.empty() ? 0.0 : se / static_cast<double>(predicted.size())});
    }
    for (const auto &t : r.tiles) r.mean += t.mse;
    if (!r.tiles.empty()) r.mean /= static_cast<double>(r.tiles.size());
    return r;
}

SeamScore seam_score(const RgbdPatch &raster, const std::vector<SeamSegment> &seams,
                     const std::vector<std::int32_t> &owner) {
    SeamScore s;
    if (seams.empty()) {
        s.warning = "seam registry is empty; seam score is 0";
        return s;
    }
    const int w = raster.width(), h = raster.height();
    const bool owned = owner.size() == raster.pixel_count();
    std::vector<double> lum(raster.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = raster.luma(x, y);
    auto L = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
    auto same = [&](int x0, int y0, int x1, int y1) {
        return !owned || owner[static_cast<std::size_t>(y0) * w + x0] == owner[static_cast<std::size_t>(y1) * w + x1];
    };

    std::vector<double> interior;
    interior.reserve(2 * raster.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w && same(x, y, x + 1, y)) interior.push_back((L(x + 1, y) - L(x, y)) * (L(x + 1, y) - L(x, y)));
            if (y + 1 < h && same(x, y, x, y + 1)) interior.push_back((L(x, y + 1) - L(x, y)) * (L(x, y + 1) - L(x, y)));
        }
    if (!interior.empty()) {
        const std::size_t mid = interior.size() / 2;
        std::nth_element(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(mid), interior.end());
        s.baseline = interior[mid];
        if (interior.size() % 2 == 0) {
            const double lower = *std::max_element(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(mid));
            s.baseline = 0.5 * (s.baseline + lower);
        }
    }

    double positive = 0.0;
    for (const SeamSegment &seg : seams) {
        double sum = 0.0;
        std::size_t n = 0;
        for (int i = seg.begin; i < seg.end; ++i) {
            double d;
            if (seg.vertical) {
                if (seg.line < 0 || seg.line + 1 >= w || i < 0 || i >= h) throw DomainError("seam outside the map");
                d = L(seg.line + 1, i) - L(seg.line, i);
            } else {
                if (seg.line < 0 || seg.line + 1 >= h || i < 0 || i >= w) throw DomainError("seam outside the map");
                d = L(i, seg.line + 1) - L(i, seg.line);
            }
            const double v = d * d - s.baseline;
            sum += v;
            positive += std::max(0.0, v);
            ++n;
        }
        s.per_seam.push_back(n ? sum / static_cast<double>(n) : 0.0);
        s.pairs += n;
    }
    s.aggregate = s.pairs ? positive / static_cast<double>(s.pairs) : 0.0;
    return s;
}

SeamScore seam_score(const TerrainMap &map) { return seam_score(map.raster, map.seams, map.owner); }

CriticalPathRow critical_path_row(const StitchPlan &plan) {
    return {plan.pattern, plan.rows, plan.cols, plan.critical_path(), plan.stage_count()};
}

double adjacent_embedding_distance(const TerrainMap &map, const FeatureExtractor &extractor, const PcaModel *pca,
                                   std::size_t &pairs) {
    std::map<std::pair<int, int>, LatentVector> emb;
    for (TaskId id : map.plan.vertex_tasks()) {
        const StitchTask &t = map.plan.tasks[id];
        emb[{t.row, t.col}] = embed(tile_of(map, t), extractor, pca);
    }
    double total = 0.0;
    pairs = 0;
    for (const auto &[rc, e] : emb) {
        for (const auto &nb : {std::pair{rc.first, rc.second + 1}, std::pair{rc.first + 1, rc.second}}) {
            const auto it = emb.find(nb);
            if (it == emb.end()) continue;
            double d2 = 0.0;
            for (std::size_t k = 0; k < e.size(); ++k) d2 += (e[k] - it->second[k]) * (e[k] - it->second[k]);
            total += std::sqrt(d2);
            ++pairs;
        }
    }
    return total;
}

std::vector<DiversityRow> diversity_index(std::span<const DiversitySample> samples, const FeatureExtractor &extractor,
                                          const PcaModel *pca) {
    if (samples.size() < 2) throw DomainError("diversity index needs at least two s values");
    std::vector<DiversityRow> rows;
    for (const DiversitySample &sample : samples) {
        DiversityRow row;
        row.s = sample.s;
        double total = 0.0;
        for (const TerrainMap &m : sample.maps) {
            row.tiles += m.plan.vertex_tasks().size();
            std::size_t pairs = 0;
            total += adjacent_embedding_distance(m, extractor, pca, pairs);
            row.pairs += pairs;
        }
        if (row.tiles < 10)
            throw DomainError("diversity index needs at least 10 tiles per s value (s = " + fmt(sample.s) + " has " +
                              std::to_string(row.tiles) + ")");
        if (row.pairs == 0) throw DomainError("no adjacent tile pairs for s = " + fmt(sample.s));
        row.index = total / static_cast<double>(row.pairs);
        rows.push_back(row);
    }
    return rows;
}

std::string report_summary_json(const EvalReport &report) {
    json j;
    j["note"] = kReportScopeNote;
    json lat = json::object();
    for (const auto &[pattern, r] : report.latent) lat[to_string(pattern)] = {{"mean", r.mean}, {"tiles", r.tiles.size()}};
    j["latent_mse"] = lat;
    json seams = json::object();
    for (const auto &[label, s] : report.seams) {
        json e{{"aggregate", s.aggregate}, {"baseline", s.baseline}, {"pairs", s.pairs}, {"segments", s.per_seam.size()}};
        if (!s.warning.empty()) e["warning"] = s.warning;
        seams[label] = e;
    }
    j["seam_score"] = seams;
    json cp = json::array();
    for (const auto &c : report.critical_paths)
        cp.push_back({{"pattern", to_string(c.pattern)},
                      {"rows", c.rows},
                      {"cols", c.cols},
                      {"critical_path", c.critical_path},
                      {"stage_count", c.stage_count}});
    j["critical_path"] = cp;
    json div = json::array();
    for (const auto &d : report.diversity)
        div.push_back({{"s", d.s}, {"tiles", d.tiles}, {"pairs", d.pairs}, {"index", d.index}});
    j["diversity"] = div;
    return j.dump(2);
}

void write_report(const EvalReport &report, const std::string &dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string &name) {
        std::ofstream out(std::filesystem::path(dir) / name);
        if (!out) throw IoError("cannot write " + (std::filesystem::path(dir) / name).string());
        return out;
    };
    {
        auto out = open("latent_mse.csv");
        out << "# " << kReportScopeNote << "\n";
        out << "pattern,task,row,col,mse\n";
        for (const auto &[pattern, r] : report.latent)
            for (const auto &t : r.tiles)
                out << to_string(pattern) << ',' << t.task << ',' << t.row << ',' << t.col << ',' << fmt(t.mse) << "\n";
    }
    {
        auto out = open("seams.csv");
        out << "label,segment,score\n";
        for (const auto &[label, s] : report.seams)
            for (std::size_t i = 0; i < s.per_seam.size(); ++i) out << label << ',' << i << ',' << fmt(s.per_seam[i]) << "\n";
    }
    {
        auto out = open("critical_path.csv");
        out << "pattern,rows,cols,critical_path,stage_count\n";
        for (const auto &c : report.critical_paths)
            out << to_string(c.pattern) << ',' << c.rows << ',' << c.cols << ',' << c.critical_path << ',' << c.stage_count
                << "\n";
    }
    {
        auto out = open("diversity.csv");
        out << "s,tiles,pairs,index\n";
        for (const auto &d : report.diversity) out << fmt(d.s) << ',' << d.tiles << ',' << d.pairs << ',' << fmt(d.index) << "\n";
    }
    auto out = open("summary.json");
    out << report_summary_json(report) << "\n";
}

} // namespace fractalsea
