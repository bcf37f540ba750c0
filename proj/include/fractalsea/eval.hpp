#pragma once

#include "fractalsea/embedding.hpp"
#include "fractalsea/stitcher.hpp"

#include <span>
#include <string>
#include <vector>

namespace fractalsea {

struct TileMse {
    TaskId task = 0;
    int row = 0, col = 0;
    double mse = 0.0;
};

struct LatentMseResult {
    std::vector<TileMse> tiles; // one per vertex task, in task order
    double mean = 0.0;
};

// Per vertex tile: MSE between the plan's conditioning latent and predict_latent(extract(tile)).
LatentMseResult latent_mse(const TerrainMap &map, const StitchPlan &plan, const FeatureExtractor &extractor,
                           const PcaModel &pca);

struct SeamScore {
    std::vector<double> per_seam; // mean of (d^2 - baseline) over the seam's pixel pairs
    double aggregate = 0.0;       // mean over all seam pixel pairs of max(0, d^2 - baseline)
    double baseline = 0.0;        // median squared luma difference of interior neighbour pairs
    std::size_t pairs = 0;
    std::string warning;
};

// d is the luma difference across a seam; interior pairs are 4-neighbours with the same owner
// (every neighbour pair when no ownership is given).
SeamScore seam_score(const RgbdPatch &raster, const std::vector<SeamSegment> &seams,
                     const std::vector<std::int32_t> &owner);
SeamScore seam_score(const TerrainMap &map);

struct CriticalPathRow {
    Pattern pattern = Pattern::Parallel;
    int rows = 0, cols = 0;
    int critical_path = 0;
    int stage_count = 0;
};
CriticalPathRow critical_path_row(const StitchPlan &plan);

struct DiversitySample {
    double s = 0.0;
    std::vector<TerrainMap> maps;
};

struct DiversityRow {
    double s = 0.0;
    std::size_t tiles = 0;
    std::size_t pairs = 0;
    double index = 0.0; // mean embedding distance between 4-adjacent vertex tiles
};

// Embedding = extractor features, projected through `pca` when given.
// Needs at least two s values and at least ten vertex tiles per s value.
std::vector<DiversityRow> diversity_index(std::span<const DiversitySample> samples, const FeatureExtractor &extractor,
                                          const PcaModel *pca = nullptr);

// Sum of adjacent-tile embedding distances of one map; `pairs` receives the pair count.
double adjacent_embedding_distance(const TerrainMap &map, const FeatureExtractor &extractor, const PcaModel *pca,
                                   std::size_t &pairs);

struct EvalReport {
    std::vector<std::pair<Pattern, LatentMseResult>> latent;
    std::vector<std::pair<std::string, SeamScore>> seams; // label, score
    std::vector<CriticalPathRow> critical_paths;
    std::vector<DiversityRow> diversity;
};

extern const char *const kReportScopeNote;

// Writes latent_mse.csv, seams.csv, critical_path.csv, diversity.csv and summary.json.
void write_report(const EvalReport &report, const std::string &dir);
std::string report_summary_json(const EvalReport &report);

} // namespace fractalsea
