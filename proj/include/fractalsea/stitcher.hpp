#pragma once

#include "fractalsea/image.hpp"
#include "fractalsea/latent_field.hpp"
#include "fractalsea/patchgen.hpp"
#include "fractalsea/scheduler.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fractalsea {

enum class Pattern { Raster, Lawnmower, Parallel };
enum class TaskKind : std::uint8_t { Vertex = 1, HGap = 2, VGap = 3, CenterGap = 4 };
// How gap tasks are filled. Naive pastes raw generated content and exists as a comparison baseline.
enum class FillMode { Unconditional, Conditional, Naive };

std::string to_string(Pattern p);
std::string to_string(TaskKind k);
std::string to_string(FillMode m);
Pattern parse_pattern(const std::string &s);
FillMode parse_fill_mode(const std::string &s);

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    int x1() const { return x + w; }
    int y1() const { return y + h; }
    bool contains(int px, int py) const { return px >= x && py >= y && px < x1() && py < y1(); }
    bool operator==(const Rect &) const = default;
};

// Layout of vertex patches on the map.
// Parallel plans separate vertex patches by `gap` pixels; gap tasks read a `context` pixel strip of
// their already-written neighbours. Sequential plans (raster, lawnmower) place P x P tiles at
// stride P - overlap; each tile after the first inpaints with the overlap shared with earlier
// tiles as known pixels. Either way the map side is n * (P - o) + o with o = overlap for
// sequential plans and o = -gap for the parallel plan.
struct StitchGeometry {
    int patch_size = kDefaultPatchSize;
    int gap = kDefaultPatchSize / 2;
    int overlap = kDefaultPatchSize / 4;
    int context = 16;

    void validate(Pattern pattern) const;
};

struct StitchTask {
    TaskId id = 0;
    TaskKind kind = TaskKind::Vertex;
    // Vertex (r, c) is the patch in row r, column c. HGap (r, c) lies between vertices (r, c) and
    // (r, c + 1); VGap (r, c) between (r, c) and (r + 1, c); CenterGap (r, c) between all four of
    // (r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1).
    int row = 0, col = 0;
    int stage = 1;
    std::vector<TaskId> depends_on;
    std::uint64_t seed = 0;
    LatentVector latent;
    Rect region; // pixels this task may claim (claims resolve in task-id order)
    Rect canvas; // window the task reads and generates; always contains region
};

struct StitchPlan {
    Pattern pattern = Pattern::Parallel;
    int rows = 1, cols = 1;
    std::uint64_t global_seed = 0;
    StitchGeometry geometry;
    int map_width = 0, map_height = 0;
    std::vector<StitchTask> tasks;

    DependencyList dependencies() const;
    int critical_path() const;
    int stage_count() const;
    std::vector<TaskId> vertex_tasks() const;
};

// seed = hash(global_seed, kind, row, col); identical across patterns.
std::uint64_t task_seed(std::uint64_t global_seed, TaskKind kind, int row, int col);

StitchPlan plan_raster(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                       const StitchGeometry &geometry = {});
StitchPlan plan_lawnmower(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                          const StitchGeometry &geometry = {});
StitchPlan plan_parallel(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                         const StitchGeometry &geometry = {});
StitchPlan make_plan(Pattern pattern, int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                     const StitchGeometry &geometry = {});

// Owning task id per map pixel (-1 when unclaimed).
std::vector<std::int32_t> ownership(const StitchPlan &plan);

// Checks acyclicity, full pixel coverage, and that every foreign pixel a task reads is owned by
// one of its transitive dependencies. Throws PlanError.
void validate_plan(const StitchPlan &plan);

// A boundary between two tasks' pixels. Vertical seams separate columns `line` and `line + 1`
// over rows [begin, end); horizontal seams separate rows `line` and `line + 1` over columns [begin, end).
struct SeamSegment {
    TaskId task_a = 0, task_b = 0;
    bool vertical = true;
    int line = 0;
    int begin = 0, end = 0;
    bool operator==(const SeamSegment &) const = default;
};

std::vector<SeamSegment> seam_registry(int width, int height, const std::vector<std::int32_t> &owner);

struct TerrainMap {
    RgbdPatch raster;
    std::vector<std::int32_t> owner;
    std::vector<SeamSegment> seams;
    StitchPlan plan;

    int width() const { return raster.width(); }
    int height() const { return raster.height(); }
};

struct ExecuteOptions {
    FillMode fill = FillMode::Unconditional;
    unsigned workers = 1;
};

// Runs the plan on the DAG scheduler. Output is bit-identical for any worker count.
TerrainMap execute_plan(const StitchPlan &plan, const ConditionalGenerator &generator, const ExecuteOptions &options = {});

// Crop of the map covering a vertex task's canvas.
RgbdPatch tile_of(const TerrainMap &map, const StitchTask &task);

// Plan JSON and map directory I/O. A map directory holds rgb.png, depth.png (16-bit),
// map.rgbd (lossless float raster), seams.csv and plan.json.
std::string plan_to_json(const StitchPlan &plan);
StitchPlan plan_from_json(const std::string &text);
void save_plan(const StitchPlan &plan, const std::string &path);
StitchPlan load_plan(const std::string &path);
void write_seams_csv(const std::vector<SeamSegment> &seams, const std::string &path);
void save_map(const TerrainMap &map, const std::string &dir);
TerrainMap load_map(const std::string &dir);

} // namespace fractalsea
