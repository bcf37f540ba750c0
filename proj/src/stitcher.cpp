#include "fractalsea/stitcher.hpp"

#include "fractalsea/error.hpp"
#include "fractalsea/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

namespace fractalsea {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Pattern p) {
    switch (p) {
    case Pattern::Raster: return "raster";
    case Pattern::Lawnmower: return "lawnmower";
    case Pattern::Parallel: return "parallel";
    }
    return "?";
}

std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::Vertex: return "vertex";
    case TaskKind::HGap: return "h_gap";
    case TaskKind::VGap: return "v_gap";
    case TaskKind::CenterGap: return "center_gap";
    }
    return "?";
}

std::string to_string(FillMode m) {
    switch (m) {
    case FillMode::Unconditional: return "uncond";
    case FillMode::Conditional: return "cond";
    case FillMode::Naive: return "naive";
    }
    return "?";
}

Pattern parse_pattern(const std::string &s) {
    if (s == "raster") return Pattern::Raster;
    if (s == "lawnmower") return Pattern::Lawnmower;
    if (s == "parallel") return Pattern::Parallel;
    throw DomainError("unknown pattern '" + s + "' (expected raster, lawnmower or parallel)");
}

FillMode parse_fill_mode(const std::string &s) {
    if (s == "uncond" || s == "unconditional") return FillMode::Unconditional;
    if (s == "cond" || s == "conditional") return FillMode::Conditional;
    if (s == "naive") return FillMode::Naive;
    throw DomainError("unknown inpaint mode '" + s + "' (expected cond or uncond)");
}

namespace {

TaskKind parse_kind(const std::string &s) {
    if (s == "vertex") return TaskKind::Vertex;
    if (s == "h_gap") return TaskKind::HGap;
    if (s == "v_gap") return TaskKind::VGap;
    if (s == "center_gap") return TaskKind::CenterGap;
    throw DomainError("unknown task kind '" + s + "'");
}

void check_grid(int rows, int cols) {
    if (rows < 1 || cols < 1) throw DomainError("grid dimensions must be at least 1x1");
}

LatentVector latent_at(const LatentField &field, double u, double v) {
    return sample_latent_normalized(field, std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0));
}

StitchTask make_task(TaskKind kind, int row, int col, const LatentField &field, std::uint64_t global_seed,
                     int rows, int cols) {
    StitchTask t;
    t.kind = kind;
    t.row = row;
    t.col = col;
    t.seed = task_seed(global_seed, kind, row, col);
    // Latents are sampled in grid coordinates so every pattern conditions a tile identically.
    double u = (col + 0.5) / cols, v = (row + 0.5) / rows;
    if (kind == TaskKind::HGap || kind == TaskKind::CenterGap) u = (col + 1.0) / cols;
    if (kind == TaskKind::VGap || kind == TaskKind::CenterGap) v = (row + 1.0) / rows;
    t.latent = latent_at(field, u, v);
    return t;
}

StitchPlan plan_sequential(Pattern pattern, int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                           const StitchGeometry &geometry) {
    check_grid(rows, cols);
    geometry.validate(pattern);
    StitchPlan plan;
    plan.pattern = pattern;
    plan.rows = rows;
    plan.cols = cols;
    plan.global_seed = global_seed;
    plan.geometry = geometry;
    const int p = geometry.patch_size, stride = geometry.patch_size - geometry.overlap;
    plan.map_width = cols * stride + geometry.overlap;
    plan.map_height = rows * stride + geometry.overlap;

    std::vector<std::pair<int, int>> order;
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < cols; ++i) {
            const bool reversed = pattern == Pattern::Lawnmower && (r % 2 == 1);
            order.emplace_back(r, reversed ? cols - 1 - i : i);
        }
    std::vector<std::int64_t> position(static_cast<std::size_t>(rows) * cols, -1);
    for (std::size_t i = 0; i < order.size(); ++i)
        position[static_cast<std::size_t>(order[i].first) * cols + order[i].second] = static_cast<std::int64_t>(i);

    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto [r, c] = order[i];
        StitchTask t = make_task(TaskKind::Vertex, r, c, field, global_seed, rows, cols);
        t.id = static_cast<TaskId>(i);
        t.stage = static_cast<int>(i) + 1;
        t.region = t.canvas = Rect{c * stride, r * stride, p, p};
        if (i > 0) t.depends_on.push_back(static_cast<TaskId>(i - 1));
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                const int nr = r + dr, nc = c + dc;
                if ((dr == 0 && dc == 0) || nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
                const auto pos = position[static_cast<std::size_t>(nr) * cols + nc];
                if (pos < static_cast<std::int64_t>(i)) t.depends_on.push_back(static_cast<TaskId>(pos));
            }
        std::sort(t.depends_on.begin(), t.depends_on.end());
        t.depends_on.erase(std::unique(t.depends_on.begin(), t.depends_on.end()), t.depends_on.end());
        plan.tasks.push_back(std::move(t));
    }
    return plan;
}

} // namespace

void StitchGeometry::validate(Pattern pattern) const {
    if (patch_size < 8) throw DomainError("patch size must be at least 8 pixels");
    if (pattern == Pattern::Parallel) {
        if (gap < 1) throw DomainError("parallel stitching needs a gap of at least 1 pixel");
        if (context < 1) throw DomainError("gap context must be at least 1 pixel");
    } else if (overlap < 1 || overlap >= patch_size) {
        throw DomainError("sequential stitching needs 1 <= overlap < patch size");
    }
}

std::uint64_t task_seed(std::uint64_t global_seed, TaskKind kind, int row, int col) {
    return rng::hash_key(global_seed, {static_cast<std::uint64_t>(kind), rng::as_key(row), rng::as_key(col)});
}

DependencyList StitchPlan::dependencies() const {
    DependencyList deps(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].id != i) throw PlanError("task ids must equal their position in the plan");
        deps[i] = tasks[i].depends_on;
    }
    return deps;
}

int StitchPlan::critical_path() const { return longest_chain(dependencies()); }

int StitchPlan::stage_count() const {
    int s = 0;
    for (const auto &t : tasks) s = std::max(s, t.stage);
    return s;
}

std::vector<TaskId> StitchPlan::vertex_tasks() const {
    std::vector<TaskId> out;
    for (const auto &t : tasks)
        if (t.kind == TaskKind::Vertex) out.push_back(t.id);
    return out;
}

StitchPlan plan_raster(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                       const StitchGeometry &geometry) {
    return plan_sequential(Pattern::Raster, rows, cols, field, global_seed, geometry);
}

StitchPlan plan_lawnmower(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                          const StitchGeometry &geometry) {
    return plan_sequential(Pattern::Lawnmower, rows, cols, field, global_seed, geometry);
}

StitchPlan plan_parallel(int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                         const StitchGeometry &geometry) {
    check_grid(rows, cols);
    geometry.validate(Pattern::Parallel);
    StitchPlan plan;
    plan.pattern = Pattern::Parallel;
    plan.rows = rows;
    plan.cols = cols;
    plan.global_seed = global_seed;
    plan.geometry = geometry;
    const int p = geometry.patch_size, g = geometry.gap, stride = p + g;
    const int ctx = std::min(geometry.context, p);
    plan.map_width = cols * p + (cols - 1) * g;
    plan.map_height = rows * p + (rows - 1) * g;

    auto add = [&](StitchTask t) {
        t.id = static_cast<TaskId>(plan.tasks.size());
        plan.tasks.push_back(std::move(t));
        return plan.tasks.back().id;
    };
    std::vector<TaskId> vertex(static_cast<std::size_t>(rows) * cols);
    std::vector<TaskId> hgap(static_cast<std::size_t>(rows) * cols), vgap(static_cast<std::size_t>(rows) * cols);
    const auto at = [cols](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };

    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            StitchTask t = make_task(TaskKind::Vertex, r, c, field, global_seed, rows, cols);
            t.stage = 1;
            t.region = t.canvas = Rect{c * stride, r * stride, p, p};
            vertex[at(r, c)] = add(std::move(t));
        }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            StitchTask t = make_task(TaskKind::HGap, r, c, field, global_seed, rows, cols);
            t.stage = 2;
            t.region = Rect{c * stride + p, r * stride, g, p};
            t.canvas = Rect{t.region.x - ctx, t.region.y, g + 2 * ctx, p};
            t.depends_on = {vertex[at(r, c)], vertex[at(r, c + 1)]};
            hgap[at(r, c)] = add(std::move(t));
        }
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            StitchTask t = make_task(TaskKind::VGap, r, c, field, global_seed, rows, cols);
            t.stage = 3;
            t.region = Rect{c * stride, r * stride + p, p, g};
            t.canvas = Rect{t.region.x, t.region.y - ctx, p, g + 2 * ctx};
            t.depends_on = {vertex[at(r, c)], vertex[at(r + 1, c)]};
            vgap[at(r, c)] = add(std::move(t));
        }
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            StitchTask t = make_task(TaskKind::CenterGap, r, c, field, global_seed, rows, cols);
            t.stage = 4;
            t.region = Rect{c * stride + p, r * stride + p, g, g};
            t.canvas = Rect{t.region.x - ctx, t.region.y - ctx, g + 2 * ctx, g + 2 * ctx};
            t.depends_on = {hgap[at(r, c)], hgap[at(r + 1, c)], vgap[at(r, c)], vgap[at(r, c + 1)]};
            std::sort(t.depends_on.begin(), t.depends_on.end());
            add(std::move(t));
        }
    return plan;
}

StitchPlan make_plan(Pattern pattern, int rows, int cols, const LatentField &field, std::uint64_t global_seed,
                     const StitchGeometry &geometry) {
    switch (pattern) {
    case Pattern::Raster: return plan_raster(rows, cols, field, global_seed, geometry);
    case Pattern::Lawnmower: return plan_lawnmower(rows, cols, field, global_seed, geometry);
    case Pattern::Parallel: return plan_parallel(rows, cols, field, global_seed, geometry);
    }
    throw DomainError("unknown pattern");
}

std::vector<std::int32_t> ownership(const StitchPlan &plan) {
    std::vector<std::int32_t> owner(static_cast<std::size_t>(plan.map_width) * plan.map_height, -1);
    for (const auto &t : plan.tasks) {
        const Rect &r = t.region;
        if (r.x < 0 || r.y < 0 || r.x1() > plan.map_width || r.y1() > plan.map_height)
            throw PlanError("task " + std::to_string(t.id) + " region lies outside the map");
        for (int y = r.y; y < r.y1(); ++y)
            for (int x = r.x; x < r.x1(); ++x) {
                auto &o = owner[static_cast<std::size_t>(y) * plan.map_width + x];
                if (o < 0) o = static_cast<std::int32_t>(t.id);
            }
    }
    return owner;
}

void validate_plan(const StitchPlan &plan) {
    const auto deps = plan.dependencies();
    const auto order = topological_order(deps);
    const std::size_t n = plan.tasks.size();
    // Transitive dependency sets, filled in topological order.
    std::vector<std::vector<bool>> closure(n, std::vector<bool>(n, false));
    for (TaskId t : order)
        for (TaskId d : deps[t]) {
            closure[t][d] = true;
            for (std::size_t k = 0; k < n; ++k)
                if (closure[d][k]) closure[t][k] = true;
        }
    const auto owner = ownership(plan);
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] < 0) throw PlanError("map pixel " + std::to_string(i) + " is not owned by any task");
    for (const auto &t : plan.tasks) {
        const Rect &c = t.canvas;
        if (c.x < 0 || c.y < 0 || c.x1() > plan.map_width || c.y1() > plan.map_height)
            throw PlanError("task " + std::to_string(t.id) + " canvas lies outside the map");
        if (!(c.contains(t.region.x, t.region.y) && t.region.x1() <= c.x1() && t.region.y1() <= c.y1()))
            throw PlanError("task " + std::to_string(t.id) + " region is not inside its canvas");
        for (int y = c.y; y < c.y1(); ++y)
            for (int x = c.x; x < c.x1(); ++x) {
                const auto o = owner[static_cast<std::size_t>(y) * plan.map_width + x];
                if (o != static_cast<std::int32_t>(t.id) && !closure[t.id][static_cast<std::size_t>(o)])
                    throw PlanError("task " + std::to_string(t.id) + " reads pixels of task " + std::to_string(o) +
                                    " which it does not depend on");
            }
    }
}

std::vector<SeamSegment> seam_registry(int width, int height, const std::vector<std::int32_t> &owner) {
    std::vector<SeamSegment> seams;
    const auto own = [&](int x, int y) { return owner[static_cast<std::size_t>(y) * width + x]; };
    for (int x = 0; x + 1 < width; ++x) {
        for (int y = 0; y < height;) {
            const auto a = own(x, y), b = own(x + 1, y);
            if (a == b) {
                ++y;
                continue;
            }
            int end = y + 1;
            while (end < height && own(x, end) == a && own(x + 1, end) == b) ++end;
            seams.push_back({static_cast<TaskId>(a), static_cast<TaskId>(b), true, x, y, end});
            y = end;
        }
    }
    for (int y = 0; y + 1 < height; ++y) {
        for (int x = 0; x < width;) {
            const auto a = own(x, y), b = own(x, y + 1);
            if (a == b) {
                ++x;
                continue;
            }
            int end = x + 1;
            while (end < width && own(end, y) == a && own(end, y + 1) == b) ++end;
            seams.push_back({static_cast<TaskId>(a), static_cast<TaskId>(b), false, y, x, end});
            x = end;
        }
    }
    return seams;
}

TerrainMap execute_plan(const StitchPlan &plan, const ConditionalGenerator &generator, const ExecuteOptions &options) {
    validate_plan(plan);
    TerrainMap map;
    map.plan = plan;
    map.raster = RgbdPatch(plan.map_width, plan.map_height);
    map.owner = ownership(plan);

    std::mutex generator_mutex;
    const bool serialize = !generator.concurrent_safe();
    const int width = plan.map_width;

    run_dag(plan.dependencies(), options.workers, [&](TaskId id) {
        const StitchTask &task = plan.tasks[id];
        const Rect &cv = task.canvas;
        PixelMask mask(cv.w, cv.h, false);
        bool any_known = false;
        for (int y = 0; y < cv.h; ++y)
            for (int x = 0; x < cv.w; ++x) {
                const bool known = map.owner[static_cast<std::size_t>(cv.y + y) * width + cv.x + x] !=
                                   static_cast<std::int32_t>(id);
                mask.set(x, y, known);
                any_known = any_known || known;
            }

        RgbdPatch result;
        {
            std::unique_lock<std::mutex> lock(generator_mutex, std::defer_lock);
            if (serialize) lock.lock();
            if (!any_known) {
                result = generator.generate(task.latent, task.seed, cv.w, cv.h);
            } else {
                const RgbdPatch input = map.raster.crop(cv.x, cv.y, cv.w, cv.h);
                if (task.kind == TaskKind::Vertex || options.fill == FillMode::Conditional)
                    result = generator.inpaint(input, mask, InpaintMode::conditional(task.latent), task.seed);
                else if (options.fill == FillMode::Unconditional)
                    result = generator.inpaint(input, mask, InpaintMode::unconditional(), task.seed);
                else
                    result = naive_fill(generator, input, mask, task.latent, task.seed);
            }
        }
        if (result.width() != cv.w || result.height() != cv.h)
            throw DomainError("generator returned a patch of the wrong size");
        for (int y = 0; y < cv.h; ++y)
            for (int x = 0; x < cv.w; ++x) {
                if (mask.known(x, y)) continue;
                for (int c = 0; c < RgbdPatch::kChannels; ++c) map.raster.at(c, cv.x + x, cv.y + y) = result.at(c, x, y);
            }
    });

    map.seams = seam_registry(map.width(), map.height(), map.owner);
    return map;
}

RgbdPatch tile_of(const TerrainMap &map, const StitchTask &task) {
    const Rect &c = task.canvas;
    return map.raster.crop(c.x, c.y, c.w, c.h);
}

// --- serialization --------------------------------------------------------------------------

namespace {

json rect_json(const Rect &r) { return json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }
Rect rect_from(const json &j) { return Rect{j.at("x"), j.at("y"), j.at("w"), j.at("h")}; }

} // namespace

std::string plan_to_json(const StitchPlan &plan) {
    json j;
    j["pattern"] = to_string(plan.pattern);
    j["rows"] = plan.rows;
    j["cols"] = plan.cols;
    j["global_seed"] = plan.global_seed;
    j["geometry"] = {{"patch_size", plan.geometry.patch_size},
                     {"gap", plan.geometry.gap},
                     {"overlap", plan.geometry.overlap},
                     {"context", plan.geometry.context}};
    j["map_width"] = plan.map_width;
    j["map_height"] = plan.map_height;
    j["critical_path"] = plan.critical_path();
    j["stage_count"] = plan.stage_count();
    json tasks = json::array();
    for (const auto &t : plan.tasks)
        tasks.push_back({{"id", t.id},
                         {"kind", to_string(t.kind)},
                         {"row", t.row},
                         {"col", t.col},
                         {"stage", t.stage},
                         {"seed", t.seed},
                         {"latent", t.latent},
                         {"depends_on", t.depends_on},
                         {"region", rect_json(t.region)},
                         {"canvas", rect_json(t.canvas)}});
    j["tasks"] = std::move(tasks);
    return j.dump(1);
}

StitchPlan plan_from_json(const std::string &text) {
    try {
        const json j = json::parse(text);
        StitchPlan plan;
        plan.pattern = parse_pattern(j.at("pattern"));
        plan.rows = j.at("rows");
        plan.cols = j.at("cols");
        plan.global_seed = j.at("global_seed");
        const auto &g = j.at("geometry");
        plan.geometry = StitchGeometry{g.at("patch_size"), g.at("gap"), g.at("overlap"), g.at("context")};
        plan.map_width = j.at("map_width");
        plan.map_height = j.at("map_height");
        for (const auto &tj : j.at("tasks")) {
            StitchTask t;
            t.id = tj.at("id");
            t.kind = parse_kind(tj.at("kind"));
            t.row = tj.at("row");
            t.col = tj.at("col");
            t.stage = tj.at("stage");
            t.seed = tj.at("seed");
            t.latent = tj.at("latent").get<LatentVector>();
            t.depends_on = tj.at("depends_on").get<std::vector<TaskId>>();
            t.region = rect_from(tj.at("region"));
            t.canvas = rect_from(tj.at("canvas"));
            plan.tasks.push_back(std::move(t));
        }
        return plan;
    } catch (const json::exception &e) {
        throw IoError(std::string("malformed plan JSON: ") + e.what());
    }
}

void save_plan(const StitchPlan &plan, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << plan_to_json(plan) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

StitchPlan load_plan(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return plan_from_json(ss.str());
    } catch (const IoError &e) {
        throw IoError(path + ": " + e.what());
    }
}

void write_seams_csv(const std::vector<SeamSegment> &seams, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "task_a,task_b,orientation,line,begin,end\n";
    for (const auto &s : seams)
        out << s.task_a << "," << s.task_b << "," << (s.vertical ? "vertical" : "horizontal") << "," << s.line << ","
            << s.begin << "," << s.end << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

void save_map(const TerrainMap &map, const std::string &dir) {
    fs::create_directories(dir);
    const fs::path d(dir);
    write_rgb_png(map.raster, (d / "rgb.png").string());
    write_depth_png(map.raster, (d / "depth.png").string());
    write_rgbd_raw(map.raster, (d / "map.rgbd").string());
    write_seams_csv(map.seams, (d / "seams.csv").string());
    save_plan(map.plan, (d / "plan.json").string());
}

TerrainMap load_map(const std::string &dir) {
    const fs::path d(dir);
    TerrainMap map;
    map.plan = load_plan((d / "plan.json").string());
    map.raster = read_rgbd_raw((d / "map.rgbd").string());
    if (map.raster.width() != map.plan.map_width || map.raster.height() != map.plan.map_height)
        throw IoError(dir + ": raster size does not match plan");
    map.owner = ownership(map.plan);
    map.seams = seam_registry(map.width(), map.height(), map.owner);
    return map;
}

} // namespace fractalsea
