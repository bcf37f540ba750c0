#include "fractalsea/error.hpp"
#include "fractalsea/stitcher.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace fractalsea;

namespace {

LatentField test_field(std::uint64_t seed = 3) {
    FractalParams p;
    p.levels = 3;
    p.seed = seed;
    p.corner_latents = {LatentVector{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
    return generate_field(p);
}

StitchGeometry small_geometry() {
    StitchGeometry g;
    g.patch_size = 48;
    g.gap = 24;
    g.overlap = 12;
    g.context = 8;
    return g;
}

class FailingGenerator final : public ConditionalGenerator {
public:
    RgbdPatch generate(const LatentVector &l, std::uint64_t s, int w, int h) const override {
        return reference_generate(l, s, w, h);
    }
    RgbdPatch inpaint(const RgbdPatch &, const PixelMask &, const InpaintMode &, std::uint64_t) const override {
        throw std::runtime_error("inpaint failure");
    }
    bool concurrent_safe() const override { return false; }
    std::string name() const override { return "failing"; }
};

} // namespace

TEST_SUITE("stitcher") {

TEST_CASE("raster plans") {
    const LatentField f = test_field();
    const StitchPlan one = plan_raster(1, 1, f, 1);
    CHECK(one.tasks.size() == 1);
    CHECK(one.tasks[0].depends_on.empty());
    CHECK(plan_raster(2, 2, f, 1).critical_path() == 4);
    CHECK(plan_raster(3, 5, f, 1).critical_path() == 15);
}

TEST_CASE("lawnmower plans") {
    const LatentField f = test_field();
    const StitchPlan p = plan_lawnmower(2, 2, f, 1);
    std::vector<std::pair<int, int>> order;
    for (TaskId id : topological_order(p.dependencies())) order.emplace_back(p.tasks[id].row, p.tasks[id].col);
    CHECK(order == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    CHECK(plan_lawnmower(3, 3, f, 1).critical_path() == 9);

    const StitchPlan r = plan_raster(3, 4, f, 9), l = plan_lawnmower(3, 4, f, 9);
    auto key = [](const StitchPlan &pl) {
        std::set<std::tuple<int, int, std::uint64_t, LatentVector>> s;
        for (const auto &t : pl.tasks) s.insert({t.row, t.col, t.seed, t.latent});
        return s;
    };
    CHECK(key(r) == key(l));
}

TEST_CASE("parallel plans: stages and task counts") {
    const LatentField f = test_field();
    const StitchPlan one = plan_parallel(1, 1, f, 1);
    CHECK(one.tasks.size() == 1);
    CHECK(one.stage_count() == 1);
    CHECK(one.critical_path() == 1);

    const StitchPlan p = plan_parallel(2, 2, f, 1);
    int counts[5] = {0, 0, 0, 0, 0};
    for (const auto &t : p.tasks) ++counts[static_cast<int>(t.kind)];
    CHECK(counts[1] == 4);
    CHECK(counts[2] == 2);
    CHECK(counts[3] == 2);
    CHECK(counts[4] == 1);
    CHECK(p.stage_count() == 4);
    CHECK(p.critical_path() <= 4);
    for (const auto &t : p.tasks) {
        CHECK(t.stage == static_cast<int>(t.kind));
        if (t.kind == TaskKind::Vertex) CHECK(t.depends_on.empty());
        if (t.kind == TaskKind::HGap || t.kind == TaskKind::VGap) CHECK(t.depends_on.size() == 2);
        if (t.kind == TaskKind::CenterGap) CHECK(t.depends_on.size() == 4);
    }
    const StitchPlan row = plan_parallel(1, 5, f, 1);
    CHECK(row.stage_count() == 2);
    for (int n = 2; n <= 16; ++n) {
        const StitchPlan q = plan_parallel(n, n, f, 1);
        CHECK(q.stage_count() == 4);
        CHECK(q.critical_path() <= 4);
    }
}

TEST_CASE("every plan validates and covers the map") {
    const LatentField f = test_field();
    const StitchGeometry g = small_geometry();
    for (Pattern pat : {Pattern::Raster, Pattern::Lawnmower, Pattern::Parallel})
        for (auto [r, c] : std::vector<std::pair<int, int>>{{1, 1}, {1, 3}, {2, 2}, {3, 2}, {4, 4}}) {
            const StitchPlan p = make_plan(pat, r, c, f, 5, g);
            CHECK_NOTHROW(validate_plan(p));
            const int o = pat == Pattern::Parallel ? -g.gap : g.overlap;
            CHECK(p.map_width == c * (g.patch_size - o) + o);
            CHECK(p.map_height == r * (g.patch_size - o) + o);
            const auto own = ownership(p);
            CHECK(std::none_of(own.begin(), own.end(), [](std::int32_t v) { return v < 0; }));
        }
}

TEST_CASE("task seeds depend on kind and coordinates only") {
    const LatentField f = test_field();
    const StitchPlan a = plan_raster(3, 3, f, 77), b = plan_parallel(3, 3, f, 77);
    for (const auto &t : a.tasks) {
        CHECK(t.seed == task_seed(77, t.kind, t.row, t.col));
        const auto it = std::find_if(b.tasks.begin(), b.tasks.end(), [&](const StitchTask &u) {
            return u.kind == TaskKind::Vertex && u.row == t.row && u.col == t.col;
        });
        REQUIRE(it != b.tasks.end());
        CHECK(it->seed == t.seed);
        CHECK(it->latent == t.latent);
    }
    CHECK(task_seed(1, TaskKind::HGap, 0, 0) != task_seed(1, TaskKind::VGap, 0, 0));
    CHECK(task_seed(1, TaskKind::Vertex, 0, 1) != task_seed(1, TaskKind::Vertex, 1, 0));
}

TEST_CASE("1x1 map equals the generator output") {
    const LatentField f = test_field();
    const StitchPlan p = plan_parallel(1, 1, f, 4, small_geometry());
    ReferenceGenerator g;
    const TerrainMap m = execute_plan(p, g);
    CHECK(m.raster == g.generate(p.tasks[0].latent, p.tasks[0].seed, 48, 48));
    CHECK(m.seams.empty());
}

TEST_CASE("2x1 parallel: gap context strips equal the vertex patches") {
    const LatentField f = test_field();
    const StitchGeometry g = small_geometry();
    const StitchPlan p = plan_parallel(1, 2, f, 4, g);
    ReferenceGenerator gen;
    for (FillMode mode : {FillMode::Unconditional, FillMode::Conditional}) {
        const TerrainMap m = execute_plan(p, gen, {mode, 1});
        for (const auto &t : p.tasks) {
            if (t.kind != TaskKind::Vertex) continue;
            const RgbdPatch v = gen.generate(t.latent, t.seed, 48, 48);
            CHECK(tile_of(m, t) == v);
        }
    }
}

TEST_CASE("execution is identical for 1 and 8 workers") {
    const LatentField f = test_field(8);
    ReferenceGenerator gen;
    for (Pattern pat : {Pattern::Parallel, Pattern::Raster}) {
        const StitchPlan p = make_plan(pat, 3, 3, f, 12, small_geometry());
        const TerrainMap a = execute_plan(p, gen, {FillMode::Unconditional, 1});
        const TerrainMap b = execute_plan(p, gen, {FillMode::Unconditional, 8});
        CHECK(a.raster == b.raster);
        CHECK(a.owner == b.owner);
    }
}

TEST_CASE("vertex content agrees across patterns away from blended borders") {
    const LatentField f = test_field(2);
    const StitchGeometry g = small_geometry();
    ReferenceGenerator gen;
    const int margin = g.overlap + ReferenceGeneratorOptions{}.blend_bandwidth + 1;
    std::vector<TerrainMap> maps;
    for (Pattern pat : {Pattern::Parallel, Pattern::Raster, Pattern::Lawnmower})
        maps.push_back(execute_plan(make_plan(pat, 2, 3, f, 6, g), gen));
    for (TaskId id : maps[0].plan.vertex_tasks()) {
        const StitchTask &t = maps[0].plan.tasks[id];
        const RgbdPatch ref = tile_of(maps[0], t);
        for (std::size_t k = 1; k < maps.size(); ++k) {
            const auto &tasks = maps[k].plan.tasks;
            const auto it = std::find_if(tasks.begin(), tasks.end(), [&](const StitchTask &u) {
                return u.kind == TaskKind::Vertex && u.row == t.row && u.col == t.col;
            });
            REQUIRE(it != tasks.end());
            const RgbdPatch other = tile_of(maps[k], *it);
            bool same = true;
            for (int y = margin; y < g.patch_size - margin; ++y)
                for (int x = margin; x < g.patch_size - margin; ++x)
                    for (int c = 0; c < 4; ++c)
                        if (ref.at(c, x, y) != other.at(c, x, y)) same = false;
            CHECK(same);
        }
    }
}

TEST_CASE("seam registry covers every inter-task boundary") {
    const LatentField f = test_field();
    for (Pattern pat : {Pattern::Parallel, Pattern::Raster}) {
        const StitchPlan p = make_plan(pat, 3, 2, f, 1, small_geometry());
        const auto own = ownership(p);
        const auto seams = seam_registry(p.map_width, p.map_height, own);
        std::set<std::tuple<bool, int, int>> covered; // vertical?, line, position
        for (const auto &s : seams)
            for (int i = s.begin; i < s.end; ++i) covered.insert({s.vertical, s.line, i});
        const int w = p.map_width, h = p.map_height;
        std::size_t boundaries = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto o = own[static_cast<std::size_t>(y) * w + x];
                if (x + 1 < w && own[static_cast<std::size_t>(y) * w + x + 1] != o) {
                    ++boundaries;
                    CHECK(covered.count({true, x, y}) == 1);
                }
                if (y + 1 < h && own[static_cast<std::size_t>(y + 1) * w + x] != o) {
                    ++boundaries;
                    CHECK(covered.count({false, y, x}) == 1);
                }
            }
        CHECK(covered.size() == boundaries);
    }
}

TEST_CASE("generator failure reports the failing task") {
    const StitchPlan p = plan_parallel(1, 2, test_field(), 1, small_geometry());
    FailingGenerator gen;
    try {
        execute_plan(p, gen, {FillMode::Unconditional, 2});
        FAIL("expected TaskError");
    } catch (const TaskError &e) {
        CHECK(p.tasks[e.task_id()].kind == TaskKind::HGap);
    }
}

TEST_CASE("plan validation catches cycles and bad coverage") {
    StitchPlan p = plan_parallel(2, 2, test_field(), 1, small_geometry());
    StitchPlan cyc = p;
    cyc.tasks[0].depends_on.push_back(cyc.tasks.back().id);
    CHECK_THROWS_AS(validate_plan(cyc), PlanError);
    StitchPlan hole = p;
    hole.tasks.back().region.w = 0;
    CHECK_THROWS_AS(validate_plan(hole), PlanError);
    StitchPlan early = p;
    early.tasks.back().depends_on.clear();
    CHECK_THROWS_AS(validate_plan(early), PlanError);
}

TEST_CASE("parse helpers") {
    CHECK(parse_pattern("raster") == Pattern::Raster);
    CHECK(parse_pattern("lawnmower") == Pattern::Lawnmower);
    CHECK(parse_fill_mode("cond") == FillMode::Conditional);
    CHECK(parse_fill_mode("uncond") == FillMode::Unconditional);
    CHECK_THROWS_AS(parse_pattern("spiral"), DomainError);
}

TEST_CASE("plan JSON and map directory round trips") {
    const auto dir = testutil::scratch("stitcher_roundtrip");
    const StitchPlan p = plan_parallel(2, 2, test_field(), 3, small_geometry());
    const StitchPlan q = plan_from_json(plan_to_json(p));
    CHECK(q.tasks.size() == p.tasks.size());
    for (std::size_t i = 0; i < p.tasks.size(); ++i) {
        CHECK(q.tasks[i].seed == p.tasks[i].seed);
        CHECK(q.tasks[i].latent == p.tasks[i].latent);
        CHECK(q.tasks[i].depends_on == p.tasks[i].depends_on);
        CHECK(q.tasks[i].region == p.tasks[i].region);
        CHECK(q.tasks[i].canvas == p.tasks[i].canvas);
    }
    ReferenceGenerator gen;
    const TerrainMap m = execute_plan(p, gen);
    save_map(m, (dir / "map").string());
    const TerrainMap n = load_map((dir / "map").string());
    CHECK(n.raster == m.raster);
    CHECK(n.seams == m.seams);
    CHECK(n.plan.tasks.size() == p.tasks.size());
}

} // TEST_SUITE
