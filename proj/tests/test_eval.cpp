#include "fractalsea/error.hpp"
#include "fractalsea/eval.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <json.hpp>

using namespace fractalsea;

namespace {

// Writes latent[0] and latent[1] into the red and green channels.
class EncodingGenerator final : public ConditionalGenerator {
public:
    RgbdPatch generate(const LatentVector &l, std::uint64_t, int w, int h) const override {
        RgbdPatch p(w, h, 0.5f);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                p.at(0, x, y) = static_cast<float>(0.5 + 0.25 * l[0]);
                p.at(1, x, y) = static_cast<float>(0.5 + 0.25 * l[1]);
            }
        return p;
    }
    RgbdPatch inpaint(const RgbdPatch &patch, const PixelMask &, const InpaintMode &, std::uint64_t) const override {
        return patch;
    }
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "encoding"; }
};

class DecodingExtractor final : public FeatureExtractor {
public:
    FeatureVector extract(const RgbdPatch &p) const override {
        return {(p.at(0, 0, 0) - 0.5) * 4.0, (p.at(1, 0, 0) - 0.5) * 4.0};
    }
    std::size_t feature_dim() const override { return 2; }
};

PcaModel identity_pca() {
    PcaModel m;
    m.mean = {0, 0};
    m.components = {{1, 0}, {0, 1}};
    m.explained_variance = {1, 1};
    return m;
}

LatentField field(std::uint64_t seed, double s = 0.6) {
    FractalParams p;
    p.levels = 3;
    p.seed = seed;
    p.scale_s = s;
    p.corner_latents = {LatentVector{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
    return generate_field(p);
}

StitchGeometry geom(int p) {
    StitchGeometry g;
    g.patch_size = p;
    g.gap = p / 2;
    g.overlap = p / 4;
    g.context = 8;
    return g;
}

} // namespace

TEST_SUITE("eval") {

TEST_CASE("latent MSE is zero for a lossless generator and extractor") {
    const StitchPlan plan = plan_parallel(3, 3, field(1), 2, geom(32));
    const TerrainMap map = execute_plan(plan, EncodingGenerator{});
    const LatentMseResult r = latent_mse(map, plan, DecodingExtractor{}, identity_pca());
    CHECK(r.tiles.size() == 9);
    CHECK(r.mean < 1e-12);
    for (const auto &t : r.tiles) CHECK(plan.tasks[t.task].kind == TaskKind::Vertex);
}

TEST_CASE("latent MSE survives a save and reload of the map") {
    const auto dir = testutil::scratch("eval_mse");
    ReferenceGenerator gen;
    ReferenceExtractor ex;
    std::vector<FeatureVector> corpus;
    for (int i = 0; i < 40; ++i)
        corpus.push_back(ex.extract(gen.generate({-2.0 + 0.1 * i, 1.0 - 0.05 * i}, static_cast<std::uint64_t>(i), 64, 64)));
    const PcaModel pca = fit_pca(corpus, 2);
    const StitchPlan plan = plan_parallel(4, 4, field(5), 9, geom(64));
    const TerrainMap map = execute_plan(plan, gen);
    save_map(map, (dir / "map").string());
    const TerrainMap back = load_map((dir / "map").string());
    const LatentMseResult a = latent_mse(map, plan, ex, pca), b = latent_mse(back, back.plan, ex, pca);
    REQUIRE(a.tiles.size() == 16);
    CHECK(a.mean == b.mean);
    double mean = 0;
    for (const auto &t : plan.tasks) {
        if (t.kind != TaskKind::Vertex) continue;
        const LatentVector pred = predict_latent(pca, ex.extract(tile_of(map, t)));
        mean += ((pred[0] - t.latent[0]) * (pred[0] - t.latent[0]) + (pred[1] - t.latent[1]) * (pred[1] - t.latent[1])) / 2;
    }
    CHECK(a.mean == doctest::Approx(mean / 16).epsilon(1e-12));
}

TEST_CASE("latent MSE dimension checks") {
    const StitchPlan plan = plan_parallel(1, 1, field(1), 2, geom(32));
    const TerrainMap map = execute_plan(plan, EncodingGenerator{});
    CHECK_THROWS_AS(latent_mse(map, plan, ReferenceExtractor{}, identity_pca()), DomainError);
    PcaModel one = identity_pca();
    one.components.pop_back();
    one.explained_variance.pop_back();
    CHECK_THROWS_AS(latent_mse(map, plan, DecodingExtractor{}, one), DomainError);
}

TEST_CASE("seam score") {
    SUBCASE("single tile has no seams") {
        const StitchPlan plan = plan_parallel(1, 1, field(1), 2, geom(32));
        const SeamScore s = seam_score(execute_plan(plan, ReferenceGenerator{}));
        CHECK(s.aggregate == 0.0);
        CHECK_FALSE(s.warning.empty());
    }
    SUBCASE("constant raster scores zero") {
        RgbdPatch r(8, 8, 0.3f);
        std::vector<std::int32_t> owner(64);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) owner[static_cast<std::size_t>(y) * 8 + x] = x < 4 ? 0 : 1;
        const SeamScore s = seam_score(r, seam_registry(8, 8, owner), owner);
        CHECK(s.aggregate == 0.0);
        CHECK(s.pairs == 8);
        REQUIRE(s.per_seam.size() == 1);
        CHECK(s.per_seam[0] == 0.0);
    }
    SUBCASE("hand example") {
        RgbdPatch r(4, 1);
        const float v[4] = {0.0f, 0.1f, 0.5f, 0.6f};
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) r.at(c, x, 0) = v[x];
        const std::vector<std::int32_t> owner{0, 0, 1, 1};
        const SeamScore s = seam_score(r, seam_registry(4, 1, owner), owner);
        CHECK(s.baseline == doctest::Approx(0.01).epsilon(1e-5));
        CHECK(s.per_seam[0] == doctest::Approx(0.15).epsilon(1e-5));
        CHECK(s.aggregate == doctest::Approx(0.15).epsilon(1e-5));
        // a smooth seam scores negative per seam, zero in aggregate
        r.at(0, 2, 0) = r.at(1, 2, 0) = r.at(2, 2, 0) = 0.15f;
        r.at(0, 3, 0) = r.at(1, 3, 0) = r.at(2, 3, 0) = 0.25f;
        const SeamScore t = seam_score(r, seam_registry(4, 1, owner), owner);
        CHECK(t.per_seam[0] < 0);
        CHECK(t.aggregate == 0.0);
    }
}

TEST_CASE("critical path rows") {
    const CriticalPathRow r = critical_path_row(plan_parallel(3, 3, field(1), 1));
    CHECK(r.critical_path == 3);
    CHECK(r.stage_count == 4);
    CHECK(critical_path_row(plan_raster(3, 3, field(1), 1)).critical_path == 9);
}

TEST_CASE("diversity index preconditions and trend") {
    ReferenceGenerator gen;
    ReferenceExtractor ex;
    auto sample = [&](double s, int n) {
        DiversitySample d;
        d.s = s;
        d.maps.push_back(execute_plan(plan_parallel(n, n, field(3, s), 3, geom(32)), gen));
        return d;
    };
    std::vector<DiversitySample> one{sample(0.0, 4)};
    CHECK_THROWS_AS(diversity_index(one, ex), DomainError);
    std::vector<DiversitySample> small{sample(0.0, 2), sample(1.0, 2)};
    CHECK_THROWS_AS(diversity_index(small, ex), DomainError);
    std::vector<DiversitySample> ok{sample(0.0, 4), sample(2.0, 4)};
    const auto rows = diversity_index(ok, ex);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].tiles == 16);
    CHECK(rows[0].pairs == 24);
    CHECK(rows[1].index > rows[0].index);
}

TEST_CASE("report files") {
    const auto dir = testutil::scratch("eval_report");
    EvalReport rep;
    const StitchPlan plan = plan_parallel(2, 2, field(1), 2, geom(32));
    const TerrainMap map = execute_plan(plan, EncodingGenerator{});
    rep.latent.push_back({Pattern::Parallel, latent_mse(map, plan, DecodingExtractor{}, identity_pca())});
    rep.seams.push_back({"parallel", seam_score(map)});
    rep.critical_paths.push_back(critical_path_row(plan));
    write_report(rep, dir.string());
    for (const char *f : {"latent_mse.csv", "seams.csv", "critical_path.csv", "diversity.csv", "summary.json"})
        CHECK(std::filesystem::exists(dir / f));
    std::ifstream in(dir / "latent_mse.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first == std::string("# ") + kReportScopeNote);
    std::ifstream js(dir / "summary.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["note"] == kReportScopeNote);
}

} // TEST_SUITE
