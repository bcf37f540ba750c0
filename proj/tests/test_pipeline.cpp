#include "fractalsea/error.hpp"
#include "fractalsea/pipeline.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace fractalsea;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string message_of(const std::string &text) {
    try {
        config_from_json(text);
    } catch (const ValidationError &e) {
        return e.what();
    }
    return "";
}

PipelineConfig small_config(const fs::path &out) {
    PipelineConfig c;
    c.seed = 17;
    c.output_dir = out.string();
    c.rows = c.cols = 2;
    c.patch_size = 32;
    c.pca_corpus = 20;
    c.cloud_stride = 2;
    c.workers = 2;
    return c;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing is strict") {
    CHECK(message_of(R"({"seed": 1, "colz": 3})").find("'colz'") != std::string::npos);
    CHECK(message_of(R"({"field": {"levelz": 3}})").find("'field.levelz'") != std::string::npos);
    CHECK(message_of(R"({"rows": "four"})").find("rows") != std::string::npos);
    CHECK(message_of(R"({"pattern": "spiral"})") != "");
    CHECK(message_of(R"({"rows": 0})") != "");
    CHECK(message_of("{not json") != "");
    const PipelineConfig c = config_from_json(R"({"seed": 5, "rows": 2, "cols": 3, "pattern": "raster",
        "inpaint_mode": "cond", "field": {"levels": 2, "scale_s": 0.1}, "exports": ["elevation"]})");
    CHECK(c.seed == 5);
    CHECK(c.cols == 3);
    CHECK(c.pattern == Pattern::Raster);
    CHECK(c.inpaint_mode == FillMode::Conditional);
    CHECK(c.levels == 2);
    CHECK(c.scale_s == 0.1);
    CHECK(c.exports == std::vector<std::string>{"elevation"});
    const PipelineConfig d = config_from_json(config_to_json(c));
    CHECK(config_to_json(d) == config_to_json(c));
}

TEST_CASE("sha256") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("minimal single-tile run") {
    const auto dir = testutil::scratch("pipeline_min");
    PipelineConfig c = small_config(dir / "out");
    c.rows = c.cols = 1;
    const PipelineResult r = run_pipeline(c);
    CHECK(fs::exists(dir / "out" / "tiles" / "tile_r0_c0_rgb.png"));
    CHECK(fs::exists(dir / "out" / "tiles" / "tile_r0_c0_depth.png"));
    CHECK_FALSE(fs::exists(dir / "out" / "tiles" / "tile_r0_c1_rgb.png"));
    const json m = json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(m["version"] == kVersion);
    CHECK(m["generator"] == "reference");
    CHECK(m["artifacts"].size() == r.artifacts.size());
    for (const auto &rel : r.artifacts) CHECK(m["artifacts"][rel] == sha256_file((dir / "out" / rel).string()));
    const json s = json::parse(slurp(dir / "out" / "reports" / "summary.json"));
    CHECK(s["seam_score"].begin()->contains("warning"));
}

TEST_CASE("runs are reproducible across output directories") {
    const auto dir = testutil::scratch("pipeline_repro");
    run_pipeline(small_config(dir / "a"));
    run_pipeline(small_config(dir / "b"));
    std::size_t files = 0;
    for (const auto &e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "a");
        REQUIRE(fs::exists(dir / "b" / rel));
        ++files;
        if (rel == "manifest.json") {
            json a = json::parse(slurp(e.path())), b = json::parse(slurp(dir / "b" / rel));
            a.erase("timestamp");
            b.erase("timestamp");
            CHECK(a == b);
        } else {
            CHECK_MESSAGE(slurp(e.path()) == slurp(dir / "b" / rel), rel.string());
        }
    }
    CHECK(files > 15);
}

TEST_CASE("a failing stage leaves error.json") {
    const auto dir = testutil::scratch("pipeline_fail");
    fs::create_directories(dir / "out");
    std::ofstream(dir / "out" / "map") << "in the way";
    try {
        run_pipeline(small_config(dir / "out"));
        FAIL("expected StageError");
    } catch (const StageError &e) {
        CHECK(e.stage() == "stitch");
    }
    const json err = json::parse(slurp(dir / "out" / "error.json"));
    CHECK(err["stage"] == "stitch");
    CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("invalid configs are rejected before any work") {
    const auto dir = testutil::scratch("pipeline_invalid");
    PipelineConfig c = small_config(dir / "out");
    c.patch_size = 4;
    CHECK_THROWS_AS(run_pipeline(c), ValidationError);
    CHECK_FALSE(fs::exists(dir / "out"));
}

} // TEST_SUITE
