#include "fractalsea/pipeline.hpp"

#include "fractalsea/error.hpp"
#include "fractalsea/eval.hpp"
#include "fractalsea/rng.hpp"
#include "fractalsea/splat.hpp"
#include "fractalsea/terrain.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fractalsea {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kExports = {"pointcloud", "elevation", "splat"};

void reject_unknown(const json &j, const std::vector<std::string> &allowed, const std::string &prefix) {
    if (!j.is_object()) throw ValidationError("'" + (prefix.empty() ? std::string("config") : prefix) + "' must be an object");
    for (const auto &[key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("unknown config key '" + prefix + key + "'");
}

template <typename T>
void read(const json &j, const char *key, T &out, const std::string &prefix = "") {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ValidationError("config key '" + prefix + key + "' has the wrong type");
    }
}

std::string read_text(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> list_files(const fs::path &root) {
    std::vector<std::string> files;
    for (const auto &e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

void PipelineConfig::validate() const {
    if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
    if (rows < 1 || cols < 1) throw ValidationError("rows and cols must be >= 1");
    if (rows > 64 || cols > 64) throw ValidationError("rows and cols must be <= 64");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (patch_size < 8) throw ValidationError("patch_size must be >= 8");
    if (generator != "reference") throw ValidationError("unknown generator '" + generator + "'");
    if (pca_corpus < 2) throw ValidationError("pca_corpus must be >= 2");
    if (pca_dim < 1 || pca_dim > static_cast<int>(ReferenceExtractor::kDim))
        throw ValidationError("pca_dim must be in [1, " + std::to_string(ReferenceExtractor::kDim) + "]");
    if (cloud_stride < 1) throw ValidationError("cloud_stride must be >= 1");
    if (!(height_scale >= 0) || !std::isfinite(height_scale)) throw ValidationError("height_scale must be >= 0");
    if (!(splat_opacity >= 0 && splat_opacity <= 1)) throw ValidationError("splat_opacity must be in [0, 1]");
    for (const auto &e : exports)
        if (std::find(kExports.begin(), kExports.end(), e) == kExports.end())
            throw ValidationError("unknown export '" + e + "'");
    FractalParams fp;
    fp.levels = levels;
    fp.scale_s = scale_s;
    fp.decay = decay;
    fp.cell_extent = cell_extent;
    fp.corner_latents = corners;
    try {
        fp.validate();
        StitchGeometry g;
        g.patch_size = patch_size;
        g.gap = patch_size / 2;
        g.overlap = patch_size / 4;
        g.validate(pattern);
    } catch (const std::exception &e) {
        throw ValidationError(e.what());
    }
}

PipelineConfig config_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, {"seed", "output_dir", "rows", "cols", "pattern", "inpaint_mode", "workers", "generator",
                       "patch_size", "field", "pca", "exports", "pointcloud", "splat", "eval"},
                   "");
    PipelineConfig c;
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    read(j, "rows", c.rows);
    read(j, "cols", c.cols);
    read(j, "workers", c.workers);
    read(j, "generator", c.generator);
    read(j, "patch_size", c.patch_size);
    read(j, "exports", c.exports);
    read(j, "eval", c.eval);
    try {
        if (j.contains("pattern")) c.pattern = parse_pattern(j.at("pattern").get<std::string>());
        if (j.contains("inpaint_mode")) c.inpaint_mode = parse_fill_mode(j.at("inpaint_mode").get<std::string>());
    } catch (const json::exception &) {
        throw ValidationError("pattern and inpaint_mode must be strings");
    } catch (const DomainError &e) {
        throw ValidationError(e.what());
    }
    if (j.contains("field")) {
        const json &f = j.at("field");
        reject_unknown(f, {"levels", "scale_s", "decay", "cell_extent", "corners"}, "field.");
        read(f, "levels", c.levels, "field.");
        read(f, "scale_s", c.scale_s, "field.");
        read(f, "decay", c.decay, "field.");
        read(f, "cell_extent", c.cell_extent, "field.");
        if (f.contains("corners")) {
            std::vector<LatentVector> corners;
            read(f, "corners", corners, "field.");
            if (corners.size() != 4) throw ValidationError("field.corners needs 4 latent vectors (TL, TR, BL, BR)");
            for (int i = 0; i < 4; ++i) c.corners[i] = corners[static_cast<std::size_t>(i)];
        }
    }
    if (j.contains("pca")) {
        const json &p = j.at("pca");
        reject_unknown(p, {"corpus", "dim"}, "pca.");
        read(p, "corpus", c.pca_corpus, "pca.");
        read(p, "dim", c.pca_dim, "pca.");
    }
    if (j.contains("pointcloud")) {
        const json &p = j.at("pointcloud");
        reject_unknown(p, {"stride", "height_scale"}, "pointcloud.");
        read(p, "stride", c.cloud_stride, "pointcloud.");
        read(p, "height_scale", c.height_scale, "pointcloud.");
    }
    if (j.contains("splat")) {
        const json &p = j.at("splat");
        reject_unknown(p, {"opacity"}, "splat.");
        read(p, "opacity", c.splat_opacity, "splat.");
    }
    c.validate();
    return c;
}

std::string config_to_json(const PipelineConfig &c, bool include_output_dir) {
    json j;
    j["seed"] = c.seed;
    if (include_output_dir) j["output_dir"] = c.output_dir;
    j["rows"] = c.rows;
    j["cols"] = c.cols;
    j["pattern"] = to_string(c.pattern);
    j["inpaint_mode"] = to_string(c.inpaint_mode);
    j["workers"] = c.workers;
    j["generator"] = c.generator;
    j["patch_size"] = c.patch_size;
    j["field"] = {{"levels", c.levels},
                  {"scale_s", c.scale_s},
                  {"decay", c.decay},
                  {"cell_extent", c.cell_extent},
                  {"corners", std::vector<LatentVector>(c.corners.begin(), c.corners.end())}};
    j["pca"] = {{"corpus", c.pca_corpus}, {"dim", c.pca_dim}};
    j["exports"] = c.exports;
    j["pointcloud"] = {{"stride", c.cloud_stride}, {"height_scale", c.height_scale}};
    j["splat"] = {{"opacity", c.splat_opacity}};
    j["eval"] = c.eval;
    return j.dump(2);
}

PipelineConfig load_config(const std::string &path) { return config_from_json(read_text(path)); }

std::unique_ptr<ConditionalGenerator> make_generator(const std::string &name) {
    if (name == "reference") return std::make_unique<ReferenceGenerator>();
    throw ValidationError("unknown generator '" + name + "'");
}

PcaModel calibrate_pca(const ConditionalGenerator &generator, const FeatureExtractor &extractor, int corpus_size,
                       int pca_dim, std::size_t latent_dim, std::uint64_t seed, int patch_size, double range) {
    if (corpus_size < 2) throw DomainError("calibration corpus needs at least 2 patches");
    if (pca_dim < 1) throw DomainError("PCA dimension must be >= 1");
    std::vector<FeatureVector> features(static_cast<std::size_t>(corpus_size));
    std::vector<LatentVector> latents(static_cast<std::size_t>(corpus_size), LatentVector(latent_dim));
    for (int i = 0; i < corpus_size; ++i) {
        auto &l = latents[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < latent_dim; ++k)
            l[k] = range * (2.0 * rng::uniform(seed, static_cast<std::uint64_t>(i), k, 0x6361ULL) - 1.0);
        const std::uint64_t patch_seed = rng::hash_key(seed, {static_cast<std::uint64_t>(i), 0x7061ULL});
        features[static_cast<std::size_t>(i)] = extractor.extract(generator.generate(l, patch_seed, patch_size, patch_size));
    }
    PcaModel pca = fit_pca(features, static_cast<std::size_t>(pca_dim));
    std::vector<LatentVector> projected;
    projected.reserve(features.size());
    for (const auto &f : features) projected.push_back(project(pca, f));
    pca.readout = fit_readout(projected, latents);
    return pca;
}

std::string sha256_hex(const std::string &bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char *hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::string &path) { return sha256_hex(read_text(path)); }

PipelineResult run_pipeline(const PipelineConfig &config) {
    config.validate();
    const fs::path root(config.output_dir);
    fs::create_directories(root);
    fs::remove(root / "error.json");
    std::string stage = "setup";

    const std::uint64_t field_seed = rng::hash_key(config.seed, {0x6669656c64ULL});
    const std::uint64_t pca_seed = rng::hash_key(config.seed, {0x706361ULL});
    const std::uint64_t stitch_seed = rng::hash_key(config.seed, {0x737469746368ULL});

    try {
        write_text(root / "config.json", config_to_json(config, false) + "\n");
        const auto generator = make_generator(config.generator);
        const ReferenceExtractor extractor;

        stage = "field";
        fs::create_directories(root / "field");
        FractalParams fp;
        fp.levels = config.levels;
        fp.scale_s = config.scale_s;
        fp.decay = config.decay;
        fp.seed = field_seed;
        fp.corner_latents = config.corners;
        fp.cell_extent = config.cell_extent;
        const LatentField field = generate_field(fp, config.workers);
        save_field(field, (root / "field" / "field.csv").string());

        PcaModel pca;
        if (config.eval) {
            stage = "pca";
            pca = calibrate_pca(*generator, extractor, config.pca_corpus, config.pca_dim, field.dim(), pca_seed,
                                config.patch_size);
            save_pca(pca, (root / "field" / "pca.csv").string());
        }

        stage = "stitch";
        StitchGeometry geom;
        geom.patch_size = config.patch_size;
        geom.gap = config.patch_size / 2;
        geom.overlap = config.patch_size / 4;
        const StitchPlan plan = make_plan(config.pattern, config.rows, config.cols, field, stitch_seed, geom);
        validate_plan(plan);
        const TerrainMap map = execute_plan(plan, *generator, {config.inpaint_mode, config.workers});
        save_map(map, (root / "map").string());
        fs::create_directories(root / "tiles");
        for (TaskId id : plan.vertex_tasks()) {
            const StitchTask &t = plan.tasks[id];
            write_patch_pngs(tile_of(map, t),
                             (root / "tiles" / ("tile_r" + std::to_string(t.row) + "_c" + std::to_string(t.col))).string());
        }

        const auto wants = [&](const char *e) {
            return std::find(config.exports.begin(), config.exports.end(), e) != config.exports.end();
        };
        if (wants("pointcloud") || wants("elevation") || wants("splat")) {
            stage = "fuse";
            fs::create_directories(root / "cloud");
            if (wants("elevation")) export_elevation_png(elevation(map), (root / "cloud" / "elevation.png").string());
            if (wants("pointcloud") || wants("splat")) {
                const PointCloud pc = to_pointcloud(map, config.cloud_stride, config.height_scale);
                if (wants("pointcloud")) export_ply(pc, (root / "cloud" / "points.ply").string());
                if (wants("splat")) {
                    stage = "splat";
                    const GaussianCloud gc = init_from_pointcloud(pc, 0.0, config.splat_opacity);
                    save_cloud(gc, (root / "cloud" / "gaussians.ply").string());
                    const Camera cam = Camera::top_down(map.width(), map.height(), 1.0, config.height_scale + 1000.0);
                    save_camera(cam, (root / "cloud" / "camera.json").string());
                    RenderSettings rs;
                    rs.workers = config.workers;
                    write_rgb_png(render(gc, cam, rs), (root / "cloud" / "render.png").string());
                }
            }
        }

        if (config.eval) {
            stage = "eval";
            EvalReport report;
            report.latent.emplace_back(plan.pattern, latent_mse(map, plan, extractor, pca));
            report.seams.emplace_back(to_string(plan.pattern) + "/" + to_string(config.inpaint_mode), seam_score(map));
            for (Pattern p : {Pattern::Raster, Pattern::Lawnmower, Pattern::Parallel})
                report.critical_paths.push_back(critical_path_row(make_plan(p, config.rows, config.cols, field, stitch_seed, geom)));
            write_report(report, (root / "reports").string());
        }

        stage = "manifest";
        PipelineResult result;
        result.output_dir = root.string();
        json artifacts = json::object();
        for (const auto &rel : list_files(root)) {
            if (rel == "manifest.json") continue;
            artifacts[rel] = sha256_file((root / rel).string());
            result.artifacts.push_back(rel);
        }
        json manifest;
        manifest["version"] = kVersion;
        manifest["inputs_hash"] = sha256_hex(config_to_json(config, false));
        manifest["config"] = json::parse(config_to_json(config, false));
        manifest["seeds"] = {{"global", config.seed}, {"field", field_seed}, {"pca", pca_seed}, {"stitch", stitch_seed}};
        manifest["generator"] = generator->name();
        manifest["artifacts"] = artifacts;
        manifest["timestamp"] = utc_timestamp();
        write_text(root / "manifest.json", manifest.dump(2) + "\n");
        return result;
    } catch (const std::exception &e) {
        json err{{"stage", stage}, {"message", e.what()}};
        try {
            write_text(root / "error.json", err.dump(2) + "\n");
        } catch (...) {
        }
        throw StageError(stage, e.what());
    }
}

} // namespace fractalsea
