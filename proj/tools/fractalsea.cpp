// fractalsea: command-line entry point.
// Exit codes: 0 success, 2 usage, 3 validation, 4 runtime.

#include "fractalsea/embedding.hpp"
#include "fractalsea/error.hpp"
#include "fractalsea/eval.hpp"
#include "fractalsea/latent_field.hpp"
#include "fractalsea/patchgen.hpp"
#include "fractalsea/pipeline.hpp"
#include "fractalsea/splat.hpp"
#include "fractalsea/stitcher.hpp"
#include "fractalsea/terrain.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace fractalsea;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

LatentVector parse_latent(const std::string &text) {
    LatentVector v;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception &) {
            throw ValidationError("invalid latent component '" + tok + "'");
        }
    }
    if (v.empty()) throw ValidationError("empty latent vector");
    return v;
}

void complete(const std::string &command, json fields) {
    fields["command"] = command;
    fields["status"] = "ok";
    std::cout << fields.dump() << std::endl;
}

StitchGeometry geometry_for(int patch_size) {
    StitchGeometry g;
    g.patch_size = patch_size;
    g.gap = patch_size / 2;
    g.overlap = patch_size / 4;
    return g;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Fractal-latent terrain synthesis: latent fields, stitched RGBD maps, point clouds and Gaussian splats"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // field
    auto *field_cmd = app.add_subcommand("field", "Generate a diamond-square latent field (CSV)");
    std::uint64_t seed = 0;
    std::string out;
    int levels = 3;
    double scale = 0.6, decay = 0.5, cell_extent = 1.0;
    std::string corners_file;
    std::vector<std::string> corner_args;
    unsigned workers = 1;
    field_cmd->add_option("--seed", seed, "Random seed");
    field_cmd->add_option("--out", out, "Output CSV")->required();
    field_cmd->add_option("--levels", levels, "Subdivision levels (grid side 2^levels + 1)");
    field_cmd->add_option("--scale", scale, "Initial noise scale s");
    field_cmd->add_option("--decay", decay, "Noise decay per level");
    field_cmd->add_option("--cell-extent", cell_extent, "World units per grid cell");
    field_cmd->add_option("--corners", corners_file, "CSV with four corner latents (TL, TR, BL, BR)");
    field_cmd->add_option("--corner", corner_args, "Corner latent 'a,b,...' (give four: TL TR BL BR)")->expected(4);
    field_cmd->add_option("--workers", workers, "Worker threads");

    // gen
    auto *gen_cmd = app.add_subcommand("gen", "Generate one RGBD patch from a latent");
    std::string latent_arg = "0,0";
    int patch_size = kDefaultPatchSize;
    gen_cmd->add_option("--seed", seed, "Random seed");
    gen_cmd->add_option("--out", out, "Output prefix (writes PREFIX_rgb.png, PREFIX_depth.png, PREFIX.rgbd)")->required();
    gen_cmd->add_option("--latent", latent_arg, "Latent vector 'a,b,...'");
    gen_cmd->add_option("--size", patch_size, "Patch side in pixels");

    // stitch
    auto *stitch_cmd = app.add_subcommand("stitch", "Plan and execute an inpaint-stitched map");
    std::string field_file, pattern_arg = "parallel", mode_arg = "unconditional";
    int rows = 4, cols = 4;
    stitch_cmd->add_option("--seed", seed, "Global stitch seed");
    stitch_cmd->add_option("--out", out, "Output map directory")->required();
    stitch_cmd->add_option("--field", field_file, "Latent field CSV")->required();
    stitch_cmd->add_option("--pattern", pattern_arg, "raster | lawnmower | parallel");
    stitch_cmd->add_option("--inpaint,--mode", mode_arg, "Gap fill: uncond | cond | naive");
    std::string grid_arg;
    auto *grid_opt = stitch_cmd->add_option("--grid", grid_arg, "Grid as RxC, e.g. 4x4");
    stitch_cmd->add_option("--rows", rows, "Grid rows")->excludes(grid_opt);
    stitch_cmd->add_option("--cols", cols, "Grid columns")->excludes(grid_opt);
    stitch_cmd->add_option("--workers", workers, "Worker threads");
    stitch_cmd->add_option("--patch-size", patch_size, "Patch side in pixels");

    // export
    auto *export_cmd = app.add_subcommand("export", "Export a map as a point cloud or elevation map");
    std::string map_dir, format = "ply";
    int stride = 1;
    double height_scale = 32.0, cell_size = 1.0;
    export_cmd->add_option("--seed", seed, "Unused; accepted for uniformity");
    export_cmd->add_option("--out", out, "Output file")->required();
    export_cmd->add_option("--map", map_dir, "Map directory")->required();
    export_cmd->add_option("--what,--format", format, "ply | elevation");
    export_cmd->add_option("--stride", stride, "Pixel stride");
    export_cmd->add_option("--height-scale", height_scale, "Height of depth 0 in world units");
    export_cmd->add_option("--cell-size", cell_size, "World units per pixel");

    // render
    auto *render_cmd = app.add_subcommand("render", "Render a Gaussian cloud");
    std::string cloud_file, camera_file;
    std::vector<double> background{0.0, 0.0, 0.0};
    render_cmd->add_option("--seed", seed, "Unused; accepted for uniformity");
    render_cmd->add_option("--out", out, "Output PNG")->required();
    render_cmd->add_option("--cloud", cloud_file, "Gaussian cloud PLY")->required();
    render_cmd->add_option("--camera", camera_file, "Camera JSON")->required();
    render_cmd->add_option("--background", background, "Background RGB")->expected(3);
    render_cmd->add_option("--workers", workers, "Worker threads");

    // refine
    auto *refine_cmd = app.add_subcommand("refine", "SDS appearance refinement against a target image");
    std::string target_file;
    int iters = 100, t_min = 20, t_max = 980;
    double step = 0.5;
    std::vector<std::string> camera_files;
    refine_cmd->add_option("--seed", seed, "Timestep and noise seed");
    refine_cmd->add_option("--out", out, "Refined cloud PLY")->required();
    refine_cmd->add_option("--cloud", cloud_file, "Gaussian cloud PLY")->required();
    refine_cmd->add_option("--target", target_file, "Target PNG seen by the ground-truth denoiser")->required();
    refine_cmd->add_option("--iters", iters, "Iterations");
    refine_cmd->add_option("--step", step, "Gradient descent step size");
    refine_cmd->add_option("--camera", camera_files, "Camera JSON (repeatable; default: top-down at target size)");
    refine_cmd->add_option("--t-min", t_min, "Smallest sampled timestep");
    refine_cmd->add_option("--t-max", t_max, "Largest sampled timestep");

    // eval
    auto *eval_cmd = app.add_subcommand("eval", "Latent MSE, seam score and critical path report for a map");
    std::string plan_file, pca_file;
    eval_cmd->add_option("--seed", seed, "Unused; accepted for uniformity");
    eval_cmd->add_option("--report,--out", out, "Report directory")->required();
    eval_cmd->add_option("--map", map_dir, "Map directory")->required();
    eval_cmd->add_option("--plan", plan_file, "Plan JSON (default: MAP/plan.json)");
    eval_cmd->add_option("--pca", pca_file, "PCA model CSV")->required();

    // pca-fit
    auto *pca_cmd = app.add_subcommand("pca-fit", "Fit PCA and latent readout on a generated calibration corpus");
    int corpus = 200, dim = 2, latent_dim = 2;
    double range = 1.0;
    pca_cmd->add_option("--seed", seed, "Corpus seed");
    pca_cmd->add_option("--out", out, "Output PCA CSV")->required();
    std::string corpus_dir;
    auto *corpus_opt = pca_cmd->add_option("--corpus", corpus_dir, "Directory of NAME_rgb.png / NAME_depth.png patches");
    pca_cmd->add_option("--generate", corpus, "Generate this many calibration patches instead (fits a latent readout)")
        ->excludes(corpus_opt);
    pca_cmd->add_option("--dim", dim, "PCA dimension");
    pca_cmd->add_option("--latent-dim", latent_dim, "Generator latent dimension");
    pca_cmd->add_option("--range", range, "Latents drawn uniformly from [-range, range]");
    pca_cmd->add_option("--size", patch_size, "Patch side in pixels");

    // run
    auto *run_cmd = app.add_subcommand("run", "Run the full pipeline from a JSON config");
    std::string config_file;
    run_cmd->add_option("--config", config_file, "Pipeline config JSON")->required();
    auto *run_seed = run_cmd->add_option("--seed", seed, "Override the config seed");
    auto *run_out = run_cmd->add_option("--out", out, "Override the output directory");
    auto *run_workers = run_cmd->add_option("--workers", workers, "Override the worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*field_cmd) {
            FractalParams fp;
            fp.levels = levels;
            fp.scale_s = scale;
            fp.decay = decay;
            fp.seed = seed;
            fp.cell_extent = cell_extent;
            if (!corners_file.empty() && !corner_args.empty())
                throw ValidationError("give either --corners or --corner, not both");
            if (!corners_file.empty()) fp.corner_latents = load_corners(corners_file);
            for (std::size_t i = 0; i < corner_args.size(); ++i) fp.corner_latents[i] = parse_latent(corner_args[i]);
            const LatentField field = generate_field(fp, workers);
            save_field(field, out);
            complete("field", {{"out", out}, {"resolution", field.resolution()}, {"dim", field.dim()}, {"seed", seed}});
        } else if (*gen_cmd) {
            const LatentVector latent = parse_latent(latent_arg);
            const RgbdPatch patch = reference_generate(latent, seed, patch_size, patch_size);
            write_patch_pngs(patch, out);
            write_rgbd_raw(patch, out + ".rgbd");
            complete("gen", {{"out", out}, {"latent", latent}, {"size", patch_size}, {"seed", seed}});
        } else if (*stitch_cmd) {
            if (!grid_arg.empty()) {
                const auto x = grid_arg.find_first_of("xX");
                try {
                    if (x == std::string::npos) throw std::invalid_argument(grid_arg);
                    std::size_t a = 0, b = 0;
                    rows = std::stoi(grid_arg.substr(0, x), &a);
                    cols = std::stoi(grid_arg.substr(x + 1), &b);
                    if (a != x || b != grid_arg.size() - x - 1) throw std::invalid_argument(grid_arg);
                } catch (const std::exception &) {
                    throw ValidationError("--grid must look like RxC, got '" + grid_arg + "'");
                }
            }
            const LatentField field = load_field(field_file);
            const StitchPlan plan = make_plan(parse_pattern(pattern_arg), rows, cols, field, seed, geometry_for(patch_size));
            validate_plan(plan);
            ReferenceGenerator gen;
            const TerrainMap map = execute_plan(plan, gen, {parse_fill_mode(mode_arg), workers});
            save_map(map, out);
            complete("stitch", {{"out", out},
                                {"pattern", to_string(plan.pattern)},
                                {"width", map.width()},
                                {"height", map.height()},
                                {"tasks", plan.tasks.size()},
                                {"critical_path", plan.critical_path()},
                                {"stage_count", plan.stage_count()},
                                {"seed", seed}});
        } else if (*export_cmd) {
            const TerrainMap map = load_map(map_dir);
            if (format == "ply") {
                const PointCloud pc = to_pointcloud(map, stride, height_scale, cell_size);
                export_ply(pc, out);
                complete("export", {{"out", out}, {"format", format}, {"points", pc.points.size()}});
            } else if (format == "elevation") {
                export_elevation_png(elevation(map, cell_size), out);
                complete("export", {{"out", out}, {"format", format}, {"width", map.width()}, {"height", map.height()}});
            } else {
                throw ValidationError("unknown export format '" + format + "' (ply | elevation)");
            }
        } else if (*render_cmd) {
            const GaussianCloud cloud = load_cloud(cloud_file);
            const Camera cam = load_camera(camera_file);
            RenderSettings rs;
            rs.background = {background[0], background[1], background[2]};
            rs.workers = workers;
            write_rgb_png(render(cloud, cam, rs), out);
            complete("render", {{"out", out}, {"gaussians", cloud.gaussians.size()}, {"width", cam.width}, {"height", cam.height}});
        } else if (*refine_cmd) {
            const GaussianCloud cloud = load_cloud(cloud_file);
            const RgbImage target = read_rgb_png(target_file);
            std::vector<Camera> cams;
            for (const auto &f : camera_files) cams.push_back(load_camera(f));
            if (cams.empty()) cams.push_back(Camera::top_down(target.width, target.height));
            for (const auto &c : cams)
                if (c.width != target.width || c.height != target.height)
                    throw ValidationError("camera image size does not match the target");
            const GroundTruthDenoiser oracle(target);
            RefineOptions opt;
            opt.iterations = iters;
            opt.step_size = step;
            opt.t_min = t_min;
            opt.t_max = t_max;
            opt.seed = seed;
            const RefineResult r = refine(cloud, cams, oracle, opt);
            save_cloud(r.cloud, out);
            {
                std::ofstream trace(out + ".loss.csv");
                trace << "iteration,mean_squared_residual\n";
                char buf[32];
                for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.17g", r.loss_trace[i]);
                    trace << i << ',' << buf << "\n";
                }
            }
            complete("refine", {{"out", out},
                                {"iterations", iters},
                                {"loss_first", r.loss_trace.empty() ? 0.0 : r.loss_trace.front()},
                                {"loss_last", r.loss_trace.empty() ? 0.0 : r.loss_trace.back()},
                                {"seed", seed}});
        } else if (*eval_cmd) {
            TerrainMap map = load_map(map_dir);
            const StitchPlan plan =
                load_plan(plan_file.empty() ? (std::filesystem::path(map_dir) / "plan.json").string() : plan_file);
            map.plan = plan;
            const PcaModel pca = load_pca(pca_file);
            ReferenceExtractor ex;
            EvalReport report;
            const LatentMseResult mse = latent_mse(map, plan, ex, pca);
            report.latent.emplace_back(plan.pattern, mse);
            const SeamScore seams = seam_score(map);
            if (!seams.warning.empty()) std::cerr << "warning: " << seams.warning << "\n";
            report.seams.emplace_back(to_string(plan.pattern), seams);
            report.critical_paths.push_back(critical_path_row(plan));
            write_report(report, out);
            complete("eval", {{"out", out},
                              {"latent_mse", mse.mean},
                              {"seam_score", seams.aggregate},
                              {"critical_path", plan.critical_path()},
                              {"note", kReportScopeNote}});
        } else if (*pca_cmd) {
            if (latent_dim < 1) throw ValidationError("--latent-dim must be >= 1");
            if (dim < 1) throw ValidationError("--dim must be >= 1");
            ReferenceGenerator gen;
            ReferenceExtractor ex;
            PcaModel pca;
            std::size_t corpus_size = 0;
            if (!corpus_dir.empty()) {
                std::vector<std::string> prefixes;
                for (const auto &e : std::filesystem::directory_iterator(corpus_dir)) {
                    const std::string name = e.path().filename().string();
                    const std::string suffix = "_rgb.png";
                    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
                        prefixes.push_back((e.path().parent_path() / name.substr(0, name.size() - suffix.size())).string());
                }
                std::sort(prefixes.begin(), prefixes.end());
                std::vector<FeatureVector> feats;
                for (const auto &p : prefixes) feats.push_back(ex.extract(read_patch_pngs(p)));
                if (feats.size() < static_cast<std::size_t>(dim))
                    throw ValidationError("corpus has " + std::to_string(feats.size()) + " patches, fewer than --dim");
                pca = fit_pca(feats, static_cast<std::size_t>(dim));
                corpus_size = feats.size();
            } else {
                pca = calibrate_pca(gen, ex, corpus, dim, static_cast<std::size_t>(latent_dim), seed, patch_size, range);
                corpus_size = static_cast<std::size_t>(corpus);
            }
            save_pca(pca, out);
            complete("pca-fit", {{"out", out},
                                 {"corpus", corpus_size},
                                 {"dim", dim},
                                 {"explained_variance", pca.explained_variance},
                                 {"rank_deficient", pca.rank_deficient},
                                 {"seed", seed}});
        } else if (*run_cmd) {
            std::ifstream in(config_file);
            if (!in) throw IoError("cannot read " + config_file);
            std::stringstream ss;
            ss << in.rdbuf();
            PipelineConfig cfg = config_from_json(ss.str());
            if (*run_seed) cfg.seed = seed;
            if (*run_out) cfg.output_dir = out;
            if (*run_workers) cfg.workers = workers;
            cfg.validate();
            const PipelineResult r = run_pipeline(cfg);
            complete("run", {{"out", r.output_dir}, {"artifacts", r.artifacts.size()}, {"seed", cfg.seed}});
        }
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DomainError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const PlanError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
