// Single binary covering the whole workflow: synthesize fixture scenes,
// run the reconstruction pipeline against a backend suite, fit one object,
// refine a disparity stack, and score a layout against ground truth.
#include <chrono>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "declutter/fixture_backends.hpp"
#include "declutter/metrics.hpp"

namespace fs = std::filesystem;
using namespace declutter;

namespace {

constexpr const char* kVersion = "0.1.0";

nlohmann::json base_manifest(const char* subcommand, uint64_t seed) {
    return {{"subcommand", subcommand},
            {"seed", seed},
            {"versions", {{"declutter", kVersion}, {"fixture_format", 1}}}};
}

class StageClock {
public:
    void lap(const char* name) {
        auto now = std::chrono::steady_clock::now();
        timings_[name] = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
    }
    nlohmann::json finish() {
        timings_["total_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
                .count();
        return timings_;
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
    std::chrono::steady_clock::time_point last_ = start_;
    nlohmann::json timings_ = nlohmann::json::object();
};

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

PipelineConfig load_pipeline_config(const std::string& path, nlohmann::json* raw) {
    if (path.empty()) {
        *raw = nlohmann::json::object();
        return PipelineConfig{};
    }
    *raw = load_json_file(path);
    return pipeline_config_from_json(*raw);
}

AdapterConfig adapter_config_from_json(const nlohmann::json& j) {
    AdapterConfig c;
    c.proposer_exe = j.value("proposer_exe", "");
    c.segmenter_exe = j.value("segmenter_exe", "");
    c.remover_exe = j.value("remover_exe", "");
    c.depth_exe = j.value("depth_exe", "");
    c.mesh_exe = j.value("mesh_exe", "");
    c.rotation_exe = j.value("rotation_exe", "");
    c.tracker_exe = j.value("tracker_exe", "");
    c.propose_prompt_path = j.value("propose_prompt", "");
    c.remove_prompt_path = j.value("remove_prompt", "");
    c.work_dir = j.value("work_dir", "");
    return c;
}

// ------------------------------------------------------------------ synth --

struct SynthArgs {
    std::string out;
    int objects = 3;
    std::string shapes = "box,sphere";
    int support_pairs = 0;
    uint64_t seed = 0;
    bool corrupt_disparity = false;
};

void cmd_synth(const SynthArgs& a) {
    GenerateOptions opts;
    opts.object_count = a.objects;
    opts.shapes.clear();
    for (const std::string& name : split_csv(a.shapes)) opts.shapes.push_back(shape_from_name(name));
    opts.support_pairs = a.support_pairs;
    opts.seed = a.seed;
    opts.require_occlusion = a.objects >= 2;

    OracleConfig ocfg;
    ocfg.seed = a.seed;
    ocfg.corrupt_disparity = a.corrupt_disparity;

    SyntheticScene scene = generate_synthetic_scene(opts);
    fs::path out(a.out);
    PipelineConfig pipeline_defaults;
    FixtureWriteResult fx =
        write_synthetic_fixture(out, scene, ocfg, FitConfig{}, pipeline_defaults.segmentation_dilation);
    save_json_file(out / "scene.json", {{"spec", scene_spec_to_json(scene.spec)},
                                        {"oracle", oracle_config_to_json(ocfg)}});

    SceneLayout gt;
    gt.camera = scene.camera;
    gt.background = scene.background;
    for (size_t i = 0; i < fx.meshes.size(); ++i) {
        SceneObject obj;
        obj.id = "obj_" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
        obj.label = fx.labels[i];
        obj.mesh = fx.meshes[i];
        obj.pose = fx.mesh_to_scene[i];
        gt.objects.push_back(std::move(obj));
    }
    save_layout(out / "gt", gt);

    // no timings here: equal seeds must produce byte-identical directories
    nlohmann::json manifest = base_manifest("synth", a.seed);
    manifest["config"] = {{"objects", a.objects},
                          {"shapes", a.shapes},
                          {"support_pairs", a.support_pairs},
                          {"corrupt_disparity", a.corrupt_disparity},
                          {"oracle", oracle_config_to_json(ocfg)}};
    manifest["outputs"] = {{"scene", a.out}, {"ground_truth", (out / "gt").string()}};
    save_json_file(out / "manifest.json", manifest);
}

// -------------------------------------------------------------------- run --

struct RunArgs {
    std::string scene;
    std::string backend = "oracle";
    std::string config;
    std::string out;
    uint64_t seed = 0;
    bool seed_given = false;
    bool no_depth_align = false;
    bool no_filter = false;
    int jobs = 1;
};

void cmd_run(const RunArgs& a) {
    StageClock clock;
    nlohmann::json raw_cfg;
    PipelineConfig cfg = load_pipeline_config(a.config, &raw_cfg);
    if (a.seed_given) cfg.refine.seed = a.seed;
    if (a.no_depth_align) cfg.depth_alignment_enabled = false;
    if (a.no_filter) cfg.filtering_enabled = false;
    cfg.validate();

    fs::path scene_dir(a.scene);
    BackendSuite suite;
    if (a.backend == "oracle") {
        nlohmann::json sj = load_json_file(scene_dir / "scene.json");
        auto scene = std::make_shared<SyntheticScene>(build_scene(scene_spec_from_json(sj.at("spec"))));
        suite = make_oracle_suite(scene, oracle_config_from_json(sj.value("oracle", nlohmann::json::object())));
    } else if (a.backend == "fixture") {
        suite = make_fixture_suite(scene_dir);
    } else {
        if (!raw_cfg.contains("adapter"))
            throw std::runtime_error("adapter backend needs an \"adapter\" block in --config");
        suite = make_adapter_suite(adapter_config_from_json(raw_cfg.at("adapter")));
    }
    Image input = load_image_png((scene_dir / "layer_000.png").string());
    clock.lap("load_ms");

    PipelineResult result = run_pipeline(input, suite, cfg);
    clock.lap("pipeline_ms");

    fs::path out(a.out);
    save_run_outputs(out, result);
    clock.lap("save_ms");

    nlohmann::json manifest = base_manifest("run", cfg.refine.seed);
    manifest["config"] = pipeline_config_to_json(cfg);
    manifest["inputs"] = {{"scene", a.scene}, {"backend", a.backend}};
    manifest["outputs"] = {{"layout", (out / "layout.json").string()},
                           {"report", (out / "report.json").string()}};
    manifest["timings"] = clock.finish();
    save_json_file(out / "manifest.json", manifest);
}

// -------------------------------------------------------------------- fit --

struct FitArgs {
    std::string image, mask, disp, mesh, camera, config, out;
};

void cmd_fit(const FitArgs& a) {
    StageClock clock;
    nlohmann::json raw_cfg;
    PipelineConfig cfg = load_pipeline_config(a.config, &raw_cfg);

    Image image = load_image_png(a.image);
    Mask mask = load_mask_png(a.mask);
    DisparityGrid disparity = load_disparity_pfm(a.disp);
    TriangleMesh mesh = load_mesh_obj(a.mesh);
    Camera camera = camera_from_json(load_json_file(a.camera));
    clock.lap("load_ms");

    BaselineRotationEstimator rotation;
    NullTracker tracker;
    FitResult fit = fit_object(image, mask, disparity, mesh, camera, rotation, tracker, cfg.fit);
    clock.lap("fit_ms");

    fs::path out(a.out);
    fs::create_directories(out);
    save_json_file(out / "transform.json", sim3_to_json(fit.transform));
    save_json_file(out / "diagnostics.json", fit_diagnostics_to_json(fit.diagnostics));

    nlohmann::json manifest = base_manifest("fit", 0);
    manifest["config"] = pipeline_config_to_json(cfg)["fit"];
    manifest["inputs"] = {{"image", a.image},
                          {"mask", a.mask},
                          {"disp", a.disp},
                          {"mesh", a.mesh},
                          {"camera", a.camera}};
    manifest["outputs"] = {{"transform", (out / "transform.json").string()}};
    manifest["timings"] = clock.finish();
    save_json_file(out / "manifest.json", manifest);
}

// ----------------------------------------------------------- refine-depth --

struct RefineArgs {
    std::string scene, config, out;
    uint64_t seed = 0;
    bool seed_given = false;
};

void cmd_refine_depth(const RefineArgs& a) {
    StageClock clock;
    nlohmann::json raw_cfg;
    PipelineConfig cfg = load_pipeline_config(a.config, &raw_cfg);
    if (a.seed_given) cfg.refine.seed = a.seed;

    LayerSequence seq = load_layer_sequence(a.scene);
    clock.lap("load_ms");

    RefineResult refined = refine_disparities(seq.images, seq.masks, seq.disparities, cfg.refine);
    clock.lap("refine_ms");

    fs::path out(a.out);
    fs::create_directories(out);
    for (size_t k = 0; k < refined.disparities.size(); ++k)
        save_disparity_pfm(refined.disparities[k],
                           (out / detail::indexed_name("disp", k, ".pfm")).string());
    save_json_file(out / "refine.json", {{"config", pipeline_config_to_json(cfg)["refine"]},
                                         {"initial_loss", refined.initial_loss},
                                         {"final_loss", refined.final_loss},
                                         {"steps", refined.steps}});

    nlohmann::json manifest = base_manifest("refine-depth", cfg.refine.seed);
    manifest["config"] = pipeline_config_to_json(cfg)["refine"];
    manifest["inputs"] = {{"scene", a.scene}};
    manifest["outputs"] = {{"refined", a.out}, {"sidecar", (out / "refine.json").string()}};
    manifest["timings"] = clock.finish();
    save_json_file(out / "manifest.json", manifest);
}

// --------------------------------------------------------------- evaluate --

struct EvalArgs {
    std::string pred, gt, out;
    double tau = 0.1;
    size_t samples = 10000;
    uint64_t seed = 0;
    bool with_background = false;
    int jobs = 1;
};

void cmd_evaluate(const EvalArgs& a) {
    StageClock clock;
    EvalConfig ecfg;
    ecfg.tau = a.tau;
    ecfg.samples_per_object = a.samples;
    ecfg.seed = a.seed;
    ecfg.with_background = a.with_background;
    ecfg.validate();

    nlohmann::json report = evaluate_layout_dirs(a.pred, a.gt, ecfg);
    clock.lap("evaluate_ms");

    fs::path out(a.out);
    fs::create_directories(out);
    save_json_file(out / "report.json", report);

    nlohmann::json manifest = base_manifest("evaluate", a.seed);
    manifest["config"] = report["config"];
    manifest["inputs"] = {{"pred", a.pred}, {"gt", a.gt}};
    manifest["outputs"] = {{"report", (out / "report.json").string()}};
    manifest["timings"] = clock.finish();
    save_json_file(out / "manifest.json", manifest);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured 3D scene reconstruction via iterative object removal"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SynthArgs synth;
    CLI::App* s = app.add_subcommand("synth", "generate a synthetic scene fixture");
    s->add_option("--out", synth.out, "output fixture directory")->required();
    s->add_option("--objects", synth.objects, "object count")->check(CLI::NonNegativeNumber);
    s->add_option("--shapes", synth.shapes, "comma-separated shape pool (box,sphere)");
    s->add_option("--support-pairs", synth.support_pairs, "objects stacked on a parent")
        ->check(CLI::NonNegativeNumber);
    s->add_option("--seed", synth.seed, "generator seed");
    s->add_flag("--corrupt-disparity", synth.corrupt_disparity,
                "apply a seeded per-layer affine corruption to the disparity files");

    RunArgs run;
    CLI::App* r = app.add_subcommand("run", "run the reconstruction pipeline on a scene");
    r->add_option("--scene", run.scene, "scene directory")->required();
    r->add_option("--backend", run.backend, "backend suite")
        ->check(CLI::IsMember({"oracle", "fixture", "adapter"}));
    r->add_option("--config", run.config, "pipeline config JSON");
    r->add_option("--out", run.out, "output directory")->required();
    CLI::Option* run_seed = r->add_option("--seed", run.seed, "refinement seed override");
    r->add_flag("--no-depth-align", run.no_depth_align, "disable disparity refinement");
    r->add_flag("--no-filter", run.no_filter, "disable overlapping-object filtering");
    r->add_option("--jobs", run.jobs, "parallelism (accepted, runs sequentially)")
        ->check(CLI::PositiveNumber);

    FitArgs fit;
    CLI::App* f = app.add_subcommand("fit", "fit one mesh into a scene image");
    f->add_option("--image", fit.image, "scene image PNG")->required();
    f->add_option("--mask", fit.mask, "object mask PNG")->required();
    f->add_option("--disp", fit.disp, "disparity PFM")->required();
    f->add_option("--mesh", fit.mesh, "object mesh OBJ")->required();
    f->add_option("--camera", fit.camera, "camera intrinsics JSON")->required();
    f->add_option("--config", fit.config, "pipeline config JSON (fit section applies)");
    f->add_option("--out", fit.out, "output directory")->required();

    RefineArgs refine;
    CLI::App* d = app.add_subcommand("refine-depth", "refine a layered disparity stack");
    d->add_option("--scene", refine.scene, "layer directory")->required();
    d->add_option("--config", refine.config, "pipeline config JSON (refine section applies)");
    d->add_option("--out", refine.out, "output directory")->required();
    CLI::Option* refine_seed = d->add_option("--seed", refine.seed, "refinement seed override");

    EvalArgs eval;
    CLI::App* e = app.add_subcommand("evaluate", "score a layout against ground truth");
    e->add_option("--pred", eval.pred, "predicted layout directory")->required();
    e->add_option("--gt", eval.gt, "ground-truth layout directory")->required();
    e->add_option("--out", eval.out, "output directory")->required();
    e->add_option("--tau", eval.tau, "F-score distance threshold");
    e->add_option("--samples", eval.samples, "surface samples per object");
    e->add_option("--seed", eval.seed, "sampling seed");
    e->add_flag("--with-background", eval.with_background, "include background meshes");
    e->add_option("--jobs", eval.jobs, "parallelism (accepted, runs sequentially)")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForVersion& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    try {
        if (s->parsed()) cmd_synth(synth);
        if (r->parsed()) {
            run.seed_given = run_seed->count() > 0;
            cmd_run(run);
        }
        if (f->parsed()) cmd_fit(fit);
        if (d->parsed()) {
            refine.seed_given = refine_seed->count() > 0;
            cmd_refine_depth(refine);
        }
        if (e->parsed()) cmd_evaluate(eval);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
