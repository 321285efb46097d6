// End-to-end pipeline stages against the synthetic oracles: iterative
// decomposition, reconstruction with fitting and filtering, persistence,
// and determinism of a full run.

#include <gtest/gtest.h>

#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

#include "declutter/fixture_backends.hpp"
#include "declutter/pipeline.hpp"
#include "declutter/synthetic.hpp"

using namespace declutter;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path p = fs::temp_directory_path() /
                 ("declutter_pipeline_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
    fs::create_directories(p);
    return p;
}

std::shared_ptr<SyntheticScene> make_scene(uint64_t seed, int objects, int support_pairs = 0,
                                           bool require_occlusion = true) {
    GenerateOptions opt;
    opt.object_count = objects;
    opt.support_pairs = support_pairs;
    opt.seed = seed;
    opt.require_occlusion = require_occlusion && objects >= 2;
    return std::make_shared<SyntheticScene>(generate_synthetic_scene(opt));
}

BackendSuite suite_sharing(std::shared_ptr<OracleContext> ctx) {
    BackendSuite suite;
    suite.proposer = std::make_shared<OracleProposer>(ctx);
    suite.segmenter = std::make_shared<OracleSegmenter>(ctx);
    suite.remover = std::make_shared<OracleRemover>(ctx);
    suite.depth_estimator = std::make_shared<OracleDepthEstimator>(ctx);
    suite.mesh_generator = std::make_shared<OracleMeshGenerator>(ctx);
    suite.rotation_estimator = std::make_shared<OracleRotationEstimator>(ctx);
    suite.tracker = std::make_shared<OracleTracker>(ctx);
    return suite;
}

PipelineConfig quick_config() {
    PipelineConfig cfg;
    cfg.depth_alignment_enabled = false; // oracle disparities are already clean
    return cfg;
}

bool images_equal(const Image& a, const Image& b) {
    return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

bool masks_equal(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height) return false;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (a.at(x, y) != b.at(x, y)) return false;
    return true;
}

bool grids_equal(const DisparityGrid& a, const DisparityGrid& b) {
    if (a.width != b.width || a.height != b.height) return false;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (a.is_valid(x, y) != b.is_valid(x, y)) return false;
            if (a.is_valid(x, y) && a.value(x, y) != b.value(x, y)) return false;
        }
    return true;
}

double vertex_rms(const TriangleMesh& mesh, const Sim3& a, const Sim3& b) {
    double acc = 0.0;
    for (const Vec3& v : mesh.vertices) acc += (a.apply(v) - b.apply(v)).squaredNorm();
    return std::sqrt(acc / double(mesh.vertices.size()));
}

// scripted backends for the failure-path tests
struct ConstProposer final : Proposer {
    ObjectProposal prop;
    int calls = 0;
    ObjectProposal propose(const Image&) override {
        ++calls;
        return prop;
    }
};

struct EmptySegmenter final : Segmenter {
    int calls = 0;
    Mask segment(const Image& image, const std::string&) override {
        ++calls;
        return Mask(image.width, image.height);
    }
};

struct FlakySegmenter final : Segmenter {
    std::shared_ptr<Segmenter> inner;
    int calls = 0;
    Mask segment(const Image& image, const std::string& label) override {
        if (calls++ == 0) return Mask(image.width, image.height);
        return inner->segment(image, label);
    }
};

struct ThrowingRemover final : Remover {
    Image remove(const Image&, const Mask&, const std::string&) override {
        throw std::runtime_error("boom");
    }
};

struct FlakyDepth final : DepthEstimator {
    std::shared_ptr<DepthEstimator> inner;
    int calls = 0;
    DepthEstimate estimate(const Image& image) override {
        if (++calls >= 2) throw std::runtime_error("kapow");
        return inner->estimate(image);
    }
};

struct DriftingDepth final : DepthEstimator {
    std::shared_ptr<DepthEstimator> inner;
    int calls = 0;
    DepthEstimate estimate(const Image& image) override {
        DepthEstimate est = inner->estimate(image);
        if (++calls >= 2) est.camera.fx += 1.0;
        return est;
    }
};

struct ConstDepth final : DepthEstimator {
    Camera cam;
    DepthEstimate estimate(const Image&) override {
        DisparityGrid g(cam.width, cam.height);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) g.set(x, y, 0.5f);
        return {g, cam};
    }
};

struct StubMesh final : MeshGenerator {
    TriangleMesh generate(const Image&) override {
        return box_mesh(Vec3(0.1, 0.1, 0.1), Vec3f(0.5f, 0.5f, 0.5f), 1);
    }
};

} // namespace

// ------------------------------------------------------------- decompose ---

TEST(Decompose, EmptySceneYieldsASingleLayer) {
    auto scene = make_scene(3, 0);
    BackendSuite suite = make_oracle_suite(scene);
    nlohmann::json report;
    LayerSequence seq = decompose(scene->layer_images[0], suite, quick_config(), &report);
    EXPECT_EQ(seq.images.size(), 1u);
    EXPECT_TRUE(seq.masks.empty());
    EXPECT_TRUE(seq.labels.empty());
    ASSERT_EQ(seq.disparities.size(), 1u);
    EXPECT_DOUBLE_EQ(seq.camera.fx, scene->camera.fx);
    EXPECT_EQ(report["decompose"]["layer_count"], 1);
}

TEST(Decompose, WalksTheRemovalOrder) {
    auto scene = make_scene(11, 3);
    BackendSuite suite = make_oracle_suite(scene);
    PipelineConfig cfg = quick_config();
    LayerSequence seq = decompose(scene->layer_images[0], suite, cfg);

    ASSERT_EQ(seq.images.size(), 4u);
    ASSERT_EQ(seq.masks.size(), 3u);
    ASSERT_EQ(seq.disparities.size(), 4u);
    for (size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(seq.labels[k], scene->spec.objects[k].label);
        EXPECT_TRUE(images_equal(seq.images[k], scene->layer_images[k])) << "layer " << k;
        EXPECT_TRUE(masks_equal(seq.masks[k],
                                dilate(scene->amodal_masks[k], cfg.segmentation_dilation)))
            << "mask " << k;
    }
    EXPECT_TRUE(images_equal(seq.images[3], scene->layer_images[3]));
    for (size_t k = 0; k < 4; ++k)
        EXPECT_TRUE(grids_equal(seq.disparities[k], scene->layer_disparities[k]))
            << "disparity " << k;
}

TEST(Decompose, SupportedItemComesOffBeforeItsParent) {
    auto scene = make_scene(9, 2, 1, false);
    int item = -1, parent = -1;
    for (size_t i = 0; i < scene->object_count(); ++i)
        if (scene->spec.objects[i].support_parent >= 0) {
            item = int(i);
            parent = scene->spec.objects[i].support_parent;
        }
    ASSERT_GE(item, 0);

    BackendSuite suite = make_oracle_suite(scene);
    LayerSequence seq = decompose(scene->layer_images[0], suite, quick_config());
    ASSERT_EQ(seq.labels.size(), 2u);
    EXPECT_EQ(seq.labels[0], scene->spec.objects[size_t(item)].label);
    EXPECT_EQ(seq.labels[1], scene->spec.objects[size_t(parent)].label);
}

TEST(Decompose, MaxIterationsCapsTheLoop) {
    auto scene = make_scene(11, 3);
    BackendSuite suite = make_oracle_suite(scene);
    PipelineConfig cfg = quick_config();
    cfg.max_iterations = 1;
    LayerSequence seq = decompose(scene->layer_images[0], suite, cfg);
    EXPECT_EQ(seq.images.size(), 2u);
    ASSERT_EQ(seq.labels.size(), 1u);
    EXPECT_EQ(seq.labels[0], scene->spec.objects[0].label);
}

TEST(Decompose, TwoConsecutiveEmptyMasksEndTheLoop) {
    Camera cam{50.0, 50.0, 8.0, 6.0, 16, 12};
    auto proposer = std::make_shared<ConstProposer>();
    proposer->prop.visible_object = "ghost";
    auto segmenter = std::make_shared<EmptySegmenter>();
    auto depth = std::make_shared<ConstDepth>();
    depth->cam = cam;

    BackendSuite suite;
    suite.proposer = proposer;
    suite.segmenter = segmenter;
    suite.remover = std::make_shared<ThrowingRemover>(); // must never be reached
    suite.depth_estimator = depth;
    suite.mesh_generator = std::make_shared<StubMesh>();
    suite.rotation_estimator = std::make_shared<BaselineRotationEstimator>();
    suite.tracker = std::make_shared<NullTracker>();

    Image input(cam.width, cam.height, {0.3f, 0.3f, 0.3f});
    LayerSequence seq = decompose(input, suite, quick_config());
    EXPECT_EQ(seq.images.size(), 1u);
    EXPECT_TRUE(seq.masks.empty());
    EXPECT_EQ(proposer->calls, 1); // the unanswered label stays queued
    EXPECT_EQ(segmenter->calls, 2);
}

TEST(Decompose, OneEmptyMaskIsForgiven) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    auto flaky = std::make_shared<FlakySegmenter>();
    flaky->inner = suite.segmenter;
    suite.segmenter = flaky;

    LayerSequence seq = decompose(scene->layer_images[0], suite, quick_config());
    ASSERT_EQ(seq.masks.size(), 1u);
    EXPECT_EQ(seq.labels[0], scene->spec.objects[0].label);
    EXPECT_EQ(flaky->calls, 2);
}

TEST(Decompose, IterationFailuresNameTheIteration) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    suite.remover = std::make_shared<ThrowingRemover>();
    try {
        decompose(scene->layer_images[0], suite, quick_config());
        FAIL() << "remover failures must propagate";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("decompose iteration 0: "), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
}

TEST(Decompose, DepthFailuresNameTheLayer) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    auto flaky = std::make_shared<FlakyDepth>();
    flaky->inner = suite.depth_estimator;
    suite.depth_estimator = flaky;
    try {
        decompose(scene->layer_images[0], suite, quick_config());
        FAIL() << "depth failures must propagate";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("decompose disparity for layer 1: "),
                  std::string::npos);
        EXPECT_NE(std::string(e.what()).find("kapow"), std::string::npos);
    }
}

TEST(Decompose, InconsistentIntrinsicsAcrossLayersAreRejected) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    auto drifting = std::make_shared<DriftingDepth>();
    drifting->inner = suite.depth_estimator;
    suite.depth_estimator = drifting;
    try {
        decompose(scene->layer_images[0], suite, quick_config());
        FAIL() << "intrinsics drift must be rejected";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("inconsistent intrinsics"), std::string::npos);
    }
}

// ----------------------------------------------------------- reconstruct ---

TEST(Reconstruct, PlacesEveryObjectOnItsGroundTruth) {
    auto scene = make_scene(11, 2);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    PipelineConfig cfg = quick_config();

    LayerSequence seq = decompose(scene->layer_images[0], suite, cfg);
    nlohmann::json report;
    SceneLayout layout = reconstruct(seq, suite, cfg, &report);

    ASSERT_EQ(layout.objects.size(), 2u);
    for (size_t i = 0; i < 2; ++i) {
        const SceneObject& obj = layout.objects[i];
        char expect_id[16];
        std::snprintf(expect_id, sizeof(expect_id), "obj_%03zu", i);
        EXPECT_EQ(obj.id, expect_id);
        EXPECT_EQ(obj.label, scene->spec.objects[i].label);
        const OracleContext::MeshProvenance* prov = ctx->lookup_mesh(obj.mesh);
        ASSERT_NE(prov, nullptr);
        EXPECT_LT(vertex_rms(obj.mesh, obj.pose, prov->scene_from_mesh), 1e-3);
    }

    EXPECT_FALSE(report["refine"]["enabled"].get<bool>());
    for (const nlohmann::json& entry : report["objects"]) {
        EXPECT_EQ(entry["status"], "fitted");
        EXPECT_EQ(entry["branch"], "correspondences");
        EXPECT_LT(entry["ls_residual_rms"].get<double>(), 1e-6);
    }
    size_t pixels = size_t(seq.camera.width) * size_t(seq.camera.height);
    EXPECT_EQ(report["background_vertices"].get<size_t>(),
              seq.disparities.back().valid_count());
    EXPECT_EQ(seq.disparities.back().valid_count(), pixels);
    EXPECT_EQ(layout.background.vertices.size(), pixels);
}

TEST(Reconstruct, DuplicateFitsAreFilteredToOneSurvivor) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    PipelineConfig cfg = quick_config();
    LayerSequence seq = decompose(scene->layer_images[0], suite, cfg);
    ASSERT_EQ(seq.masks.size(), 1u);

    // pretend the remover failed once, so the same object is proposed twice
    LayerSequence doctored;
    doctored.camera = seq.camera;
    doctored.images = {seq.images[0], seq.images[0], seq.images[1]};
    doctored.masks = {seq.masks[0], seq.masks[0]};
    doctored.labels = {seq.labels[0], seq.labels[0]};
    doctored.disparities = {seq.disparities[0], seq.disparities[0], seq.disparities[1]};
    doctored.validate();

    nlohmann::json report;
    SceneLayout layout = reconstruct(doctored, suite, cfg, &report);
    ASSERT_EQ(layout.objects.size(), 1u);
    EXPECT_EQ(layout.objects[0].id, "obj_000");
    EXPECT_EQ(report["objects"][1]["status"], "filtered");
    const nlohmann::json& decisions = report["filter"]["decisions"];
    ASSERT_EQ(decisions.size(), 2u);
    EXPECT_TRUE(decisions[0]["kept"].get<bool>());
    EXPECT_FALSE(decisions[1]["kept"].get<bool>());
    EXPECT_EQ(decisions[1]["against"], 0);
    EXPECT_GT(decisions[1]["max_overlap"].get<double>(), 0.9);

    PipelineConfig keep_all = cfg;
    keep_all.filtering_enabled = false;
    SceneLayout unfiltered = reconstruct(doctored, suite, keep_all);
    ASSERT_EQ(unfiltered.objects.size(), 2u);
    EXPECT_EQ(unfiltered.objects[1].id, "obj_001");
}

TEST(Reconstruct, UnfittableEntriesAreSkippedNotFatal) {
    auto scene = make_scene(19, 1, 0, false);
    auto ctx = std::make_shared<OracleContext>(scene, OracleConfig{});
    BackendSuite suite = suite_sharing(ctx);
    PipelineConfig cfg = quick_config();
    LayerSequence seq = decompose(scene->layer_images[0], suite, cfg);

    // strip measured disparity from all but two pixels under the mask
    DisparityGrid gutted = seq.disparities[0];
    int kept = 0;
    for (int y = 0; y < gutted.height; ++y)
        for (int x = 0; x < gutted.width; ++x)
            if (seq.masks[0].at(x, y) && gutted.is_valid(x, y) && ++kept > 2)
                gutted.set_invalid(x, y);
    seq.disparities[0] = gutted;

    nlohmann::json report;
    SceneLayout layout = reconstruct(seq, suite, cfg, &report);
    EXPECT_TRUE(layout.objects.empty());
    EXPECT_EQ(report["objects"][0]["status"], "skipped");
    EXPECT_NE(report["objects"][0]["failure"].get<std::string>().find("unfittable"),
              std::string::npos);
    EXPECT_GT(layout.background.vertices.size(), 0u);
}

// ---------------------------------------------------------- full pipeline ---

TEST(RunPipeline, DeterministicAcrossIdenticalRuns) {
    auto scene = make_scene(23, 2);
    OracleConfig oracle_cfg;
    oracle_cfg.corrupt_disparity = true;
    oracle_cfg.seed = 3;
    PipelineConfig cfg;
    cfg.refine.steps = 120;
    cfg.refine.seed = 9;

    PipelineResult r1 = run_pipeline(scene->layer_images[0], make_oracle_suite(scene, oracle_cfg), cfg);
    PipelineResult r2 = run_pipeline(scene->layer_images[0], make_oracle_suite(scene, oracle_cfg), cfg);

    EXPECT_EQ(r1.report.dump(), r2.report.dump());
    ASSERT_EQ(r1.layout.objects.size(), r2.layout.objects.size());
    for (size_t i = 0; i < r1.layout.objects.size(); ++i) {
        EXPECT_EQ(r1.layout.objects[i].id, r2.layout.objects[i].id);
        EXPECT_EQ(r1.layout.objects[i].label, r2.layout.objects[i].label);
        EXPECT_TRUE(r1.layout.objects[i].pose.matrix().isApprox(
            r2.layout.objects[i].pose.matrix(), 0.0));
        EXPECT_EQ(r1.layout.objects[i].mesh.vertices.size(),
                  r2.layout.objects[i].mesh.vertices.size());
    }
    EXPECT_EQ(r1.layout.background.vertices.size(), r2.layout.background.vertices.size());
    EXPECT_TRUE(r1.report["refine"]["enabled"].get<bool>());
}

TEST(RunPipeline, ReportCarriesEveryStage) {
    auto scene = make_scene(23, 2);
    PipelineConfig cfg = quick_config();
    PipelineResult res = run_pipeline(scene->layer_images[0], make_oracle_suite(scene), cfg);
    for (const char* key : {"decompose", "refine", "objects", "filter", "background_vertices",
                            "config"})
        EXPECT_TRUE(res.report.contains(key)) << key;
    EXPECT_EQ(res.report["config"].dump(), pipeline_config_to_json(cfg).dump());
}

// ------------------------------------------------------------ persistence ---

TEST(Persistence, LayerSequenceRoundTrips) {
    auto scene = make_scene(11, 2);
    BackendSuite suite = make_oracle_suite(scene);
    LayerSequence seq = decompose(scene->layer_images[0], suite, quick_config());

    fs::path dir = temp_dir();
    save_layer_sequence(dir, seq);
    LayerSequence loaded = load_layer_sequence(dir);

    EXPECT_DOUBLE_EQ(loaded.camera.fx, seq.camera.fx);
    ASSERT_EQ(loaded.images.size(), seq.images.size());
    ASSERT_EQ(loaded.masks.size(), seq.masks.size());
    ASSERT_EQ(loaded.disparities.size(), seq.disparities.size());
    EXPECT_EQ(loaded.labels, seq.labels);
    for (size_t k = 0; k < seq.images.size(); ++k)
        EXPECT_LE(image_mean_abs_diff(loaded.images[k], seq.images[k]), 0.5 / 255.0 + 1e-6);
    for (size_t k = 0; k < seq.masks.size(); ++k)
        EXPECT_TRUE(masks_equal(loaded.masks[k], seq.masks[k]));
    for (size_t k = 0; k < seq.disparities.size(); ++k)
        EXPECT_TRUE(grids_equal(loaded.disparities[k], seq.disparities[k]));
    fs::remove_all(dir);
}

TEST(Persistence, LayoutRoundTrips) {
    auto scene = make_scene(11, 2);
    BackendSuite suite = make_oracle_suite(scene);
    PipelineConfig cfg = quick_config();
    PipelineResult res = run_pipeline(scene->layer_images[0], suite, cfg);

    fs::path dir = temp_dir();
    save_layout(dir, res.layout);
    EXPECT_TRUE(fs::exists(dir / "layout.json"));
    EXPECT_TRUE(fs::exists(dir / "background.obj"));
    EXPECT_TRUE(fs::exists(dir / "objects" / "obj_000.obj"));

    SceneLayout loaded = load_layout(dir);
    ASSERT_EQ(loaded.objects.size(), res.layout.objects.size());
    for (size_t i = 0; i < loaded.objects.size(); ++i) {
        EXPECT_EQ(loaded.objects[i].id, res.layout.objects[i].id);
        EXPECT_EQ(loaded.objects[i].label, res.layout.objects[i].label);
        EXPECT_TRUE(loaded.objects[i].pose.matrix().isApprox(
            res.layout.objects[i].pose.matrix(), 1e-9));
        ASSERT_EQ(loaded.objects[i].mesh.vertices.size(),
                  res.layout.objects[i].mesh.vertices.size());
        EXPECT_EQ(loaded.objects[i].mesh.triangles, res.layout.objects[i].mesh.triangles);
        for (size_t v = 0; v < loaded.objects[i].mesh.vertices.size(); ++v)
            EXPECT_LT((loaded.objects[i].mesh.vertices[v] -
                       res.layout.objects[i].mesh.vertices[v])
                          .norm(),
                      1e-6);
    }
    EXPECT_EQ(loaded.background.vertices.size(), res.layout.background.vertices.size());
    fs::remove_all(dir);
}

// ---------------------------------------------------------- config + misc ---

TEST(PipelineConfigJson, RoundTripsEveryField) {
    PipelineConfig cfg;
    cfg.max_iterations = 5;
    cfg.segmentation_dilation = 1;
    cfg.removal_dilation = 7;
    cfg.refine.steps = 321;
    cfg.refine.hidden_width = 8;
    cfg.refine.learning_rate = 1e-2;
    cfg.refine.final_lr_fraction = 0.5;
    cfg.refine.batch_size = 64;
    cfg.refine.seed = 42;
    cfg.fit.yaw_count = 5;
    cfg.fit.confidence_threshold = 0.25;
    cfg.fit.min_correspondences = 6;
    cfg.filter_threshold = 0.75;
    cfg.filtering_enabled = false;
    cfg.depth_alignment_enabled = false;
    cfg.filter_resolution = 32;
    cfg.filter_use_box_iou = true;
    cfg.refine_use_removal_masks = true;

    PipelineConfig back = pipeline_config_from_json(pipeline_config_to_json(cfg));
    EXPECT_EQ(pipeline_config_to_json(back).dump(), pipeline_config_to_json(cfg).dump());
}

TEST(PipelineConfigJson, ValidateCatchesBadValues) {
    PipelineConfig cfg;
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(), std::runtime_error);
    cfg = {};
    cfg.filter_threshold = 0.0;
    EXPECT_THROW(cfg.validate(), std::runtime_error);
    cfg = {};
    cfg.filter_threshold = 1.1;
    EXPECT_THROW(cfg.validate(), std::runtime_error);
    cfg = {};
    cfg.segmentation_dilation = -1;
    EXPECT_THROW(cfg.validate(), std::runtime_error);
    cfg = {};
    cfg.filter_resolution = 1;
    EXPECT_THROW(cfg.validate(), std::runtime_error);
}

TEST(LayerSequenceApi, ValidateCatchesInconsistentStacks) {
    Camera cam{50.0, 50.0, 8.0, 6.0, 16, 12};
    LayerSequence seq;
    seq.camera = cam;
    EXPECT_THROW(seq.validate(), std::runtime_error); // no images

    seq.images = {Image(16, 12), Image(16, 12)};
    seq.disparities = {DisparityGrid(16, 12), DisparityGrid(16, 12)};
    seq.masks = {Mask(16, 12)};
    seq.labels = {"thing"};
    EXPECT_NO_THROW(seq.validate());

    LayerSequence bad = seq;
    bad.labels.clear();
    EXPECT_THROW(bad.validate(), std::runtime_error);

    bad = seq;
    bad.masks.emplace_back(16, 12);
    EXPECT_THROW(bad.validate(), std::runtime_error);

    bad = seq;
    bad.disparities.pop_back();
    EXPECT_THROW(bad.validate(), std::runtime_error);

    bad = seq;
    bad.images[1] = Image(8, 6);
    EXPECT_THROW(bad.validate(), std::runtime_error);

    bad = seq;
    bad.masks[0] = Mask(8, 6);
    EXPECT_THROW(bad.validate(), std::runtime_error);

    bad = seq;
    bad.disparities[1] = DisparityGrid(8, 6);
    EXPECT_THROW(bad.validate(), std::runtime_error);
}
