#pragma once

// Backends that replay precomputed outputs from a scene directory, plus
// backends that shell out to external executables. Both speak the same file
// formats, so a fixture directory can be produced by recording real model
// outputs or by the synthetic generator.

#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include "image_io.hpp"
#include "object_fit.hpp"
#include "synthetic.hpp"

namespace declutter {

// Tracker that never finds correspondences; fitting falls back to ICP.
struct NullTracker final : Tracker {
    CorrespondenceSet track(const TrackQuery&) override { return {}; }
};

// ------------------------------------------------------------- fixtures ---

namespace detail {

inline std::string indexed_name(const std::string& stem, size_t index, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%03zu", index);
    return stem + buf + ext;
}

} // namespace detail

inline nlohmann::json proposal_to_json(const ObjectProposal& p) {
    return {{"visible_object", p.visible_object},
            {"secondary_objects", p.secondary_objects},
            {"description", p.description}};
}

inline ObjectProposal proposal_from_json(const nlohmann::json& j) {
    ObjectProposal p;
    p.visible_object = j.at("visible_object").get<std::string>();
    p.secondary_objects = j.at("secondary_objects").get<std::vector<std::string>>();
    p.description = j.value("description", std::string());
    p.validate();
    return p;
}

inline nlohmann::json rotation_to_json(const Mat3& R) {
    nlohmann::json row = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) row.push_back(R(r, c));
    return row;
}

inline Mat3 rotation_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 9)
        throw std::runtime_error("rotation entry must be a 9-element row-major array");
    Mat3 R;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R(r, c) = j.at(size_t(r * 3 + c)).get<double>();
    if ((R * R.transpose() - Mat3::Identity()).norm() > 1e-6 || R.determinant() < 0)
        throw std::runtime_error("rotation entry is not a rotation matrix");
    return R;
}

inline nlohmann::json tracks_to_json(const CorrespondenceSet& set) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : set.pairs)
        out.push_back({p.source.x(), p.source.y(), p.render.x(), p.render.y(), p.confidence});
    return out;
}

inline CorrespondenceSet tracks_from_json(const nlohmann::json& j) {
    CorrespondenceSet set;
    for (const nlohmann::json& row : j) {
        if (!row.is_array() || row.size() != 5)
            throw std::runtime_error("track entry must be [x1, y1, x2, y2, conf]");
        set.pairs.push_back({{row.at(0).get<double>(), row.at(1).get<double>()},
                             {row.at(2).get<double>(), row.at(3).get<double>()},
                             row.at(4).get<double>()});
    }
    return set;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

inline void save_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

// Replays a recorded scene directory. Each backend answers its k-th call from
// the k-th file of its kind, so a pipeline run against the directory that
// produced the recording sees identical data. Files that legitimately signal
// "nothing" (proposal past the list, missing mask, missing tracks) map to the
// corresponding empty value; everything else missing is an error.
class FixtureContext {
public:
    explicit FixtureContext(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_))
            throw std::runtime_error("fixture directory not found: " + dir_.string());
        camera_ = camera_from_json(load_json_file(dir_ / "camera.json"));
        if (std::filesystem::exists(dir_ / "proposals.json"))
            for (const nlohmann::json& j : load_json_file(dir_ / "proposals.json"))
                proposals_.push_back(proposal_from_json(j));
        if (std::filesystem::exists(dir_ / "rotations.json"))
            for (const nlohmann::json& j : load_json_file(dir_ / "rotations.json"))
                rotations_.push_back(rotation_from_json(j));
    }

    const std::filesystem::path& dir() const { return dir_; }
    const Camera& camera() const { return camera_; }

    std::filesystem::path file(const std::string& stem, size_t index, const std::string& ext) const {
        return dir_ / detail::indexed_name(stem, index, ext);
    }

    ObjectProposal next_proposal() {
        size_t k = proposal_calls_++;
        return k < proposals_.size() ? proposals_[k] : ObjectProposal{};
    }
    Mask next_mask() {
        std::filesystem::path p = file("mask", mask_calls_++, ".png");
        if (!std::filesystem::exists(p)) return Mask(camera_.width, camera_.height);
        return load_mask_png(p.string());
    }
    Image next_removed() {
        std::filesystem::path p = file("layer", ++remove_layer_, ".png");
        if (!std::filesystem::exists(p))
            throw std::runtime_error("fixture has no " + p.string());
        return load_image_png(p.string());
    }
    DepthEstimate next_disparity() {
        std::filesystem::path p = file("disp", depth_calls_++, ".pfm");
        if (!std::filesystem::exists(p))
            throw std::runtime_error("fixture has no " + p.string());
        return {load_disparity_pfm(p.string()), camera_};
    }
    TriangleMesh next_mesh() {
        std::filesystem::path p = file("mesh", mesh_calls_++, ".obj");
        if (!std::filesystem::exists(p))
            throw std::runtime_error("fixture has no " + p.string());
        return load_mesh_obj(p.string());
    }
    Mat3 next_rotation() {
        size_t k = rotation_calls_++;
        if (k >= rotations_.size())
            throw std::runtime_error("fixture rotations.json has no entry " + std::to_string(k));
        return rotations_[k];
    }
    CorrespondenceSet next_tracks() {
        std::filesystem::path p = file("tracks", track_calls_++, ".json");
        if (!std::filesystem::exists(p)) return {};
        return tracks_from_json(load_json_file(p));
    }

private:
    std::filesystem::path dir_;
    Camera camera_;
    std::vector<ObjectProposal> proposals_;
    std::vector<Mat3> rotations_;
    size_t proposal_calls_ = 0, mask_calls_ = 0, depth_calls_ = 0;
    size_t mesh_calls_ = 0, rotation_calls_ = 0, track_calls_ = 0;
    size_t remove_layer_ = 0;
};

struct FixtureProposer final : Proposer {
    explicit FixtureProposer(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    ObjectProposal propose(const Image&) override { return ctx_->next_proposal(); }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureSegmenter final : Segmenter {
    explicit FixtureSegmenter(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    Mask segment(const Image&, const std::string&) override { return ctx_->next_mask(); }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureRemover final : Remover {
    explicit FixtureRemover(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    Image remove(const Image&, const Mask&, const std::string&) override {
        return ctx_->next_removed();
    }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureDepthEstimator final : DepthEstimator {
    explicit FixtureDepthEstimator(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    DepthEstimate estimate(const Image&) override { return ctx_->next_disparity(); }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureMeshGenerator final : MeshGenerator {
    explicit FixtureMeshGenerator(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    TriangleMesh generate(const Image&) override { return ctx_->next_mesh(); }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureRotationEstimator final : RotationEstimator {
    explicit FixtureRotationEstimator(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    Mat3 estimate(const Image&, const Mask&, const std::vector<YawView>&) override {
        return ctx_->next_rotation();
    }
    std::shared_ptr<FixtureContext> ctx_;
};
struct FixtureTracker final : Tracker {
    explicit FixtureTracker(std::shared_ptr<FixtureContext> c) : ctx_(std::move(c)) {}
    CorrespondenceSet track(const TrackQuery&) override { return ctx_->next_tracks(); }
    std::shared_ptr<FixtureContext> ctx_;
};

inline BackendSuite make_fixture_suite(const std::filesystem::path& dir) {
    auto ctx = std::make_shared<FixtureContext>(dir);
    BackendSuite suite;
    suite.proposer = std::make_shared<FixtureProposer>(ctx);
    suite.segmenter = std::make_shared<FixtureSegmenter>(ctx);
    suite.remover = std::make_shared<FixtureRemover>(ctx);
    suite.depth_estimator = std::make_shared<FixtureDepthEstimator>(ctx);
    suite.mesh_generator = std::make_shared<FixtureMeshGenerator>(ctx);
    suite.rotation_estimator = std::make_shared<FixtureRotationEstimator>(ctx);
    suite.tracker = std::make_shared<FixtureTracker>(ctx);
    return suite;
}

// ------------------------------------------------------ fixture writing ---

// Wrappers that pass calls through and keep the results, used when recording
// a fixture from live backends.
struct RecordingRotationEstimator final : RotationEstimator {
    explicit RecordingRotationEstimator(RotationEstimator& inner) : inner_(inner) {}
    Mat3 estimate(const Image& image, const Mask& mask,
                  const std::vector<YawView>& sweep) override {
        Mat3 R = inner_.estimate(image, mask, sweep);
        log.push_back(R);
        return R;
    }
    RotationEstimator& inner_;
    std::vector<Mat3> log;
};

struct RecordingTracker final : Tracker {
    explicit RecordingTracker(Tracker& inner) : inner_(inner) {}
    CorrespondenceSet track(const TrackQuery& query) override {
        CorrespondenceSet set = inner_.track(query);
        log.push_back(set);
        return set;
    }
    Tracker& inner_;
    std::vector<CorrespondenceSet> log;
};

struct FixtureWriteResult {
    std::vector<std::string> labels;         // removal order
    std::vector<TriangleMesh> meshes;        // as written to mesh_%03d.obj
    std::vector<Sim3> mesh_to_scene;         // ground-truth placement per mesh
};

// Writes a synthetic scene as a replayable fixture. Rotations and tracks are
// recorded by running the same fitting prelude the pipeline will run, so the
// replay lines up call for call.
inline FixtureWriteResult write_synthetic_fixture(const std::filesystem::path& dir,
                                                  const SyntheticScene& scene,
                                                  const OracleConfig& oracle_cfg = {},
                                                  const FitConfig& fit_cfg = {},
                                                  int mask_dilation = 0) {
    std::filesystem::create_directories(dir);
    auto scene_ptr = std::shared_ptr<const SyntheticScene>(&scene, [](const SyntheticScene*) {});
    auto ctx = std::make_shared<OracleContext>(scene_ptr, oracle_cfg);
    OracleProposer proposer(ctx);
    OracleDepthEstimator depth(ctx);
    OracleMeshGenerator meshgen(ctx);
    OracleRotationEstimator rotation(ctx);
    OracleTracker tracker(ctx);

    size_t n = scene.object_count();
    save_json_file(dir / "camera.json", camera_to_json(scene.camera));
    for (size_t k = 0; k <= n; ++k)
        save_image_png(scene.layer_images[k],
                       (dir / detail::indexed_name("layer", k, ".png")).string());
    for (size_t k = 0; k < n; ++k)
        save_mask_png(scene.amodal_masks[k],
                      (dir / detail::indexed_name("mask", k, ".png")).string());
    for (size_t k = 0; k <= n; ++k) {
        DepthEstimate est = depth.estimate(scene.layer_images[k]);
        save_disparity_pfm(est.disparity,
                           (dir / detail::indexed_name("disp", k, ".pfm")).string());
    }

    // proposals at the layers where the pipeline's queue runs dry
    nlohmann::json proposals = nlohmann::json::array();
    size_t layer = 0;
    while (layer < n) {
        ObjectProposal prop = proposer.propose(scene.layer_images[layer]);
        if (prop.empty()) break;
        proposals.push_back(proposal_to_json(prop));
        layer += 1 + prop.secondary_objects.size();
    }
    proposals.push_back(proposal_to_json(proposer.propose(scene.layer_images[n])));
    save_json_file(dir / "proposals.json", proposals);

    FixtureWriteResult result;
    RecordingRotationEstimator rec_rotation(rotation);
    RecordingTracker rec_tracker(tracker);
    for (size_t k = 0; k < n; ++k) {
        Mask mask = scene.amodal_masks[k];
        if (mask_dilation > 0) mask = dilate(mask, mask_dilation);
        Image masked = mask_apply(scene.layer_images[k], mask);
        TriangleMesh mesh = meshgen.generate(masked);
        save_mesh_obj(mesh, (dir / detail::indexed_name("mesh", k, ".obj")).string());
        fit_object(scene.layer_images[k], mask, scene.layer_disparities[k], mesh, scene.camera,
                   rec_rotation, rec_tracker, fit_cfg);
        const OracleContext::MeshProvenance* prov = ctx->lookup_mesh(mesh);
        result.labels.push_back(scene.spec.objects[k].label);
        result.meshes.push_back(std::move(mesh));
        result.mesh_to_scene.push_back(prov->scene_from_mesh);
    }

    nlohmann::json rotations = nlohmann::json::array();
    for (const Mat3& R : rec_rotation.log) rotations.push_back(rotation_to_json(R));
    save_json_file(dir / "rotations.json", rotations);
    for (size_t k = 0; k < rec_tracker.log.size(); ++k)
        save_json_file(dir / detail::indexed_name("tracks", k, ".json"),
                       tracks_to_json(rec_tracker.log[k]));
    return result;
}

// ------------------------------------------------------------- adapters ---

// Adapter backends launch an executable per call:
//   argv = [executable, input paths..., output dir]
// and read the expected files from the output dir. Exit status 0 means
// success; anything else aborts the pipeline with the status attached.
struct AdapterConfig {
    std::string proposer_exe;
    std::string segmenter_exe;
    std::string remover_exe;
    std::string depth_exe;
    std::string mesh_exe;
    std::string rotation_exe; // optional, silhouette matching when empty
    std::string tracker_exe;  // optional, empty correspondences when empty
    std::string propose_prompt_path; // extra input handed to the proposer
    std::string remove_prompt_path;  // extra input handed to the remover
    std::filesystem::path work_dir;  // scratch space, default under temp
};

namespace detail {

inline void run_adapter(const std::string& exe, const std::vector<std::string>& inputs,
                        const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> args;
    args.push_back(exe);
    args.insert(args.end(), inputs.begin(), inputs.end());
    args.push_back(out_dir.string());
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("adapter fork failed for " + exe);
    if (pid == 0) {
        execv(exe.c_str(), argv.data());
        _exit(127);
    }
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) throw std::runtime_error("adapter wait failed for " + exe);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw std::runtime_error("adapter " + exe + " exited with status " +
                                 std::to_string(code));
    }
}

} // namespace detail

class AdapterContext {
public:
    explicit AdapterContext(AdapterConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.work_dir.empty())
            cfg_.work_dir = std::filesystem::temp_directory_path() /
                            ("declutter-adapter-" + std::to_string(getpid()));
    }

    const AdapterConfig& config() const { return cfg_; }

    // fresh scratch directory per backend call
    std::filesystem::path next_call_dir(const std::string& role) {
        std::filesystem::path dir =
            cfg_.work_dir / (role + "_" + std::to_string(call_counter_++));
        std::filesystem::create_directories(dir);
        return dir;
    }

private:
    AdapterConfig cfg_;
    size_t call_counter_ = 0;
};

struct AdapterProposer final : Proposer {
    explicit AdapterProposer(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    ObjectProposal propose(const Image& image) override {
        std::filesystem::path dir = ctx_->next_call_dir("propose");
        std::filesystem::path img = dir / "image.png";
        save_image_png(image, img.string());
        std::vector<std::string> inputs = {img.string()};
        if (!ctx_->config().propose_prompt_path.empty())
            inputs.push_back(ctx_->config().propose_prompt_path);
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().proposer_exe, inputs, out);
        ObjectProposal prop = proposal_from_json(load_json_file(out / "proposal.json"));
        std::filesystem::remove_all(dir);
        return prop;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

struct AdapterSegmenter final : Segmenter {
    explicit AdapterSegmenter(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    Mask segment(const Image& image, const std::string& label) override {
        std::filesystem::path dir = ctx_->next_call_dir("segment");
        std::filesystem::path img = dir / "image.png", lab = dir / "label.txt";
        save_image_png(image, img.string());
        std::ofstream(lab) << label << "\n";
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().segmenter_exe, {img.string(), lab.string()}, out);
        Mask mask = load_mask_png((out / "mask.png").string());
        if (mask.width != image.width || mask.height != image.height)
            throw std::runtime_error("adapter segmenter returned a mask of the wrong size");
        std::filesystem::remove_all(dir);
        return mask;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

// The remover hands the adapter only the region around the mask: the crop is
// cut at the dilated mask bounds, inpainted by the adapter, and pasted back.
struct AdapterRemover final : Remover {
    explicit AdapterRemover(std::shared_ptr<AdapterContext> c, int crop_margin = 8)
        : ctx_(std::move(c)), margin_(crop_margin) {}
    Image remove(const Image& image, const Mask& mask, const std::string& label) override {
        if (mask.width != image.width || mask.height != image.height || mask.empty())
            throw std::runtime_error("adapter remover needs a non-empty mask matching the image");
        int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (mask.at(x, y)) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
        x0 = std::max(0, x0 - margin_);
        y0 = std::max(0, y0 - margin_);
        x1 = std::min(mask.width - 1, x1 + margin_);
        y1 = std::min(mask.height - 1, y1 + margin_);
        int cw = x1 - x0 + 1, ch = y1 - y0 + 1;

        Image crop(cw, ch);
        Mask crop_mask(cw, ch);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                auto c = image.rgb(x0 + x, y0 + y);
                crop.set_rgb(x, y, c);
                crop_mask.set(x, y, mask.at(x0 + x, y0 + y));
            }

        std::filesystem::path dir = ctx_->next_call_dir("remove");
        std::filesystem::path img = dir / "crop.png", msk = dir / "mask.png",
                              lab = dir / "label.txt";
        save_image_png(crop, img.string());
        save_mask_png(crop_mask, msk.string());
        std::ofstream(lab) << label << "\n";
        std::vector<std::string> inputs = {img.string(), msk.string(), lab.string()};
        if (!ctx_->config().remove_prompt_path.empty())
            inputs.push_back(ctx_->config().remove_prompt_path);
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().remover_exe, inputs, out);
        Image filled = load_image_png((out / "removed.png").string());
        if (filled.width != cw || filled.height != ch)
            throw std::runtime_error("adapter remover returned a crop of the wrong size");

        Image result = image;
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                auto c = filled.rgb(x, y);
                result.set_rgb(x0 + x, y0 + y, c);
            }
        std::filesystem::remove_all(dir);
        return result;
    }
    std::shared_ptr<AdapterContext> ctx_;
    int margin_;
};

struct AdapterDepthEstimator final : DepthEstimator {
    explicit AdapterDepthEstimator(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    DepthEstimate estimate(const Image& image) override {
        std::filesystem::path dir = ctx_->next_call_dir("depth");
        std::filesystem::path img = dir / "image.png";
        save_image_png(image, img.string());
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().depth_exe, {img.string()}, out);
        DepthEstimate est{load_disparity_pfm((out / "disp.pfm").string()),
                          camera_from_json(load_json_file(out / "camera.json"))};
        std::filesystem::remove_all(dir);
        return est;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

struct AdapterMeshGenerator final : MeshGenerator {
    explicit AdapterMeshGenerator(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    TriangleMesh generate(const Image& masked_image) override {
        std::filesystem::path dir = ctx_->next_call_dir("mesh");
        std::filesystem::path img = dir / "masked.png";
        save_image_png(masked_image, img.string());
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().mesh_exe, {img.string()}, out);
        TriangleMesh mesh = load_mesh_obj((out / "mesh.obj").string());
        std::filesystem::remove_all(dir);
        return mesh;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

struct AdapterRotationEstimator final : RotationEstimator {
    explicit AdapterRotationEstimator(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    Mat3 estimate(const Image& image, const Mask& mask,
                  const std::vector<YawView>& sweep) override {
        std::filesystem::path dir = ctx_->next_call_dir("rotation");
        std::filesystem::path img = dir / "masked.png", msk = dir / "mask.png";
        save_image_png(image, img.string());
        save_mask_png(mask, msk.string());
        std::vector<std::string> inputs = {img.string(), msk.string()};
        for (size_t i = 0; i < sweep.size(); ++i) {
            std::filesystem::path view = dir / detail::indexed_name("sweep", i, ".png");
            save_image_png(sweep[i].image, view.string());
            inputs.push_back(view.string());
        }
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().rotation_exe, inputs, out);
        Mat3 R = rotation_from_json(load_json_file(out / "rotation.json"));
        std::filesystem::remove_all(dir);
        return R;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

struct AdapterTracker final : Tracker {
    explicit AdapterTracker(std::shared_ptr<AdapterContext> c) : ctx_(std::move(c)) {}
    CorrespondenceSet track(const TrackQuery& query) override {
        std::filesystem::path dir = ctx_->next_call_dir("track");
        std::filesystem::path img = dir / "image.png", ren = dir / "render.png";
        save_image_png(query.image, img.string());
        save_image_png(query.render, ren.string());
        std::filesystem::path out = dir / "out";
        detail::run_adapter(ctx_->config().tracker_exe, {img.string(), ren.string()}, out);
        CorrespondenceSet set = tracks_from_json(load_json_file(out / "tracks.json"));
        std::filesystem::remove_all(dir);
        return set;
    }
    std::shared_ptr<AdapterContext> ctx_;
};

inline BackendSuite make_adapter_suite(const AdapterConfig& cfg) {
    for (const auto* exe : {&cfg.proposer_exe, &cfg.segmenter_exe, &cfg.remover_exe,
                            &cfg.depth_exe, &cfg.mesh_exe})
        if (exe->empty())
            throw std::runtime_error(
                "adapter suite needs proposer, segmenter, remover, depth, and mesh executables");
    auto ctx = std::make_shared<AdapterContext>(cfg);
    BackendSuite suite;
    suite.proposer = std::make_shared<AdapterProposer>(ctx);
    suite.segmenter = std::make_shared<AdapterSegmenter>(ctx);
    suite.remover = std::make_shared<AdapterRemover>(ctx);
    suite.depth_estimator = std::make_shared<AdapterDepthEstimator>(ctx);
    suite.mesh_generator = std::make_shared<AdapterMeshGenerator>(ctx);
    if (cfg.rotation_exe.empty())
        suite.rotation_estimator = std::make_shared<BaselineRotationEstimator>();
    else
        suite.rotation_estimator = std::make_shared<AdapterRotationEstimator>(ctx);
    if (cfg.tracker_exe.empty())
        suite.tracker = std::make_shared<NullTracker>();
    else
        suite.tracker = std::make_shared<AdapterTracker>(ctx);
    return suite;
}

} // namespace declutter
