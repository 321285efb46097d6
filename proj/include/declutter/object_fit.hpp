#pragma once

// Places a generated object mesh into the scene. The mesh arrives in its own
// arbitrary frame, so the fit runs in stages:
//
//   1. render a yaw sweep of the mesh and ask the rotation backend which view
//      matches the masked object in the scene image
//   2. re-render the mesh derotated by that estimate (about its centroid) and
//      framed on the optical axis; this render is the correspondence target
//   3. ask the tracker for scene-pixel <-> render-pixel matches, keep the
//      confident ones that land inside the object mask with valid disparity
//      on both sides
//   4. enough matches: backproject both sides and solve the similarity
//      transform in closed form; too few: fall back to trimmed ICP between
//      the full render cloud and the masked scene cloud
//
// The returned transform maps mesh-frame points directly into the scene, i.e.
// it composes the derotation and framing with the stage-4 alignment.

#include "backends.hpp"
#include "sim3_fit.hpp"

namespace declutter {

struct FitConfig {
    int yaw_count = 8;
    double confidence_threshold = 0.5;
    int min_correspondences = 12;
    IcpConfig icp;
    double min_scale = 1e-4, max_scale = 1e4;

    void validate() const {
        if (yaw_count < 1) throw std::runtime_error("FitConfig: yaw_count must be >= 1");
        if (min_correspondences < 3)
            throw std::runtime_error("FitConfig: min_correspondences must be >= 3");
        if (!(min_scale > 0) || !(max_scale > min_scale))
            throw std::runtime_error("FitConfig: scale bounds must satisfy 0 < min < max");
        icp.validate();
    }
};

struct FitDiagnostics {
    enum class Branch { correspondences, icp };
    Branch branch = Branch::correspondences;
    double yaw_estimate = 0.0;        // radians, from the sweep stage
    int tracked_pairs = 0;            // raw tracker output
    int kept_pairs = 0;               // after confidence/mask/validity filtering
    double ls_residual_rms = 0.0;     // correspondence branch only
    int icp_iterations = 0;
    double icp_rms = 0.0;             // final trimmed RMS, ICP branch only
    double scale = 0.0;               // scale of the returned transform
    std::string failure;              // empty on success
};

struct FitResult {
    Sim3 transform; // mesh frame -> scene frame
    FitDiagnostics diagnostics;
};

inline nlohmann::json fit_diagnostics_to_json(const FitDiagnostics& d) {
    nlohmann::json j = {{"branch", d.branch == FitDiagnostics::Branch::correspondences
                                       ? "correspondences"
                                       : "icp"},
                        {"yaw_estimate", d.yaw_estimate},
                        {"tracked_pairs", d.tracked_pairs},
                        {"kept_pairs", d.kept_pairs},
                        {"ls_residual_rms", d.ls_residual_rms},
                        {"icp_iterations", d.icp_iterations},
                        {"icp_rms", d.icp_rms},
                        {"scale", d.scale}};
    if (!d.failure.empty()) j["failure"] = d.failure;
    return j;
}

class FitFailure : public std::runtime_error {
public:
    FitFailure(const std::string& what, FitDiagnostics diag)
        : std::runtime_error(what), diagnostics(std::move(diag)) {}
    FitDiagnostics diagnostics;
};

inline FitResult fit_object(const Image& image, const Mask& mask,
                            const DisparityGrid& disparity, const TriangleMesh& mesh,
                            const Camera& camera, RotationEstimator& rotation_backend,
                            Tracker& tracker, const FitConfig& cfg = {}) {
    cfg.validate();
    camera.validate();
    if (image.width != camera.width || image.height != camera.height ||
        mask.width != camera.width || mask.height != camera.height ||
        disparity.width != camera.width || disparity.height != camera.height)
        throw std::runtime_error("fit_object: image/mask/disparity must match the camera size");
    if (mesh.vertices.empty() || mesh.triangles.empty())
        throw std::runtime_error("fit_object: empty mesh");

    FitDiagnostics diag;

    // the object must expose enough measured surface to be fit at all
    size_t usable = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y) && disparity.is_valid(x, y)) ++usable;
    if (usable < size_t(cfg.min_correspondences)) {
        diag.failure = "unfittable object: only " + std::to_string(usable) +
                       " masked pixels carry valid disparity";
        throw FitFailure(diag.failure, diag);
    }

    RenderSettings settings;
    settings.camera = camera;

    // stage 1: coarse rotation from the yaw sweep
    std::vector<YawView> sweep = render_yaw_sweep(mesh, cfg.yaw_count, settings);
    Image masked = mask_apply(image, mask);
    Mat3 rot_est = rotation_backend.estimate(masked, mask, sweep);
    diag.yaw_estimate = std::atan2(rot_est(0, 2), rot_est(0, 0));

    // stage 2: derotate about the centroid and frame on the optical axis
    Framing framing = frame_mesh(mesh, camera);
    Mat3 derot = rot_est.transpose();
    Sim3 to_render{1.0, derot, Vec3(0, 0, framing.distance) - derot * framing.centroid};
    RenderOutput rendered = render(mesh, to_render, settings);

    // stage 3: correspondences between the scene image and the render
    TrackQuery query{image,
                     rendered.image,
                     &mask,
                     &rendered.mask,
                     &disparity,
                     &rendered.disparity,
                     &camera,
                     &mesh,
                     &to_render};
    CorrespondenceSet tracks = tracker.track(query);
    diag.tracked_pairs = int(tracks.size());

    // correspondences arrive at subpixel precision; sampling the grids
    // bilinearly keeps noiseless pairs noiseless instead of flooring them to
    // pixel centers, which would add a half-pixel of surface slip per pair
    std::vector<Vec3> scene_pts, render_pts;
    for (const auto& pair : tracks.pairs) {
        if (pair.confidence < cfg.confidence_threshold) continue;
        int sx = int(std::lround(pair.source.x())), sy = int(std::lround(pair.source.y()));
        if (!mask.in_bounds(sx, sy) || !mask.at(sx, sy)) continue;
        std::optional<double> sd = sample_disparity(disparity, pair.source.x(), pair.source.y());
        std::optional<double> rd =
            sample_disparity(rendered.disparity, pair.render.x(), pair.render.y());
        if (!sd || !rd) continue;
        scene_pts.push_back(camera.unproject(pair.source.x(), pair.source.y(), *sd));
        render_pts.push_back(camera.unproject(pair.render.x(), pair.render.y(), *rd));
    }
    diag.kept_pairs = int(scene_pts.size());

    // stage 4: similarity solve, or ICP when tracking was too thin
    Sim3 render_to_scene;
    if (diag.kept_pairs >= cfg.min_correspondences) {
        diag.branch = FitDiagnostics::Branch::correspondences;
        render_to_scene = sim3_least_squares(render_pts, scene_pts);
        diag.ls_residual_rms = residual_rms(render_pts, scene_pts, render_to_scene);
    } else {
        diag.branch = FitDiagnostics::Branch::icp;
        PointSet render_cloud = backproject(rendered.disparity, camera);
        PointSet scene_cloud = backproject(disparity, camera, &mask);
        try {
            IcpResult icp = trimmed_icp(render_cloud, scene_cloud, cfg.icp);
            diag.icp_iterations = icp.iterations;
            diag.icp_rms = icp.rms_history.empty() ? 0.0 : icp.rms_history.back();
            render_to_scene = icp.transform;
        } catch (const std::exception& e) {
            diag.failure = std::string("icp fallback failed: ") + e.what();
            throw FitFailure(diag.failure, diag);
        }
    }

    FitResult result;
    result.transform = compose(render_to_scene, to_render);
    diag.scale = result.transform.s;
    if (diag.scale < cfg.min_scale || diag.scale > cfg.max_scale) {
        diag.failure = "fitted scale " + std::to_string(diag.scale) + " outside [" +
                       std::to_string(cfg.min_scale) + ", " + std::to_string(cfg.max_scale) + "]";
        throw FitFailure(diag.failure, diag);
    }
    result.transform.validate(1e-6);
    result.diagnostics = diag;
    return result;
}

struct PosedMesh {
    TriangleMesh mesh;
    Sim3 pose;
};

struct FilterDecision {
    int index = 0;
    bool kept = true;
    int against = -1;  // earlier kept index that suppressed this one
    double iou = 0.0;
};

// Drops later objects that mostly duplicate an earlier kept object. Overlap
// is measured between posed meshes with volumetric IoU (or bounding-box IoU
// when use_box_iou is set); discarded objects never suppress anything.
inline std::vector<FilterDecision> filter_overlapping(const std::vector<PosedMesh>& objects,
                                                      double iou_threshold = 0.9,
                                                      int resolution = 64,
                                                      bool use_box_iou = false) {
    if (iou_threshold <= 0)
        throw std::runtime_error("filter_overlapping: threshold must be positive");
    std::vector<FilterDecision> decisions(objects.size());
    std::vector<TriangleMesh> posed;
    posed.reserve(objects.size());
    for (const auto& o : objects) posed.push_back(transform_mesh(o.mesh, o.pose));

    for (size_t i = 0; i < objects.size(); ++i) {
        decisions[i].index = int(i);
        for (size_t j = 0; j < i; ++j) {
            if (!decisions[j].kept) continue;
            double iou = 0.0;
            try {
                iou = use_box_iou ? box_iou(posed[i], posed[j])
                                  : volumetric_iou(posed[i], posed[j], resolution);
            } catch (const std::exception&) {
                iou = 0.0; // degenerate geometry cannot meaningfully overlap
            }
            if (iou > decisions[i].iou) {
                decisions[i].iou = iou;
                decisions[i].against = int(j);
            }
            if (iou > iou_threshold) {
                decisions[i].kept = false;
                decisions[i].against = int(j);
                decisions[i].iou = iou;
                break;
            }
        }
    }
    return decisions;
}

} // namespace declutter
