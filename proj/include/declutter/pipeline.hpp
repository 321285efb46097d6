#pragma once

// Two-stage orchestration. Stage 1 peels objects off the image one at a time
// (propose, segment, remove) and estimates disparity for every intermediate.
// Stage 2 aligns the disparities, generates and fits a mesh per removed
// object, filters duplicates, and tessellates the final layer into the
// background. Everything observable lands in a deterministic JSON report.

#include <deque>

#include "depth_refine.hpp"
#include "fixture_backends.hpp"

namespace declutter {

struct LayerSequence {
    std::vector<Image> images;            // N+1 entries, [0] is the input
    std::vector<Mask> masks;              // N entries, mask k removed between k and k+1
    std::vector<std::string> labels;      // one per mask
    std::vector<DisparityGrid> disparities; // N+1 entries
    Camera camera;

    void validate() const {
        if (images.empty()) throw std::runtime_error("LayerSequence: no images");
        if (masks.size() + 1 != images.size() || labels.size() != masks.size() ||
            disparities.size() != images.size())
            throw std::runtime_error("LayerSequence: inconsistent list lengths");
        for (const Image& im : images)
            if (im.width != camera.width || im.height != camera.height)
                throw std::runtime_error("LayerSequence: image size differs from camera");
        for (const Mask& m : masks)
            if (m.width != camera.width || m.height != camera.height)
                throw std::runtime_error("LayerSequence: mask size differs from camera");
        for (const DisparityGrid& d : disparities)
            if (d.width != camera.width || d.height != camera.height)
                throw std::runtime_error("LayerSequence: disparity size differs from camera");
    }
};

struct SceneObject {
    std::string id;    // unique within the layout, e.g. obj_000
    std::string label;
    TriangleMesh mesh; // canonical frame, as produced by the mesh backend
    Sim3 pose;         // mesh frame -> scene frame
};

struct SceneLayout {
    std::vector<SceneObject> objects;
    TriangleMesh background;
    Camera camera;
};

struct PipelineConfig {
    int max_iterations = 16;
    int segmentation_dilation = 3; // applied to raw masks, result is recorded
    int removal_dilation = 3;      // applied on top before the remover sees it
    RefineConfig refine;
    FitConfig fit;
    double filter_threshold = 0.9;
    bool filtering_enabled = true;
    bool depth_alignment_enabled = true;
    int filter_resolution = 64;
    bool filter_use_box_iou = false;
    bool refine_use_removal_masks = false; // gate alignment on the wider removal masks

    void validate() const {
        if (max_iterations < 1)
            throw std::runtime_error("PipelineConfig: max_iterations must be >= 1");
        if (filter_threshold <= 0 || filter_threshold > 1)
            throw std::runtime_error("PipelineConfig: filter_threshold must be in (0, 1]");
        if (segmentation_dilation < 0 || removal_dilation < 0)
            throw std::runtime_error("PipelineConfig: dilation radii must be >= 0");
        if (filter_resolution < 2)
            throw std::runtime_error("PipelineConfig: filter_resolution must be >= 2");
        refine.validate();
        fit.validate();
    }
};

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    return {{"max_iterations", c.max_iterations},
            {"segmentation_dilation", c.segmentation_dilation},
            {"removal_dilation", c.removal_dilation},
            {"refine",
             {{"hidden_width", c.refine.hidden_width},
              {"learning_rate", c.refine.learning_rate},
              {"final_lr_fraction", c.refine.final_lr_fraction},
              {"steps", c.refine.steps},
              {"batch_size", c.refine.batch_size},
              {"seed", c.refine.seed}}},
            {"fit",
             {{"yaw_count", c.fit.yaw_count},
              {"confidence_threshold", c.fit.confidence_threshold},
              {"min_correspondences", c.fit.min_correspondences},
              {"min_scale", c.fit.min_scale},
              {"max_scale", c.fit.max_scale},
              {"icp",
               {{"voxel_size", c.fit.icp.voxel_size},
                {"max_pair_distance", c.fit.icp.max_pair_distance},
                {"keep_ratio", c.fit.icp.keep_ratio},
                {"max_iterations", c.fit.icp.max_iterations},
                {"rms_delta", c.fit.icp.rms_delta},
                {"min_correspondences", c.fit.icp.min_correspondences}}}}},
            {"filter_threshold", c.filter_threshold},
            {"filtering_enabled", c.filtering_enabled},
            {"depth_alignment_enabled", c.depth_alignment_enabled},
            {"filter_resolution", c.filter_resolution},
            {"filter_use_box_iou", c.filter_use_box_iou},
            {"refine_use_removal_masks", c.refine_use_removal_masks}};
}

// Missing fields keep their defaults, so partial config files are fine.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.segmentation_dilation = j.value("segmentation_dilation", c.segmentation_dilation);
    c.removal_dilation = j.value("removal_dilation", c.removal_dilation);
    if (j.contains("refine")) {
        const nlohmann::json& r = j.at("refine");
        c.refine.hidden_width = r.value("hidden_width", c.refine.hidden_width);
        c.refine.learning_rate = r.value("learning_rate", c.refine.learning_rate);
        c.refine.final_lr_fraction = r.value("final_lr_fraction", c.refine.final_lr_fraction);
        c.refine.steps = r.value("steps", c.refine.steps);
        c.refine.batch_size = r.value("batch_size", c.refine.batch_size);
        c.refine.seed = r.value("seed", c.refine.seed);
    }
    if (j.contains("fit")) {
        const nlohmann::json& f = j.at("fit");
        c.fit.yaw_count = f.value("yaw_count", c.fit.yaw_count);
        c.fit.confidence_threshold = f.value("confidence_threshold", c.fit.confidence_threshold);
        c.fit.min_correspondences = f.value("min_correspondences", c.fit.min_correspondences);
        c.fit.min_scale = f.value("min_scale", c.fit.min_scale);
        c.fit.max_scale = f.value("max_scale", c.fit.max_scale);
        if (f.contains("icp")) {
            const nlohmann::json& i = f.at("icp");
            c.fit.icp.voxel_size = i.value("voxel_size", c.fit.icp.voxel_size);
            c.fit.icp.max_pair_distance = i.value("max_pair_distance", c.fit.icp.max_pair_distance);
            c.fit.icp.keep_ratio = i.value("keep_ratio", c.fit.icp.keep_ratio);
            c.fit.icp.max_iterations = i.value("max_iterations", c.fit.icp.max_iterations);
            c.fit.icp.rms_delta = i.value("rms_delta", c.fit.icp.rms_delta);
            c.fit.icp.min_correspondences =
                i.value("min_correspondences", c.fit.icp.min_correspondences);
        }
    }
    c.filter_threshold = j.value("filter_threshold", c.filter_threshold);
    c.filtering_enabled = j.value("filtering_enabled", c.filtering_enabled);
    c.depth_alignment_enabled = j.value("depth_alignment_enabled", c.depth_alignment_enabled);
    c.filter_resolution = j.value("filter_resolution", c.filter_resolution);
    c.filter_use_box_iou = j.value("filter_use_box_iou", c.filter_use_box_iou);
    c.refine_use_removal_masks = j.value("refine_use_removal_masks", c.refine_use_removal_masks);
    c.validate();
    return c;
}

// ------------------------------------------------------------ decompose ---

inline LayerSequence decompose(const Image& input, const BackendSuite& backends,
                               const PipelineConfig& cfg, nlohmann::json* report = nullptr) {
    cfg.validate();
    backends.validate();
    require_dims(input.width, input.height, "decompose input");

    LayerSequence seq;
    seq.images.push_back(input);
    std::deque<std::string> queue;
    int consecutive_empty_masks = 0;
    nlohmann::json iteration_log = nlohmann::json::array();

    int iteration = 0;
    for (; iteration < cfg.max_iterations; ++iteration) {
        try {
            const Image& current = seq.images.back();
            if (queue.empty()) {
                ObjectProposal prop = backends.proposer->propose(current);
                prop.validate();
                if (prop.empty()) {
                    iteration_log.push_back({{"iteration", iteration}, {"event", "empty proposal"}});
                    break;
                }
                for (const std::string& s : prop.secondary_objects) queue.push_back(s);
                queue.push_back(prop.visible_object);
            }
            const std::string& label = queue.front();
            Mask raw = backends.segmenter->segment(current, label);
            if (raw.width != current.width || raw.height != current.height)
                throw std::runtime_error("segmenter returned a mask of the wrong size");
            if (raw.empty()) {
                consecutive_empty_masks += 1;
                iteration_log.push_back(
                    {{"iteration", iteration}, {"event", "empty mask"}, {"label", label}});
                if (consecutive_empty_masks >= 2) break;
                continue;
            }
            consecutive_empty_masks = 0;
            Mask recorded = cfg.segmentation_dilation > 0
                                ? dilate(raw, cfg.segmentation_dilation)
                                : raw;
            Mask removal = cfg.removal_dilation > 0 ? dilate(recorded, cfg.removal_dilation)
                                                    : recorded;
            Image next = backends.remover->remove(current, removal, label);
            if (next.width != current.width || next.height != current.height)
                throw std::runtime_error("remover returned an image of the wrong size");
            iteration_log.push_back(
                {{"iteration", iteration}, {"event", "removed"}, {"label", label}});
            seq.images.push_back(std::move(next));
            seq.masks.push_back(std::move(recorded));
            seq.labels.push_back(label);
            queue.pop_front();
        } catch (const std::exception& e) {
            throw std::runtime_error("decompose iteration " + std::to_string(iteration) + ": " +
                                     e.what());
        }
    }

    for (size_t k = 0; k < seq.images.size(); ++k) {
        DepthEstimate est;
        try {
            est = backends.depth_estimator->estimate(seq.images[k]);
        } catch (const std::exception& e) {
            throw std::runtime_error("decompose disparity for layer " + std::to_string(k) + ": " +
                                     e.what());
        }
        if (k == 0) {
            seq.camera = est.camera;
            seq.camera.validate();
            if (seq.camera.width != input.width || seq.camera.height != input.height)
                throw std::runtime_error("depth backend camera does not match the input image");
        } else if (est.camera.fx != seq.camera.fx || est.camera.fy != seq.camera.fy ||
                   est.camera.cx != seq.camera.cx || est.camera.cy != seq.camera.cy ||
                   est.camera.width != seq.camera.width || est.camera.height != seq.camera.height) {
            throw std::runtime_error("depth backend returned inconsistent intrinsics across layers");
        }
        if (est.disparity.width != input.width || est.disparity.height != input.height)
            throw std::runtime_error("depth backend disparity does not match the input image");
        seq.disparities.push_back(std::move(est.disparity));
    }
    seq.validate();

    if (report) {
        (*report)["decompose"] = {{"iterations", iteration_log},
                                  {"layer_count", seq.images.size()},
                                  {"labels", seq.labels}};
    }
    return seq;
}

// ---------------------------------------------------------- reconstruct ---

inline SceneLayout reconstruct(const LayerSequence& layers, const BackendSuite& backends,
                               const PipelineConfig& cfg, nlohmann::json* report = nullptr) {
    cfg.validate();
    backends.validate();
    layers.validate();

    const std::vector<DisparityGrid>* working = &layers.disparities;
    std::vector<DisparityGrid> refined;
    nlohmann::json refine_report = {{"enabled", false}};
    if (cfg.depth_alignment_enabled && layers.images.size() >= 2) {
        std::vector<Mask> gates = layers.masks;
        if (cfg.refine_use_removal_masks && cfg.removal_dilation > 0)
            for (Mask& m : gates) m = dilate(m, cfg.removal_dilation);
        RefineResult res = refine_disparities(layers.images, gates, layers.disparities, cfg.refine);
        refined = std::move(res.disparities);
        working = &refined;
        refine_report = {{"enabled", true},
                         {"initial_loss", res.initial_loss},
                         {"final_loss", res.final_loss},
                         {"steps", res.steps}};
    }

    SceneLayout layout;
    layout.camera = layers.camera;
    nlohmann::json object_report = nlohmann::json::array();
    std::vector<PosedMesh> fitted;
    std::vector<size_t> fitted_mask_index;
    std::vector<std::string> fitted_labels;

    for (size_t n = 0; n < layers.masks.size(); ++n) {
        nlohmann::json entry = {{"index", n}, {"label", layers.labels[n]}};
        try {
            Image masked = mask_apply(layers.images[n], layers.masks[n]);
            TriangleMesh mesh = backends.mesh_generator->generate(masked);
            FitResult fit =
                fit_object(layers.images[n], layers.masks[n], (*working)[n], mesh, layers.camera,
                           *backends.rotation_estimator, *backends.tracker, cfg.fit);
            entry["status"] = "fitted";
            entry.update(fit_diagnostics_to_json(fit.diagnostics));
            fitted.push_back({std::move(mesh), fit.transform});
            fitted_mask_index.push_back(n);
            fitted_labels.push_back(layers.labels[n]);
        } catch (const FitFailure& e) {
            entry["status"] = "skipped";
            entry["failure"] = e.diagnostics.failure.empty() ? e.what() : e.diagnostics.failure;
            entry["tracked_pairs"] = e.diagnostics.tracked_pairs;
            entry["kept_pairs"] = e.diagnostics.kept_pairs;
        } catch (const std::exception& e) {
            entry["status"] = "skipped";
            entry["failure"] = e.what();
        }
        object_report.push_back(std::move(entry));
    }

    nlohmann::json filter_report = {{"enabled", cfg.filtering_enabled}};
    std::vector<bool> keep(fitted.size(), true);
    if (cfg.filtering_enabled && !fitted.empty()) {
        std::vector<FilterDecision> decisions = filter_overlapping(
            fitted, cfg.filter_threshold, cfg.filter_resolution, cfg.filter_use_box_iou);
        nlohmann::json decision_log = nlohmann::json::array();
        for (const FilterDecision& d : decisions) {
            keep[size_t(d.index)] = d.kept;
            size_t mask_index = fitted_mask_index[size_t(d.index)];
            decision_log.push_back({{"index", mask_index},
                                    {"kept", d.kept},
                                    {"max_overlap", d.iou},
                                    {"against", d.against < 0
                                                    ? nlohmann::json(nullptr)
                                                    : nlohmann::json(fitted_mask_index[size_t(
                                                          d.against)])}});
            if (!d.kept)
                object_report[mask_index]["status"] = "filtered";
        }
        filter_report["threshold"] = cfg.filter_threshold;
        filter_report["decisions"] = decision_log;
    }

    for (size_t i = 0; i < fitted.size(); ++i) {
        if (!keep[i]) continue;
        SceneObject obj;
        char id[16];
        std::snprintf(id, sizeof(id), "obj_%03zu", layout.objects.size());
        obj.id = id;
        obj.label = fitted_labels[i];
        obj.mesh = std::move(fitted[i].mesh);
        obj.pose = fitted[i].pose;
        layout.objects.push_back(std::move(obj));
    }

    try {
        layout.background =
            tessellate_background(working->back(), layers.camera, layers.images.back());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("background tessellation failed: ") + e.what());
    }

    if (report) {
        (*report)["refine"] = refine_report;
        (*report)["objects"] = object_report;
        (*report)["filter"] = filter_report;
        (*report)["background_vertices"] = layout.background.vertices.size();
    }
    return layout;
}

struct PipelineResult {
    LayerSequence layers;
    SceneLayout layout;
    nlohmann::json report;
};

inline PipelineResult run_pipeline(const Image& input, const BackendSuite& backends,
                                   const PipelineConfig& cfg) {
    PipelineResult result;
    result.report = nlohmann::json::object();
    result.layers = decompose(input, backends, cfg, &result.report);
    result.layout = reconstruct(result.layers, backends, cfg, &result.report);
    result.report["config"] = pipeline_config_to_json(cfg);
    return result;
}

// ------------------------------------------------------------ layout IO ---

inline void save_layer_sequence(const std::filesystem::path& dir, const LayerSequence& seq) {
    std::filesystem::create_directories(dir);
    save_json_file(dir / "camera.json", camera_to_json(seq.camera));
    for (size_t k = 0; k < seq.images.size(); ++k)
        save_image_png(seq.images[k], (dir / detail::indexed_name("layer", k, ".png")).string());
    for (size_t k = 0; k < seq.masks.size(); ++k)
        save_mask_png(seq.masks[k], (dir / detail::indexed_name("mask", k, ".png")).string());
    for (size_t k = 0; k < seq.disparities.size(); ++k)
        save_disparity_pfm(seq.disparities[k],
                           (dir / detail::indexed_name("disp", k, ".pfm")).string());
    save_json_file(dir / "labels.json", nlohmann::json(seq.labels));
}

inline LayerSequence load_layer_sequence(const std::filesystem::path& dir) {
    LayerSequence seq;
    seq.camera = camera_from_json(load_json_file(dir / "camera.json"));
    for (size_t k = 0;; ++k) {
        std::filesystem::path p = dir / detail::indexed_name("layer", k, ".png");
        if (!std::filesystem::exists(p)) break;
        seq.images.push_back(load_image_png(p.string()));
    }
    for (size_t k = 0;; ++k) {
        std::filesystem::path p = dir / detail::indexed_name("mask", k, ".png");
        if (!std::filesystem::exists(p)) break;
        seq.masks.push_back(load_mask_png(p.string()));
    }
    for (size_t k = 0;; ++k) {
        std::filesystem::path p = dir / detail::indexed_name("disp", k, ".pfm");
        if (!std::filesystem::exists(p)) break;
        seq.disparities.push_back(load_disparity_pfm(p.string()));
    }
    if (std::filesystem::exists(dir / "labels.json"))
        seq.labels = load_json_file(dir / "labels.json").get<std::vector<std::string>>();
    else
        seq.labels.assign(seq.masks.size(), "");
    seq.validate();
    return seq;
}

inline void save_layout(const std::filesystem::path& dir, const SceneLayout& layout) {
    std::filesystem::create_directories(dir / "objects");
    nlohmann::json objects = nlohmann::json::array();
    for (const SceneObject& obj : layout.objects) {
        std::string mesh_ref = "objects/" + obj.id + ".obj";
        save_mesh_obj(obj.mesh, (dir / mesh_ref).string());
        objects.push_back({{"id", obj.id},
                           {"label", obj.label},
                           {"mesh", mesh_ref},
                           {"transform", sim3_to_json(obj.pose).at("matrix")}});
    }
    save_mesh_obj(layout.background, (dir / "background.obj").string());
    save_json_file(dir / "layout.json", {{"camera", camera_to_json(layout.camera)},
                                         {"background", "background.obj"},
                                         {"objects", objects}});
}

inline SceneLayout load_layout(const std::filesystem::path& dir) {
    nlohmann::json j = load_json_file(dir / "layout.json");
    SceneLayout layout;
    layout.camera = camera_from_json(j.at("camera"));
    layout.background = load_mesh_obj((dir / j.at("background").get<std::string>()).string());
    for (const nlohmann::json& jo : j.at("objects")) {
        SceneObject obj;
        obj.id = jo.at("id").get<std::string>();
        obj.label = jo.at("label").get<std::string>();
        obj.mesh = load_mesh_obj((dir / jo.at("mesh").get<std::string>()).string());
        obj.pose = sim3_from_json(jo.at("transform"));
        layout.objects.push_back(std::move(obj));
    }
    return layout;
}

inline void save_run_outputs(const std::filesystem::path& dir, const PipelineResult& result) {
    std::filesystem::create_directories(dir);
    save_layout(dir, result.layout);
    save_layer_sequence(dir / "layers", result.layers);
    save_json_file(dir / "report.json", result.report);
}

} // namespace declutter
