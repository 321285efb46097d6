#pragma once

// Interface contracts for the external perception models the pipeline leans
// on. Every heavyweight model is hidden behind one of these interfaces so the
// pipeline runs against synthetic oracles, recorded fixtures, or subprocess
// adapters interchangeably:
//
//   Proposer           names the main visible object and anything resting on it
//   Segmenter          amodal mask for a named object
//   Remover            repaints the image with the masked object removed
//   DepthEstimator     monocular disparity plus pinhole intrinsics
//   MeshGenerator      textured mesh from a masked object crop (its own frame)
//   RotationEstimator  picks the object rotation matching a rendered yaw sweep
//   Tracker            pixel correspondences between two related images

#include <memory>

#include "renderer.hpp"
#include "sim3.hpp"

namespace declutter {

struct ObjectProposal {
    std::string visible_object;                 // empty = nothing left to remove
    std::vector<std::string> secondary_objects; // objects resting on it, removed first
    std::string description;

    bool empty() const { return visible_object.empty(); }

    void validate() const {
        if (visible_object.empty() && !secondary_objects.empty())
            throw std::runtime_error(
                "ObjectProposal: secondary objects listed without a visible object");
    }
};

struct CorrespondenceSet {
    struct Pair {
        Eigen::Vector2d source; // pixel in the scene image
        Eigen::Vector2d render; // pixel in the rendered image
        double confidence = 0.0;
    };
    std::vector<Pair> pairs;

    size_t size() const { return pairs.size(); }
};

// Everything a tracker may want to know about how the pair of images relates.
// `image` and `render` are always present; the rest is optional context that
// synthetic oracles use to answer exactly and adapters are free to ignore.
struct TrackQuery {
    const Image& image;  // scene layer (correspondence source side)
    const Image& render; // rendered candidate object
    const Mask* image_mask = nullptr;
    const Mask* render_mask = nullptr;
    const DisparityGrid* image_disparity = nullptr;
    const DisparityGrid* render_disparity = nullptr;
    const Camera* camera = nullptr;
    const TriangleMesh* mesh = nullptr;   // mesh that was rendered
    const Sim3* mesh_to_render = nullptr; // pose used for the render
};

struct Proposer {
    virtual ~Proposer() = default;
    virtual ObjectProposal propose(const Image& image) = 0;
};

struct Segmenter {
    virtual ~Segmenter() = default;
    // empty mask = object not found
    virtual Mask segment(const Image& image, const std::string& label) = 0;
};

struct Remover {
    virtual ~Remover() = default;
    virtual Image remove(const Image& image, const Mask& mask, const std::string& label) = 0;
};

struct DepthEstimate {
    DisparityGrid disparity;
    Camera camera;
};

struct DepthEstimator {
    virtual ~DepthEstimator() = default;
    virtual DepthEstimate estimate(const Image& image) = 0;
};

struct MeshGenerator {
    virtual ~MeshGenerator() = default;
    virtual TriangleMesh generate(const Image& masked_image) = 0;
};

struct RotationEstimator {
    virtual ~RotationEstimator() = default;
    // rotation (object frame) whose render best matches the masked object
    virtual Mat3 estimate(const Image& masked_image, const Mask& mask,
                          const std::vector<YawView>& sweep) = 0;
};

struct Tracker {
    virtual ~Tracker() = default;
    virtual CorrespondenceSet track(const TrackQuery& query) = 0;
};

struct BackendSuite {
    std::shared_ptr<Proposer> proposer;
    std::shared_ptr<Segmenter> segmenter;
    std::shared_ptr<Remover> remover;
    std::shared_ptr<DepthEstimator> depth_estimator;
    std::shared_ptr<MeshGenerator> mesh_generator;
    std::shared_ptr<RotationEstimator> rotation_estimator;
    std::shared_ptr<Tracker> tracker;

    void validate() const {
        if (!proposer || !segmenter || !remover || !depth_estimator || !mesh_generator ||
            !rotation_estimator || !tracker)
            throw std::runtime_error("BackendSuite: all seven backends must be present");
    }
};

// Fallback rotation estimate used when no dedicated backend is configured:
// rescale the object silhouette and each sweep silhouette to a common square
// and pick the yaw with the highest IoU (smallest index wins ties).
inline Mat3 baseline_rotation_estimate(const Image& masked_image, const Mask& mask,
                                       const std::vector<YawView>& sweep) {
    (void)masked_image;
    if (sweep.empty()) throw std::runtime_error("baseline_rotation_estimate: empty sweep");
    if (mask.empty()) throw std::runtime_error("baseline_rotation_estimate: empty object mask");

    constexpr int kGrid = 64;
    auto normalized = [&](const Mask& m) {
        int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y)) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
        Mask out(kGrid, kGrid);
        if (x1 < 0) return out; // empty silhouette stays empty
        int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
        for (int gy = 0; gy < kGrid; ++gy)
            for (int gx = 0; gx < kGrid; ++gx) {
                int sx = x0 + int((gx + 0.5) * bw / kGrid);
                int sy = y0 + int((gy + 0.5) * bh / kGrid);
                out.set(gx, gy, m.at(std::min(sx, x1), std::min(sy, y1)));
            }
        return out;
    };

    Mask target = normalized(mask);
    int best = 0;
    double best_iou = -1.0;
    for (size_t i = 0; i < sweep.size(); ++i) {
        double iou = mask_iou(target, normalized(sweep[i].mask));
        if (iou > best_iou) { // strict >: earliest index wins ties
            best_iou = iou;
            best = int(i);
        }
    }
    return yaw_matrix(sweep[best].yaw);
}

struct BaselineRotationEstimator final : RotationEstimator {
    Mat3 estimate(const Image& masked_image, const Mask& mask,
                  const std::vector<YawView>& sweep) override {
        return baseline_rotation_estimate(masked_image, mask, sweep);
    }
};

} // namespace declutter
