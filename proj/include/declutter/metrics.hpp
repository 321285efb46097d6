#pragma once

// Evaluation battery over reconstructed layouts: point-sampling metrics
// (chamfer, f-score, per-object f-score), rendered comparisons (depth error,
// instance IoU, Rand index), and a directory-level evaluate that reads two
// layout directories and emits one JSON report.

#include "kdtree.hpp"
#include "pipeline.hpp"

namespace declutter {

// Area-weighted uniform surface sampling; deterministic for a given seed.
inline PointSet sample_surface(const TriangleMesh& mesh, size_t count, uint64_t seed = 0) {
    mesh.validate();
    PointSet out;
    if (count == 0) return out;
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        total += 0.5 * (b - a).cross(c - a).norm();
        cumulative.push_back(total);
    }
    if (total <= 0.0) throw std::runtime_error("sample_surface: mesh has zero surface area");

    SeededRng rng(seed);
    out.points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        double u = rng.uniform() * total;
        size_t tri = size_t(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                            cumulative.begin());
        if (tri >= mesh.triangles.size()) tri = mesh.triangles.size() - 1;
        const auto& t = mesh.triangles[tri];
        const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
        double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
        out.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
    }
    return out;
}

// Sum of directed mean nearest-neighbor distances. `clip` > 0 caps each
// per-point distance before averaging.
inline double chamfer(const PointSet& a, const PointSet& b, double clip = 0.0) {
    if (a.points.empty() || b.points.empty())
        throw std::runtime_error("chamfer: empty point set");
    auto directed = [clip](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        KdTree3 tree(to);
        double sum = 0.0;
        for (const Vec3& p : from) {
            double d = tree.nearest(p)->distance;
            sum += clip > 0.0 ? std::min(d, clip) : d;
        }
        return sum / double(from.size());
    };
    return directed(a.points, b.points) + directed(b.points, a.points);
}

struct FScore {
    double precision = 0.0, recall = 0.0, f1 = 0.0; // all in [0, 100]
};

inline FScore fscore(const PointSet& pred, const PointSet& gt, double tau) {
    if (pred.points.empty() || gt.points.empty())
        throw std::runtime_error("fscore: empty point set");
    if (tau <= 0) throw std::runtime_error("fscore: threshold must be positive");
    auto fraction_within = [tau](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        KdTree3 tree(to);
        size_t hits = 0;
        for (const Vec3& p : from)
            if (tree.nearest(p)->distance <= tau) ++hits;
        return 100.0 * double(hits) / double(from.size());
    };
    FScore s;
    s.precision = fraction_within(pred.points, gt.points);
    s.recall = fraction_within(gt.points, pred.points);
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

namespace detail {

// Hungarian algorithm (potentials form) on a square cost matrix, minimizing.
// Returns assignment[row] = column.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    int n = int(cost.size());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] >= 1) assignment[p[j] - 1] = j - 1;
    return assignment;
}

} // namespace detail

// Optimal one-to-one matching between predicted and ground-truth objects,
// maximizing the summed per-pair F1; mean over ground-truth objects, with
// unmatched ones scoring zero.
inline double object_fscore(const std::vector<PointSet>& pred, const std::vector<PointSet>& gt,
                            double tau) {
    if (gt.empty()) throw std::runtime_error("object_fscore: no ground-truth objects");
    if (pred.empty()) return 0.0;
    size_t n = std::max(pred.size(), gt.size());
    std::vector<std::vector<double>> f1(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < pred.size(); ++i)
        for (size_t j = 0; j < gt.size(); ++j) f1[i][j] = fscore(pred[i], gt[j], tau).f1;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) cost[i][j] = -f1[i][j];
    std::vector<int> assign = detail::hungarian(cost);
    double total = 0.0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (assign[i] >= 0 && size_t(assign[i]) < gt.size()) total += f1[i][size_t(assign[i])];
    return total / double(gt.size());
}

// ------------------------------------------------------------ rendering ---

// Winner-take-all per-pixel object index (-1 where nothing renders).
struct InstanceMap {
    int width = 0, height = 0;
    std::vector<int> ids;

    int at(int x, int y) const { return ids[size_t(y) * width + x]; }
};

inline InstanceMap render_instance_ids(const SceneLayout& layout, const Camera& camera) {
    camera.validate();
    InstanceMap map;
    map.width = camera.width;
    map.height = camera.height;
    map.ids.assign(size_t(camera.width) * camera.height, -1);
    std::vector<float> best(size_t(camera.width) * camera.height, 0.0f);
    RenderSettings settings;
    settings.camera = camera;
    for (size_t i = 0; i < layout.objects.size(); ++i) {
        RenderOutput r = render(layout.objects[i].mesh, layout.objects[i].pose, settings);
        for (size_t px = 0; px < map.ids.size(); ++px) {
            if (!r.disparity.valid[px]) continue;
            if (map.ids[px] < 0 || r.disparity.values[px] > best[px]) {
                map.ids[px] = int(i);
                best[px] = r.disparity.values[px];
            }
        }
    }
    return map;
}

inline std::vector<Mask> instance_map_to_masks(const InstanceMap& map, size_t count) {
    std::vector<Mask> masks(count, Mask(map.width, map.height));
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            int id = map.at(x, y);
            if (id >= 0 && size_t(id) < count) masks[size_t(id)].set(x, y, true);
        }
    return masks;
}

// Mean |Δz| between the two layouts' rendered depth maps on pixels valid in
// both. Set with_background to include the background meshes in the renders.
inline double depth_error(const SceneLayout& pred, const SceneLayout& gt, const Camera& camera,
                          bool with_background = false) {
    camera.validate();
    auto render_depth = [&](const SceneLayout& layout) {
        std::vector<TriangleMesh> posed;
        for (const SceneObject& obj : layout.objects)
            posed.push_back(transform_mesh(obj.mesh, obj.pose));
        if (with_background) posed.push_back(layout.background);
        std::vector<const TriangleMesh*> parts;
        for (const TriangleMesh& m : posed) parts.push_back(&m);
        TriangleMesh merged = merge_meshes(parts);
        RenderSettings settings;
        settings.camera = camera;
        return render(merged, Sim3{}, settings).disparity;
    };
    DisparityGrid a = render_depth(pred), b = render_depth(gt);
    double sum = 0.0;
    size_t n = 0;
    for (size_t px = 0; px < a.values.size(); ++px) {
        if (!a.valid[px] || !b.valid[px]) continue;
        sum += std::abs(1.0 / double(a.values[px]) - 1.0 / double(b.values[px]));
        ++n;
    }
    if (n == 0) throw std::runtime_error("depth_error: no overlap between rendered layouts");
    return sum / double(n);
}

// ---------------------------------------------------------- segmentation --

struct SegmentationScores {
    double mean_iou = 0.0;  // greedy per-ground-truth matching, in [0, 1]
    double rand_index = 0.0;
};

// Both inputs are instance mask lists over the same image. Pixels outside
// every mask form an implicit background segment for the Rand index.
inline SegmentationScores segmentation_scores(const std::vector<Mask>& pred,
                                              const std::vector<Mask>& gt) {
    if (gt.empty()) throw std::runtime_error("segmentation_scores: no ground-truth instances");
    int width = gt[0].width, height = gt[0].height;
    for (const Mask& m : gt)
        if (m.width != width || m.height != height)
            throw std::runtime_error("segmentation_scores: mask sizes differ");
    for (const Mask& m : pred)
        if (m.width != width || m.height != height)
            throw std::runtime_error("segmentation_scores: mask sizes differ");

    // first mask containing a pixel claims it; leftover pixels are label 0
    auto to_labels = [&](const std::vector<Mask>& masks) {
        std::vector<int> labels(size_t(width) * height, 0);
        for (size_t i = 0; i < masks.size(); ++i)
            for (size_t px = 0; px < labels.size(); ++px)
                if (labels[px] == 0 && masks[i].at(int(px % size_t(width)), int(px / size_t(width))))
                    labels[px] = int(i) + 1;
        return labels;
    };
    std::vector<int> pa = to_labels(pred), ga = to_labels(gt);

    // greedy IoU matching, ground truth in order, each prediction used once
    std::vector<std::vector<uint64_t>> inter(pred.size(), std::vector<uint64_t>(gt.size(), 0));
    std::vector<uint64_t> pred_area(pred.size(), 0), gt_area(gt.size(), 0);
    for (size_t px = 0; px < pa.size(); ++px) {
        if (pa[px] > 0) pred_area[size_t(pa[px] - 1)] += 1;
        if (ga[px] > 0) gt_area[size_t(ga[px] - 1)] += 1;
        if (pa[px] > 0 && ga[px] > 0) inter[size_t(pa[px] - 1)][size_t(ga[px] - 1)] += 1;
    }
    // instances that never claim a pixel are not part of the partition and
    // are left out of the mean entirely
    std::vector<char> used(pred.size(), 0);
    double iou_sum = 0.0;
    size_t gt_instances = 0;
    for (size_t j = 0; j < gt.size(); ++j) {
        if (gt_area[j] == 0) continue;
        gt_instances += 1;
        double best = 0.0;
        int best_i = -1;
        for (size_t i = 0; i < pred.size(); ++i) {
            if (used[i] || pred_area[i] == 0) continue;
            uint64_t un = pred_area[i] + gt_area[j] - inter[i][j];
            double iou = un > 0 ? double(inter[i][j]) / double(un) : 0.0;
            if (iou > best) {
                best = iou;
                best_i = int(i);
            }
        }
        if (best_i >= 0 && best > 0.0) {
            used[size_t(best_i)] = 1;
            iou_sum += best;
        }
    }

    // exact Rand index from the contingency table of the two pixel partitions
    std::map<std::pair<int, int>, uint64_t> joint;
    std::map<int, uint64_t> ca, cb;
    for (size_t px = 0; px < pa.size(); ++px) {
        joint[{pa[px], ga[px]}] += 1;
        ca[pa[px]] += 1;
        cb[ga[px]] += 1;
    }
    auto pairs2 = [](uint64_t n) { return n * (n - 1) / 2; };
    uint64_t total = pairs2(uint64_t(pa.size()));
    uint64_t same_both = 0, same_a = 0, same_b = 0;
    for (const auto& [key, n] : joint) same_both += pairs2(n);
    for (const auto& [key, n] : ca) same_a += pairs2(n);
    for (const auto& [key, n] : cb) same_b += pairs2(n);
    uint64_t agreements = total - same_a - same_b + 2 * same_both;

    SegmentationScores scores;
    scores.mean_iou = gt_instances > 0 ? iou_sum / double(gt_instances) : 0.0;
    scores.rand_index = total > 0 ? double(agreements) / double(total) : 1.0;
    return scores;
}

// Instance IoU of the layout's rendered segmentation against ground-truth
// instance masks.
inline double mesh_iou(const SceneLayout& layout, const std::vector<Mask>& gt_masks,
                       const Camera& camera) {
    if (layout.objects.empty()) return 0.0;
    InstanceMap map = render_instance_ids(layout, camera);
    std::vector<Mask> pred = instance_map_to_masks(map, layout.objects.size());
    return segmentation_scores(pred, gt_masks).mean_iou;
}

// -------------------------------------------------------------- evaluate --

struct EvalConfig {
    double tau = 0.1;
    size_t samples_per_object = 10000;
    uint64_t seed = 0;
    bool with_background = false;

    void validate() const {
        if (tau <= 0) throw std::runtime_error("EvalConfig: tau must be positive");
        if (samples_per_object == 0)
            throw std::runtime_error("EvalConfig: samples_per_object must be positive");
    }
};

struct MetricReport {
    double chamfer_distance = 0.0;
    double chamfer_distance_clipped = 0.0;
    double precision = 0.0, recall = 0.0, f1 = 0.0; // percentages
    double obj_fscore = 0.0;                        // percentage
    double depth_error = 0.0;
    double seg_iou = 0.0;
    double rand_index = 0.0;
    double mesh_iou = 0.0;
    double tau = 0.0;
    size_t samples_per_object = 0;
};

inline nlohmann::json metric_report_to_json(const MetricReport& r) {
    return {{"chamfer", r.chamfer_distance},
            {"chamfer_clipped", r.chamfer_distance_clipped},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"obj_fscore", r.obj_fscore},
            {"depth_error", r.depth_error},
            {"seg_iou", r.seg_iou},
            {"rand_index", r.rand_index},
            {"mesh_iou", r.mesh_iou},
            {"tau", r.tau},
            {"samples_per_object", r.samples_per_object}};
}

// Background meshes are excluded from the geometric metrics unless
// with_background is set; objects are compared in scene frame.
inline MetricReport evaluate_layouts(const SceneLayout& pred, const SceneLayout& gt,
                                     const EvalConfig& cfg = {}) {
    cfg.validate();
    if (gt.objects.empty()) throw std::runtime_error("evaluate: ground truth has no objects");

    auto sample_objects = [&](const SceneLayout& layout, uint64_t salt) {
        std::vector<PointSet> sets;
        for (size_t i = 0; i < layout.objects.size(); ++i) {
            const SceneObject& obj = layout.objects[i];
            PointSet s = sample_surface(obj.mesh, cfg.samples_per_object,
                                        cfg.seed ^ (salt + 0x9e3779b97f4a7c15ull * (i + 1)));
            sets.push_back(transform_points(s, obj.pose));
        }
        return sets;
    };
    std::vector<PointSet> pred_sets = sample_objects(pred, 1);
    std::vector<PointSet> gt_sets = sample_objects(gt, 2);
    if (cfg.with_background) {
        PointSet pb = sample_surface(pred.background, cfg.samples_per_object, cfg.seed ^ 11);
        PointSet gb = sample_surface(gt.background, cfg.samples_per_object, cfg.seed ^ 12);
        pred_sets.push_back(std::move(pb));
        gt_sets.push_back(std::move(gb));
    }

    auto merge = [](const std::vector<PointSet>& sets) {
        PointSet all;
        for (const PointSet& s : sets)
            all.points.insert(all.points.end(), s.points.begin(), s.points.end());
        return all;
    };
    PointSet pred_all = merge(pred_sets), gt_all = merge(gt_sets);

    MetricReport report;
    report.tau = cfg.tau;
    report.samples_per_object = cfg.samples_per_object;
    if (!pred_all.points.empty()) {
        report.chamfer_distance = chamfer(pred_all, gt_all);
        report.chamfer_distance_clipped = chamfer(pred_all, gt_all, cfg.tau);
        FScore fs = fscore(pred_all, gt_all, cfg.tau);
        report.precision = fs.precision;
        report.recall = fs.recall;
        report.f1 = fs.f1;
    }
    {
        // per-object matching never sees the background
        std::vector<PointSet> po(pred_sets.begin(),
                                 pred_sets.begin() + long(pred.objects.size()));
        std::vector<PointSet> go(gt_sets.begin(), gt_sets.begin() + long(gt.objects.size()));
        report.obj_fscore = object_fscore(po, go, cfg.tau);
    }
    report.depth_error = depth_error(pred, gt, gt.camera, cfg.with_background);
    InstanceMap gt_map = render_instance_ids(gt, gt.camera);
    std::vector<Mask> gt_masks = instance_map_to_masks(gt_map, gt.objects.size());
    report.mesh_iou = mesh_iou(pred, gt_masks, gt.camera);
    if (pred.objects.empty()) {
        report.seg_iou = 0.0;
        report.rand_index =
            segmentation_scores({Mask(gt.camera.width, gt.camera.height)}, gt_masks).rand_index;
    } else {
        InstanceMap pred_map = render_instance_ids(pred, gt.camera);
        SegmentationScores seg = segmentation_scores(
            instance_map_to_masks(pred_map, pred.objects.size()), gt_masks);
        report.seg_iou = seg.mean_iou;
        report.rand_index = seg.rand_index;
    }
    return report;
}

inline nlohmann::json evaluate_layout_dirs(const std::filesystem::path& pred_dir,
                                           const std::filesystem::path& gt_dir,
                                           const EvalConfig& cfg = {}) {
    SceneLayout pred = load_layout(pred_dir);
    SceneLayout gt = load_layout(gt_dir);
    MetricReport report = evaluate_layouts(pred, gt, cfg);
    nlohmann::json j = metric_report_to_json(report);
    j["config"] = {{"tau", cfg.tau},
                   {"samples_per_object", cfg.samples_per_object},
                   {"seed", cfg.seed},
                   {"with_background", cfg.with_background},
                   {"pred", pred_dir.string()},
                   {"gt", gt_dir.string()}};
    return j;
}

} // namespace declutter
