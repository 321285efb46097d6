#pragma once

// Exact nearest-neighbor search over 3D points. Median-split kd-tree with
// branch-and-bound descent; no approximation, so results match brute force
// exactly (ties broken toward the lower index).

#include <numeric>

#include "geometry.hpp"

namespace declutter {

class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& points) : pts_(points) {
        if (pts_.empty()) throw std::runtime_error("KdTree3: empty point set");
        order_.resize(pts_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(pts_.size());
        root_ = build(0, int(pts_.size()));
    }

    struct Hit {
        int index = -1;
        double distance = 0.0;
    };

    // nearest point within max_distance (infinity = unbounded); empty if none
    std::optional<Hit> nearest(const Vec3& q,
                               double max_distance = std::numeric_limits<double>::infinity()) const {
        Hit best;
        best.distance = max_distance;
        bool found = search(root_, q, best);
        if (!found) return std::nullopt;
        return best;
    }

private:
    struct Node {
        int point = -1; // index into pts_
        int left = -1, right = -1;
        int axis = 0;
    };

    int build(int lo, int hi) {
        if (lo >= hi) return -1;
        // split on the widest axis of this subset
        Vec3 mn = pts_[order_[lo]], mx = mn;
        for (int i = lo + 1; i < hi; ++i) {
            mn = mn.cwiseMin(pts_[order_[i]]);
            mx = mx.cwiseMax(pts_[order_[i]]);
        }
        int axis = 0;
        Vec3 ext = mx - mn;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;

        int mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) {
                             double va = pts_[a][axis], vb = pts_[b][axis];
                             if (va != vb) return va < vb;
                             return a < b; // deterministic ordering for duplicates
                         });
        int node_id = int(nodes_.size());
        nodes_.push_back({order_[mid], -1, -1, axis});
        int l = build(lo, mid);
        int r = build(mid + 1, hi);
        nodes_[node_id].left = l;
        nodes_[node_id].right = r;
        return node_id;
    }

    bool search(int node_id, const Vec3& q, Hit& best) const {
        if (node_id < 0) return false;
        const Node& node = nodes_[node_id];
        const Vec3& p = pts_[node.point];
        bool found = false;

        double dist = (q - p).norm();
        if (dist < best.distance ||
            (dist == best.distance && (best.index < 0 || node.point < best.index))) {
            best.distance = dist;
            best.index = node.point;
            found = true;
        }
        double delta = q[node.axis] - p[node.axis];
        int first = delta < 0 ? node.left : node.right;
        int second = delta < 0 ? node.right : node.left;
        found |= search(first, q, best);
        if (std::abs(delta) <= best.distance) found |= search(second, q, best);
        return found;
    }

    const std::vector<Vec3>& pts_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

struct NnMatch {
    int index = -1; // index into the target set, -1 when out of radius
    double distance = std::numeric_limits<double>::infinity();
};

// For every query point, the exact nearest target point within max_distance.
inline std::vector<NnMatch> nearest_neighbor(
    const std::vector<Vec3>& queries, const std::vector<Vec3>& targets,
    double max_distance = std::numeric_limits<double>::infinity()) {
    if (targets.empty()) throw std::runtime_error("nearest_neighbor: empty target set");
    KdTree3 tree(targets);
    std::vector<NnMatch> out(queries.size());
    for (size_t i = 0; i < queries.size(); ++i) {
        auto hit = tree.nearest(queries[i], max_distance);
        if (hit) out[i] = {hit->index, hit->distance};
    }
    return out;
}

} // namespace declutter
