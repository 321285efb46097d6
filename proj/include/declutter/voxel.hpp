#pragma once

// Voxel-grid utilities: centroid downsampling for point clouds and a
// parity-count volumetric IoU for closed meshes.

#include <unordered_map>

#include "geometry.hpp"

namespace declutter {

// Averages all points (and colors) falling into each cubic cell of side
// `voxel_size`. Output cells appear in first-seen input order, which keeps the
// operation deterministic.
inline PointSet voxel_downsample(const PointSet& cloud, double voxel_size) {
    if (voxel_size <= 0) throw std::runtime_error("voxel_downsample: voxel size must be positive");
    cloud.validate();

    struct Cell {
        Vec3 sum = Vec3::Zero();
        Eigen::Vector3f color_sum = Eigen::Vector3f::Zero();
        int count = 0;
    };
    struct KeyHash {
        size_t operator()(const std::array<int64_t, 3>& k) const {
            uint64_t h = 0xcbf29ce484222325ull;
            for (int64_t v : k) {
                h ^= uint64_t(v);
                h *= 0x100000001b3ull;
            }
            return size_t(h);
        }
    };

    std::unordered_map<std::array<int64_t, 3>, int, KeyHash> cell_of;
    std::vector<Cell> cells;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        std::array<int64_t, 3> key = {int64_t(std::floor(p.x() / voxel_size)),
                                      int64_t(std::floor(p.y() / voxel_size)),
                                      int64_t(std::floor(p.z() / voxel_size))};
        auto [it, inserted] = cell_of.try_emplace(key, int(cells.size()));
        if (inserted) cells.emplace_back();
        Cell& c = cells[it->second];
        c.sum += p;
        if (cloud.has_colors()) c.color_sum += cloud.colors[i];
        c.count += 1;
    }

    PointSet out;
    out.points.reserve(cells.size());
    for (const Cell& c : cells) {
        out.points.push_back(c.sum / double(c.count));
        if (cloud.has_colors()) out.colors.push_back(c.color_sum / float(c.count));
    }
    return out;
}

namespace detail {

// Crossing depths of mesh surface along the +z column through (x, y), found
// by 2D point-in-triangle tests on the xy projection. Triangles are
// normalized to CCW and boundaries use a consistent tie-break so that shared
// edges are counted exactly once (parity is preserved for watertight meshes).
inline void column_crossings(const TriangleMesh& mesh, double x, double y,
                             std::vector<double>& out) {
    out.clear();
    for (const auto& t : mesh.triangles) {
        Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
        if (area2 == 0.0) continue; // parallel to the column
        if (area2 < 0.0) std::swap(b, c);

        auto edge_ok = [&](const Vec3& p, const Vec3& q) {
            double w = (q.x() - p.x()) * (y - p.y()) - (q.y() - p.y()) * (x - p.x());
            if (w > 0) return true;
            if (w < 0) return false;
            double ex = q.x() - p.x(), ey = q.y() - p.y();
            return ey > 0 || (ey == 0 && ex < 0);
        };
        if (!edge_ok(a, b) || !edge_ok(b, c) || !edge_ok(c, a)) continue;

        // plane through a with normal n, solve for z at (x, y)
        Vec3 n = (b - a).cross(c - a);
        out.push_back(a.z() + (n.x() * (a.x() - x) + n.y() * (a.y() - y)) / n.z());
    }
    std::sort(out.begin(), out.end());
    if (out.size() % 2) out.pop_back(); // numerically grazed a silhouette; drop the orphan
}

inline void fill_column_occupancy(const std::vector<double>& crossings, double z0, double dz,
                                  int res, std::vector<uint8_t>& occ) {
    std::fill(occ.begin(), occ.end(), 0);
    for (size_t i = 0; i + 1 < crossings.size(); i += 2) {
        double zin = crossings[i], zout = crossings[i + 1];
        for (int k = 0; k < res; ++k) {
            double zc = z0 + (k + 0.5) * dz;
            if (zc >= zin && zc < zout) occ[k] = 1;
        }
    }
}

} // namespace detail

// Intersection-over-union of two closed meshes, estimated on a res^3 grid
// over their union bounding box. Interior voxels are found by casting a +z
// column through each (x, y) cell center and pairing surface crossings.
inline double volumetric_iou(const TriangleMesh& a, const TriangleMesh& b, int resolution = 64) {
    if (resolution < 2) throw std::runtime_error("volumetric_iou: resolution must be >= 2");
    if (a.vertices.empty() || b.vertices.empty())
        throw std::runtime_error("volumetric_iou: empty mesh");

    Aabb box_a = mesh_bounds(a), box_b = mesh_bounds(b);
    // disjoint boxes cannot intersect
    if ((box_a.hi.array() < box_b.lo.array()).any() ||
        (box_b.hi.array() < box_a.lo.array()).any())
        return 0.0;

    Aabb u;
    u.expand(box_a.lo);
    u.expand(box_a.hi);
    u.expand(box_b.lo);
    u.expand(box_b.hi);
    Vec3 ext = u.extent();
    if (ext.minCoeff() <= 0.0)
        throw std::runtime_error("volumetric_iou: union bounding box has zero volume");

    double dx = ext.x() / resolution, dy = ext.y() / resolution, dz = ext.z() / resolution;
    size_t inter = 0, uni = 0;
    std::vector<double> cross_a, cross_b;
    std::vector<uint8_t> occ_a(resolution), occ_b(resolution);
    for (int i = 0; i < resolution; ++i) {
        double x = u.lo.x() + (i + 0.5) * dx;
        for (int j = 0; j < resolution; ++j) {
            double y = u.lo.y() + (j + 0.5) * dy;
            detail::column_crossings(a, x, y, cross_a);
            detail::column_crossings(b, x, y, cross_b);
            if (cross_a.empty() && cross_b.empty()) continue;
            detail::fill_column_occupancy(cross_a, u.lo.z(), dz, resolution, occ_a);
            detail::fill_column_occupancy(cross_b, u.lo.z(), dz, resolution, occ_b);
            for (int k = 0; k < resolution; ++k) {
                inter += (occ_a[k] && occ_b[k]);
                uni += (occ_a[k] || occ_b[k]);
            }
        }
    }
    if (uni == 0) throw std::runtime_error("volumetric_iou: no interior voxels, zero-volume union");
    return double(inter) / double(uni);
}

// Cheap alternative overlap measure: IoU of axis-aligned bounding boxes.
inline double box_iou(const TriangleMesh& a, const TriangleMesh& b) {
    if (a.vertices.empty() || b.vertices.empty()) throw std::runtime_error("box_iou: empty mesh");
    Aabb ba = mesh_bounds(a), bb = mesh_bounds(b);
    Vec3 lo = ba.lo.cwiseMax(bb.lo), hi = ba.hi.cwiseMin(bb.hi);
    Vec3 e = (hi - lo).cwiseMax(0.0);
    double inter = e.x() * e.y() * e.z();
    double uni = ba.volume() + bb.volume() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

} // namespace declutter
