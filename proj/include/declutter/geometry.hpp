#pragma once

// Camera model and 3D containers. The camera frame is the world frame:
// x right, y down, z forward. Pixel (x, y) covers the unit square whose
// center sits at (x + 0.5, y + 0.5) in continuous image coordinates, so
// backprojection uses x + 0.5 - cx and reprojection subtracts the 0.5 back.

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "raster.hpp"

namespace declutter {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;

struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw std::runtime_error("Camera: focal lengths must be positive");
        require_dims(width, height, "Camera");
        if (cx < 0 || cx > width || cy < 0 || cy > height)
            throw std::runtime_error("Camera: principal point outside the image");
    }

    // continuous pixel coordinates of a camera-frame point (z > 0)
    Eigen::Vector2d project(const Vec3& p) const {
        return {fx * p.x() / p.z() + cx - 0.5, fy * p.y() / p.z() + cy - 0.5};
    }

    // camera-frame point for pixel (x, y) at disparity d (= 1/z)
    Vec3 unproject(double x, double y, double d) const {
        double z = 1.0 / d;
        return {(x + 0.5 - cx) * z / fx, (y + 0.5 - cy) * z / fy, z};
    }
};

struct PointSet {
    std::vector<Vec3> points;
    std::vector<Vec3f> colors; // empty or same length as points

    size_t size() const { return points.size(); }
    bool has_colors() const { return !colors.empty(); }

    void validate() const {
        if (!colors.empty() && colors.size() != points.size())
            throw std::runtime_error("PointSet: color count does not match point count");
        for (const Vec3& p : points)
            if (!p.allFinite()) throw std::runtime_error("PointSet: non-finite point");
    }
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3f> colors; // empty or per-vertex
    std::vector<std::array<int, 3>> triangles;

    bool has_colors() const { return !colors.empty(); }

    void validate() const {
        if (!colors.empty() && colors.size() != vertices.size())
            throw std::runtime_error("TriangleMesh: color count does not match vertex count");
        int n = int(vertices.size());
        for (const auto& t : triangles)
            for (int i : t)
                if (i < 0 || i >= n)
                    throw std::runtime_error("TriangleMesh: face index " + std::to_string(i) +
                                             " out of range [0, " + std::to_string(n) + ")");
        for (const Vec3& v : vertices)
            if (!v.allFinite()) throw std::runtime_error("TriangleMesh: non-finite vertex");
    }

    Vec3 centroid() const {
        if (vertices.empty()) throw std::runtime_error("TriangleMesh: centroid of empty mesh");
        Vec3 c = Vec3::Zero();
        for (const Vec3& v : vertices) c += v;
        return c / double(vertices.size());
    }

    double bounding_radius(const Vec3& center) const {
        double r = 0.0;
        for (const Vec3& v : vertices) r = std::max(r, (v - center).norm());
        return r;
    }
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bool empty() const { return (hi.array() < lo.array()).any(); }
    Vec3 extent() const { return hi - lo; }
    double volume() const {
        if (empty()) return 0.0;
        Vec3 e = extent();
        return e.x() * e.y() * e.z();
    }
};

inline Aabb mesh_bounds(const TriangleMesh& mesh) {
    Aabb box;
    for (const Vec3& v : mesh.vertices) box.expand(v);
    return box;
}

inline Aabb points_bounds(const std::vector<Vec3>& pts) {
    Aabb box;
    for (const Vec3& p : pts) box.expand(p);
    return box;
}

// Lifts valid disparity samples to camera-frame points. `select` restricts to
// masked pixels; `image` adds per-point colors when provided.
inline PointSet backproject(const DisparityGrid& disparity, const Camera& camera,
                            const Mask* select = nullptr, const Image* image = nullptr) {
    camera.validate();
    if (disparity.width != camera.width || disparity.height != camera.height)
        throw std::runtime_error("backproject: disparity grid does not match camera size");
    if (select && (select->width != disparity.width || select->height != disparity.height))
        throw std::runtime_error("backproject: mask does not match camera size");
    PointSet out;
    for (int y = 0; y < disparity.height; ++y)
        for (int x = 0; x < disparity.width; ++x) {
            if (!disparity.is_valid(x, y)) continue;
            if (select && !select->at(x, y)) continue;
            out.points.push_back(camera.unproject(x, y, disparity.value(x, y)));
            if (image) {
                auto c = image->rgb(x, y);
                out.colors.push_back({c[0], c[1], c[2]});
            }
        }
    return out;
}

// Pixel-grid tessellation of the final background layer. For each pixel whose
// right, down, and down-right neighbors are all disparity-valid, two triangles
// cover the quad: (x,y)-(x+1,y)-(x,y+1) and (x+1,y)-(x+1,y+1)-(x,y+1).
// `discontinuity_ratio` > 0 drops quads whose max/min disparity exceeds it.
inline TriangleMesh tessellate_background(const DisparityGrid& disparity, const Camera& camera,
                                          const Image& image, double discontinuity_ratio = 0.0) {
    camera.validate();
    if (disparity.width != camera.width || disparity.height != camera.height)
        throw std::runtime_error("tessellate_background: disparity does not match camera size");
    if (image.width != disparity.width || image.height != disparity.height)
        throw std::runtime_error("tessellate_background: image does not match disparity size");

    // one vertex per valid pixel, even when no quad ends up using it
    TriangleMesh mesh;
    std::vector<int> vert_index(size_t(disparity.width) * disparity.height, -1);
    for (int y = 0; y < disparity.height; ++y)
        for (int x = 0; x < disparity.width; ++x) {
            if (!disparity.is_valid(x, y)) continue;
            vert_index[size_t(y) * disparity.width + x] = int(mesh.vertices.size());
            mesh.vertices.push_back(camera.unproject(x, y, disparity.value(x, y)));
            auto c = image.rgb(x, y);
            mesh.colors.push_back({c[0], c[1], c[2]});
        }
    auto vertex_at = [&](int x, int y) { return vert_index[size_t(y) * disparity.width + x]; };

    for (int y = 0; y + 1 < disparity.height; ++y)
        for (int x = 0; x + 1 < disparity.width; ++x) {
            if (!disparity.is_valid(x, y) || !disparity.is_valid(x + 1, y) ||
                !disparity.is_valid(x, y + 1) || !disparity.is_valid(x + 1, y + 1))
                continue;
            if (discontinuity_ratio > 0) {
                double d00 = disparity.value(x, y), d10 = disparity.value(x + 1, y);
                double d01 = disparity.value(x, y + 1), d11 = disparity.value(x + 1, y + 1);
                double dmin = std::min(std::min(d00, d10), std::min(d01, d11));
                double dmax = std::max(std::max(d00, d10), std::max(d01, d11));
                if (dmax > discontinuity_ratio * dmin) continue;
            }
            int v00 = vertex_at(x, y), v10 = vertex_at(x + 1, y);
            int v01 = vertex_at(x, y + 1), v11 = vertex_at(x + 1, y + 1);
            mesh.triangles.push_back({v00, v10, v01});
            mesh.triangles.push_back({v10, v11, v01});
        }

    if (mesh.triangles.empty())
        throw std::runtime_error("tessellate_background: no valid quads, degenerate background");
    return mesh;
}

// Concatenates meshes into one; color-less parts get a neutral gray so the
// result stays uniformly colored.
inline TriangleMesh merge_meshes(const std::vector<const TriangleMesh*>& parts) {
    TriangleMesh out;
    bool any_color = false;
    for (const TriangleMesh* m : parts)
        if (m && m->has_colors()) any_color = true;
    for (const TriangleMesh* m : parts) {
        if (!m) continue;
        int base = int(out.vertices.size());
        out.vertices.insert(out.vertices.end(), m->vertices.begin(), m->vertices.end());
        if (any_color) {
            if (m->has_colors())
                out.colors.insert(out.colors.end(), m->colors.begin(), m->colors.end());
            else
                out.colors.insert(out.colors.end(), m->vertices.size(), Vec3f(0.8f, 0.8f, 0.8f));
        }
        for (const auto& t : m->triangles)
            out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    return out;
}

// ---------------------------------------------------------------- OBJ ----

// Wavefront OBJ restricted to what the pipeline emits: "v x y z [r g b]"
// vertices (colors as the common unofficial extension) and triangular
// "f i j k" faces with 1-based indices.
inline void save_mesh_obj(const TriangleMesh& mesh, const std::string& path) {
    mesh.validate();
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path);
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        if (mesh.has_colors()) {
            const Vec3f& c = mesh.colors[i];
            std::fprintf(fp, "v %.9g %.9g %.9g %.9g %.9g %.9g\n", v.x(), v.y(), v.z(),
                         double(c.x()), double(c.y()), double(c.z()));
        } else {
            std::fprintf(fp, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        }
    }
    for (const auto& t : mesh.triangles)
        std::fprintf(fp, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    std::fclose(fp);
}

inline TriangleMesh load_mesh_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    TriangleMesh mesh;
    bool any_color = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fail = [&](const std::string& why) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
        };
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) fail("malformed vertex");
            mesh.vertices.emplace_back(x, y, z);
            double r, g, b;
            if (ss >> r >> g >> b) {
                any_color = true;
                mesh.colors.push_back({float(r), float(g), float(b)});
            } else {
                mesh.colors.push_back({0.8f, 0.8f, 0.8f});
            }
        } else if (tag == "f") {
            // tolerate v/vt/vn references by reading the leading integer
            std::array<int, 3> idx;
            std::string tok;
            for (int i = 0; i < 3; ++i) {
                if (!(ss >> tok)) fail("face with fewer than 3 indices");
                try {
                    idx[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
                } catch (const std::exception&) {
                    fail("malformed face index '" + tok + "'");
                }
            }
            std::string extra;
            if (ss >> extra) fail("only triangular faces are supported");
            mesh.triangles.push_back(idx);
        }
        // other tags (vn, vt, o, usemtl, ...) are ignored
    }
    if (!any_color) mesh.colors.clear();
    mesh.validate();
    return mesh;
}

} // namespace declutter
