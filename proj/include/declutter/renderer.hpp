#pragma once

// Deterministic software z-buffer rasterizer. Triangles are projected through
// the pinhole camera, coverage uses edge functions with a tie-break rule that
// assigns shared-edge pixels to exactly one triangle, and depth is resolved by
// keeping the largest interpolated disparity (nearest surface). Disparity is
// 1/z interpolated linearly in screen space, which is exact for planar
// triangles; vertex colors interpolate the same way. Triangles are rendered
// from both sides, and any triangle reaching in front of the near plane is
// rejected whole.

#include "sim3.hpp"

namespace declutter {

struct RenderSettings {
    Camera camera;
    std::array<float, 3> background = {0.f, 0.f, 0.f};
    double near_plane = 1e-4;
};

struct RenderOutput {
    Image image;
    DisparityGrid disparity;
    Mask mask; // pixels covered by any triangle
};

inline RenderOutput render(const TriangleMesh& mesh, const Sim3& pose,
                           const RenderSettings& settings) {
    settings.camera.validate();
    mesh.validate();
    if (settings.near_plane <= 0) throw std::runtime_error("render: near plane must be positive");

    const Camera& cam = settings.camera;
    RenderOutput out{Image(cam.width, cam.height, settings.background),
                     DisparityGrid(cam.width, cam.height), Mask(cam.width, cam.height)};

    std::vector<Vec3> view(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) view[i] = pose.apply(mesh.vertices[i]);

    const Vec3f default_color(0.8f, 0.8f, 0.8f);
    for (const auto& tri : mesh.triangles) {
        Vec3 p0 = view[tri[0]], p1 = view[tri[1]], p2 = view[tri[2]];
        if (p0.z() < settings.near_plane || p1.z() < settings.near_plane ||
            p2.z() < settings.near_plane)
            continue;

        Eigen::Vector2d s0 = cam.project(p0), s1 = cam.project(p1), s2 = cam.project(p2);
        double d0 = 1.0 / p0.z(), d1 = 1.0 / p1.z(), d2 = 1.0 / p2.z();
        Vec3f c0 = mesh.has_colors() ? mesh.colors[tri[0]] : default_color;
        Vec3f c1 = mesh.has_colors() ? mesh.colors[tri[1]] : default_color;
        Vec3f c2 = mesh.has_colors() ? mesh.colors[tri[2]] : default_color;

        // normalize winding in screen space so the fill rule is consistent
        double area2 = (s1.x() - s0.x()) * (s2.y() - s0.y()) -
                       (s1.y() - s0.y()) * (s2.x() - s0.x());
        if (area2 == 0.0) continue;
        if (area2 < 0.0) {
            std::swap(s1, s2);
            std::swap(d1, d2);
            std::swap(c1, c2);
            area2 = -area2;
        }

        int x_lo = std::max(0, int(std::ceil(std::min({s0.x(), s1.x(), s2.x()}))));
        int x_hi = std::min(cam.width - 1, int(std::floor(std::max({s0.x(), s1.x(), s2.x()}))));
        int y_lo = std::max(0, int(std::ceil(std::min({s0.y(), s1.y(), s2.y()}))));
        int y_hi = std::min(cam.height - 1, int(std::floor(std::max({s0.y(), s1.y(), s2.y()}))));

        auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
            return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
        };
        // boundary pixels count only for edges passing this test, so a pixel
        // exactly on an edge shared by two triangles lands in exactly one
        auto boundary_ok = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
            double ex = b.x() - a.x(), ey = b.y() - a.y();
            return ey > 0 || (ey == 0 && ex < 0);
        };
        bool b01 = boundary_ok(s0, s1), b12 = boundary_ok(s1, s2), b20 = boundary_ok(s2, s0);

        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                double w0 = edge(s1, s2, x, y); // weight of vertex 0
                double w1 = edge(s2, s0, x, y);
                double w2 = edge(s0, s1, x, y);
                bool inside = (w0 > 0 || (w0 == 0 && b12)) && (w1 > 0 || (w1 == 0 && b20)) &&
                              (w2 > 0 || (w2 == 0 && b01));
                if (!inside) continue;
                double l0 = w0 / area2, l1 = w1 / area2, l2 = w2 / area2;
                double disp = l0 * d0 + l1 * d1 + l2 * d2;
                if (disp <= 0) continue;
                if (out.disparity.is_valid(x, y) && disp <= out.disparity.value(x, y)) continue;
                out.disparity.set(x, y, float(disp));
                out.mask.set(x, y, true);
                Vec3f col = float(l0) * c0 + float(l1) * c1 + float(l2) * c2;
                out.image.set_rgb(x, y,
                                  {std::clamp(col.x(), 0.f, 1.f), std::clamp(col.y(), 0.f, 1.f),
                                   std::clamp(col.z(), 0.f, 1.f)});
            }
        }
    }
    return out;
}

// Framing transform that recenters the mesh on the optical axis at a distance
// where its bounding sphere fits the narrower half-FOV with 10% margin.
struct Framing {
    Sim3 pose;      // mesh frame -> camera frame
    Vec3 centroid;  // mesh centroid (rotation pivot for yaw sweeps)
    double distance; // camera-space depth of the centroid
};

inline Framing frame_mesh(const TriangleMesh& mesh, const Camera& camera) {
    camera.validate();
    Vec3 c = mesh.centroid();
    double rho = mesh.bounding_radius(c);
    if (rho <= 0.0) throw std::runtime_error("frame_mesh: degenerate mesh (zero extent)");
    double qx = (camera.width * 0.5) / camera.fx;
    double qy = (camera.height * 0.5) / camera.fy;
    double q = std::min(qx, qy);
    double sin_half_fov = q / std::sqrt(1.0 + q * q);
    Framing f;
    f.centroid = c;
    f.distance = 1.1 * rho / sin_half_fov;
    f.pose = make_translation(Vec3(0, 0, f.distance) - c);
    return f;
}

struct YawView {
    Image image;
    Mask mask;
    double yaw = 0.0;
};

// Renders the mesh from `count` yaw angles 2*pi*i/count about the vertical
// axis through its centroid, framed so the whole mesh stays in view.
inline std::vector<YawView> render_yaw_sweep(const TriangleMesh& mesh, int count,
                                             const RenderSettings& settings) {
    if (count < 1) throw std::runtime_error("render_yaw_sweep: count must be >= 1");
    Framing f = frame_mesh(mesh, settings.camera);
    std::vector<YawView> views;
    views.reserve(count);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int i = 0; i < count; ++i) {
        double yaw = two_pi * double(i) / double(count);
        Mat3 R = yaw_matrix(yaw);
        // rotate about the centroid, then push it to (0, 0, distance)
        Sim3 pose{1.0, R, Vec3(0, 0, f.distance) - R * f.centroid};
        RenderOutput r = render(mesh, pose, settings);
        views.push_back({std::move(r.image), std::move(r.mask), yaw});
    }
    return views;
}

} // namespace declutter
