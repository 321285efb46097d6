#pragma once

// Similarity transform T(p) = s * R * p + t with s > 0 and R in SO(3).
// Serialized as a 4x4 row-major matrix whose upper-left block is s*R.

#include <nlohmann/json.hpp>

#include "geometry.hpp"

namespace declutter {

struct Sim3 {
    double s = 1.0;
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return s * (R * p) + t; }

    Sim3 inverse() const {
        Sim3 inv;
        inv.s = 1.0 / s;
        inv.R = R.transpose();
        inv.t = -(inv.s) * (inv.R * t);
        return inv;
    }

    void validate(double tol = 1e-9) const {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("Sim3: scale must be positive");
        if (!t.allFinite() || !R.allFinite()) throw std::runtime_error("Sim3: non-finite transform");
        if ((R * R.transpose() - Mat3::Identity()).norm() > tol)
            throw std::runtime_error("Sim3: rotation is not orthonormal");
        if (std::abs(R.determinant() - 1.0) > tol)
            throw std::runtime_error("Sim3: rotation has determinant != 1");
    }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = s * R;
        m.topRightCorner<3, 1>() = t;
        return m;
    }
};

// first b, then a: (a * b)(p) = a(b(p))
inline Sim3 compose(const Sim3& a, const Sim3& b) {
    Sim3 out;
    out.s = a.s * b.s;
    out.R = a.R * b.R;
    out.t = a.s * (a.R * b.t) + a.t;
    return out;
}

inline Sim3 make_translation(const Vec3& t) { return Sim3{1.0, Mat3::Identity(), t}; }

// rotation by `angle` radians about the +y axis
inline Mat3 yaw_matrix(double angle) {
    double c = std::cos(angle), sn = std::sin(angle);
    Mat3 R;
    R << c, 0, sn, 0, 1, 0, -sn, 0, c;
    return R;
}

inline PointSet transform_points(const PointSet& cloud, const Sim3& T) {
    PointSet out = cloud;
    for (Vec3& p : out.points) p = T.apply(p);
    return out;
}

inline TriangleMesh transform_mesh(const TriangleMesh& mesh, const Sim3& T) {
    TriangleMesh out = mesh;
    for (Vec3& v : out.vertices) v = T.apply(v);
    return out;
}

inline nlohmann::json sim3_to_json(const Sim3& T) {
    Eigen::Matrix4d m = T.matrix();
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) rows.push_back(m(r, c));
    return nlohmann::json{{"matrix", rows}};
}

inline Sim3 sim3_from_json(const nlohmann::json& j) {
    const nlohmann::json& rows = j.contains("matrix") ? j.at("matrix") : j;
    if (!rows.is_array() || rows.size() != 16)
        throw std::runtime_error("Sim3: expected a 16-element row-major matrix");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = rows.at(size_t(r) * 4 + c).get<double>();
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9)
        throw std::runtime_error("Sim3: last matrix row must be [0 0 0 1]");

    Mat3 sR = m.topLeftCorner<3, 3>();
    double det = sR.determinant();
    if (!(det > 0.0)) throw std::runtime_error("Sim3: matrix has non-positive determinant");
    Sim3 T;
    T.s = std::cbrt(det);
    T.R = sR / T.s;
    T.t = m.topRightCorner<3, 1>();
    // tolerate tiny serialization noise, reject anything structurally wrong
    if ((T.R * T.R.transpose() - Mat3::Identity()).norm() > 1e-6)
        throw std::runtime_error("Sim3: upper-left block is not a scaled rotation");
    Eigen::JacobiSVD<Mat3> svd(T.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    T.R = svd.matrixU() * svd.matrixV().transpose();
    T.validate();
    return T;
}

} // namespace declutter
