#pragma once

// Sim(3) estimation between point sets.
//
//  sim3_least_squares  closed-form fit from paired correspondences (SVD of
//                      the cross-covariance, reflection-safe).
//  trimmed_icp         correspondence-free alignment: voxel downsample both
//                      clouds, scale-aware init, then iterate radius-bounded
//                      nearest neighbors keeping only the best residuals.

#include "kdtree.hpp"
#include "sim3.hpp"
#include "voxel.hpp"

namespace declutter {

// Least-squares T with target[i] ~ T(source[i]). Needs >= 3 pairs and a
// non-degenerate source spread.
inline Sim3 sim3_least_squares(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
    if (source.size() != target.size())
        throw std::runtime_error("sim3_least_squares: source and target sizes differ");
    size_t n = source.size();
    if (n < 3) throw std::runtime_error("sim3_least_squares: need at least 3 pairs, got " +
                                        std::to_string(n));

    Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        mu_src += source[i];
        mu_dst += target[i];
    }
    mu_src /= double(n);
    mu_dst /= double(n);

    Mat3 sigma = Mat3::Zero(); // cross-covariance target x source
    double src_var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        Vec3 ds = source[i] - mu_src, dd = target[i] - mu_dst;
        sigma += dd * ds.transpose();
        src_var += ds.squaredNorm();
    }
    sigma /= double(n);
    src_var /= double(n);
    if (src_var <= 0.0)
        throw std::runtime_error("sim3_least_squares: degenerate source (all points coincide)");

    Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU(), V = svd.matrixV();
    Vec3 d = svd.singularValues();
    // flip the smallest singular direction if UV^T would be a reflection
    double fix = (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    Sim3 T;
    T.R = U * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, fix) * V.transpose();
    T.s = (d.x() + d.y() + fix * d.z()) / src_var;
    if (!(T.s > 0.0) || !std::isfinite(T.s))
        throw std::runtime_error("sim3_least_squares: degenerate configuration, scale " +
                                 std::to_string(T.s));
    T.t = mu_dst - T.s * (T.R * mu_src);
    return T;
}

inline double residual_rms(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                           const Sim3& T) {
    if (source.empty() || source.size() != target.size())
        throw std::runtime_error("residual_rms: bad pair lists");
    double acc = 0.0;
    for (size_t i = 0; i < source.size(); ++i) acc += (target[i] - T.apply(source[i])).squaredNorm();
    return std::sqrt(acc / double(source.size()));
}

struct IcpConfig {
    double voxel_size = 0.0;      // <= 0: 1% of the target bounding-box diagonal
    double max_pair_distance = 0.0; // <= 0: 5 * voxel_size
    double keep_ratio = 0.8;      // fraction of pairs kept after trimming
    int max_iterations = 50;
    double rms_delta = 1e-6;      // stop when accepted RMS changes less than this
    int min_correspondences = 8;

    void validate() const {
        if (keep_ratio <= 0.0 || keep_ratio > 1.0)
            throw std::runtime_error("IcpConfig: keep_ratio must be in (0, 1]");
        if (max_iterations < 1) throw std::runtime_error("IcpConfig: max_iterations must be >= 1");
        if (rms_delta < 0.0) throw std::runtime_error("IcpConfig: rms_delta must be >= 0");
        if (min_correspondences < 3)
            throw std::runtime_error("IcpConfig: min_correspondences must be >= 3");
    }
};

struct IcpResult {
    Sim3 transform;
    int iterations = 0;            // accepted iterations
    bool converged = false;        // RMS delta fell below the threshold
    std::vector<double> rms_history; // trimmed RMS per accepted iteration
    size_t initial_correspondences = 0;
    std::vector<Vec3> kept_source; // downsampled source points kept by the final trim
};

// Aligns `source` onto `target` without known correspondences.
inline IcpResult trimmed_icp(const PointSet& source, const PointSet& target,
                             IcpConfig cfg = {}) {
    cfg.validate();
    if (source.points.empty() || target.points.empty())
        throw std::runtime_error("trimmed_icp: empty input cloud");

    if (cfg.voxel_size <= 0.0) {
        Aabb box = points_bounds(target.points);
        double diag = box.extent().norm();
        if (diag <= 0.0) throw std::runtime_error("trimmed_icp: target has zero extent");
        cfg.voxel_size = 0.01 * diag;
    }
    if (cfg.max_pair_distance <= 0.0) cfg.max_pair_distance = 5.0 * cfg.voxel_size;

    PointSet src = voxel_downsample(source, cfg.voxel_size);
    PointSet dst = voxel_downsample(target, cfg.voxel_size);
    if (src.points.empty() || dst.points.empty())
        throw std::runtime_error("trimmed_icp: cloud empty after downsampling");

    auto spread = [](const std::vector<Vec3>& pts) {
        Vec3 mu = Vec3::Zero();
        for (const Vec3& p : pts) mu += p;
        mu /= double(pts.size());
        double acc = 0.0;
        for (const Vec3& p : pts) acc += (p - mu).squaredNorm();
        return std::pair<Vec3, double>(mu, std::sqrt(acc / double(pts.size())));
    };
    auto [mu_src, rms_src] = spread(src.points);
    auto [mu_dst, rms_dst] = spread(dst.points);
    if (rms_src <= 0.0) throw std::runtime_error("trimmed_icp: source has zero spread");

    IcpResult res;
    res.transform.s = rms_dst > 0.0 ? rms_dst / rms_src : 1.0;
    res.transform.R = Mat3::Identity();
    res.transform.t = mu_dst - res.transform.s * mu_src;

    KdTree3 tree(dst.points);
    struct Pair {
        int si, di;
        double dist;
    };
    std::vector<Pair> pairs;
    std::vector<Vec3> kept_src, kept_dst;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        pairs.clear();
        for (size_t i = 0; i < src.points.size(); ++i) {
            Vec3 moved = res.transform.apply(src.points[i]);
            auto hit = tree.nearest(moved, cfg.max_pair_distance);
            if (hit) pairs.push_back({int(i), hit->index, hit->distance});
        }
        if (iter == 0) res.initial_correspondences = pairs.size();
        if (int(pairs.size()) < cfg.min_correspondences) {
            if (iter == 0)
                throw std::runtime_error(
                    "trimmed_icp: no initial overlap, only " + std::to_string(pairs.size()) +
                    " correspondences within radius " + std::to_string(cfg.max_pair_distance));
            break;
        }

        size_t keep = size_t(std::max(8.0, std::floor(cfg.keep_ratio * double(pairs.size()))));
        keep = std::min(keep, pairs.size());
        std::partial_sort(pairs.begin(), pairs.begin() + keep, pairs.end(),
                          [](const Pair& a, const Pair& b) {
                              if (a.dist != b.dist) return a.dist < b.dist;
                              return a.si < b.si;
                          });
        kept_src.clear();
        kept_dst.clear();
        for (size_t k = 0; k < keep; ++k) {
            kept_src.push_back(src.points[pairs[k].si]);
            kept_dst.push_back(dst.points[pairs[k].di]);
        }

        Sim3 refit = sim3_least_squares(kept_src, kept_dst);
        double rms = residual_rms(kept_src, kept_dst, refit);
        if (!res.rms_history.empty() && rms > res.rms_history.back())
            break; // would get worse; keep the last accepted transform

        res.transform = refit;
        res.iterations += 1;
        res.kept_source = kept_src;
        bool settled = !res.rms_history.empty() &&
                       std::abs(res.rms_history.back() - rms) < cfg.rms_delta;
        res.rms_history.push_back(rms);
        if (settled) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace declutter
