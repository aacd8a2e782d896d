#pragma once

// Reference implementations used only by the tests. None of them share code
// with the library beyond the plain data types.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ssod/geometry.hpp"

namespace oracle {

inline Eigen::Matrix2d covariance(const ssod::RotatedBox& b) {
    const Eigen::Matrix2d r = Eigen::Rotation2Dd(b.theta).toRotationMatrix();
    Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
    d(0, 0) = b.w * b.w / 4.0;
    d(1, 1) = b.h * b.h / 4.0;
    return r * d * r.transpose();
}

inline Eigen::Matrix2d sqrt_psd(const Eigen::Matrix2d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Squared W2 between the box Gaussians via eigen-decomposed square roots.
inline double w2_sq(const ssod::RotatedBox& a, const ssod::RotatedBox& b) {
    const Eigen::Matrix2d sa = covariance(a);
    const Eigen::Matrix2d sb = covariance(b);
    const Eigen::Matrix2d ra = sqrt_psd(sa);
    Eigen::Matrix2d m = ra * sb * ra;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double dx = a.cx - b.cx;
    const double dy = a.cy - b.cy;
    return dx * dx + dy * dy + sa.trace() + sb.trace() - 2.0 * cross;
}

inline bool inside(const ssod::RotatedBox& b, double x, double y) {
    const double c = std::cos(b.theta);
    const double s = std::sin(b.theta);
    const double dx = x - b.cx;
    const double dy = y - b.cy;
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::abs(u) <= b.w / 2.0 && std::abs(v) <= b.h / 2.0;
}

/// Monte-Carlo IoU: uniform samples inside `a` estimate |a ∩ b| / |a|.
inline double mc_iou(const ssod::RotatedBox& a, const ssod::RotatedBox& b, std::size_t samples, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const double c = std::cos(a.theta);
    const double s = std::sin(a.theta);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double lu = u(rng) * a.w;
        const double lv = u(rng) * a.h;
        hits += inside(b, a.cx + c * lu - s * lv, a.cy + s * lu + c * lv) ? 1 : 0;
    }
    const double inter = a.area() * static_cast<double>(hits) / static_cast<double>(samples);
    return inter / (a.area() + b.area() - inter);
}

/// Nearest-rank percentile by full sort.
inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    std::size_t rank = 1;
    while (rank < v.size() && static_cast<double>(rank) < p / 100.0 * static_cast<double>(v.size())) ++rank;
    return v[rank - 1];
}

/// Corner sets of two boxes coincide (as unordered sets) within tol.
inline bool same_corners(const ssod::RotatedBox& a, const ssod::RotatedBox& b, double tol) {
    const auto corners = [](const ssod::RotatedBox& r) {
        std::vector<std::pair<double, double>> out;
        const double c = std::cos(r.theta);
        const double s = std::sin(r.theta);
        for (int sx : {-1, 1}) {
            for (int sy : {-1, 1}) {
                const double u = sx * r.w / 2.0;
                const double v = sy * r.h / 2.0;
                out.emplace_back(r.cx + c * u - s * v, r.cy + s * u + c * v);
            }
        }
        return out;
    };
    const auto ca = corners(a);
    const auto cb = corners(b);
    for (const auto& p : ca) {
        bool found = false;
        for (const auto& q : cb) {
            if (std::abs(p.first - q.first) <= tol && std::abs(p.second - q.second) <= tol) found = true;
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace oracle
