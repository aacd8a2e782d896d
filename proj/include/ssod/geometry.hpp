#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

namespace ssod {

inline constexpr double kPi = std::numbers::pi;

/// Extents below this many pixels are rejected as degenerate.
inline constexpr double kMinExtent = 1e-6;

/// Objects with pixel area strictly below this value are "small" (32 x 32).
inline constexpr double kSmallArea = 1024.0;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Oriented rectangle. `theta` is the direction of the `w` edge in radians.
/// The canonical form (see canonicalize) has w >= h and theta in [-pi/2, pi/2).
struct RotatedBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;
    double theta = 0.0;

    double area() const { return w * h; }
};

struct Matrix2 {
    double xx = 0.0;
    double xy = 0.0;
    double yx = 0.0;
    double yy = 0.0;

    double trace() const { return xx + yy; }
    double det() const { return xx * yy - xy * yx; }
};

/// 2-D normal N(mu, sigma) representing a rotated box.
struct GaussianBox {
    Point mu;
    Matrix2 sigma;
};

/// Four vertices in traversal order.
using QuadPolygon = std::array<Point, 4>;

/// Throws InvalidBoxError on non-finite fields or extents below kMinExtent.
void validate(const RotatedBox& box);

/// Single representative of the rectangle's point set: w >= h and
/// theta in [-pi/2, pi/2). Squares are further reduced to theta in [-pi/2, 0).
RotatedBox canonicalize(const RotatedBox& box);

/// mu = (cx, cy), sigma = R(theta) diag(w^2/4, h^2/4) R(theta)^T.
GaussianBox to_gaussian(const RotatedBox& box);

/// Squared 2-Wasserstein distance between two Gaussians:
///   |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
/// The matrix square-root trace uses the 2x2 identity
/// Tr(M^1/2) = sqrt(Tr M + 2 sqrt(det M)) with Tr M = Tr(S_a S_b) and
/// det M = det S_a det S_b. Throws DomainError if a covariance is not PSD.
double wasserstein_sq(const GaussianBox& a, const GaussianBox& b);

/// Same formula without input validation.
double wasserstein_sq_unchecked(const GaussianBox& a, const GaussianBox& b);

/// Box overload. Evaluated from half-extents and the angle difference,
/// which gives exactly 0 for identical boxes and for the (w, h, theta) vs
/// (h, w, theta + pi/2) pair, and is exactly symmetric in its arguments.
double wasserstein_sq(const RotatedBox& a, const RotatedBox& b);

/// Kernel of the box overload with sin(a.theta - b.theta) supplied by the
/// caller; no validation. Lets hot loops reuse the sine across pairs.
inline double wasserstein_sq_boxes(const RotatedBox& a, const RotatedBox& b, double sin_dtheta) {
    const double p1 = a.w / 2.0;
    const double q1 = a.h / 2.0;
    const double p2 = b.w / 2.0;
    const double q2 = b.h / 2.0;
    const double dx = a.cx - b.cx;
    const double dy = a.cy - b.cy;
    const double s2 = sin_dtheta * sin_dtheta;
    // (a1 - b1)(a2 - b2) with a = p^2, b = q^2 the covariance eigenvalues.
    const double ecc = ((p1 - q1) * (p2 - q2)) * ((p1 + q1) * (p2 + q2));
    const double near = (p1 - p2) * (p1 - p2) + (q1 - q2) * (q1 - q2);
    const double far = (p1 + p2) * (p1 + p2) + (q1 + q2) * (q1 + q2);
    // Tr(S_a S_b) + 2 sqrt(det S_a det S_b)
    const double root = (p1 * p2 + q1 * q2) * (p1 * p2 + q1 * q2) - ecc * s2;
    const double traces = (p1 * p1 + q1 * q1) + (p2 * p2 + q2 * q2);
    const double denom = traces + 2.0 * std::sqrt(std::max(0.0, root));
    // Covariance term written as (T^2 - 4 root) / (T + 2 sqrt(root)).
    const double num = std::max(0.0, near * far + 4.0 * ecc * s2);
    return (dx * dx + dy * dy) + (denom > 0.0 ? num / denom : 0.0);
}

/// Intersection over union of two rectangles by convex polygon clipping.
double rotated_iou(const RotatedBox& a, const RotatedBox& b);

/// True iff w * h < small_area. An area equal to the threshold is large.
bool is_small(const RotatedBox& box, double small_area = kSmallArea);

/// Corners in counter-clockwise order (y axis up), starting at the
/// (-w/2, -h/2) corner of the box frame.
QuadPolygon box_to_quad(const RotatedBox& box);

/// Fits a canonical box to a nominal rectangle via its edge midlines.
/// Opposite edges (and the two diagonals) must agree in length within
/// `tolerance` relative to the longer one; otherwise throws FormatError.
RotatedBox quad_to_box(const QuadPolygon& quad, double tolerance = 0.01);

/// Signed shoelace area; positive for counter-clockwise vertex order.
double signed_area(std::span<const Point> polygon);

}  // namespace ssod
