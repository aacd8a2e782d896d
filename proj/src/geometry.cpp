#include "ssod/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "ssod/error.hpp"

namespace ssod {

namespace {

std::string describe(const RotatedBox& b) {
    std::ostringstream os;
    os << "(" << b.cx << ", " << b.cy << ", " << b.w << ", " << b.h << ", " << b.theta << ")";
    return os.str();
}

// Maps an angle into [-pi/2, pi/2).
double wrap_half_turn(double theta) {
    double t = theta - kPi * std::floor((theta + kPi / 2.0) / kPi);
    if (t >= kPi / 2.0) t -= kPi;
    if (t < -kPi / 2.0) t += kPi;
    return t;
}

double cross(const Point& a, const Point& b) { return a.x * b.y - a.y * b.x; }

Point sub(const Point& a, const Point& b) { return {a.x - b.x, a.y - b.y}; }

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void check_psd(const Matrix2& s, const char* which) {
    const double scale = std::max({std::abs(s.xx), std::abs(s.yy), std::abs(s.xy), std::abs(s.yx)});
    const double tol = 1e-9 * std::max(scale, 1e-300);
    const bool finite = std::isfinite(s.xx) && std::isfinite(s.xy) && std::isfinite(s.yx) && std::isfinite(s.yy);
    if (!finite || std::abs(s.xy - s.yx) > tol || s.xx < -tol || s.yy < -tol ||
        s.det() < -tol * std::max(scale, 1e-300)) {
        throw DomainError(std::string("covariance ") + which + " is not symmetric positive semi-definite");
    }
}

// Sutherland-Hodgman clip of a convex polygon against one half-plane, the
// left side of the directed edge a->b.
struct Poly {
    std::array<Point, 16> v;
    int n = 0;
};

void clip_edge(const Poly& in, const Point& a, const Point& b, Poly& out) {
    out.n = 0;
    const Point e = sub(b, a);
    for (int i = 0; i < in.n; ++i) {
        const Point& p = in.v[i];
        const Point& q = in.v[(i + 1) % in.n];
        const double sp = cross(e, sub(p, a));
        const double sq = cross(e, sub(q, a));
        if (sp >= 0.0) out.v[out.n++] = p;
        if ((sp >= 0.0) != (sq >= 0.0)) {
            const double t = sp / (sp - sq);
            out.v[out.n++] = {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
        }
    }
}

}  // namespace

void validate(const RotatedBox& box) {
    if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || !std::isfinite(box.w) || !std::isfinite(box.h) ||
        !std::isfinite(box.theta)) {
        throw InvalidBoxError("non-finite box field in " + describe(box));
    }
    if (box.w < kMinExtent || box.h < kMinExtent) {
        throw InvalidBoxError("box extent below minimum in " + describe(box));
    }
}

RotatedBox canonicalize(const RotatedBox& box) {
    validate(box);
    RotatedBox out = box;
    if (out.h > out.w) {
        std::swap(out.w, out.h);
        out.theta += kPi / 2.0;
    }
    out.theta = wrap_half_turn(out.theta);
    // A square is invariant under quarter turns as well.
    if (out.w - out.h <= 1e-9 * out.w && out.theta >= 0.0) out.theta -= kPi / 2.0;
    return out;
}

GaussianBox to_gaussian(const RotatedBox& box) {
    validate(box);
    const double c = std::cos(box.theta);
    const double s = std::sin(box.theta);
    const double a = box.w * box.w / 4.0;
    const double b = box.h * box.h / 4.0;
    const double off = (a - b) * c * s;
    return {{box.cx, box.cy}, {a * c * c + b * s * s, off, off, a * s * s + b * c * c}};
}

double wasserstein_sq_unchecked(const GaussianBox& a, const GaussianBox& b) {
    const Matrix2& sa = a.sigma;
    const Matrix2& sb = b.sigma;
    const double dx = a.mu.x - b.mu.x;
    const double dy = a.mu.y - b.mu.y;
    // Grouped so that swapping a and b yields the identical rounding.
    const double tr_prod = (sa.xx * sb.xx + sa.yy * sb.yy) + (sa.xy * sb.yx + sa.yx * sb.xy);
    const double det_prod = std::max(0.0, sa.det()) * std::max(0.0, sb.det());
    const double root_trace = std::sqrt(std::max(0.0, tr_prod + 2.0 * std::sqrt(det_prod)));
    const double d = (dx * dx + dy * dy) + (sa.trace() + sb.trace()) - 2.0 * root_trace;
    return std::max(0.0, d);
}

double wasserstein_sq(const GaussianBox& a, const GaussianBox& b) {
    check_psd(a.sigma, "a");
    check_psd(b.sigma, "b");
    if (!std::isfinite(a.mu.x) || !std::isfinite(a.mu.y) || !std::isfinite(b.mu.x) || !std::isfinite(b.mu.y)) {
        throw DomainError("non-finite Gaussian mean");
    }
    return wasserstein_sq_unchecked(a, b);
}

double wasserstein_sq(const RotatedBox& a, const RotatedBox& b) {
    validate(a);
    validate(b);
    return wasserstein_sq_boxes(a, b, std::sin(a.theta - b.theta));
}

double signed_area(std::span<const Point> polygon) {
    double acc = 0.0;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) acc += cross(polygon[i], polygon[(i + 1) % n]);
    return acc / 2.0;
}

double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
    validate(a);
    validate(b);
    const double reach = (std::hypot(a.w, a.h) + std::hypot(b.w, b.h)) / 2.0;
    if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= reach) return 0.0;

    const QuadPolygon qa = box_to_quad(a);
    const QuadPolygon qb = box_to_quad(b);
    Poly cur;
    Poly next;
    std::copy(qa.begin(), qa.end(), cur.v.begin());
    cur.n = 4;
    for (int i = 0; i < 4 && cur.n > 0; ++i) {
        clip_edge(cur, qb[i], qb[(i + 1) % 4], next);
        std::swap(cur, next);
    }
    if (cur.n < 3) return 0.0;
    const double inter = std::max(0.0, signed_area(std::span<const Point>(cur.v.data(), cur.n)));
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool is_small(const RotatedBox& box, double small_area) { return box.area() < small_area; }

QuadPolygon box_to_quad(const RotatedBox& box) {
    const double c = std::cos(box.theta);
    const double s = std::sin(box.theta);
    const double hw = box.w / 2.0;
    const double hh = box.h / 2.0;
    const std::array<Point, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
    QuadPolygon quad;
    for (std::size_t i = 0; i < 4; ++i) {
        quad[i] = {box.cx + c * local[i].x - s * local[i].y, box.cy + s * local[i].x + c * local[i].y};
    }
    return quad;
}

RotatedBox quad_to_box(const QuadPolygon& quad, double tolerance) {
    for (const Point& p : quad) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FormatError("non-finite quad vertex");
    }
    const auto mismatch = [](double u, double v) {
        const double m = std::max(u, v);
        return m > 0.0 ? std::abs(u - v) / m : 0.0;
    };
    const double e0 = dist(quad[0], quad[1]);
    const double e1 = dist(quad[1], quad[2]);
    const double e2 = dist(quad[2], quad[3]);
    const double e3 = dist(quad[3], quad[0]);
    const double d0 = dist(quad[0], quad[2]);
    const double d1 = dist(quad[1], quad[3]);
    if (mismatch(e0, e2) > tolerance || mismatch(e1, e3) > tolerance) {
        throw FormatError("quad opposite edges differ by more than the rectangle tolerance");
    }
    if (mismatch(d0, d1) > tolerance) {
        throw FormatError("quad diagonals differ by more than the rectangle tolerance");
    }

    // Midpoints of the four edges; the joins of opposite midpoints are the
    // two axes of the rectangle.
    const auto mid = [](const Point& p, const Point& q) { return Point{(p.x + q.x) / 2.0, (p.y + q.y) / 2.0}; };
    const Point m0 = mid(quad[0], quad[1]);
    const Point m1 = mid(quad[1], quad[2]);
    const Point m2 = mid(quad[2], quad[3]);
    const Point m3 = mid(quad[3], quad[0]);

    RotatedBox box;
    box.cx = (quad[0].x + quad[1].x + quad[2].x + quad[3].x) / 4.0;
    box.cy = (quad[0].y + quad[1].y + quad[2].y + quad[3].y) / 4.0;
    box.w = dist(m3, m1);
    box.h = dist(m0, m2);
    box.theta = std::atan2(m1.y - m3.y, m1.x - m3.x);
    if (box.w < kMinExtent || box.h < kMinExtent) throw FormatError("degenerate quad");
    return canonicalize(box);
}

}  // namespace ssod
