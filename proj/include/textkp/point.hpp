#ifndef TEXTKP_POINT_HPP
#define TEXTKP_POINT_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

namespace textkp {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
    friend Point2 operator*(double s, Point2 a) { return a * s; }
    friend Point2 operator/(Point2 a, double s) { return {a.x / s, a.y / s}; }
    friend bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double dist(Point2 a, Point2 b) { return norm(a - b); }

inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

using Polygon = std::vector<Point2>;

// Closest point on segment [a,b] to p.
inline Point2 project_to_segment(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return a;
    double t = dot(p - a, ab) / len2;
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    return a + ab * t;
}

// Proper or touching intersection of open segments, used for the
// polygon simplicity test. Shared endpoints of adjacent edges are
// handled by the caller.
inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
    auto orient = [](Point2 a, Point2 b, Point2 c) {
        const double v = cross(b - a, c - a);
        if (v > 1e-12) return 1;
        if (v < -1e-12) return -1;
        return 0;
    };
    const int o1 = orient(p1, p2, q1);
    const int o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1);
    const int o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    auto on_segment = [](Point2 a, Point2 b, Point2 c) {
        return std::min(a.x, b.x) - 1e-12 <= c.x && c.x <= std::max(a.x, b.x) + 1e-12 &&
               std::min(a.y, b.y) - 1e-12 <= c.y && c.y <= std::max(a.y, b.y) + 1e-12;
    };
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

// Simple = no two non-adjacent edges intersect and no adjacent edges
// overlap beyond their shared vertex.
inline bool polygon_is_simple(const Polygon& poly) {
    const size_t n = poly.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        const Point2 a1 = poly[i];
        const Point2 a2 = poly[(i + 1) % n];
        for (size_t j = i + 1; j < n; ++j) {
            const Point2 b1 = poly[j];
            const Point2 b2 = poly[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Adjacent edges share one endpoint; reject only if they
                // overlap along a common line (fold-back).
                const Point2 shared = (j == i + 1) ? a2 : a1;
                const Point2 ea = (j == i + 1) ? a1 : a2;
                const Point2 eb = (j == i + 1) ? b2 : b1;
                const Point2 u = ea - shared;
                const Point2 v = eb - shared;
                if (std::abs(cross(u, v)) < 1e-12 && dot(u, v) > 0.0) return false;
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

} // namespace textkp

#endif
