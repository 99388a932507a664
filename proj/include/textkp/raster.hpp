#ifndef TEXTKP_RASTER_HPP
#define TEXTKP_RASTER_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "textkp/point.hpp"

namespace textkp {

// Even-odd crossing test. A point exactly on an edge counts per the
// half-open rule (edges include their lower-y endpoint).
inline bool point_in_polygon(Point2 p, const Polygon& poly) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = poly[j];
        const Point2 b = poly[i];
        if ((b.y > p.y) != (a.y > p.y)) {
            const double xint = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

// Scanline even-odd fill into a row-major byte mask of size w*h.
// Pixel (ix, iy) is tested at continuous coordinate (ix, iy).
inline void fill_polygon(const Polygon& poly, int w, int h, std::vector<uint8_t>& mask) {
    const size_t n = poly.size();
    if (n < 3) return;
    double ymin = poly[0].y, ymax = poly[0].y;
    for (const Point2& p : poly) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(ymax)));
    std::vector<double> xs;
    for (int iy = y0; iy <= y1; ++iy) {
        const double y = static_cast<double>(iy);
        xs.clear();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point2 a = poly[j];
            const Point2 b = poly[i];
            if ((b.y > y) != (a.y > y))
                xs.push_back(b.x + (y - b.y) * (a.x - b.x) / (a.y - b.y));
        }
        std::sort(xs.begin(), xs.end());
        for (size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int xa = std::max(0, static_cast<int>(std::ceil(xs[k])));
            const int xb = std::min(w - 1, static_cast<int>(std::floor(std::nextafter(xs[k + 1], xs[k]))));
            for (int ix = xa; ix <= xb; ++ix) mask[static_cast<size_t>(iy) * w + ix] = 1;
        }
    }
}

} // namespace textkp

#endif
