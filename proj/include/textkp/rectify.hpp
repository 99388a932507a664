#ifndef TEXTKP_RECTIFY_HPP
#define TEXTKP_RECTIFY_HPP

#include <optional>
#include <vector>

#include "textkp/associate.hpp"
#include "textkp/image.hpp"
#include "textkp/tps.hpp"

namespace textkp {

struct RectifyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DetectionPolygon {
    Polygon vertices; // u_1..u_m left->right, then l_m..l_1
    double score = 0.0;
};

struct RectifiedPatch {
    ImageU8 pixels;
};

// Landmark pairs from a chain's vertical links: upper = kp + up, lower = kp + down.
inline std::vector<LandmarkPair> chain_landmarks(const InstanceChain& chain) {
    std::vector<LandmarkPair> pairs;
    pairs.reserve(chain.keypoints.size());
    for (size_t i = 0; i < chain.keypoints.size(); ++i) {
        const DetectedKeypoint& kp = chain.keypoints[i];
        pairs.push_back({kp.position + kp.links.up, kp.position + kp.links.down, i});
    }
    return pairs;
}

// Extend each landmark away from its keypoint by factor * link length.
// The keypoint position is recovered as the landmark minus the link, so
// only the pairs and their owners' positions are needed.
inline std::vector<LandmarkPair> extend_landmarks(const std::vector<LandmarkPair>& pairs,
                                                  const std::vector<Point2>& keypoint_positions,
                                                  double factor = 0.1) {
    if (factor < 0) throw RectifyError("extension factor must be >= 0");
    std::vector<LandmarkPair> out = pairs;
    for (LandmarkPair& lp : out) {
        const Point2 kp = keypoint_positions[lp.owner];
        lp.upper = lp.upper + (lp.upper - kp) * factor;
        lp.lower = lp.lower + (lp.lower - kp) * factor;
    }
    return out;
}

inline std::vector<LandmarkPair> extend_landmarks(const InstanceChain& chain, double factor = 0.1) {
    std::vector<Point2> positions;
    for (const DetectedKeypoint& kp : chain.keypoints) positions.push_back(kp.position);
    return extend_landmarks(chain_landmarks(chain), positions, factor);
}

// Detection polygon from (unextended) landmark pairs. Self-intersecting
// results are reported as nullopt; the caller counts them.
inline std::optional<DetectionPolygon> make_polygon(const std::vector<LandmarkPair>& pairs,
                                                    double score = 0.0) {
    if (pairs.size() < 2) throw RectifyError("need at least 2 landmark pairs");
    std::vector<LandmarkPair> kept = pairs;
    // At slanted instance ends the nearest-boundary feet of the last two
    // pairs can coincide or swap order, folding the boundary chain back on
    // itself. When the naive polygon self-intersects, drop the pair that
    // breaks forward progression along the chain and retry.
    for (size_t pass = 0; pass <= pairs.size(); ++pass) {
        DetectionPolygon poly;
        poly.score = score;
        for (const LandmarkPair& lp : kept) poly.vertices.push_back(lp.upper);
        for (auto it = kept.rbegin(); it != kept.rend(); ++it) poly.vertices.push_back(it->lower);
        if (polygon_is_simple(poly.vertices)) return poly;
        if (kept.size() <= 2) return std::nullopt;
        size_t bad = 0;
        for (size_t i = 1; i < kept.size() && bad == 0; ++i) {
            const Point2 d = (kept[i].upper + kept[i].lower) * 0.5 -
                             (kept[i - 1].upper + kept[i - 1].lower) * 0.5;
            if (dot(kept[i].upper - kept[i - 1].upper, d) <= 1e-9 ||
                dot(kept[i].lower - kept[i - 1].lower, d) <= 1e-9)
                bad = i;
        }
        if (bad == 0) return std::nullopt; // genuinely crossed chains
        if (bad + 1 == kept.size() && bad > 1) --bad; // keep the end pair
        kept.erase(kept.begin() + static_cast<long>(bad));
    }
    return std::nullopt;
}

// Fits a backward TPS (target rectangle -> source image) through the
// landmark control points and resamples the patch bilinearly. Target
// x-positions follow the cumulative arc length of the midpoint polyline.
inline RectifiedPatch rectify_patch(const ImageU8& image, const std::vector<LandmarkPair>& pairs,
                                    double regularization = 0.0) {
    const size_t m = pairs.size();
    if (m < 2) throw RectifyError("need at least 2 landmark pairs");

    std::vector<Point2> mid(m);
    for (size_t i = 0; i < m; ++i) mid[i] = (pairs[i].upper + pairs[i].lower) * 0.5;
    std::vector<double> t(m, 0.0);
    for (size_t i = 1; i < m; ++i) t[i] = t[i - 1] + dist(mid[i - 1], mid[i]);
    const double arc = t[m - 1];
    double hsum = 0.0;
    for (const LandmarkPair& lp : pairs) hsum += dist(lp.upper, lp.lower);

    const int target_h = static_cast<int>(std::lround(hsum / static_cast<double>(m)));
    const int target_w = static_cast<int>(std::lround(arc));
    if (target_h < 1 || target_w < 1) throw RectifyError("degenerate target size");
    for (size_t i = 1; i < m; ++i) t[i] /= arc;

    std::vector<Point2> target, source;
    for (size_t i = 0; i < m; ++i) {
        target.push_back({t[i] * target_w, 0.0});
        source.push_back(pairs[i].upper);
    }
    for (size_t i = 0; i < m; ++i) {
        target.push_back({t[i] * target_w, static_cast<double>(target_h)});
        source.push_back(pairs[i].lower);
    }
    const TpsTransform inverse = fit_tps(target, source, regularization);

    RectifiedPatch patch;
    patch.pixels = ImageU8(target_w, target_h);
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            const Point2 src = inverse.apply({x + 0.5, y + 0.5});
            sample_bilinear(image, src.x, src.y, patch.pixels.at(x, y));
        }
    return patch;
}

} // namespace textkp

#endif
