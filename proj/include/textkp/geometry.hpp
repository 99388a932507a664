#ifndef TEXTKP_GEOMETRY_HPP
#define TEXTKP_GEOMETRY_HPP

#include <optional>
#include <stdexcept>
#include <vector>

#include "textkp/annotations.hpp"
#include "textkp/point.hpp"

namespace textkp {

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CenterLine {
    std::vector<Point2> points;            // left -> right
    std::vector<double> cumulative_length; // arc length at each vertex, starts at 0

    double length() const { return cumulative_length.back(); }

    // Position at arc length s by linear interpolation along the polyline.
    Point2 at(double s) const {
        if (s <= 0.0) return points.front();
        if (s >= length()) return points.back();
        size_t i = 1;
        while (cumulative_length[i] < s) ++i;
        const double seg = cumulative_length[i] - cumulative_length[i - 1];
        const double t = seg > 0.0 ? (s - cumulative_length[i - 1]) / seg : 0.0;
        return points[i - 1] + (points[i] - points[i - 1]) * t;
    }
};

enum class KeypointKind { Character, Left, Right };

struct Keypoint {
    Point2 position;
    KeypointKind kind = KeypointKind::Character;
};

struct LandmarkPair {
    Point2 upper;
    Point2 lower;
    size_t owner = 0; // index into the keypoint list
};

struct LinkSet {
    std::optional<Point2> left;
    std::optional<Point2> right;
    Point2 up;
    Point2 down;
};

struct InstanceLabel {
    std::vector<Keypoint> keypoints; // Left, Character x n, Right
    std::vector<LandmarkPair> landmarks;
    std::vector<LinkSet> links;
    std::vector<double> penalty_distance; // d per keypoint
};

using LabelBundle = std::vector<InstanceLabel>;

inline CenterLine derive_centerline(const TextAnnotation& ann) {
    const size_t k = ann.polygon.size() / 2;
    if (k < 2) throw GeometryError("polygon needs at least 4 vertices");
    CenterLine cl;
    cl.points.reserve(k);
    double max_gap = 0.0;
    for (size_t i = 0; i < k; ++i) {
        const Point2 up = ann.polygon[i];
        const Point2 lo = ann.polygon[2 * k - 1 - i];
        cl.points.push_back((up + lo) * 0.5);
        max_gap = std::max(max_gap, dist(up, lo));
    }
    if (max_gap < 1e-9)
        throw GeometryError("degenerate polygon: upper and lower boundaries coincide");
    cl.cumulative_length.resize(k);
    cl.cumulative_length[0] = 0.0;
    for (size_t i = 1; i < k; ++i)
        cl.cumulative_length[i] = cl.cumulative_length[i - 1] + dist(cl.points[i - 1], cl.points[i]);
    if (cl.length() <= 0.0)
        throw GeometryError("degenerate polygon: zero-length centerline");
    return cl;
}

inline std::vector<Keypoint> place_keypoints(const CenterLine& cl, int n) {
    if (n < 1) throw GeometryError("character count must be >= 1");
    const double len = cl.length();
    std::vector<Keypoint> kps;
    kps.reserve(static_cast<size_t>(n) + 2);
    kps.push_back({cl.points.front(), KeypointKind::Left});
    for (int i = 0; i < n; ++i)
        kps.push_back({cl.at((i + 0.5) * len / n), KeypointKind::Character});
    kps.push_back({cl.points.back(), KeypointKind::Right});
    return kps;
}

namespace detail {

// Nearest point on an open polyline, ties broken by smaller segment index.
inline Point2 nearest_on_polyline(Point2 p, const std::vector<Point2>& line) {
    Point2 best = line.front();
    double best_d = dist(p, best);
    for (size_t i = 0; i + 1 < line.size(); ++i) {
        const Point2 q = project_to_segment(p, line[i], line[i + 1]);
        const double d = dist(p, q);
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

} // namespace detail

inline std::vector<LandmarkPair> place_landmarks(const TextAnnotation& ann,
                                                 const std::vector<Keypoint>& keypoints) {
    const size_t k = ann.polygon.size() / 2;
    const std::vector<Point2> upper(ann.polygon.begin(), ann.polygon.begin() + k);
    const std::vector<Point2> lower(ann.polygon.begin() + k, ann.polygon.end());
    std::vector<LandmarkPair> pairs;
    pairs.reserve(keypoints.size());
    for (size_t i = 0; i < keypoints.size(); ++i) {
        LandmarkPair lp;
        lp.upper = detail::nearest_on_polyline(keypoints[i].position, upper);
        lp.lower = detail::nearest_on_polyline(keypoints[i].position, lower);
        lp.owner = i;
        pairs.push_back(lp);
    }
    return pairs;
}

inline std::vector<LinkSet> build_links(const std::vector<Keypoint>& keypoints,
                                        const std::vector<LandmarkPair>& landmarks) {
    std::vector<LinkSet> links(keypoints.size());
    for (size_t i = 0; i < keypoints.size(); ++i) {
        if (i > 0) links[i].left = keypoints[i - 1].position - keypoints[i].position;
        if (i + 1 < keypoints.size())
            links[i].right = keypoints[i + 1].position - keypoints[i].position;
        links[i].up = landmarks[i].upper - keypoints[i].position;
        links[i].down = landmarks[i].lower - keypoints[i].position;
    }
    return links;
}

struct GeometryConfig {
    // Whether the Left/Right end keypoints carry landmark pairs of their own.
    bool end_landmarks = true;
    double min_penalty_distance = 2.0;
};

inline InstanceLabel build_instance_label(const TextAnnotation& ann,
                                          const GeometryConfig& cfg = {}) {
    if (ann.illegible) throw GeometryError("illegible instance has no label");
    InstanceLabel label;
    const CenterLine cl = derive_centerline(ann);
    const int n = static_cast<int>(ann.transcription.size());
    label.keypoints = place_keypoints(cl, n);
    if (!cfg.end_landmarks) {
        label.keypoints.erase(label.keypoints.begin());
        label.keypoints.pop_back();
        if (label.keypoints.empty()) throw GeometryError("no keypoints left");
    }
    label.landmarks = place_landmarks(ann, label.keypoints);
    label.links = build_links(label.keypoints, label.landmarks);
    label.penalty_distance.reserve(label.keypoints.size());
    for (const LandmarkPair& lp : label.landmarks) {
        const double d = dist(lp.upper, lp.lower);
        if (d < cfg.min_penalty_distance)
            throw GeometryError("instance too thin: landmark distance " + std::to_string(d));
        label.penalty_distance.push_back(d);
    }
    return label;
}

// Labels for all legible instances of a record; illegible ones are skipped.
inline LabelBundle build_label_bundle(const ImageRecord& rec, const GeometryConfig& cfg = {}) {
    LabelBundle bundle;
    for (const TextAnnotation& ann : rec.instances) {
        if (ann.illegible) continue;
        bundle.push_back(build_instance_label(ann, cfg));
    }
    return bundle;
}

} // namespace textkp

#endif
