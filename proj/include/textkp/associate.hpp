#ifndef TEXTKP_ASSOCIATE_HPP
#define TEXTKP_ASSOCIATE_HPP

#include <algorithm>
#include <optional>
#include <vector>

#include "textkp/decode.hpp"

namespace textkp {

struct InstanceChain {
    std::vector<DetectedKeypoint> keypoints; // left -> right
    double score = 0.0;                      // mean keypoint score
};

struct AssociateDiagnostics {
    int dropped_small = 0;      // components with < 2 keypoints
    int dropped_cycle = 0;
    int dropped_end_order = 0;  // Left/Right keypoint not at a chain end
};

enum class LinkDirection { Leftward, Rightward };

// Distance-ratio rule: among candidates on the link side of kp, return
// the one minimizing |endpoint - m| / |kp - m| if that minimum is below
// the threshold.
inline std::optional<size_t> link_candidates(const DetectedKeypoint& kp,
                                             const std::vector<DetectedKeypoint>& all,
                                             LinkDirection direction, double ratio_threshold) {
    const std::optional<Point2>& link =
        direction == LinkDirection::Rightward ? kp.links.right : kp.links.left;
    if (!link) return std::nullopt;
    const Point2 endpoint = kp.position + *link;
    std::optional<size_t> best;
    double best_ratio = ratio_threshold;
    for (size_t m = 0; m < all.size(); ++m) {
        const Point2 pos = all[m].position;
        if (pos == kp.position) continue; // skip self (and exact co-located duplicates)
        if (dot(pos - kp.position, *link) <= 0.0) continue; // wrong half-plane
        const double denom = dist(kp.position, pos);
        if (denom <= 0.0) continue;
        const double ratio = dist(endpoint, pos) / denom;
        if (ratio < best_ratio) {
            best_ratio = ratio;
            best = m;
        }
    }
    return best;
}

inline std::vector<InstanceChain> build_instances(const std::vector<DetectedKeypoint>& keypoints,
                                                  double ratio_threshold,
                                                  AssociateDiagnostics* diag = nullptr,
                                                  bool strict_mutual = false) {
    // Canonical ordering makes the result independent of input order.
    std::vector<DetectedKeypoint> kps = keypoints;
    std::sort(kps.begin(), kps.end(), [](const DetectedKeypoint& a, const DetectedKeypoint& b) {
        if (a.position.y != b.position.y) return a.position.y < b.position.y;
        if (a.position.x != b.position.x) return a.position.x < b.position.x;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    const size_t n = kps.size();

    struct Edge {
        size_t from, to; // rightward: from's right neighbor is to
        double ratio;
        bool mutual = false;
    };
    std::vector<Edge> edges;
    auto add_edge = [&](size_t from, size_t to, double ratio) {
        for (Edge& e : edges)
            if (e.from == from && e.to == to) {
                e.ratio = std::min(e.ratio, ratio);
                e.mutual = true;
                return;
            }
        edges.push_back({from, to, ratio, false});
    };
    for (size_t i = 0; i < n; ++i) {
        if (auto r = link_candidates(kps[i], kps, LinkDirection::Rightward, ratio_threshold)) {
            const Point2 e = kps[i].position + *kps[i].links.right;
            add_edge(i, *r, dist(e, kps[*r].position) / dist(kps[i].position, kps[*r].position));
        }
        if (auto l = link_candidates(kps[i], kps, LinkDirection::Leftward, ratio_threshold)) {
            const Point2 e = kps[i].position + *kps[i].links.left;
            add_edge(*l, i, dist(e, kps[*l].position) / dist(kps[i].position, kps[*l].position));
        }
    }
    if (strict_mutual)
        edges.erase(std::remove_if(edges.begin(), edges.end(),
                                   [](const Edge& e) { return !e.mutual; }),
                    edges.end());

    // Conflicts (shared endpoints) resolved by smaller ratio; each node
    // keeps at most one in-edge and one out-edge.
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.ratio != b.ratio) return a.ratio < b.ratio;
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    std::vector<std::optional<size_t>> next(n), prev(n);
    for (const Edge& e : edges) {
        if (next[e.from] || prev[e.to]) continue;
        next[e.from] = e.to;
        prev[e.to] = e.from;
    }

    std::vector<InstanceChain> chains;
    std::vector<uint8_t> used(n, 0);
    for (size_t i = 0; i < n; ++i) {
        if (used[i] || prev[i]) continue; // start nodes only
        std::vector<size_t> chain;
        std::optional<size_t> cur = i;
        while (cur && !used[*cur]) {
            used[*cur] = 1;
            chain.push_back(*cur);
            cur = next[*cur];
        }
        if (chain.size() < 2) {
            if (diag) ++diag->dropped_small;
            continue;
        }
        bool ok = true;
        for (size_t j = 0; j < chain.size(); ++j) {
            const KeypointKind kind = kps[chain[j]].kind;
            if (kind == KeypointKind::Left && j != 0) ok = false;
            if (kind == KeypointKind::Right && j != chain.size() - 1) ok = false;
        }
        if (!ok) {
            if (diag) ++diag->dropped_end_order;
            continue;
        }
        InstanceChain c;
        double sum = 0.0;
        for (size_t idx : chain) {
            c.keypoints.push_back(kps[idx]);
            sum += kps[idx].score;
        }
        c.score = sum / static_cast<double>(chain.size());
        chains.push_back(std::move(c));
    }
    // Anything still unused is part of a cycle (in-degree and out-degree
    // both 1 along the whole component); cycles are dropped.
    if (diag)
        for (size_t i = 0; i < n; ++i)
            if (!used[i] && next[i] && prev[i]) {
                // count each cycle once, at its smallest index
                bool smallest = true;
                std::optional<size_t> cur = next[i];
                while (cur && *cur != i) {
                    if (*cur < i) smallest = false;
                    cur = next[*cur];
                }
                if (smallest) ++diag->dropped_cycle;
            }
    return chains;
}

} // namespace textkp

#endif
