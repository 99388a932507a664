#ifndef TEXTKP_DECODE_HPP
#define TEXTKP_DECODE_HPP

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "textkp/labelmaps.hpp"

namespace textkp {

struct DetectedKeypoint {
    Point2 position; // image coordinates (map coords * downsample)
    KeypointKind kind = KeypointKind::Character;
    double score = 0.0;
    LinkSet links; // image-coordinate vectors
};

// 3x3 local maxima at or above the threshold. Plateaus collapse to the
// lexicographically smallest (y, x) pixel. A second greedy pass drops
// weaker peaks within an 8-image-pixel radius of a stronger one in the
// same channel; pixel noise on a wide gaussian otherwise splinters a
// single keypoint into several nearby local maxima.
inline std::vector<DetectedKeypoint> find_peaks(const HeatmapStack& s, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw StackError("peak threshold must be in (0, 1)");
    std::vector<DetectedKeypoint> out;
    const double scale = s.downsample;
    const int suppress = std::max(2, static_cast<int>(std::ceil(8.0 / scale)));
    // wider radius for clearly weaker peaks: the noisy fringe of a wide
    // gaussian can produce low local maxima just outside the hard radius
    const int fringe = std::max(4, static_cast<int>(std::ceil(16.0 / scale)));
    const double fringe_factor = 0.65;
    struct ChannelKind {
        int channel;
        KeypointKind kind;
    };
    const ChannelKind kinds[] = {{kHeatChar, KeypointKind::Character},
                                 {kHeatLeft, KeypointKind::Left},
                                 {kHeatRight, KeypointKind::Right}};
    for (const auto& [channel, kind] : kinds) {
        struct Candidate {
            int x, y;
            float v;
        };
        std::vector<Candidate> candidates;
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                const float v = s.at(channel, x, y);
                if (v < threshold) continue;
                bool peak = true;
                for (int dy = -1; dy <= 1 && peak; ++dy)
                    for (int dx = -1; dx <= 1 && peak; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= s.width || ny >= s.height) continue;
                        const float nv = s.at(channel, nx, ny);
                        if (nv > v) peak = false;
                        // equal-valued neighbor earlier in scan order wins
                        else if (nv == v && (ny < y || (ny == y && nx < x))) peak = false;
                    }
                if (peak) candidates.push_back({x, y, v});
            }
        // scan order is (y, x), so ties resolve lexicographically
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) { return a.v > b.v; });
        std::vector<Candidate> kept;
        for (const Candidate& c : candidates) {
            bool shadowed = false;
            for (const Candidate& k : kept) {
                const int cd = std::max(std::abs(c.x - k.x), std::abs(c.y - k.y));
                if (cd <= suppress || (cd <= fringe && c.v < fringe_factor * k.v))
                    shadowed = true;
            }
            if (!shadowed) kept.push_back(c);
        }
        std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
            return a.y != b.y ? a.y < b.y : a.x < b.x;
        });
        // Links are written in a small disk around the true keypoint; a
        // noise-shifted peak can land just outside it, so each link is
        // read from the nearest valid pixel within a 7x7 window.
        auto read_link = [&](int x, int y, LinkDir dir, int cx, int cy) -> std::optional<Point2> {
            int bx = -1, by = -1, bd = 100;
            for (int dy = -3; dy <= 3; ++dy)
                for (int dx = -3; dx <= 3; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= s.width || ny >= s.height) continue;
                    if (!s.link_valid[dir][s.idx(nx, ny)]) continue;
                    const int d = dx * dx + dy * dy;
                    if (d < bd) {
                        bd = d;
                        bx = nx;
                        by = ny;
                    }
                }
            if (bx < 0) return std::nullopt;
            const size_t i = s.idx(bx, by);
            return Point2{s.channels[cx][i] * scale, s.channels[cy][i] * scale};
        };
        for (const auto& [x, y, v] : kept) {
            DetectedKeypoint kp;
            kp.position = {x * scale, y * scale};
            kp.kind = kind;
            kp.score = v;
            if (kind != KeypointKind::Left)
                kp.links.left = read_link(x, y, kLeft, kLinkLeftX, kLinkLeftY);
            if (kind != KeypointKind::Right)
                kp.links.right = read_link(x, y, kRight, kLinkRightX, kLinkRightY);
            if (auto up = read_link(x, y, kUp, kLinkUpX, kLinkUpY)) kp.links.up = *up;
            if (auto down = read_link(x, y, kDown, kLinkDownX, kLinkDownY)) kp.links.down = *down;
            out.push_back(kp);
        }
    }
    return out;
}

} // namespace textkp

#endif
