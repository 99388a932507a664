#ifndef TEXTKP_LABELMAPS_HPP
#define TEXTKP_LABELMAPS_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include <zlib.h>

#include "textkp/geometry.hpp"
#include "textkp/raster.hpp"

namespace textkp {

struct StackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Channel layout of the label/prediction raster.
enum StackChannel : int {
    kMask = 0,
    kHeatChar = 1,
    kHeatLeft = 2,
    kHeatRight = 3,
    kLinkLeftX = 4,
    kLinkLeftY = 5,
    kLinkRightX = 6,
    kLinkRightY = 7,
    kLinkUpX = 8,
    kLinkUpY = 9,
    kLinkDownX = 10,
    kLinkDownY = 11,
};

enum LinkDir : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3 };

constexpr int kStackChannels = 12;
constexpr int kLinkDirs = 4;

struct HeatmapStack {
    int width = 0;   // map resolution
    int height = 0;
    int downsample = 1;
    std::array<std::vector<float>, kStackChannels> channels;
    // One validity plane per link direction; a link pair is supervised
    // only where its plane is set.
    std::array<std::vector<uint8_t>, kLinkDirs> link_valid;

    size_t plane_size() const { return static_cast<size_t>(width) * height; }
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }

    float& at(int c, int x, int y) { return channels[c][idx(x, y)]; }
    float at(int c, int x, int y) const { return channels[c][idx(x, y)]; }

    bool operator==(const HeatmapStack& o) const {
        return width == o.width && height == o.height && downsample == o.downsample &&
               channels == o.channels && link_valid == o.link_valid;
    }
};

inline HeatmapStack make_stack(int map_w, int map_h, int downsample) {
    HeatmapStack s;
    s.width = map_w;
    s.height = map_h;
    s.downsample = downsample;
    for (auto& c : s.channels) c.assign(s.plane_size(), 0.0f);
    for (auto& v : s.link_valid) v.assign(s.plane_size(), 0);
    return s;
}

namespace detail {

inline void splat_gaussian(HeatmapStack& s, int channel, double cx, double cy, double sigma) {
    const int r = static_cast<int>(std::ceil(4.0 * sigma)) + 1;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx)) - r);
    const int x1 = std::min(s.width - 1, static_cast<int>(std::ceil(cx)) + r);
    const int y0 = std::max(0, static_cast<int>(std::floor(cy)) - r);
    const int y1 = std::min(s.height - 1, static_cast<int>(std::ceil(cy)) + r);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            const float v = static_cast<float>(std::exp(-d2 * inv));
            float& dst = s.at(channel, x, y);
            if (v > dst) dst = v; // max, never sum
        }
}

inline void write_link(HeatmapStack& s, LinkDir dir, int cx, int cy,
                       const std::optional<Point2>& link) {
    const int radius = 2;
    const double inv_s = 1.0 / s.downsample;
    for (int y = cy - radius; y <= cy + radius; ++y) {
        if (y < 0 || y >= s.height) continue;
        for (int x = cx - radius; x <= cx + radius; ++x) {
            if (x < 0 || x >= s.width) continue;
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
            if (!link) continue; // validity stays false for missing directions
            const size_t i = s.idx(x, y);
            s.channels[kLinkLeftX + 2 * dir][i] = static_cast<float>(link->x * inv_s);
            s.channels[kLinkLeftX + 2 * dir + 1][i] = static_cast<float>(link->y * inv_s);
            s.link_valid[dir][i] = 1;
        }
    }
}

} // namespace detail

// Renders ground-truth labels into a stack at image size (width, height)
// divided by the downsample factor. sigma = sqrt(d) / s per keypoint.
inline HeatmapStack render_labels(const LabelBundle& bundles,
                                  const std::vector<Polygon>& mask_polygons,
                                  int width, int height, int downsample) {
    if (downsample < 1) throw StackError("downsample must be >= 1");
    const int map_w = (width + downsample - 1) / downsample;
    const int map_h = (height + downsample - 1) / downsample;
    HeatmapStack s = make_stack(map_w, map_h, downsample);
    const double inv_s = 1.0 / downsample;

    std::vector<uint8_t> mask(s.plane_size(), 0);
    for (const Polygon& poly : mask_polygons) {
        Polygon scaled;
        scaled.reserve(poly.size());
        for (Point2 p : poly) scaled.push_back(p * inv_s);
        fill_polygon(scaled, map_w, map_h, mask);
    }
    for (size_t i = 0; i < mask.size(); ++i) s.channels[kMask][i] = mask[i] ? 1.0f : 0.0f;

    for (const InstanceLabel& inst : bundles) {
        for (size_t k = 0; k < inst.keypoints.size(); ++k) {
            const Keypoint& kp = inst.keypoints[k];
            const double cx = kp.position.x * inv_s;
            const double cy = kp.position.y * inv_s;
            if (cx < 0 || cx > map_w - 1 || cy < 0 || cy > map_h - 1)
                throw StackError("keypoint out of bounds");
            const double sigma = std::sqrt(inst.penalty_distance[k]) * inv_s;
            int channel = kHeatChar;
            if (kp.kind == KeypointKind::Left) channel = kHeatLeft;
            if (kp.kind == KeypointKind::Right) channel = kHeatRight;
            detail::splat_gaussian(s, channel, cx, cy, sigma);

            const int px = static_cast<int>(std::lround(cx));
            const int py = static_cast<int>(std::lround(cy));
            const LinkSet& ln = inst.links[k];
            detail::write_link(s, kLeft, px, py, ln.left);
            detail::write_link(s, kRight, px, py, ln.right);
            detail::write_link(s, kUp, px, py, ln.up);
            detail::write_link(s, kDown, px, py, ln.down);
        }
    }
    return s;
}

inline HeatmapStack render_labels(const LabelBundle& bundles, const ImageRecord& rec,
                                  int downsample) {
    std::vector<Polygon> polys;
    for (const TextAnnotation& ann : rec.instances)
        if (!ann.illegible) polys.push_back(ann.polygon);
    return render_labels(bundles, polys, rec.width, rec.height, downsample);
}

// ---- KPTL file format ----
// magic "KPTL", u16 version=1, u32 width, u32 height, u16 downsample,
// u16 channel count, u32 CRC32 of payload. Payload: 12 float32-LE planes
// channel-major row-major, then 4 packed-bit validity planes (LSB first,
// each padded to a byte boundary).

namespace detail {

constexpr char kMagic[4] = {'K', 'P', 'T', 'L'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
    // little-endian
    for (size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get(const char* p) {
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<uint64_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return static_cast<T>(v);
}

inline std::string pack_bits(const std::vector<uint8_t>& plane) {
    std::string out((plane.size() + 7) / 8, '\0');
    for (size_t i = 0; i < plane.size(); ++i)
        if (plane[i]) out[i / 8] |= static_cast<char>(1 << (i % 8));
    return out;
}

} // namespace detail

inline std::string serialize_stack(const HeatmapStack& s) {
    std::string payload;
    payload.reserve(s.plane_size() * (kStackChannels * 4 + 1));
    for (const auto& plane : s.channels)
        for (float v : plane) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            detail::put(payload, bits);
        }
    for (const auto& plane : s.link_valid) payload += detail::pack_bits(plane);

    std::string out;
    out.append(detail::kMagic, 4);
    detail::put(out, detail::kVersion);
    detail::put(out, static_cast<uint32_t>(s.width));
    detail::put(out, static_cast<uint32_t>(s.height));
    detail::put(out, static_cast<uint16_t>(s.downsample));
    detail::put(out, static_cast<uint16_t>(kStackChannels));
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    detail::put(out, crc);
    out += payload;
    return out;
}

inline HeatmapStack deserialize_stack(const std::string& data) {
    constexpr size_t header = 4 + 2 + 4 + 4 + 2 + 2 + 4;
    if (data.size() < header) throw StackError("truncated header");
    if (std::memcmp(data.data(), detail::kMagic, 4) != 0) throw StackError("bad magic");
    const uint16_t version = detail::get<uint16_t>(data.data() + 4);
    if (version != detail::kVersion)
        throw StackError("unsupported version " + std::to_string(version));
    HeatmapStack s;
    s.width = static_cast<int>(detail::get<uint32_t>(data.data() + 6));
    s.height = static_cast<int>(detail::get<uint32_t>(data.data() + 10));
    s.downsample = detail::get<uint16_t>(data.data() + 14);
    const uint16_t nchan = detail::get<uint16_t>(data.data() + 16);
    if (nchan != kStackChannels)
        throw StackError("unexpected channel count " + std::to_string(nchan));
    const uint32_t crc_stored = detail::get<uint32_t>(data.data() + 18);

    const size_t plane = static_cast<size_t>(s.width) * s.height;
    const size_t valid_bytes = (plane + 7) / 8;
    size_t off = header;
    for (int c = 0; c < kStackChannels; ++c) {
        if (data.size() < off + plane * 4)
            throw StackError("truncated plane for channel " + std::to_string(c));
        s.channels[c].resize(plane);
        for (size_t i = 0; i < plane; ++i) {
            const uint32_t bits = detail::get<uint32_t>(data.data() + off + i * 4);
            std::memcpy(&s.channels[c][i], &bits, 4);
        }
        off += plane * 4;
    }
    for (int d = 0; d < kLinkDirs; ++d) {
        if (data.size() < off + valid_bytes)
            throw StackError("truncated validity plane " + std::to_string(d));
        s.link_valid[d].resize(plane);
        for (size_t i = 0; i < plane; ++i)
            s.link_valid[d][i] = (data[off + i / 8] >> (i % 8)) & 1;
        off += valid_bytes;
    }
    const uint32_t crc = static_cast<uint32_t>(crc32(
        0, reinterpret_cast<const Bytef*>(data.data() + header), static_cast<uInt>(off - header)));
    if (crc != crc_stored) throw StackError("checksum mismatch");
    return s;
}

inline void write_stack(const HeatmapStack& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StackError("cannot open for writing: " + path.string());
    const std::string data = serialize_stack(s);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw StackError("write failed: " + path.string());
}

inline HeatmapStack read_stack(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StackError("cannot open: " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_stack(data);
}

// Seeded Gaussian noise on heat channels (clamped to [0,1]) and on link
// channels at valid pixels. noise_sigma == 0 returns the input unchanged.
inline HeatmapStack perturb_stack(const HeatmapStack& in, double noise_sigma, uint64_t seed) {
    if (noise_sigma < 0) throw StackError("noise_sigma must be >= 0");
    HeatmapStack s = in;
    if (noise_sigma == 0.0) return s;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int c = kHeatChar; c <= kHeatRight; ++c)
        for (float& v : s.channels[c])
            v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
    for (int d = 0; d < kLinkDirs; ++d)
        for (size_t i = 0; i < s.plane_size(); ++i)
            if (s.link_valid[d][i]) {
                s.channels[kLinkLeftX + 2 * d][i] += static_cast<float>(noise(rng));
                s.channels[kLinkLeftX + 2 * d + 1][i] += static_cast<float>(noise(rng));
            }
    return s;
}

} // namespace textkp

#endif
