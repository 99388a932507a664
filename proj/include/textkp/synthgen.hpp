#ifndef TEXTKP_SYNTHGEN_HPP
#define TEXTKP_SYNTHGEN_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "textkp/annotations.hpp"
#include "textkp/image.hpp"

namespace textkp {

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 3x3 projective map from the unit square to a quad (TL, TR, BR, BL).
struct Homography {
    Eigen::Matrix3d forward;
    Eigen::Matrix3d inverse;

    static Homography unit_square_to(const std::array<Point2, 4>& quad) {
        // direct linear transform, h22 fixed to 1
        Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
        Eigen::Matrix<double, 8, 1> b;
        const std::array<Point2, 4> src = {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
        for (int i = 0; i < 4; ++i) {
            const double x = src[i].x, y = src[i].y;
            const double u = quad[i].x, v = quad[i].y;
            A.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
            A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
            b[2 * i] = u;
            b[2 * i + 1] = v;
        }
        const Eigen::Matrix<double, 8, 1> h = A.fullPivLu().solve(b);
        Homography H;
        H.forward << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
        H.inverse = H.forward.inverse();
        return H;
    }

    Point2 apply(const Eigen::Matrix3d& M, Point2 p) const {
        const Eigen::Vector3d q = M * Eigen::Vector3d(p.x, p.y, 1.0);
        return {q[0] / q[2], q[1] / q[2]};
    }
    Point2 map(Point2 p) const { return apply(forward, p); }
    Point2 unmap(Point2 p) const { return apply(inverse, p); }
};

// High-contrast band pattern: one smoothed alternating block per
// character plus an inverted horizontal stripe. u runs along the text,
// v from upper (0) to lower (1) boundary.
inline double pattern_value(double u, double v, int n_chars) {
    const double sq = std::clamp(4.0 * std::sin(3.14159265358979323846 * u * n_chars), -1.0, 1.0);
    double base = 135.0 + 95.0 * sq;
    const double dv = std::abs(v - 0.5);
    double stripe = 1.0 - std::clamp((dv - 0.06) / 0.04, 0.0, 1.0);
    stripe = stripe * stripe * (3.0 - 2.0 * stripe);
    return base * (1.0 - stripe) + (255.0 - base) * stripe;
}

struct ShapeMix {
    double rect = 0.4;
    double rotated = 0.2;
    double perspective = 0.2;
    double sine = 0.2;
};

struct SceneSpec {
    uint64_t seed = 0;
    int width = 512;
    int height = 512;
    int min_instances = 1;
    int max_instances = 3;
    ShapeMix mix;
    int min_text_len = 3;
    int max_text_len = 8;
    double min_band_height = 18.0;
    double max_band_height = 32.0;
    double min_amplitude = 4.0;
    double max_amplitude = 9.0;
    double min_wavelength = 100.0;
    double max_wavelength = 180.0;
};

struct Scene {
    ImageRecord record;
    ImageU8 image;
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Band {
    TextAnnotation annotation;
    double bx0, by0, bx1, by1; // bounding box
    // closed-form inverse map image -> (u, v); returns false outside the band
    std::function<bool(double, double, double&, double&)> unmap;
};

inline Band make_rect_band(double x0, double y0, double w, double h, int n, std::mt19937_64&) {
    Band band;
    band.annotation.polygon = {{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}};
    band.bx0 = x0;
    band.by0 = y0;
    band.bx1 = x0 + w;
    band.by1 = y0 + h;
    band.unmap = [=](double x, double y, double& u, double& v) {
        u = (x - x0) / w;
        v = (y - y0) / h;
        return u >= 0 && u < 1 && v >= 0 && v < 1;
    };
    (void)n;
    return band;
}

inline Band make_rotated_band(double cx, double cy, double w, double h, double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    auto fwd = [=](double u, double v) -> Point2 {
        const double lx = (u - 0.5) * w, ly = (v - 0.5) * h;
        return {cx + ca * lx - sa * ly, cy + sa * lx + ca * ly};
    };
    Band band;
    band.annotation.polygon = {fwd(0, 0), fwd(1, 0), fwd(1, 1), fwd(0, 1)};
    band.unmap = [=](double x, double y, double& u, double& v) {
        const double dx = x - cx, dy = y - cy;
        u = (ca * dx + sa * dy) / w + 0.5;
        v = (-sa * dx + ca * dy) / h + 0.5;
        return u >= 0 && u < 1 && v >= 0 && v < 1;
    };
    return band;
}

inline Band make_perspective_band(double x0, double y0, double w, double h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jx(-0.12 * w, 0.12 * w);
    std::uniform_real_distribution<double> jy(-0.18 * h, 0.18 * h);
    const std::array<Point2, 4> quad = {{{x0 + jx(rng), y0 + jy(rng)},
                                         {x0 + w + jx(rng), y0 + jy(rng)},
                                         {x0 + w + jx(rng), y0 + h + jy(rng)},
                                         {x0 + jx(rng), y0 + h + jy(rng)}}};
    const Homography H = Homography::unit_square_to(quad);
    Band band;
    band.annotation.polygon = {quad[0], quad[1], quad[2], quad[3]};
    band.unmap = [H](double x, double y, double& u, double& v) {
        const Point2 p = H.unmap({x, y});
        u = p.x;
        v = p.y;
        return u >= 0 && u < 1 && v >= 0 && v < 1;
    };
    return band;
}

// Sine band: centre line yc(x) = yc0 + A sin(2 pi (x - x0) / wavelength + phase),
// boundaries offset vertically by h/2. The pattern's u coordinate follows
// the arc-length fraction along the centre curve.
inline Band make_sine_band(double x0, double yc0, double w, double h, double amp,
                           double wavelength, double phase) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    auto yc = [=](double x) { return yc0 + amp * std::sin(two_pi * (x - x0) / wavelength + phase); };

    // dense arc-length table for the u coordinate
    const int table_n = 2048;
    auto table = std::make_shared<std::vector<double>>(table_n + 1);
    (*table)[0] = 0.0;
    double px = x0, py = yc(x0);
    for (int i = 1; i <= table_n; ++i) {
        const double x = x0 + w * i / table_n;
        const double y = yc(x);
        (*table)[i] = (*table)[i - 1] + std::hypot(x - px, y - py);
        px = x;
        py = y;
    }
    const double total = table->back();

    Band band;
    constexpr int stations = 7; // 14-vertex polygon
    Polygon upper, lower;
    for (int i = 0; i < stations; ++i) {
        const double x = x0 + w * i / (stations - 1);
        upper.push_back({x, yc(x) - h / 2});
        lower.push_back({x, yc(x) + h / 2});
    }
    band.annotation.polygon = upper;
    for (int i = stations - 1; i >= 0; --i) band.annotation.polygon.push_back(lower[i]);

    band.unmap = [=](double x, double y, double& u, double& v) {
        if (x < x0 || x >= x0 + w) return false;
        const double fi = (x - x0) / w * table_n;
        const int i0 = std::min(table_n - 1, static_cast<int>(fi));
        const double s = (*table)[i0] + ((*table)[i0 + 1] - (*table)[i0]) * (fi - i0);
        u = s / total;
        v = (y - (yc(x) - h / 2)) / h;
        return u >= 0 && u < 1 && v >= 0 && v < 1;
    };
    return band;
}

inline void compute_bbox(Band& band) {
    band.bx0 = band.bx1 = band.annotation.polygon[0].x;
    band.by0 = band.by1 = band.annotation.polygon[0].y;
    for (const Point2& p : band.annotation.polygon) {
        band.bx0 = std::min(band.bx0, p.x);
        band.bx1 = std::max(band.bx1, p.x);
        band.by0 = std::min(band.by0, p.y);
        band.by1 = std::max(band.by1, p.y);
    }
}

} // namespace detail

inline Scene generate_scene(const SceneSpec& spec) {
    std::mt19937_64 rng(detail::splitmix64(spec.seed));
    std::uniform_int_distribution<int> inst_count(spec.min_instances, spec.max_instances);
    std::uniform_int_distribution<int> text_len(spec.min_text_len, spec.max_text_len);
    std::uniform_int_distribution<int> letter(0, 25);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n_inst = inst_count(rng);
    std::vector<detail::Band> bands;
    const double margin = 48.0; // keeps gaussian tails and links of instances apart
    int attempts = 0;
    while (static_cast<int>(bands.size()) < n_inst) {
        if (++attempts > 1000)
            throw SynthError("rejection sampling failed after 1000 attempts; lower the density");
        const int n = text_len(rng);
        std::uniform_real_distribution<double> hdist(spec.min_band_height, spec.max_band_height);
        const double h = hdist(rng);
        const double char_w = 14.0 + unit(rng) * 10.0;
        const double w = std::min(n * char_w, spec.width - 2.0 * margin);

        // pick a shape by mix weight
        const double total_mix =
            spec.mix.rect + spec.mix.rotated + spec.mix.perspective + spec.mix.sine;
        double pick = unit(rng) * total_mix;
        detail::Band band;
        const double pad = margin;
        if ((pick -= spec.mix.rect) < 0) {
            std::uniform_real_distribution<double> px(pad, spec.width - pad - w);
            std::uniform_real_distribution<double> py(pad, spec.height - pad - h);
            band = detail::make_rect_band(std::floor(px(rng)), std::floor(py(rng)), w, h, n, rng);
        } else if ((pick -= spec.mix.rotated) < 0) {
            std::uniform_real_distribution<double> ang(-0.5, 0.5);
            const double half = std::hypot(w, h) / 2;
            if (spec.width - pad - half < pad + half) continue;
            std::uniform_real_distribution<double> px(pad + half, spec.width - pad - half);
            std::uniform_real_distribution<double> py(pad + half, spec.height - pad - half);
            band = detail::make_rotated_band(px(rng), py(rng), w, h, ang(rng));
        } else if ((pick -= spec.mix.perspective) < 0) {
            const double ex = 0.15 * w, ey = 0.25 * h;
            if (spec.width - pad - ex - w < pad + ex) continue;
            std::uniform_real_distribution<double> px(pad + ex, spec.width - pad - ex - w);
            std::uniform_real_distribution<double> py(pad + ey, spec.height - pad - ey - h);
            band = detail::make_perspective_band(px(rng), py(rng), w, h, rng);
        } else {
            std::uniform_real_distribution<double> amp(spec.min_amplitude, spec.max_amplitude);
            std::uniform_real_distribution<double> wl(spec.min_wavelength, spec.max_wavelength);
            std::uniform_real_distribution<double> ph(0.0, 6.28318);
            const double a = amp(rng);
            if (spec.width - pad - w < pad) continue;
            std::uniform_real_distribution<double> px(pad, spec.width - pad - w);
            std::uniform_real_distribution<double> py(pad + a + h, spec.height - pad - a - h);
            band = detail::make_sine_band(px(rng), py(rng), w, h, a, wl(rng), ph(rng));
        }
        detail::compute_bbox(band);
        if (band.bx0 < 2 || band.by0 < 2 || band.bx1 > spec.width - 2 || band.by1 > spec.height - 2)
            continue;
        bool overlaps = false;
        for (const detail::Band& other : bands)
            if (band.bx0 - margin < other.bx1 && other.bx0 - margin < band.bx1 &&
                band.by0 - margin < other.by1 && other.by0 - margin < band.by1)
                overlaps = true;
        if (overlaps) continue;

        std::string text;
        for (int i = 0; i < n; ++i) text.push_back(static_cast<char>('A' + letter(rng)));
        band.annotation.transcription = text;
        bands.push_back(std::move(band));
    }

    Scene scene;
    scene.record.width = spec.width;
    scene.record.height = spec.height;
    scene.image = ImageU8(spec.width, spec.height, 100); // flat gray background
    for (const detail::Band& band : bands) {
        scene.record.instances.push_back(band.annotation);
        const int n = static_cast<int>(band.annotation.transcription.size());
        const int ix0 = std::max(0, static_cast<int>(std::floor(band.bx0)) - 1);
        const int ix1 = std::min(spec.width - 1, static_cast<int>(std::ceil(band.bx1)) + 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor(band.by0)) - 1);
        const int iy1 = std::min(spec.height - 1, static_cast<int>(std::ceil(band.by1)) + 1);
        for (int y = iy0; y <= iy1; ++y)
            for (int x = ix0; x <= ix1; ++x) {
                double u, v;
                if (!band.unmap(x + 0.5, y + 0.5, u, v)) continue;
                const auto g = static_cast<uint8_t>(std::lround(pattern_value(u, v, n)));
                uint8_t* px = scene.image.at(x, y);
                px[0] = px[1] = px[2] = g;
            }
    }
    return scene;
}

struct SuiteManifest {
    uint64_t suite_seed = 0;
    std::vector<uint64_t> image_seeds;
    std::vector<std::string> image_names;
};

// Batch generation: images/, annotations.jsonl and manifest.json under out_dir.
inline SuiteManifest generate_suite(SceneSpec spec, int n_images,
                                    const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    SuiteManifest manifest;
    manifest.suite_seed = spec.seed;
    std::vector<ImageRecord> records;
    for (int i = 0; i < n_images; ++i) {
        SceneSpec per = spec;
        per.seed = detail::splitmix64(spec.seed ^ (0x51700000ULL + i));
        Scene scene = generate_scene(per);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04d.png", i);
        scene.record.image_path = std::string("images/") + name;
        write_png(scene.image, out_dir / scene.record.image_path);
        manifest.image_seeds.push_back(per.seed);
        manifest.image_names.push_back(scene.record.image_path);
        records.push_back(std::move(scene.record));
    }
    save_annotations(records, out_dir / "annotations.jsonl");
    nlohmann::json j;
    j["suite_seed"] = manifest.suite_seed;
    j["image_seeds"] = manifest.image_seeds;
    j["images"] = manifest.image_names;
    std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
    mf << j.dump(2) << "\n";
    if (!mf) throw SynthError("cannot write manifest");
    return manifest;
}

} // namespace textkp

#endif
