#ifndef TEXTKP_SELFTEST_HPP
#define TEXTKP_SELFTEST_HPP

#include <chrono>
#include <random>
#include <sstream>

#include "textkp/losses.hpp"
#include "textkp/pipeline.hpp"

namespace textkp {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace selftest {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

inline std::filesystem::path fresh_dir(const std::filesystem::path& base, const std::string& name) {
    const std::filesystem::path p = base / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline MatchReport run_suite_eval(const SceneSpec& spec, int n_images,
                                  const std::filesystem::path& dir, const RunConfig& cfg) {
    generate_suite(spec, n_images, dir);
    run_gen_labels(dir / "annotations.jsonl", dir / "stacks", cfg);
    const auto dets = run_detect(dir / "stacks", dir / "detections.jsonl", cfg);
    return evaluate_dataset(dets, load_annotations(dir / "annotations.jsonl"), cfg.iou_threshold,
                            cfg.grid_scale);
}

// Clean 50-image roundtrip, P/R/F >= 0.99, under 60 s.
inline CheckResult check_roundtrip_clean(const RunConfig& cfg, const std::filesystem::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    SceneSpec spec;
    spec.seed = cfg.seed + 1;
    RunConfig clean = cfg;
    clean.noise_sigma = 0.0;
    const MatchReport rep = run_suite_eval(spec, 50, fresh_dir(work, "clean"), clean);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CheckResult r;
    r.name = "roundtrip-clean";
    r.pass = rep.precision >= 0.99 && rep.recall >= 0.99 && rep.fscore >= 0.99 && secs < 60.0;
    r.detail = "P=" + fmt(rep.precision) + " R=" + fmt(rep.recall) + " F=" + fmt(rep.fscore) +
               " time=" + fmt(secs) + "s";
    return r;
}

// Noisy roundtrip F >= 0.95; curved-only within 0.02 F of straight-only.
inline CheckResult check_roundtrip_noisy(const RunConfig& cfg, const std::filesystem::path& work) {
    RunConfig noisy = cfg;
    noisy.noise_sigma = 0.05;
    SceneSpec spec;
    spec.seed = cfg.seed + 2;
    const MatchReport mixed = run_suite_eval(spec, 50, fresh_dir(work, "noisy"), noisy);

    SceneSpec straight = spec;
    straight.seed = cfg.seed + 3;
    straight.mix = {0.5, 0.3, 0.2, 0.0};
    const MatchReport rs = run_suite_eval(straight, 30, fresh_dir(work, "straight"), noisy);
    SceneSpec curved = spec;
    curved.seed = cfg.seed + 4;
    curved.mix = {0.0, 0.0, 0.0, 1.0};
    const MatchReport rc = run_suite_eval(curved, 30, fresh_dir(work, "curved"), noisy);

    CheckResult r;
    r.name = "roundtrip-noisy";
    const double gap = std::abs(rc.fscore - rs.fscore);
    r.pass = mixed.fscore >= 0.95 && gap <= 0.02;
    r.detail = "F=" + fmt(mixed.fscore) + " F_straight=" + fmt(rs.fscore) +
               " F_curved=" + fmt(rc.fscore) + " gap=" + fmt(gap);
    return r;
}

// Distance-ratio worked examples.
inline CheckResult check_association(const RunConfig& cfg) {
    DetectedKeypoint kp;
    kp.position = {10, 10};
    kp.links.right = Point2{20, 0};

    auto candidates = [&](Point2 pos) {
        std::vector<DetectedKeypoint> all(2);
        all[0] = kp;
        all[1].position = pos;
        return all;
    };
    const auto exact = link_candidates(kp, candidates({30, 10}), LinkDirection::Rightward,
                                       cfg.ratio_threshold);
    const auto near = link_candidates(kp, candidates({35, 10}), LinkDirection::Rightward,
                                      cfg.ratio_threshold);
    const auto far = link_candidates(kp, candidates({90, 10}), LinkDirection::Rightward,
                                     cfg.ratio_threshold);
    CheckResult r;
    r.name = "association-ratio";
    r.pass = exact.has_value() && near.has_value() && !far.has_value();
    r.detail = std::string("ratio 0 ") + (exact ? "accepted" : "rejected") + ", 0.2 " +
               (near ? "accepted" : "rejected") + ", 0.75 " + (far ? "accepted" : "rejected");
    return r;
}

// TPS control-point residual < 1e-6 on 20 random fits and
// affine reproduction within 1e-6 against a least-squares affine oracle.
inline CheckResult check_tps(const RunConfig& cfg) {
    std::mt19937_64 rng(cfg.seed + 41);
    std::uniform_real_distribution<double> coord(0.0, 256.0);
    std::uniform_int_distribution<int> count(6, 16);
    double max_residual = 0.0;
    for (int it = 0; it < 20; ++it) {
        std::vector<Point2> src, dst;
        const int n = count(rng);
        while (static_cast<int>(src.size()) < n) {
            const Point2 p{coord(rng), coord(rng)};
            bool ok = true;
            for (const Point2& q : src)
                if (dist(p, q) < 1.0) ok = false;
            if (ok) src.push_back(p);
        }
        for (int i = 0; i < n; ++i) dst.push_back({coord(rng), coord(rng)});
        const TpsTransform t = fit_tps(src, dst);
        for (int i = 0; i < n; ++i)
            max_residual = std::max(max_residual, dist(t.apply(src[i]), dst[i]));
    }

    std::uniform_real_distribution<double> coef(-1.5, 1.5);
    double max_affine_err = 0.0;
    for (int it = 0; it < 20; ++it) {
        const double a = coef(rng), b = coef(rng), c = coord(rng);
        const double d = coef(rng), e = coef(rng), f = coord(rng);
        auto affine = [&](Point2 p) { return Point2{a * p.x + b * p.y + c, d * p.x + e * p.y + f}; };
        std::vector<Point2> src, dst;
        while (src.size() < 8) {
            const Point2 p{coord(rng), coord(rng)};
            bool ok = true;
            for (const Point2& q : src)
                if (dist(p, q) < 1.0) ok = false;
            if (ok) {
                src.push_back(p);
                dst.push_back(affine(p));
            }
        }
        const TpsTransform t = fit_tps(src, dst);
        // independent oracle: least-squares affine fit to the same pairs
        Eigen::MatrixXd M(src.size(), 3);
        Eigen::VectorXd vx(src.size()), vy(src.size());
        for (size_t i = 0; i < src.size(); ++i) {
            M(i, 0) = src[i].x;
            M(i, 1) = src[i].y;
            M(i, 2) = 1.0;
            vx[i] = dst[i].x;
            vy[i] = dst[i].y;
        }
        const Eigen::Vector3d ax = M.colPivHouseholderQr().solve(vx);
        const Eigen::Vector3d ay = M.colPivHouseholderQr().solve(vy);
        for (int k = 0; k < 100; ++k) {
            const Point2 p{coord(rng), coord(rng)};
            const Point2 got = t.apply(p);
            const Point2 want{ax[0] * p.x + ax[1] * p.y + ax[2],
                              ay[0] * p.x + ay[1] * p.y + ay[2]};
            max_affine_err = std::max(max_affine_err, dist(got, want));
        }
    }
    CheckResult r;
    r.name = "tps-exactness";
    r.pass = max_residual < 1e-6 && max_affine_err < 1e-6;
    r.detail = "max residual=" + fmt(max_residual) + " max affine err=" + fmt(max_affine_err);
    return r;
}

// Sine-bent pattern rectifies back to the straight pattern
// (mean |diff| <= 5); m=2 perspective quad matches a homography-warp
// oracle (mean |diff| <= 2).
inline CheckResult check_rectification(const RunConfig& cfg) {
    double sine_mean = 0.0;
    {
        // gentle sine band rendered through the known analytic warp
        const double x0 = 60.0, yc0 = 100.0, w = 200.0, h = 24.0;
        const double amp = 3.0, wavelength = 200.0, phase = 0.7;
        const int n = 6;
        detail::Band band = detail::make_sine_band(x0, yc0, w, h, amp, wavelength, phase);
        detail::compute_bbox(band);
        band.annotation.transcription = std::string(static_cast<size_t>(n), 'A');
        ImageU8 scene(320, 200, 100);
        for (int y = 0; y < scene.height; ++y)
            for (int x = 0; x < scene.width; ++x) {
                double u, v;
                if (!band.unmap(x + 0.5, y + 0.5, u, v)) continue;
                const auto g = static_cast<uint8_t>(std::lround(pattern_value(u, v, n)));
                uint8_t* px = scene.at(x, y);
                px[0] = px[1] = px[2] = g;
            }

        const InstanceLabel label = build_instance_label(band.annotation);
        std::vector<Point2> positions;
        for (const Keypoint& kp : label.keypoints) positions.push_back(kp.position);
        const auto extended = extend_landmarks(label.landmarks, positions, cfg.extension_factor);
        const RectifiedPatch patch = rectify_patch(scene, extended);
        const int W = patch.pixels.width, H = patch.pixels.height;

        // oracle: invert the bend analytically. Column x sits at arc
        // fraction (x+0.5)/W along the centre curve; rows run along the
        // curve normal, one source pixel per patch pixel.
        const double two_pi = 2.0 * 3.14159265358979323846;
        auto yc = [&](double xx) {
            return yc0 + amp * std::sin(two_pi * (xx - x0) / wavelength + phase);
        };
        const int samples = 4000;
        std::vector<double> arc(samples + 1, 0.0);
        for (int i = 1; i <= samples; ++i) {
            const double xa = x0 + w * (i - 1) / samples, xb = x0 + w * i / samples;
            arc[i] = arc[i - 1] + std::hypot(xb - xa, yc(xb) - yc(xa));
        }
        const double total = arc.back();
        double sum = 0.0;
        long count = 0;
        for (int x = 0; x < W; ++x) {
            const double s = (x + 0.5) / W * total;
            const auto it = std::lower_bound(arc.begin(), arc.end(), s);
            const int i1 = std::max<int>(1, static_cast<int>(it - arc.begin()));
            const double t = (s - arc[i1 - 1]) / std::max(1e-12, arc[i1] - arc[i1 - 1]);
            const double xs = x0 + w * (i1 - 1 + t) / samples;
            const double slope = amp * two_pi / wavelength *
                                 std::cos(two_pi * (xs - x0) / wavelength + phase);
            const double norm = std::hypot(1.0, slope);
            const Point2 c{xs, yc(xs)};
            const Point2 nrm{slope / norm, -1.0 / norm}; // points toward the upper boundary
            for (int y = 2; y < H - 2; ++y) {
                const Point2 src = c + nrm * (H / 2.0 - (y + 0.5));
                uint8_t want[3];
                sample_bilinear(scene, src.x, src.y, want);
                sum += std::abs(patch.pixels.at(x, y)[0] - want[0]);
                ++count;
            }
        }
        sine_mean = sum / static_cast<double>(count);
    }

    double persp_mean = 0.0;
    {
        // near-parallelogram quad with a touch of perspective, rendered
        // through a known homography
        const std::array<Point2, 4> quad = {
            {{60.0, 83.0}, {246.0, 78.0}, {252.3, 119.7}, {66.0, 125.0}}};
        const Homography H = Homography::unit_square_to(quad);
        const int n = 6;
        ImageU8 scene(320, 200, 100);
        for (int y = 0; y < scene.height; ++y)
            for (int x = 0; x < scene.width; ++x) {
                const Point2 p = H.unmap({x + 0.5, y + 0.5});
                if (p.x < 0 || p.x >= 1 || p.y < 0 || p.y >= 1) continue;
                const auto g = static_cast<uint8_t>(std::lround(pattern_value(p.x, p.y, n)));
                uint8_t* px = scene.at(x, y);
                px[0] = px[1] = px[2] = g;
            }
        std::vector<LandmarkPair> pairs(2);
        pairs[0] = {quad[0], quad[3], 0};
        pairs[1] = {quad[1], quad[2], 1};
        const RectifiedPatch patch = rectify_patch(scene, pairs);
        const int W = patch.pixels.width, Ht = patch.pixels.height;
        double sum = 0.0;
        long count = 0;
        for (int y = 0; y < Ht; ++y)
            for (int x = 0; x < W; ++x) {
                const Point2 src = H.map({(x + 0.5) / W, (y + 0.5) / Ht});
                uint8_t want[3];
                sample_bilinear(scene, src.x, src.y, want);
                sum += std::abs(patch.pixels.at(x, y)[0] - want[0]);
                ++count;
            }
        persp_mean = sum / static_cast<double>(count);
    }
    CheckResult r;
    r.name = "rectification-fidelity";
    r.pass = sine_mean <= 5.0 && persp_mean <= 2.0;
    r.detail = "sine mean diff=" + fmt(sine_mean) + " perspective mean diff=" + fmt(persp_mean);
    return r;
}

namespace detail {

using Planes = std::vector<std::vector<double>>;

template <typename LossFn>
double max_fd_relative_error(Planes& pred, const LossFn& loss, const Planes& grad) {
    const double h = 1e-4;
    double worst = 0.0;
    for (size_t c = 0; c < pred.size(); ++c)
        for (size_t i = 0; i < pred[c].size(); ++i) {
            const double saved = pred[c][i];
            pred[c][i] = saved + h;
            const double up = loss(pred);
            pred[c][i] = saved - h;
            const double dn = loss(pred);
            pred[c][i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double an = grad[c][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    return worst;
}

} // namespace detail

// Focal-loss single-pixel value, finite-difference gradient
// checks on 10 random 8x8 instances, exact weighted composition.
inline CheckResult check_losses(const RunConfig& cfg) {
    CheckResult r;
    r.name = "loss-correctness";
    LossConfig lc;

    const LossValueGrad single = keypoint_loss({{0.5}}, {{1.0}}, lc);
    const double want = -0.25 * std::log(0.5);
    const bool value_ok = std::abs(single.value - want) < 1e-6;

    std::mt19937_64 rng(cfg.seed + 61);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> soft(0.0, 0.9);
    double worst = 0.0;
    for (int it = 0; it < 10; ++it) {
        detail::Planes pred(3), target(3);
        for (int c = 0; c < 3; ++c) {
            pred[c].resize(64);
            target[c].resize(64);
            for (int i = 0; i < 64; ++i) {
                pred[c][i] = prob(rng);
                target[c][i] = soft(rng);
            }
            target[c][it % 64] = 1.0; // at least one positive per channel
        }
        const LossValueGrad kp = keypoint_loss(pred, target, lc);
        worst = std::max(worst, detail::max_fd_relative_error(
                                    pred, [&](const detail::Planes& p) {
                                        return keypoint_loss(p, target, lc).value;
                                    },
                                    kp.grad));

        detail::Planes mp(1), mt(1);
        mp[0].resize(64);
        mt[0].resize(64);
        std::uniform_int_distribution<int> coin(0, 1);
        for (int i = 0; i < 64; ++i) {
            mp[0][i] = prob(rng);
            mt[0][i] = coin(rng);
        }
        const LossValueGrad mk = mask_loss(mp[0], mt[0], lc);
        worst = std::max(worst, detail::max_fd_relative_error(
                                    mp, [&](const detail::Planes& p) {
                                        return mask_loss(p[0], mt[0], lc).value;
                                    },
                                    mk.grad));

        detail::Planes lp(8), lt(8);
        std::vector<std::vector<uint8_t>> valid(4);
        std::uniform_real_distribution<double> off(-2.0, 2.0);
        for (int c = 0; c < 8; ++c) {
            lp[c].resize(64);
            lt[c].resize(64);
            for (int i = 0; i < 64; ++i) {
                lp[c][i] = off(rng);
                lt[c][i] = off(rng);
            }
        }
        bool any = false;
        for (int d = 0; d < 4; ++d) {
            valid[d].resize(64);
            for (int i = 0; i < 64; ++i) {
                valid[d][i] = coin(rng);
                any = any || valid[d][i];
            }
        }
        if (!any) valid[0][0] = 1;
        const LossValueGrad lk = link_loss(lp, lt, valid);
        // avoid the smooth-L1 kink at |e| == 1 (measure-zero, but be safe)
        bool near_kink = false;
        for (int c = 0; c < 8 && !near_kink; ++c)
            for (int i = 0; i < 64; ++i)
                if (std::abs(std::abs(lp[c][i] - lt[c][i]) - 1.0) < 1e-3) near_kink = true;
        if (!near_kink)
            worst = std::max(worst, detail::max_fd_relative_error(
                                        lp, [&](const detail::Planes& p) {
                                            return link_loss(p, lt, valid).value;
                                        },
                                        lk.grad));
        // invalid pixels carry exactly zero gradient
        for (int c = 0; c < 8; ++c)
            for (int i = 0; i < 64; ++i)
                if (!valid[c / 2][i] && lk.grad[c][i] != 0.0) worst = 1.0;
    }

    const bool compose_ok = total_loss(1.0, 1.0, 1.0, lc) == 1.0 + 0.1 + 1.0;
    LossConfig zero = lc;
    zero.lambda_mask = zero.lambda_link = 0.0;
    const bool zero_ok = total_loss(0.7, 3.0, 5.0, zero) == 0.7;

    r.pass = value_ok && worst < 1e-4 && compose_ok && zero_ok;
    r.detail = "single-pixel err=" + fmt(std::abs(single.value - want)) +
               " max grad rel err=" + fmt(worst);
    return r;
}

// P/R/F arithmetic, the duplicate-match rule, and the
// offset-squares IoU value.
inline CheckResult check_evaluation(const RunConfig& cfg) {
    auto square = [](double x, double y, double s) {
        return Polygon{{x, y}, {x + s, y}, {x + s, y + s}, {x, y + s}};
    };
    std::vector<TextAnnotation> gts;
    std::vector<DetectionPolygon> dets;
    for (int i = 0; i < 12; ++i)
        gts.push_back({square(i * 40.0, 0.0, 30.0), "X", false});
    for (int i = 0; i < 8; ++i) dets.push_back({square(i * 40.0, 0.0, 30.0), 1.0});
    dets.push_back({square(0.0, 200.0, 30.0), 1.0});
    dets.push_back({square(100.0, 200.0, 30.0), 1.0});
    const MatchReport rep = match(dets, gts, cfg.iou_threshold, cfg.grid_scale);
    const bool counts_ok = rep.tp == 8 && rep.fp == 2 && rep.fn == 4 &&
                           std::abs(rep.precision - 0.8) < 1e-9 &&
                           std::abs(rep.recall - 0.6667) < 1e-4 &&
                           std::abs(rep.fscore - 0.7273) < 1e-4;

    std::vector<TextAnnotation> one_gt{{square(0, 0, 100), "X", false}};
    std::vector<DetectionPolygon> two_dets{{square(0, 0, 90), 1.0}, {square(0, 20, 100), 1.0}};
    const MatchReport dup = match(two_dets, one_gt, cfg.iou_threshold, cfg.grid_scale);
    const bool dup_ok = dup.tp == 1 && dup.fp == 1 && std::abs(dup.precision - 0.5) < 1e-9 &&
                        dup.recall == 1.0 && std::abs(dup.fscore - 2.0 / 3.0) < 1e-9;

    const double iou = polygon_iou(square(0, 0, 100), square(50, 0, 100), cfg.grid_scale);
    const bool iou_ok = std::abs(iou - 1.0 / 3.0) <= 0.02;

    CheckResult r;
    r.name = "evaluation-protocol";
    r.pass = counts_ok && dup_ok && iou_ok;
    r.detail = "P=" + fmt(rep.precision) + " R=" + fmt(rep.recall) + " F=" + fmt(rep.fscore) +
               " dup TP/FP=" + std::to_string(dup.tp) + "/" + std::to_string(dup.fp) +
               " offset IoU=" + fmt(iou);
    return r;
}

// Byte-identical gen-labels reruns, bit-exact KPTL
// roundtrip, and output independence from the worker count.
inline CheckResult check_determinism(const RunConfig& cfg, const std::filesystem::path& work) {
    namespace fs = std::filesystem;
    SceneSpec spec;
    spec.seed = cfg.seed + 81;
    const fs::path dir = fresh_dir(work, "determinism");
    generate_suite(spec, 5, dir);

    auto read_bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    auto dir_bytes = [&](const fs::path& d) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(d))
            if (e.path().extension() == ".kptl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::string all;
        for (const auto& f : files) all += read_bytes(f);
        return all;
    };

    RunConfig c1 = cfg;
    c1.worker_count = 1;
    RunConfig c4 = cfg;
    c4.worker_count = 4;
    run_gen_labels(dir / "annotations.jsonl", dir / "stacks_a", c1);
    run_gen_labels(dir / "annotations.jsonl", dir / "stacks_b", c1);
    run_gen_labels(dir / "annotations.jsonl", dir / "stacks_c", c4);
    const bool rerun_ok = dir_bytes(dir / "stacks_a") == dir_bytes(dir / "stacks_b");
    const bool workers_ok = dir_bytes(dir / "stacks_a") == dir_bytes(dir / "stacks_c");

    bool roundtrip_ok = true;
    for (const auto& e : fs::directory_iterator(dir / "stacks_a"))
        if (e.path().extension() == ".kptl") {
            const std::string bytes = read_bytes(e.path());
            if (serialize_stack(deserialize_stack(bytes)) != bytes) roundtrip_ok = false;
        }

    run_detect(dir / "stacks_a", dir / "det1.jsonl", c1);
    run_detect(dir / "stacks_a", dir / "det4.jsonl", c4);
    const bool det_ok = read_bytes(dir / "det1.jsonl") == read_bytes(dir / "det4.jsonl");

    CheckResult r;
    r.name = "format-determinism";
    r.pass = rerun_ok && workers_ok && roundtrip_ok && det_ok;
    r.detail = std::string("rerun=") + (rerun_ok ? "ok" : "DIFF") + " workers=" +
               (workers_ok ? "ok" : "DIFF") + " roundtrip=" + (roundtrip_ok ? "ok" : "DIFF") +
               " detect=" + (det_ok ? "ok" : "DIFF");
    return r;
}

} // namespace selftest

inline std::vector<CheckResult> run_selftest(const RunConfig& cfg,
                                             const std::filesystem::path& work_dir) {
    std::filesystem::create_directories(work_dir);
    std::vector<CheckResult> results;
    results.push_back(selftest::check_roundtrip_clean(cfg, work_dir));
    results.push_back(selftest::check_roundtrip_noisy(cfg, work_dir));
    results.push_back(selftest::check_association(cfg));
    results.push_back(selftest::check_tps(cfg));
    results.push_back(selftest::check_rectification(cfg));
    results.push_back(selftest::check_losses(cfg));
    results.push_back(selftest::check_evaluation(cfg));
    results.push_back(selftest::check_determinism(cfg, work_dir));
    return results;
}

} // namespace textkp

#endif
