#include <catch_amalgamated.hpp>

#include <random>

#include "textkp/geometry.hpp"

using namespace textkp;

namespace {

TextAnnotation camel_rect() {
    TextAnnotation ann;
    ann.polygon = {{0, 0}, {100, 0}, {100, 20}, {0, 20}};
    ann.transcription = "CAMEL";
    return ann;
}

// sine band with 7 stations, vertical half-height h/2
TextAnnotation sine_band(double amp, double h, int stations = 7) {
    TextAnnotation ann;
    auto yc = [&](double x) { return 100.0 + amp * std::sin(x / 30.0); };
    Polygon upper, lower;
    for (int i = 0; i < stations; ++i) {
        const double x = 20.0 + i * 180.0 / (stations - 1);
        upper.push_back({x, yc(x) - h / 2});
        lower.push_back({x, yc(x) + h / 2});
    }
    ann.polygon = upper;
    for (int i = stations - 1; i >= 0; --i) ann.polygon.push_back(lower[i]);
    ann.transcription = "WAVES";
    return ann;
}

} // namespace

TEST_CASE("centerline of a rectangle") {
    const CenterLine cl = derive_centerline(camel_rect());
    REQUIRE(cl.points.size() == 2);
    CHECK(cl.points[0] == Point2{0, 10});
    CHECK(cl.points[1] == Point2{100, 10});
    CHECK(cl.length() == Catch::Approx(100.0));
}

TEST_CASE("centerline of a sine band matches the analytic mid-curve") {
    const TextAnnotation ann = sine_band(8.0, 20.0);
    const CenterLine cl = derive_centerline(ann);
    auto yc = [](double x) { return 100.0 + 8.0 * std::sin(x / 30.0); };
    REQUIRE(cl.points.size() == 7);
    for (int i = 0; i < 7; ++i) {
        const double x = 20.0 + i * 180.0 / 6.0;
        CHECK(cl.points[i].x == Catch::Approx(x));
        CHECK(cl.points[i].y == Catch::Approx(yc(x)).margin(1e-9));
    }
}

TEST_CASE("coincident boundaries are degenerate") {
    TextAnnotation ann;
    ann.polygon = {{0, 0}, {100, 0}, {100, 0}, {0, 0}};
    ann.transcription = "A";
    CHECK_THROWS_AS(derive_centerline(ann), GeometryError);
}

TEST_CASE("keypoint placement on a straight centerline") {
    const CenterLine cl = derive_centerline(camel_rect());
    const auto kps = place_keypoints(cl, 5);
    REQUIRE(kps.size() == 7);
    CHECK(kps.front().kind == KeypointKind::Left);
    CHECK(kps.front().position == Point2{0, 10});
    CHECK(kps.back().kind == KeypointKind::Right);
    CHECK(kps.back().position == Point2{100, 10});
    const double expected_x[] = {10, 30, 50, 70, 90};
    for (int i = 0; i < 5; ++i) {
        CHECK(kps[i + 1].kind == KeypointKind::Character);
        CHECK(kps[i + 1].position.x == Catch::Approx(expected_x[i]));
        CHECK(kps[i + 1].position.y == Catch::Approx(10.0));
    }
}

TEST_CASE("single character keypoint sits at the centerline midpoint") {
    const CenterLine cl = derive_centerline(camel_rect());
    const auto kps = place_keypoints(cl, 1);
    REQUIRE(kps.size() == 3);
    CHECK(kps[1].position.x == Catch::Approx(50.0));
}

TEST_CASE("arc-length placement matches a dense-sampling oracle") {
    const TextAnnotation ann = sine_band(10.0, 20.0, 7);
    const CenterLine cl = derive_centerline(ann);
    const int n = 3;
    const auto kps = place_keypoints(cl, n);

    // oracle: invert arc length with 1e4 samples of the same polyline
    const int samples = 10000;
    std::vector<Point2> pts(samples + 1);
    for (int i = 0; i <= samples; ++i) pts[i] = cl.at(cl.length() * i / samples);
    for (int i = 0; i < n; ++i) {
        const double target = (i + 0.5) * cl.length() / n;
        const Point2 oracle = cl.at(target);
        // brute force: nearest dense sample to the target arc length
        const int j = static_cast<int>(std::lround(target / cl.length() * samples));
        CHECK(dist(kps[i + 1].position, pts[j]) < 0.1);
        CHECK(dist(kps[i + 1].position, oracle) < 1e-9);
    }
}

TEST_CASE("landmarks on a rectangle are perpendicular feet") {
    const TextAnnotation ann = camel_rect();
    const CenterLine cl = derive_centerline(ann);
    const auto kps = place_keypoints(cl, 5);
    const auto pairs = place_landmarks(ann, kps);
    REQUIRE(pairs.size() == 7);
    CHECK(pairs[0].upper == Point2{0, 0});   // Left keypoint
    CHECK(pairs[0].lower == Point2{0, 20});
    CHECK(pairs[1].upper == Point2{10, 0});  // keypoint at (10,10)
    CHECK(pairs[1].lower == Point2{10, 20});
}

TEST_CASE("curved landmarks match a dense boundary search") {
    const TextAnnotation ann = sine_band(9.0, 24.0);
    const CenterLine cl = derive_centerline(ann);
    const auto kps = place_keypoints(cl, 5);
    const auto pairs = place_landmarks(ann, kps);
    const size_t k = ann.polygon.size() / 2;
    const std::vector<Point2> upper(ann.polygon.begin(), ann.polygon.begin() + k);
    const std::vector<Point2> lower(ann.polygon.begin() + k, ann.polygon.end());
    auto dense_nearest = [](Point2 p, const std::vector<Point2>& line) {
        Point2 best = line.front();
        double bd = dist(p, best);
        for (size_t s = 0; s + 1 < line.size(); ++s)
            for (int t = 0; t <= 10000 / static_cast<int>(line.size()); ++t) {
                const double f = t / (10000.0 / static_cast<double>(line.size()));
                const Point2 q = line[s] + (line[s + 1] - line[s]) * std::min(1.0, f);
                if (dist(p, q) < bd) {
                    bd = dist(p, q);
                    best = q;
                }
            }
        return best;
    };
    for (size_t i = 0; i < kps.size(); ++i) {
        CHECK(dist(pairs[i].upper, dense_nearest(kps[i].position, upper)) < 0.1);
        CHECK(dist(pairs[i].lower, dense_nearest(kps[i].position, lower)) < 0.1);
    }
}

TEST_CASE("links point to neighbors and landmarks") {
    const TextAnnotation ann = camel_rect();
    const InstanceLabel label = build_instance_label(ann);
    // keypoint at x=10 is index 1; its right neighbor is at x=30
    REQUIRE(label.links[1].right.has_value());
    CHECK(*label.links[1].right == Point2{20, 0});
    CHECK(label.links[1].up == Point2{0, -10});
    CHECK(label.links[1].down == Point2{0, 10});
    CHECK_FALSE(label.links.front().left.has_value());
    CHECK_FALSE(label.links.back().right.has_value());
}

TEST_CASE("single-character instance links to both ends") {
    TextAnnotation ann = camel_rect();
    ann.transcription = "I";
    const InstanceLabel label = build_instance_label(ann);
    REQUIRE(label.keypoints.size() == 3);
    CHECK(label.links[1].left.has_value());
    CHECK(label.links[1].right.has_value());
}

TEST_CASE("CAMEL bundle composition") {
    const InstanceLabel label = build_instance_label(camel_rect());
    CHECK(label.keypoints.size() == 7);
    CHECK(label.landmarks.size() == 7);
    for (double d : label.penalty_distance) CHECK(d == Catch::Approx(20.0));
}

TEST_CASE("illegible instances are skipped") {
    ImageRecord rec;
    rec.width = rec.height = 200;
    TextAnnotation ann = camel_rect();
    ann.illegible = true;
    rec.instances.push_back(ann);
    CHECK(build_label_bundle(rec).empty());
    CHECK_THROWS_AS(build_instance_label(ann), GeometryError);
}

TEST_CASE("too-thin instances are rejected") {
    TextAnnotation ann;
    ann.polygon = {{0, 0}, {100, 0}, {100, 1}, {0, 1}};
    ann.transcription = "A";
    CHECK_THROWS_WITH(build_instance_label(ann), Catch::Matchers::ContainsSubstring("too thin"));
}

TEST_CASE("geometry invariants hold on random bands") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> amp(0.0, 10.0);
    std::uniform_real_distribution<double> h(8.0, 30.0);
    for (int it = 0; it < 20; ++it) {
        TextAnnotation ann = sine_band(amp(rng), h(rng));
        const InstanceLabel label = build_instance_label(ann);
        const CenterLine cl = derive_centerline(ann);
        const size_t nk = label.keypoints.size();
        const int n = static_cast<int>(ann.transcription.size());

        // equal character spacing along arc length
        std::vector<double> arcs;
        for (size_t i = 1; i + 1 < nk; ++i) {
            // recover arc length by dense search
            double best = 0.0, bd = 1e18;
            for (int s = 0; s <= 20000; ++s) {
                const double a = cl.length() * s / 20000.0;
                const double d = dist(cl.at(a), label.keypoints[i].position);
                if (d < bd) {
                    bd = d;
                    best = a;
                }
            }
            arcs.push_back(best);
        }
        for (size_t i = 1; i < arcs.size(); ++i)
            CHECK(std::abs((arcs[i] - arcs[i - 1]) - cl.length() / n) < 1e-2 * cl.length());

        for (size_t i = 0; i < nk; ++i) {
            // horizontal links telescope exactly
            if (label.links[i].right)
                CHECK(label.keypoints[i].position + *label.links[i].right ==
                      label.keypoints[i + 1].position);
            // vertical links reconstruct landmarks exactly
            CHECK(label.keypoints[i].position + label.links[i].up == label.landmarks[i].upper);
            CHECK(label.keypoints[i].position + label.links[i].down == label.landmarks[i].lower);
        }

        // landmark minimality against 1e3 sampled boundary points
        const size_t k = ann.polygon.size() / 2;
        const std::vector<Point2> upper(ann.polygon.begin(), ann.polygon.begin() + k);
        for (size_t i = 0; i < nk; ++i) {
            const double dl = dist(label.keypoints[i].position, label.landmarks[i].upper);
            for (size_t s = 0; s + 1 < upper.size(); ++s)
                for (int t = 0; t < 1000 / static_cast<int>(k); ++t) {
                    const Point2 q =
                        upper[s] + (upper[s + 1] - upper[s]) * (t * k / 1000.0);
                    CHECK(dl <= dist(label.keypoints[i].position, q) + 1e-9);
                }
        }
    }
}
