#include <catch_amalgamated.hpp>

#include <random>

#include "textkp/associate.hpp"

using namespace textkp;

namespace {

std::vector<DetectedKeypoint> decode_rect(Point2 origin, const std::string& text,
                                          double w = 100.0, double h = 20.0) {
    ImageRecord rec;
    rec.width = 512;
    rec.height = 512;
    TextAnnotation ann;
    ann.polygon = {origin, origin + Point2{w, 0}, origin + Point2{w, h}, origin + Point2{0, h}};
    ann.transcription = text;
    rec.instances.push_back(ann);
    const HeatmapStack s = render_labels(build_label_bundle(rec), rec, 1);
    return find_peaks(s, 0.3);
}

} // namespace

TEST_CASE("distance ratio rule accepts and rejects as specified") {
    DetectedKeypoint kp;
    kp.position = {10, 10};
    kp.links.right = Point2{20, 0};
    auto with = [&](Point2 other) {
        std::vector<DetectedKeypoint> all(2);
        all[0] = kp;
        all[1].position = other;
        return all;
    };
    // endpoint (30,10); candidate on it: ratio 0
    CHECK(link_candidates(kp, with({30, 10}), LinkDirection::Rightward, 0.5).has_value());
    // candidate at (35,10): ratio 5/25 = 0.2 < 0.5
    CHECK(link_candidates(kp, with({35, 10}), LinkDirection::Rightward, 0.5).has_value());
    // candidate at (90,10): ratio 60/80 = 0.75 -> none
    CHECK_FALSE(link_candidates(kp, with({90, 10}), LinkDirection::Rightward, 0.5).has_value());
}

TEST_CASE("backward candidates are rejected by the half-plane check") {
    DetectedKeypoint kp;
    kp.position = {10, 10};
    kp.links.right = Point2{2, 0}; // short link
    std::vector<DetectedKeypoint> all(2);
    all[0] = kp;
    all[1].position = {5, 10}; // behind the link direction
    CHECK_FALSE(link_candidates(kp, all, LinkDirection::Rightward, 0.5).has_value());
}

TEST_CASE("CAMEL keypoints group into a single ordered chain") {
    const auto kps = decode_rect({50, 50}, "CAMEL");
    REQUIRE(kps.size() == 7);
    const auto chains = build_instances(kps, 0.5);
    REQUIRE(chains.size() == 1);
    REQUIRE(chains[0].keypoints.size() == 7);
    CHECK(chains[0].keypoints.front().kind == KeypointKind::Left);
    CHECK(chains[0].keypoints.back().kind == KeypointKind::Right);
    for (size_t i = 1; i < 7; ++i)
        CHECK(chains[0].keypoints[i - 1].position.x < chains[0].keypoints[i].position.x);
}

TEST_CASE("well-separated instances stay separate") {
    auto kps = decode_rect({30, 40}, "ABC");
    const auto second = decode_rect({30, 300}, "DEFG");
    kps.insert(kps.end(), second.begin(), second.end());
    const auto chains = build_instances(kps, 0.5);
    REQUIRE(chains.size() == 2);
    std::vector<size_t> sizes{chains[0].keypoints.size(), chains[1].keypoints.size()};
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes[0] == 5);
    CHECK(sizes[1] == 6);
}

TEST_CASE("an isolated keypoint forms no chain") {
    DetectedKeypoint kp;
    kp.position = {10, 10};
    kp.score = 1.0;
    AssociateDiagnostics diag;
    CHECK(build_instances({kp}, 0.5, &diag).empty());
    CHECK(diag.dropped_small == 1);
}

TEST_CASE("output is invariant to input permutation") {
    auto kps = decode_rect({30, 40}, "HELLO");
    const auto second = decode_rect({200, 300}, "WORLD");
    kps.insert(kps.end(), second.begin(), second.end());
    const auto base = build_instances(kps, 0.5);
    std::mt19937_64 rng(5);
    for (int it = 0; it < 10; ++it) {
        std::shuffle(kps.begin(), kps.end(), rng);
        const auto got = build_instances(kps, 0.5);
        REQUIRE(got.size() == base.size());
        for (size_t c = 0; c < got.size(); ++c) {
            REQUIRE(got[c].keypoints.size() == base[c].keypoints.size());
            for (size_t i = 0; i < got[c].keypoints.size(); ++i)
                CHECK(got[c].keypoints[i].position == base[c].keypoints[i].position);
        }
    }
}

TEST_CASE("no keypoint lands in two chains") {
    auto kps = decode_rect({30, 40}, "ABCD");
    const auto second = decode_rect({30, 200}, "EFGH");
    kps.insert(kps.end(), second.begin(), second.end());
    const auto chains = build_instances(kps, 0.5);
    std::vector<Point2> seen;
    for (const auto& chain : chains)
        for (const auto& kp : chain.keypoints) {
            for (const Point2& p : seen) CHECK_FALSE(p == kp.position);
            seen.push_back(kp.position);
        }
}

TEST_CASE("chain score is the mean keypoint score") {
    const auto kps = decode_rect({50, 50}, "AB");
    const auto chains = build_instances(kps, 0.5);
    REQUIRE(chains.size() == 1);
    double sum = 0.0;
    for (const auto& kp : chains[0].keypoints) sum += kp.score;
    CHECK(chains[0].score == Catch::Approx(sum / chains[0].keypoints.size()));
}
