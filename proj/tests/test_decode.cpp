#include <catch_amalgamated.hpp>

#include "textkp/decode.hpp"

using namespace textkp;

namespace {

HeatmapStack camel_stack(int downsample = 1) {
    ImageRecord rec;
    rec.width = 160;
    rec.height = 80;
    TextAnnotation ann;
    ann.polygon = {{20, 20}, {120, 20}, {120, 40}, {20, 40}};
    ann.transcription = "CAMEL";
    rec.instances.push_back(ann);
    return render_labels(build_label_bundle(rec), rec, downsample);
}

} // namespace

TEST_CASE("single hot pixel decodes to one keypoint") {
    HeatmapStack s = make_stack(16, 16, 1);
    s.at(kHeatChar, 5, 7) = 1.0f;
    const auto kps = find_peaks(s, 0.3);
    REQUIRE(kps.size() == 1);
    CHECK(kps[0].position == Point2{5, 7});
    CHECK(kps[0].kind == KeypointKind::Character);
    CHECK(kps[0].score == 1.0);
}

TEST_CASE("all-zero stack decodes to nothing") {
    CHECK(find_peaks(make_stack(16, 16, 1), 0.3).empty());
}

TEST_CASE("plateaus collapse to the smallest (y, x)") {
    HeatmapStack s = make_stack(16, 16, 1);
    s.at(kHeatChar, 5, 7) = 0.8f;
    s.at(kHeatChar, 6, 7) = 0.8f;
    s.at(kHeatChar, 5, 8) = 0.8f;
    const auto kps = find_peaks(s, 0.3);
    REQUIRE(kps.size() == 1);
    CHECK(kps[0].position == Point2{5, 7});
}

TEST_CASE("decode of a rendered stack recovers the label bundle") {
    ImageRecord rec;
    rec.width = 160;
    rec.height = 80;
    TextAnnotation ann;
    ann.polygon = {{20, 20}, {120, 20}, {120, 40}, {20, 40}};
    ann.transcription = "CAMEL";
    rec.instances.push_back(ann);
    const LabelBundle bundle = build_label_bundle(rec);

    for (int s : {1, 4}) {
        const HeatmapStack stack = render_labels(bundle, rec, s);
        const auto kps = find_peaks(stack, 0.3);
        REQUIRE(kps.size() == 7);
        for (const Keypoint& want : bundle[0].keypoints) {
            double best = 1e18;
            for (const auto& got : kps)
                if (got.kind == want.kind)
                    best = std::min(best, std::max(std::abs(got.position.x - want.position.x),
                                                   std::abs(got.position.y - want.position.y)));
            CHECK(best <= 0.5 * s + 1e-9); // per-axis pixel rounding bound
        }
        if (s == 1) {
            // link vectors recovered exactly
            for (const auto& got : kps) {
                size_t src = 0;
                for (size_t i = 0; i < bundle[0].keypoints.size(); ++i)
                    if (dist(bundle[0].keypoints[i].position, got.position) < 0.6) src = i;
                const LinkSet& want = bundle[0].links[src];
                CHECK(got.links.up == want.up);
                CHECK(got.links.down == want.down);
                if (want.right) CHECK(*got.links.right == *want.right);
                if (want.left) CHECK(*got.links.left == *want.left);
            }
        }
    }
}

TEST_CASE("raising the threshold never adds peaks") {
    const HeatmapStack s = perturb_stack(camel_stack(), 0.03, 11);
    size_t prev = find_peaks(s, 0.05).size();
    for (double th : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
        const size_t cur = find_peaks(s, th).size();
        CHECK(cur <= prev);
        prev = cur;
    }
}
