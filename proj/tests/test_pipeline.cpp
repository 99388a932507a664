#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "textkp/pipeline.hpp"

using namespace textkp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("gen-labels, detect and eval round trip on a small suite") {
    const fs::path suite = fresh_dir("textkp_pipe_suite");
    SceneSpec spec;
    spec.seed = 1234;
    generate_suite(spec, 4, suite);

    RunConfig cfg;
    cfg.worker_count = 2;
    const fs::path stacks = suite / "stacks";
    const GenLabelsSummary summary = run_gen_labels(suite / "annotations.jsonl", stacks, cfg);
    CHECK(summary.images == 4);
    CHECK(summary.instances >= 4);
    CHECK(summary.keypoints >= summary.instances * 3);
    CHECK(fs::exists(stacks / "index.json"));
    CHECK(fs::exists(stacks / "img_0000.kptl"));

    const fs::path det_file = suite / "dets.jsonl";
    const auto dets = run_detect(stacks, det_file, cfg);
    REQUIRE(dets.size() == 4);
    CHECK(dets[0].image_path == "images/img_0000.png");

    const MatchReport rep = evaluate_dataset(det_file, suite / "annotations.jsonl");
    CHECK(rep.fscore >= 0.99);

    fs::remove_all(suite);
}

TEST_CASE("gen-labels output is identical across runs and worker counts") {
    const fs::path suite = fresh_dir("textkp_pipe_det");
    SceneSpec spec;
    spec.seed = 777;
    generate_suite(spec, 3, suite);

    RunConfig serial;
    serial.worker_count = 1;
    serial.noise_sigma = 0.02;
    RunConfig parallel = serial;
    parallel.worker_count = 4;

    const fs::path a = suite / "stacks_a";
    const fs::path b = suite / "stacks_b";
    run_gen_labels(suite / "annotations.jsonl", a, serial);
    run_gen_labels(suite / "annotations.jsonl", b, parallel);
    for (const auto& e : fs::directory_iterator(a)) {
        const fs::path other = b / e.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(e.path()) == slurp(other));
    }

    const fs::path da = suite / "da.jsonl";
    const fs::path db = suite / "db.jsonl";
    run_detect(a, da, serial);
    run_detect(b, db, parallel);
    CHECK(slurp(da) == slurp(db));

    fs::remove_all(suite);
}

TEST_CASE("per-image noise seeds are distinct and stable") {
    CHECK(seed_for_image(0, 0) != seed_for_image(0, 1));
    CHECK(seed_for_image(0, 0) != seed_for_image(1, 0));
    CHECK(seed_for_image(5, 3) == seed_for_image(5, 3));
}

TEST_CASE("rectify writes one patch per detected instance") {
    const fs::path suite = fresh_dir("textkp_pipe_rect");
    SceneSpec spec;
    spec.seed = 4321;
    spec.min_instances = spec.max_instances = 2;
    generate_suite(spec, 2, suite);

    RunConfig cfg;
    cfg.worker_count = 2;
    const fs::path stacks = suite / "stacks";
    run_gen_labels(suite / "annotations.jsonl", stacks, cfg);
    const fs::path det_file = suite / "dets.jsonl";
    const auto dets = run_detect(stacks, det_file, cfg);
    size_t n_dets = 0;
    for (const auto& rec : dets) n_dets += rec.detections.size();
    REQUIRE(n_dets == 4);

    const fs::path patches = suite / "patches";
    const RectifySummary summary = run_rectify(suite, det_file, patches, cfg);
    CHECK(summary.patches == 4);
    CHECK(summary.warnings.empty());
    CHECK(fs::exists(patches / "img_0000_inst0.png"));
    CHECK(fs::exists(patches / "img_0001_inst1.png"));
    const ImageU8 patch = read_png(patches / "img_0000_inst0.png");
    CHECK(patch.width > 0);
    CHECK(patch.height > 0);

    fs::remove_all(suite);
}

TEST_CASE("rectify fails cleanly when the image file is missing") {
    const fs::path dir = fresh_dir("textkp_pipe_missing");
    std::vector<DetectionRecord> dets(1);
    dets[0].image_path = "images/nope.png";
    DetectionPolygon d;
    d.vertices = {{0, 0}, {50, 0}, {50, 20}, {0, 20}};
    dets[0].detections.push_back(d);
    const fs::path det_file = dir / "dets.jsonl";
    save_detections(dets, det_file);
    RunConfig cfg;
    CHECK_THROWS_AS(run_rectify(dir, det_file, dir / "patches", cfg), ImageError);
    fs::remove_all(dir);
}

TEST_CASE("index.json maps stack files back to image paths") {
    const fs::path suite = fresh_dir("textkp_pipe_index");
    SceneSpec spec;
    spec.seed = 55;
    generate_suite(spec, 2, suite);
    RunConfig cfg;
    run_gen_labels(suite / "annotations.jsonl", suite / "stacks", cfg);
    std::ifstream in(suite / "stacks" / "index.json");
    nlohmann::json j;
    in >> j;
    CHECK(j.at("img_0000.kptl").get<std::string>() == "images/img_0000.png");
    CHECK(j.at("img_0001.kptl").get<std::string>() == "images/img_0001.png");
    fs::remove_all(suite);
}
