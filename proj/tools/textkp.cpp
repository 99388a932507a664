// Command-line front end for the keypoint text-detection pipeline:
// label generation, stack decoding, rectification, evaluation and the
// synthetic self-test suite.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "textkp/selftest.hpp"

namespace {

using textkp::RunConfig;

// key=value config file; unknown keys are an error, flags override.
void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "downsample") cfg.downsample = std::stoi(val);
        else if (key == "peak-threshold") cfg.peak_threshold = std::stod(val);
        else if (key == "ratio-threshold") cfg.ratio_threshold = std::stod(val);
        else if (key == "extension-factor") cfg.extension_factor = std::stod(val);
        else if (key == "iou-threshold") cfg.iou_threshold = std::stod(val);
        else if (key == "grid-scale") cfg.grid_scale = std::stod(val);
        else if (key == "noise-sigma") cfg.noise_sigma = std::stod(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "worker-count") cfg.worker_count = std::stoi(val);
        else throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key " + key);
    }
}

void add_config_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_file) {
    cmd->add_option("--config", config_file, "key=value config file (flags override)");
    cmd->add_option("--downsample", cfg.downsample, "map downsample factor")->check(CLI::PositiveNumber);
    cmd->add_option("--peak-threshold", cfg.peak_threshold)->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--ratio-threshold", cfg.ratio_threshold)->check(CLI::PositiveNumber);
    cmd->add_option("--extension-factor", cfg.extension_factor)->check(CLI::NonNegativeNumber);
    cmd->add_option("--iou-threshold", cfg.iou_threshold)->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--grid-scale", cfg.grid_scale)->check(CLI::PositiveNumber);
    cmd->add_option("--noise-sigma", cfg.noise_sigma)->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", cfg.seed);
    cmd->add_option("--worker-count", cfg.worker_count)->check(CLI::PositiveNumber);
}

void apply_env(RunConfig& cfg) {
    if (const char* w = std::getenv("TEXTKP_WORKERS")) cfg.worker_count = std::atoi(w);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Keypoint-based scene text detection, rectification and evaluation"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;
    std::string annotations, out_dir, stacks_dir, det_file, gt_file, image_dir, work_dir;
    int n_images = 50;

    auto* gen = app.add_subcommand("gen-labels", "Render ground-truth heatmap stacks");
    gen->add_option("annotations", annotations, "annotation JSON-lines file")->required();
    gen->add_option("out_dir", out_dir, "output directory for .kptl stacks")->required();
    add_config_flags(gen, cfg, config_file);

    auto* det = app.add_subcommand("detect", "Decode stacks into detection polygons");
    det->add_option("stacks_dir", stacks_dir, "directory of .kptl stacks")->required();
    det->add_option("out_file", det_file, "output detection JSON-lines file")->required();
    add_config_flags(det, cfg, config_file);

    auto* rect = app.add_subcommand("rectify", "Warp detected instances to patches");
    rect->add_option("image_dir", image_dir, "directory containing the images")->required();
    rect->add_option("det_file", det_file, "detection JSON-lines file")->required();
    rect->add_option("out_dir", out_dir, "output directory for patches")->required();
    add_config_flags(rect, cfg, config_file);

    auto* ev = app.add_subcommand("eval", "Score detections against ground truth");
    ev->add_option("det_file", det_file, "detection JSON-lines file")->required();
    ev->add_option("gt_file", gt_file, "annotation JSON-lines file")->required();
    add_config_flags(ev, cfg, config_file);

    auto* self = app.add_subcommand("selftest", "Run the synthetic oracle suite");
    self->add_option("--work-dir", work_dir, "scratch directory (default: temp)");
    add_config_flags(self, cfg, config_file);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated image suite");
    synth->add_option("out_dir", out_dir, "output directory")->required();
    synth->add_option("--images", n_images, "number of images");
    add_config_flags(synth, cfg, config_file);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (!config_file.empty()) {
        // config file fills in whatever was not given as a flag
        RunConfig file_cfg;
        try {
            load_config_file(config_file, file_cfg);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        CLI::App* sub = app.get_subcommands().front();
        auto unset = [&](const std::string& flag) { return sub->count(flag) == 0; };
        if (unset("--downsample")) cfg.downsample = file_cfg.downsample;
        if (unset("--peak-threshold")) cfg.peak_threshold = file_cfg.peak_threshold;
        if (unset("--ratio-threshold")) cfg.ratio_threshold = file_cfg.ratio_threshold;
        if (unset("--extension-factor")) cfg.extension_factor = file_cfg.extension_factor;
        if (unset("--iou-threshold")) cfg.iou_threshold = file_cfg.iou_threshold;
        if (unset("--grid-scale")) cfg.grid_scale = file_cfg.grid_scale;
        if (unset("--noise-sigma")) cfg.noise_sigma = file_cfg.noise_sigma;
        if (unset("--seed")) cfg.seed = file_cfg.seed;
        if (unset("--worker-count")) cfg.worker_count = file_cfg.worker_count;
    }
    apply_env(cfg);

    try {
        if (gen->parsed()) {
            const auto summary = textkp::run_gen_labels(annotations, out_dir, cfg);
            std::cout << "images=" << summary.images << " instances=" << summary.instances
                      << " keypoints=" << summary.keypoints << "\n";
            for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
            return 0;
        }
        if (det->parsed()) {
            const auto records = textkp::run_detect(stacks_dir, det_file, cfg);
            size_t n = 0;
            for (const auto& r : records) n += r.detections.size();
            std::cout << "images=" << records.size() << " detections=" << n << "\n";
            return 0;
        }
        if (rect->parsed()) {
            const auto summary = textkp::run_rectify(image_dir, det_file, out_dir, cfg);
            std::cout << "patches=" << summary.patches << "\n";
            for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
            return 0;
        }
        if (ev->parsed()) {
            const auto rep =
                textkp::evaluate_dataset(det_file, gt_file, cfg.iou_threshold, cfg.grid_scale);
            nlohmann::json j;
            j["tp"] = rep.tp;
            j["fp"] = rep.fp;
            j["fn"] = rep.fn;
            j["precision"] = rep.precision;
            j["recall"] = rep.recall;
            j["fscore"] = rep.fscore;
            std::cout << j.dump() << "\n";
            return 0;
        }
        if (self->parsed()) {
            const std::filesystem::path wd =
                work_dir.empty() ? std::filesystem::temp_directory_path() / "textkp_selftest"
                                 : std::filesystem::path(work_dir);
            const auto results = textkp::run_selftest(cfg, wd);
            bool all = true;
            for (const auto& r : results) {
                std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  (" << r.detail << ")\n";
                all = all && r.pass;
            }
            return all ? 0 : 1;
        }
        if (synth->parsed()) {
            textkp::SceneSpec spec;
            spec.seed = cfg.seed;
            textkp::generate_suite(spec, n_images, out_dir);
            std::cout << "images=" << n_images << " out=" << out_dir << "\n";
            return 0;
        }
    } catch (const textkp::AnnotationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const textkp::EvaluateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
