#ifndef TEXTKP_PIPELINE_HPP
#define TEXTKP_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "textkp/associate.hpp"
#include "textkp/decode.hpp"
#include "textkp/evaluate.hpp"
#include "textkp/geometry.hpp"
#include "textkp/labelmaps.hpp"
#include "textkp/rectify.hpp"
#include "textkp/synthgen.hpp"

namespace textkp {

struct RunConfig {
    int downsample = 1;
    double peak_threshold = 0.3;
    double ratio_threshold = 0.5;
    double extension_factor = 0.1;
    double iou_threshold = 0.5;
    double grid_scale = 4.0;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
    int worker_count = static_cast<int>(std::thread::hardware_concurrency());
    bool end_landmarks = true;
    bool strict_mutual = false;
};

namespace detail {

// Per-image work pool; results land in indexed slots so the output is
// independent of the worker count.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    if (workers == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::string stack_name(const std::string& image_path) {
    return std::filesystem::path(image_path).stem().string() + ".kptl";
}

} // namespace detail

inline uint64_t seed_for_image(uint64_t base_seed, size_t index) {
    return detail::splitmix64(base_seed ^ (0x9e110000ULL + index));
}

struct GenLabelsSummary {
    int images = 0;
    int instances = 0;
    int keypoints = 0;
    std::vector<std::string> warnings;
};

// Renders one KPTL stack per image; stacks named after the image stem
// with an index.json mapping stack files back to image paths. Noise, when
// configured, is applied here with a per-image seed.
inline GenLabelsSummary run_gen_labels(const std::filesystem::path& annotation_file,
                                       const std::filesystem::path& out_dir,
                                       const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const std::vector<ImageRecord> records = load_annotations(annotation_file);
    fs::create_directories(out_dir);
    GenLabelsSummary summary;
    summary.images = static_cast<int>(records.size());

    std::vector<std::string> serialized(records.size());
    std::vector<int> inst_counts(records.size(), 0), kp_counts(records.size(), 0);
    std::vector<std::string> warnings(records.size());
    GeometryConfig gcfg;
    gcfg.end_landmarks = cfg.end_landmarks;

    detail::parallel_for(records.size(), cfg.worker_count, [&](size_t i) {
        const ImageRecord& rec = records[i];
        const LabelBundle bundle = build_label_bundle(rec, gcfg);
        HeatmapStack stack = render_labels(bundle, rec, cfg.downsample);
        if (cfg.noise_sigma > 0.0)
            stack = perturb_stack(stack, cfg.noise_sigma, seed_for_image(cfg.seed, i));
        serialized[i] = serialize_stack(stack);
        inst_counts[i] = static_cast<int>(bundle.size());
        for (const InstanceLabel& inst : bundle)
            kp_counts[i] += static_cast<int>(inst.keypoints.size());
        if (bundle.empty() && !rec.instances.empty())
            warnings[i] = rec.image_path + ": only illegible text, empty stack";
    });

    nlohmann::json index;
    for (size_t i = 0; i < records.size(); ++i) {
        const std::string name = detail::stack_name(records[i].image_path);
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw StackError("cannot write " + (out_dir / name).string());
        out.write(serialized[i].data(), static_cast<std::streamsize>(serialized[i].size()));
        index[name] = records[i].image_path;
        summary.instances += inst_counts[i];
        summary.keypoints += kp_counts[i];
        if (!warnings[i].empty()) summary.warnings.push_back(warnings[i]);
    }
    std::ofstream idx(out_dir / "index.json", std::ios::binary);
    idx << index.dump(2) << "\n";
    return summary;
}

// Decode one stack into detection polygons.
inline std::vector<DetectionPolygon> detect_stack(const HeatmapStack& stack,
                                                  const RunConfig& cfg) {
    const std::vector<DetectedKeypoint> kps = find_peaks(stack, cfg.peak_threshold);
    const std::vector<InstanceChain> chains =
        build_instances(kps, cfg.ratio_threshold, nullptr, cfg.strict_mutual);
    std::vector<DetectionPolygon> dets;
    for (const InstanceChain& chain : chains) {
        const std::vector<LandmarkPair> pairs = chain_landmarks(chain);
        if (auto poly = make_polygon(pairs, chain.score)) dets.push_back(std::move(*poly));
    }
    return dets;
}

// Reads every .kptl under stacks_dir (sorted by name) and writes the
// detection JSON-lines file.
inline std::vector<DetectionRecord> run_detect(const std::filesystem::path& stacks_dir,
                                               const std::filesystem::path& out_det_file,
                                               const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(stacks_dir))
        if (e.path().extension() == ".kptl") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::map<std::string, std::string> index;
    if (fs::exists(stacks_dir / "index.json")) {
        std::ifstream in(stacks_dir / "index.json");
        nlohmann::json j;
        in >> j;
        for (const auto& [k, v] : j.items()) index[k] = v.get<std::string>();
    }

    std::vector<DetectionRecord> records(files.size());
    detail::parallel_for(files.size(), cfg.worker_count, [&](size_t i) {
        const HeatmapStack stack = read_stack(files[i]);
        DetectionRecord rec;
        const std::string name = files[i].filename().string();
        const auto it = index.find(name);
        rec.image_path = it != index.end() ? it->second : files[i].stem().string();
        rec.detections = detect_stack(stack, cfg);
        records[i] = std::move(rec);
    });
    if (!out_det_file.empty()) save_detections(records, out_det_file);
    return records;
}

struct RectifySummary {
    int patches = 0;
    std::vector<std::string> warnings;
};

// Landmark pairs reconstructed from a detection polygon; the pair
// midpoint stands in for the keypoint when extending.
inline std::vector<LandmarkPair> polygon_to_landmarks(const Polygon& vertices) {
    const size_t m = vertices.size() / 2;
    if (m < 2 || vertices.size() % 2 != 0)
        throw RectifyError("detection polygon must have an even vertex count >= 4");
    std::vector<LandmarkPair> pairs(m);
    for (size_t i = 0; i < m; ++i) {
        pairs[i].upper = vertices[i];
        pairs[i].lower = vertices[2 * m - 1 - i];
        pairs[i].owner = i;
    }
    return pairs;
}

inline RectifySummary run_rectify(const std::filesystem::path& image_dir,
                                  const std::filesystem::path& det_file,
                                  const std::filesystem::path& out_dir, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const std::vector<DetectionRecord> dets = load_detections(det_file);
    fs::create_directories(out_dir);
    RectifySummary summary;
    std::vector<std::vector<std::pair<std::string, ImageU8>>> outputs(dets.size());
    std::vector<std::vector<std::string>> warnings(dets.size());
    detail::parallel_for(dets.size(), cfg.worker_count, [&](size_t i) {
        const DetectionRecord& rec = dets[i];
        const fs::path img_path = image_dir / rec.image_path;
        if (!fs::exists(img_path)) throw ImageError("missing image file: " + img_path.string());
        const ImageU8 image = read_png(img_path);
        const std::string stem = fs::path(rec.image_path).stem().string();
        for (size_t k = 0; k < rec.detections.size(); ++k) {
            try {
                std::vector<LandmarkPair> pairs = polygon_to_landmarks(rec.detections[k].vertices);
                std::vector<Point2> mids;
                for (const LandmarkPair& lp : pairs) mids.push_back((lp.upper + lp.lower) * 0.5);
                pairs = extend_landmarks(pairs, mids, cfg.extension_factor);
                const RectifiedPatch patch = rectify_patch(image, pairs);
                outputs[i].emplace_back(stem + "_inst" + std::to_string(k) + ".png",
                                        patch.pixels);
            } catch (const std::exception& e) {
                warnings[i].push_back(rec.image_path + " instance " + std::to_string(k) + ": " +
                                      e.what());
            }
        }
    });
    for (size_t i = 0; i < outputs.size(); ++i) {
        for (const auto& [name, img] : outputs[i]) {
            write_png(img, out_dir / name);
            ++summary.patches;
        }
        for (const std::string& w : warnings[i]) summary.warnings.push_back(w);
    }
    return summary;
}

} // namespace textkp

#endif
