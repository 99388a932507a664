#ifndef TEXTKP_EVALUATE_HPP
#define TEXTKP_EVALUATE_HPP

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "textkp/annotations.hpp"
#include "textkp/raster.hpp"
#include "textkp/rectify.hpp"

namespace textkp {

struct EvaluateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DetVerdict { TP, FP, Ignored };
enum class GtVerdict { Matched, FN, Ignored };

struct MatchReport {
    int tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, fscore = 0.0;
    std::vector<DetVerdict> det_verdicts;
    std::vector<GtVerdict> gt_verdicts;

    void finalize() {
        precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        fscore = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
};

// Rasterized IoU: both polygons sampled on a shared grid at grid_scale
// samples per image pixel, even-odd rule, samples at cell centers.
inline double polygon_iou(const Polygon& a, const Polygon& b, double grid_scale = 1.0) {
    if (a.size() < 3 || b.size() < 3) return 0.0;
    double x0 = a[0].x, x1 = a[0].x, y0 = a[0].y, y1 = a[0].y;
    for (const Polygon* poly : {&a, &b})
        for (const Point2& p : *poly) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
    const double step = 1.0 / grid_scale;
    const long nx = std::lround(std::ceil((x1 - x0) * grid_scale));
    const long ny = std::lround(std::ceil((y1 - y0) * grid_scale));
    if (nx <= 0 || ny <= 0) return 0.0;
    long inter = 0, uni = 0;
    for (long iy = 0; iy < ny; ++iy) {
        const double y = y0 + (iy + 0.5) * step;
        for (long ix = 0; ix < nx; ++ix) {
            const Point2 p{x0 + (ix + 0.5) * step, y};
            const bool ina = point_in_polygon(p, a);
            const bool inb = point_in_polygon(p, b);
            if (ina && inb) ++inter;
            if (ina || inb) ++uni;
        }
    }
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// IoU > threshold pairs greedily matched in descending IoU. Only the
// best detection per ground truth counts as TP; further matches over an
// already-matched GT are FP. Detections whose only matches are illegible
// GT are ignored; illegible GT never count as FN.
inline MatchReport match(const std::vector<DetectionPolygon>& detections,
                         const std::vector<TextAnnotation>& gts, double iou_threshold = 0.5,
                         double grid_scale = 4.0) {
    MatchReport rep;
    rep.det_verdicts.assign(detections.size(), DetVerdict::FP);
    rep.gt_verdicts.assign(gts.size(), GtVerdict::FN);
    for (size_t g = 0; g < gts.size(); ++g)
        if (gts[g].illegible) rep.gt_verdicts[g] = GtVerdict::Ignored;

    struct Pair {
        double iou;
        size_t det, gt;
    };
    std::vector<Pair> pairs;
    std::vector<std::vector<size_t>> det_matches(detections.size()); // over-threshold legible GTs
    std::vector<bool> det_hits_illegible(detections.size(), false);
    for (size_t d = 0; d < detections.size(); ++d)
        for (size_t g = 0; g < gts.size(); ++g) {
            const double iou = polygon_iou(detections[d].vertices, gts[g].polygon, grid_scale);
            if (iou > iou_threshold) {
                if (gts[g].illegible)
                    det_hits_illegible[d] = true;
                else {
                    pairs.push_back({iou, d, g});
                    det_matches[d].push_back(g);
                }
            }
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.det != b.det) return a.det < b.det;
        return a.gt < b.gt;
    });
    std::vector<bool> det_used(detections.size(), false), gt_used(gts.size(), false);
    for (const Pair& p : pairs) {
        if (det_used[p.det] || gt_used[p.gt]) continue;
        det_used[p.det] = true;
        gt_used[p.gt] = true;
        rep.det_verdicts[p.det] = DetVerdict::TP;
        rep.gt_verdicts[p.gt] = GtVerdict::Matched;
    }
    for (size_t d = 0; d < detections.size(); ++d) {
        if (det_used[d]) continue;
        if (det_matches[d].empty() && det_hits_illegible[d])
            rep.det_verdicts[d] = DetVerdict::Ignored;
    }
    for (DetVerdict v : rep.det_verdicts) {
        if (v == DetVerdict::TP) ++rep.tp;
        if (v == DetVerdict::FP) ++rep.fp;
    }
    for (GtVerdict v : rep.gt_verdicts)
        if (v == GtVerdict::FN) ++rep.fn;
    rep.finalize();
    return rep;
}

// ---- detection file format: JSON lines, one image per line ----
// {"image": str, "detections": [{"polygon": [[x,y],...], "score": float}]}

struct DetectionRecord {
    std::string image_path;
    std::vector<DetectionPolygon> detections;
};

inline void save_detections(const std::vector<DetectionRecord>& records,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvaluateError("cannot open for writing: " + path.string());
    for (const DetectionRecord& rec : records) {
        nlohmann::json j;
        j["image"] = rec.image_path;
        j["detections"] = nlohmann::json::array();
        for (const DetectionPolygon& det : rec.detections) {
            nlohmann::json jd;
            auto& poly = jd["polygon"] = nlohmann::json::array();
            for (const Point2& p : det.vertices) poly.push_back({p.x, p.y});
            jd["score"] = det.score;
            j["detections"].push_back(std::move(jd));
        }
        out << j.dump() << "\n";
    }
    if (!out) throw EvaluateError("write failed: " + path.string());
}

inline std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvaluateError("cannot open: " + path.string());
    std::vector<DetectionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            DetectionRecord rec;
            rec.image_path = j.at("image").get<std::string>();
            for (const auto& jd : j.at("detections")) {
                DetectionPolygon det;
                for (const auto& jp : jd.at("polygon"))
                    det.vertices.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
                det.score = jd.value("score", 0.0);
                rec.detections.push_back(std::move(det));
            }
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw EvaluateError("detection file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

// Micro-averaged evaluation: counts are summed over images before
// computing precision/recall/F.
inline MatchReport evaluate_dataset(const std::vector<DetectionRecord>& dets,
                                    const std::vector<ImageRecord>& gts,
                                    double iou_threshold = 0.5, double grid_scale = 4.0) {
    std::map<std::string, const ImageRecord*> by_key;
    for (const ImageRecord& rec : gts) by_key[rec.image_path] = &rec;
    std::map<std::string, const DetectionRecord*> det_by_key;
    for (const DetectionRecord& rec : dets) {
        if (!by_key.count(rec.image_path))
            throw EvaluateError("detections reference unknown image: " + rec.image_path);
        det_by_key[rec.image_path] = &rec;
    }
    MatchReport total;
    static const std::vector<DetectionPolygon> no_dets;
    for (const ImageRecord& gt : gts) {
        const auto it = det_by_key.find(gt.image_path);
        const auto& dts = it != det_by_key.end() ? it->second->detections : no_dets;
        const MatchReport r = match(dts, gt.instances, iou_threshold, grid_scale);
        total.tp += r.tp;
        total.fp += r.fp;
        total.fn += r.fn;
    }
    total.finalize();
    return total;
}

inline MatchReport evaluate_dataset(const std::filesystem::path& det_file,
                                    const std::filesystem::path& gt_file,
                                    double iou_threshold = 0.5, double grid_scale = 4.0) {
    return evaluate_dataset(load_detections(det_file), load_annotations(gt_file), iou_threshold,
                            grid_scale);
}

} // namespace textkp

#endif
