#ifndef TEXTKP_ANNOTATIONS_HPP
#define TEXTKP_ANNOTATIONS_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "textkp/point.hpp"

namespace textkp {

struct TextAnnotation {
    Polygon polygon;          // 2k vertices: upper boundary left->right, lower right->left
    std::string transcription;
    bool illegible = false;
};

struct ImageRecord {
    std::string image_path;
    int width = 0;
    int height = 0;
    std::vector<TextAnnotation> instances;
};

struct AnnotationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void validate_annotation(const TextAnnotation& ann, int instance_index) {
    const auto where = [&] { return "instance " + std::to_string(instance_index); };
    if (ann.polygon.size() % 2 != 0)
        throw AnnotationError(where() + ": odd vertex count");
    if (ann.polygon.size() < 4)
        throw AnnotationError(where() + ": fewer than 4 vertices");
    for (const Point2& p : ann.polygon)
        if (!is_finite(p)) throw AnnotationError(where() + ": non-finite vertex");
    if (!polygon_is_simple(ann.polygon))
        throw AnnotationError(where() + ": polygon is not simple");
    if (ann.transcription.empty() && !ann.illegible)
        throw AnnotationError(where() + ": empty transcription on legible instance");
}

inline void validate_record(const ImageRecord& rec) {
    if (rec.width <= 0 || rec.height <= 0)
        throw AnnotationError("non-positive image dimensions for " + rec.image_path);
    for (size_t i = 0; i < rec.instances.size(); ++i)
        validate_annotation(rec.instances[i], static_cast<int>(i));
}

inline nlohmann::json record_to_json(const ImageRecord& rec) {
    nlohmann::json j;
    j["image"] = rec.image_path;
    j["width"] = rec.width;
    j["height"] = rec.height;
    j["instances"] = nlohmann::json::array();
    for (const TextAnnotation& ann : rec.instances) {
        nlohmann::json ji;
        auto& poly = ji["polygon"] = nlohmann::json::array();
        for (const Point2& p : ann.polygon) poly.push_back({p.x, p.y});
        ji["transcription"] = ann.transcription;
        ji["illegible"] = ann.illegible;
        j["instances"].push_back(std::move(ji));
    }
    return j;
}

inline ImageRecord record_from_json(const nlohmann::json& j) {
    ImageRecord rec;
    rec.image_path = j.at("image").get<std::string>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    for (const auto& ji : j.at("instances")) {
        TextAnnotation ann;
        for (const auto& jp : ji.at("polygon"))
            ann.polygon.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
        ann.transcription = ji.at("transcription").get<std::string>();
        ann.illegible = ji.value("illegible", false);
        rec.instances.push_back(std::move(ann));
    }
    // Vertices are clamped into the image frame on load.
    for (TextAnnotation& ann : rec.instances)
        for (Point2& p : ann.polygon) {
            p.x = std::clamp(p.x, 0.0, static_cast<double>(rec.width));
            p.y = std::clamp(p.y, 0.0, static_cast<double>(rec.height));
        }
    return rec;
}

inline std::vector<ImageRecord> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw AnnotationError("cannot open annotation file: " + path.string());
    std::vector<ImageRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw AnnotationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        ImageRecord rec;
        try {
            rec = record_from_json(j);
            validate_record(rec);
        } catch (const std::exception& e) {
            throw AnnotationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline void save_annotations(const std::vector<ImageRecord>& records,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw AnnotationError("cannot open for writing: " + path.string());
    for (const ImageRecord& rec : records) {
        out << record_to_json(rec).dump() << "\n";
        if (!out) throw AnnotationError("write failed: " + path.string());
    }
    out.flush();
    if (!out) throw AnnotationError("write failed: " + path.string());
}

} // namespace textkp

#endif
