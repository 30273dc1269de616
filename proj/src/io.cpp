#include "crownfuse/io.hpp"

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <fstream>

namespace crownfuse::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string(), "", "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string(), "", std::string("malformed JSON: ") + e.what());
    }
}

void save_json(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path.string(), "", "cannot write file");
    out << doc.dump(2) << '\n';
}

template <typename T>
T field(const json& obj, const std::string& key, const fs::path& file, const std::string& where) {
    const std::string name = where.empty() ? key : where + "." + key;
    if (!obj.is_object() || !obj.contains(key)) throw InputError(file.string(), name, "missing field");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(file.string(), name, "wrong type");
    }
}

const json& array_field(const json& obj, const std::string& key, const fs::path& file) {
    if (!obj.is_object() || !obj.contains(key)) throw InputError(file.string(), key, "missing field");
    if (!obj.at(key).is_array()) throw InputError(file.string(), key, "expected an array");
    return obj.at(key);
}

ImageHeader read_header(const json& doc, const fs::path& file) {
    ImageHeader h{field<std::string>(doc, "image_id", file, ""), field<int>(doc, "width", file, ""),
                  field<int>(doc, "height", file, "")};
    if (h.width < 1) throw InputError(file.string(), "width", "must be >= 1");
    if (h.height < 1) throw InputError(file.string(), "height", "must be >= 1");
    return h;
}

json header_json(const ImageHeader& h) {
    json doc;
    doc["image_id"] = h.image_id;
    doc["width"] = h.width;
    doc["height"] = h.height;
    return doc;
}

BoxExtent read_extent(const json& b, const fs::path& file, const std::string& where) {
    BoxExtent e{field<double>(b, "x1", file, where), field<double>(b, "y1", file, where),
                field<double>(b, "x2", file, where), field<double>(b, "y2", file, where)};
    if (!e.valid()) throw InputError(file.string(), where, "box requires x1 < x2 and y1 < y2");
    return e;
}

void put_extent(json& b, const BoxExtent& e) {
    b["x1"] = e.x1;
    b["y1"] = e.y1;
    b["x2"] = e.x2;
    b["y2"] = e.y2;
}

CenterSource read_source(const json& c, const fs::path& file, const std::string& where) {
    const auto text = field<std::string>(c, "source", file, where);
    const auto source = parse_center_source(text);
    if (!source) throw InputError(file.string(), where + ".source", "unknown source '" + text + "'");
    return *source;
}

void write_image(const fs::path& path, const cv::Mat& mat) {
    if (!cv::imwrite(path.string(), mat)) throw InputError(path.string(), "", "cannot write image");
}

void paint(RgbRaster& img, int x, int y, std::array<std::uint8_t, 3> rgb) {
    if (img.red.contains(x, y)) img.set(x, y, rgb[0], rgb[1], rgb[2]);
}

}  // namespace

InputError::InputError(std::string file, std::string field, std::string reason)
    : Error(file + (field.empty() ? "" : ": " + field) + ": " + reason),
      file_(std::move(file)), field_(std::move(field)), reason_(std::move(reason)) {}

RgbRaster read_rgb(const fs::path& path) {
    if (!fs::exists(path)) throw InputError(path.string(), "", "file not found");
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw InputError(path.string(), "", "unreadable or unsupported image");
    if (mat.depth() != CV_8U) throw InputError(path.string(), "", "expected 8-bit samples");
    const int channels = mat.channels();
    if (channels != 1 && channels != 3 && channels != 4)
        throw InputError(path.string(), "", "expected gray, RGB or RGBA image");
    RgbRaster out(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) {
            const auto* px = row + static_cast<std::ptrdiff_t>(x) * channels;
            if (channels == 1)
                out.set(x, y, px[0], px[0], px[0]);
            else
                out.set(x, y, px[2], px[1], px[0]);  // OpenCV stores BGR(A)
        }
    }
    return out;
}

void write_rgb_png(const fs::path& path, const RgbRaster& image) {
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width(); ++x) {
            row[3 * x + 0] = image.blue(x, y);
            row[3 * x + 1] = image.green(x, y);
            row[3 * x + 2] = image.red(x, y);
        }
    }
    write_image(path, mat);
}

void write_mask_png(const fs::path& path, const BinaryMap& mask) {
    cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) mat.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
    write_image(path, mat);
}

void write_unit_png(const fs::path& path, const GrayMap& map) {
    cv::Mat mat(map.height(), map.width(), CV_8UC1);
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x)
            mat.at<std::uint8_t>(y, x) =
                static_cast<std::uint8_t>(std::floor(std::clamp(map(x, y), 0.0, 1.0) * 255.0 + 0.5));
    write_image(path, mat);
}

void write_labels_png(const fs::path& path, const LabelMap& labels) {
    cv::Mat mat(labels.height(), labels.width(), CV_16UC1);
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x)
            mat.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::clamp(labels(x, y), 0, 65535));
    write_image(path, mat);
}

LabelMap read_labels_png(const fs::path& path) {
    if (!fs::exists(path)) throw InputError(path.string(), "", "file not found");
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw InputError(path.string(), "", "unreadable label image");
    if (mat.channels() != 1) throw InputError(path.string(), "", "label image must be single-channel");
    LabelMap out(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            if (mat.depth() == CV_16U)
                out(x, y) = mat.at<std::uint16_t>(y, x);
            else if (mat.depth() == CV_8U)
                out(x, y) = mat.at<std::uint8_t>(y, x);
            else
                throw InputError(path.string(), "", "label image must be 8- or 16-bit");
        }
    }
    return out;
}

DetectionFile read_detections(const fs::path& path) {
    const json doc = load_json(path);
    DetectionFile out{read_header(doc, path), {}};
    const auto& boxes = array_field(doc, "boxes", path);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::string where = "boxes[" + std::to_string(i) + "]";
        DetectionBox d{field<int>(boxes[i], "model_id", path, where), read_extent(boxes[i], path, where),
                       field<double>(boxes[i], "score", path, where)};
        if (d.model_id < 0) throw InputError(path.string(), where + ".model_id", "must be >= 0");
        if (!(d.score >= 0.0 && d.score <= 1.0)) throw InputError(path.string(), where + ".score", "must be in [0,1]");
        out.boxes.push_back(d);
    }
    return out;
}

void write_detections(const fs::path& path, const DetectionFile& file) {
    json doc = header_json(file.image);
    doc["boxes"] = json::array();
    for (const auto& d : file.boxes) {
        json b;
        b["model_id"] = d.model_id;
        put_extent(b, d.box);
        b["score"] = d.score;
        doc["boxes"].push_back(b);
    }
    save_json(path, doc);
}

GroundTruthFile read_ground_truth(const fs::path& path) {
    const json doc = load_json(path);
    GroundTruthFile out{read_header(doc, path), {}};
    const auto& boxes = array_field(doc, "boxes", path);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::string where = "boxes[" + std::to_string(i) + "]";
        const int id = boxes[i].contains("id") ? field<int>(boxes[i], "id", path, where) : static_cast<int>(i);
        out.boxes.push_back({id, read_extent(boxes[i], path, where)});
    }
    return out;
}

void write_ground_truth(const fs::path& path, const GroundTruthFile& file) {
    json doc = header_json(file.image);
    doc["boxes"] = json::array();
    for (const auto& g : file.boxes) {
        json b;
        b["id"] = g.id;
        put_extent(b, g.box);
        doc["boxes"].push_back(b);
    }
    save_json(path, doc);
}

FusedFile read_fused(const fs::path& path) {
    const json doc = load_json(path);
    FusedFile out{read_header(doc, path), field<int>(doc, "model_count", path, ""), {}};
    if (out.model_count < 1) throw InputError(path.string(), "model_count", "must be >= 1");
    const auto& boxes = array_field(doc, "boxes", path);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::string where = "boxes[" + std::to_string(i) + "]";
        FusedBox f;
        f.box = read_extent(boxes[i], path, where);
        f.score = field<double>(boxes[i], "score", path, where);
        f.cluster_size = field<int>(boxes[i], "cluster_size", path, where);
        f.model_count = out.model_count;
        f.raw_score = f.score;
        out.boxes.push_back(f);
    }
    return out;
}

void write_fused(const fs::path& path, const FusedFile& file) {
    json doc = header_json(file.image);
    doc["model_count"] = file.model_count;
    doc["boxes"] = json::array();
    for (const auto& f : file.boxes) {
        json b;
        put_extent(b, f.box);
        b["score"] = f.score;
        b["cluster_size"] = f.cluster_size;
        doc["boxes"].push_back(b);
    }
    save_json(path, doc);
}

CentersFile read_centers(const fs::path& path) {
    const json doc = load_json(path);
    CentersFile out{read_header(doc, path), {}};
    const auto& centers = array_field(doc, "centers", path);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const std::string where = "centers[" + std::to_string(i) + "]";
        TreeCenter c{field<int>(centers[i], "x", path, where), field<int>(centers[i], "y", path, where),
                     centers[i].contains("segment_label") ? field<int>(centers[i], "segment_label", path, where) : 0,
                     read_source(centers[i], path, where)};
        if (c.x < 0 || c.y < 0 || c.x >= out.image.width || c.y >= out.image.height)
            throw InputError(path.string(), where, "centre outside the image");
        out.centers.push_back(c);
    }
    return out;
}

void write_centers(const fs::path& path, const CentersFile& file) {
    json doc = header_json(file.image);
    doc["centers"] = json::array();
    for (const auto& c : file.centers)
        doc["centers"].push_back(
            {{"x", c.x}, {"y", c.y}, {"segment_label", c.segment_label}, {"source", std::string(to_string(c.source))}});
    save_json(path, doc);
}

IntegratedFile read_integrated(const fs::path& path) {
    const json doc = load_json(path);
    IntegratedFile out;
    out.image = read_header(doc, path);
    out.dropped_segments = field<int>(doc, "dropped_segments", path, "");
    const auto& centers = array_field(doc, "centers", path);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const std::string where = "centers[" + std::to_string(i) + "]";
        out.centers.push_back({field<int>(centers[i], "x", path, where), field<int>(centers[i], "y", path, where), 0,
                               read_source(centers[i], path, where)});
    }
    if (doc.contains("crown_size")) {
        const auto& cs = doc.at("crown_size");
        out.crown_size = {field<double>(cs, "w_bar", path, "crown_size"), field<double>(cs, "h_bar", path, "crown_size"),
                          field<int>(cs, "sample_count", path, "crown_size")};
        out.crown_size_fallback = field<bool>(cs, "fallback", path, "crown_size");
    }
    return out;
}

void write_integrated(const fs::path& path, const IntegratedFile& file) {
    json doc = header_json(file.image);
    doc["centers"] = json::array();
    for (const auto& c : file.centers)
        doc["centers"].push_back({{"x", c.x}, {"y", c.y}, {"source", std::string(to_string(c.source))}});
    doc["dropped_segments"] = file.dropped_segments;
    doc["crown_size"] = {{"w_bar", file.crown_size.w_bar},
                         {"h_bar", file.crown_size.h_bar},
                         {"sample_count", file.crown_size.sample_count},
                         {"fallback", file.crown_size_fallback}};
    save_json(path, doc);
}

void write_report(const fs::path& json_path, const fs::path& text_path, const eval::EvalReport& report,
                  const std::string& mode) {
    json doc;
    doc["mode"] = mode;
    doc["total_gt"] = report.total_gt;
    doc["detected"] = report.detected;
    doc["rate"] = report.rate;
    doc["rate_percent"] = eval::rate_percent(report);
    doc["per_image"] = json::array();
    for (const auto& row : report.per_image)
        doc["per_image"].push_back({{"image_id", row.image_id}, {"gt", row.gt}, {"detected", row.detected}});
    save_json(json_path, doc);
    std::ofstream out(text_path, std::ios::binary);
    if (!out) throw InputError(text_path.string(), "", "cannot write file");
    out << eval::format_table(report);
}

RgbRaster render_overlay(const RgbRaster& image, const std::vector<FusedBox>& boxes,
                         const std::vector<TreeCenter>& centers) {
    RgbRaster out = image;
    const int w = image.width(), h = image.height();
    constexpr std::array<std::uint8_t, 3> green{0, 255, 0}, blue{0, 0, 255}, orange{255, 165, 0};
    for (const auto& b : boxes) {
        const int x0 = static_cast<int>(std::floor(b.box.x1 * w)), x1 = static_cast<int>(std::ceil(b.box.x2 * w)) - 1;
        const int y0 = static_cast<int>(std::floor(b.box.y1 * h)), y1 = static_cast<int>(std::ceil(b.box.y2 * h)) - 1;
        for (int x = x0; x <= x1; ++x) {
            paint(out, x, y0, green);
            paint(out, x, y1, green);
        }
        for (int y = y0; y <= y1; ++y) {
            paint(out, x0, y, green);
            paint(out, x1, y, green);
        }
    }
    for (const auto& c : centers) {
        if (c.source == CenterSource::FusedBox) continue;
        const auto colour = c.source == CenterSource::ValidatedLocal ? orange : blue;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) paint(out, c.x + dx, c.y + dy, colour);
    }
    return out;
}

}  // namespace crownfuse::io
