// Raster and JSON file formats.
//
// Rasters: 8-bit RGB PNG/TIFF in; masks and J as 8-bit PNG, labels as 16-bit
// PNG (clamped at 65535), overlays as RGB PNG.
//
// JSON documents (coordinates of boxes are normalized to [0,1], centres are pixels):
//   detections / ground truth
//     {"image_id", "width", "height", "boxes": [{"model_id", "x1", "y1", "x2", "y2", "score"}]}
//     ground truth ignores "score" and "model_id" and reads an optional "id".
//   fused
//     {"image_id", "width", "height", "model_count",
//      "boxes": [{"x1", "y1", "x2", "y2", "score", "cluster_size"}]}
//   centers (traditional detector)
//     {"image_id", "width", "height", "centers": [{"x", "y", "segment_label", "source"}]}
//   integrated
//     {"image_id", "width", "height", "centers": [{"x", "y", "source"}], "dropped_segments",
//      "crown_size": {"w_bar", "h_bar", "sample_count", "fallback"}}
#pragma once

#include "crownfuse/eval.hpp"
#include "crownfuse/integrate.hpp"
#include "crownfuse/raster.hpp"
#include "crownfuse/segmentation.hpp"
#include "crownfuse/wbf.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace crownfuse::io {

/// Failure tied to an input: which file, which field, and why.
class InputError : public Error {
public:
    InputError(std::string file, std::string field, std::string reason);
    const std::string& file() const { return file_; }
    const std::string& field() const { return field_; }
    const std::string& reason() const { return reason_; }

private:
    std::string file_;
    std::string field_;
    std::string reason_;
};

RgbRaster read_rgb(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbRaster& image);
void write_mask_png(const std::filesystem::path& path, const BinaryMap& mask);
/// Unit-range map as 8-bit levels (round half up).
void write_unit_png(const std::filesystem::path& path, const GrayMap& map);
void write_labels_png(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labels_png(const std::filesystem::path& path);

struct ImageHeader {
    std::string image_id;
    int width = 0;
    int height = 0;
};

struct DetectionFile {
    ImageHeader image;
    std::vector<DetectionBox> boxes;
};

struct GroundTruthFile {
    ImageHeader image;
    std::vector<GroundTruthBox> boxes;
};

struct FusedFile {
    ImageHeader image;
    int model_count = 1;
    std::vector<FusedBox> boxes;
};

struct CentersFile {
    ImageHeader image;
    std::vector<TreeCenter> centers;
};

struct IntegratedFile {
    ImageHeader image;
    std::vector<TreeCenter> centers;
    int dropped_segments = 0;
    integrate::AvgCrownSize crown_size;
    bool crown_size_fallback = false;
};

DetectionFile read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, const DetectionFile& file);
GroundTruthFile read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruthFile& file);
FusedFile read_fused(const std::filesystem::path& path);
void write_fused(const std::filesystem::path& path, const FusedFile& file);
CentersFile read_centers(const std::filesystem::path& path);
void write_centers(const std::filesystem::path& path, const CentersFile& file);
IntegratedFile read_integrated(const std::filesystem::path& path);
void write_integrated(const std::filesystem::path& path, const IntegratedFile& file);
void write_report(const std::filesystem::path& json_path, const std::filesystem::path& text_path,
                  const eval::EvalReport& report, const std::string& mode);

/// Boxes in green, traditional-pipeline centres as blue dots, locally validated centres in orange.
RgbRaster render_overlay(const RgbRaster& image, const std::vector<FusedBox>& boxes,
                         const std::vector<TreeCenter>& centers);

}  // namespace crownfuse::io
