// Detection-rate bookkeeping against ground-truth boxes.
#pragma once

#include "crownfuse/segmentation.hpp"
#include "crownfuse/wbf.hpp"

#include <span>
#include <string>
#include <vector>

namespace crownfuse {

struct GroundTruthBox {
    int id = 0;
    BoxExtent box;
};

namespace eval {

struct ImageEval {
    std::string image_id;
    int gt = 0;
    int detected = 0;
};

struct EvalReport {
    int total_gt = 0;
    int detected = 0;
    double rate = 0.0;
    std::vector<ImageEval> per_image;
    /// Per ground-truth box (single-image reports only): index of the matched prediction, or -1.
    std::vector<int> matched_prediction;
};

/// Greedy one-to-one matching: ground-truth boxes in order each take the first
/// unmatched prediction (input order) whose pixel centre lies inside the box.
/// Throws Error("no ground truth") for an empty ground-truth list.
EvalReport match_and_rate(std::span<const TreeCenter> predictions, std::span<const GroundTruthBox> gt, int width,
                          int height, const std::string& image_id = "");

/// Box-only variant: a prediction matches when its IoU with the ground truth is >= iou_threshold.
EvalReport match_boxes(std::span<const BoxExtent> predictions, std::span<const GroundTruthBox> gt,
                       double iou_threshold = 0.5, const std::string& image_id = "");

/// Sums per-image reports.
EvalReport combine(std::span<const EvalReport> reports);

/// Rate in percent rounded to one decimal, e.g. 91.2.
double rate_percent(const EvalReport& report);

/// Plain-text table, one row per image plus a total row.
std::string format_table(const EvalReport& report);

}  // namespace eval
}  // namespace crownfuse
