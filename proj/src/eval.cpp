#include "crownfuse/eval.hpp"

#include <cmath>
#include <cstdio>

namespace crownfuse::eval {

namespace {

template <typename Matches>
EvalReport greedy(std::size_t n_predictions, std::span<const GroundTruthBox> gt, const std::string& image_id,
                  Matches&& matches) {
    if (gt.empty()) throw Error("no ground truth");
    EvalReport report;
    report.total_gt = static_cast<int>(gt.size());
    report.matched_prediction.assign(gt.size(), -1);
    std::vector<bool> used(n_predictions, false);
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t p = 0; p < n_predictions; ++p) {
            if (used[p] || !matches(p, gt[g].box)) continue;
            used[p] = true;
            report.matched_prediction[g] = static_cast<int>(p);
            ++report.detected;
            break;
        }
    }
    report.rate = static_cast<double>(report.detected) / report.total_gt;
    report.per_image.push_back({image_id, report.total_gt, report.detected});
    return report;
}

}  // namespace

EvalReport match_and_rate(std::span<const TreeCenter> predictions, std::span<const GroundTruthBox> gt, int width,
                          int height, const std::string& image_id) {
    if (width < 1 || height < 1) throw Error("match_and_rate: invalid image size");
    return greedy(predictions.size(), gt, image_id, [&](std::size_t p, const BoxExtent& box) {
        const double x = (predictions[p].x + 0.5) / width;
        const double y = (predictions[p].y + 0.5) / height;
        return box.contains(x, y);
    });
}

EvalReport match_boxes(std::span<const BoxExtent> predictions, std::span<const GroundTruthBox> gt,
                       double iou_threshold, const std::string& image_id) {
    return greedy(predictions.size(), gt, image_id,
                  [&](std::size_t p, const BoxExtent& box) { return wbf::iou(predictions[p], box) >= iou_threshold; });
}

EvalReport combine(std::span<const EvalReport> reports) {
    EvalReport total;
    for (const auto& r : reports) {
        total.total_gt += r.total_gt;
        total.detected += r.detected;
        total.per_image.insert(total.per_image.end(), r.per_image.begin(), r.per_image.end());
    }
    if (total.total_gt == 0) throw Error("no ground truth");
    total.rate = static_cast<double>(total.detected) / total.total_gt;
    return total;
}

double rate_percent(const EvalReport& report) { return std::round(report.rate * 1000.0) / 10.0; }

std::string format_table(const EvalReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-32s %10s %10s %8s\n", "image", "gt", "detected", "rate");
    out += line;
    for (const auto& row : report.per_image) {
        const double rate = row.gt > 0 ? 100.0 * row.detected / row.gt : 0.0;
        std::snprintf(line, sizeof line, "%-32s %10d %10d %7.1f%%\n", row.image_id.c_str(), row.gt, row.detected,
                      rate);
        out += line;
    }
    std::snprintf(line, sizeof line, "%-32s %10d %10d %7.1f%%\n", "total", report.total_gt, report.detected,
                  rate_percent(report));
    out += line;
    return out;
}

}  // namespace crownfuse::eval
