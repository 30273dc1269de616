// Weighted Boxes Fusion of multi-model detections.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crownfuse {

/// Box in normalized image fractions, x1 < x2 and y1 < y2.
struct BoxExtent {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double area() const { return (x2 - x1) * (y2 - y1); }
    bool valid() const { return x1 < x2 && y1 < y2; }
    bool contains(double x, double y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }
    bool operator==(const BoxExtent&) const = default;
};

struct DetectionBox {
    int model_id = 0;
    BoxExtent box;
    double score = 0.0;
};

struct FusedBox {
    BoxExtent box;
    double score = 0.0;      // after model-count rescaling
    double raw_score = 0.0;  // cluster confidence before rescaling
    int cluster_size = 1;    // T
    int model_count = 1;     // N
    std::vector<std::size_t> members;  // indices into the fused input, in join order
};

namespace wbf {

/// How a cluster's confidence is formed from its members.
enum class ScoreMode { Max, Average };
/// What T counts in the min(T, N)/N rescaling.
enum class ClusterCount { Boxes, Models };

struct WbfConfig {
    double prefilter_score = 0.05;
    double iou_cluster = 0.55;
    std::vector<double> model_weights;  // empty = 1.0 for every model
    ScoreMode score_mode = ScoreMode::Max;
    ClusterCount cluster_count = ClusterCount::Boxes;

    void validate() const;
    double weight(int model_id) const;
};

double iou(const BoxExtent& a, const BoxExtent& b);

/// Fuses boxes of `n_models` detectors.
///
///  1. boxes scoring below prefilter_score are dropped;
///  2. the rest, by descending score (model_id then input index on ties), join
///     the first cluster whose running fused extent has IoU >= iou_cluster,
///     or open a new one;
///  3. each cluster's corners are the means of its members weighted by
///     score * model_weight;
///  4. the cluster confidence (max, or mean, of member scores) is scaled by
///     min(T, N) / N.
///
/// Output is sorted by descending final score, cluster creation order on ties.
std::vector<FusedBox> fuse(std::span<const DetectionBox> detections, int n_models, const WbfConfig& config = {});

}  // namespace wbf
}  // namespace crownfuse
