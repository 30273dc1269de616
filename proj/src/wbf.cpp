#include "crownfuse/wbf.hpp"

#include "crownfuse/raster.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace crownfuse::wbf {

namespace {

struct Cluster {
    std::vector<std::size_t> members;
    double wx1 = 0.0, wy1 = 0.0, wx2 = 0.0, wy2 = 0.0, wsum = 0.0;
    double ux1 = 0.0, uy1 = 0.0, ux2 = 0.0, uy2 = 0.0;  // unweighted sums for all-zero weights
    BoxExtent fused;

    void add(std::size_t index, const BoxExtent& b, double w) {
        members.push_back(index);
        wx1 += w * b.x1;
        wy1 += w * b.y1;
        wx2 += w * b.x2;
        wy2 += w * b.y2;
        wsum += w;
        ux1 += b.x1;
        uy1 += b.y1;
        ux2 += b.x2;
        uy2 += b.y2;
        if (wsum > 0.0) {
            fused = {wx1 / wsum, wy1 / wsum, wx2 / wsum, wy2 / wsum};
        } else {
            const double n = static_cast<double>(members.size());
            fused = {ux1 / n, uy1 / n, ux2 / n, uy2 / n};
        }
    }
};

}  // namespace

void WbfConfig::validate() const {
    if (!(prefilter_score >= 0.0 && prefilter_score < 1.0)) throw Error("wbf: prefilter_score must be in [0,1)");
    if (!(iou_cluster > 0.0 && iou_cluster < 1.0)) throw Error("wbf: iou_cluster must be in (0,1)");
    for (double w : model_weights)
        if (!(w > 0.0)) throw Error("wbf: model weights must be positive");
}

double WbfConfig::weight(int model_id) const {
    if (model_weights.empty()) return 1.0;
    if (model_id < 0 || static_cast<std::size_t>(model_id) >= model_weights.size())
        throw Error("wbf: no weight for model_id " + std::to_string(model_id));
    return model_weights[static_cast<std::size_t>(model_id)];
}

double iou(const BoxExtent& a, const BoxExtent& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<FusedBox> fuse(std::span<const DetectionBox> detections, int n_models, const WbfConfig& config) {
    config.validate();
    if (n_models < 1) throw Error("wbf: n_models must be >= 1");
    for (const auto& d : detections) {
        if (d.model_id < 0 || d.model_id >= n_models)
            throw Error("wbf: invalid model_id " + std::to_string(d.model_id));
        if (!d.box.valid()) throw Error("wbf: box requires x1 < x2 and y1 < y2");
        if (!(d.score >= 0.0 && d.score <= 1.0)) throw Error("wbf: score must be in [0,1]");
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < detections.size(); ++i)
        if (detections[i].score >= config.prefilter_score) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = detections[a];
        const auto& db = detections[b];
        if (da.score != db.score) return da.score > db.score;
        return da.model_id < db.model_id;
    });

    std::vector<Cluster> clusters;
    for (std::size_t index : order) {
        const auto& d = detections[index];
        const double w = d.score * config.weight(d.model_id);
        auto it = std::find_if(clusters.begin(), clusters.end(),
                               [&](const Cluster& c) { return iou(c.fused, d.box) >= config.iou_cluster; });
        if (it == clusters.end()) {
            clusters.emplace_back();
            it = std::prev(clusters.end());
        }
        it->add(index, d.box, w);
    }

    std::vector<FusedBox> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) {
        FusedBox f;
        f.box = c.fused;
        f.members = c.members;
        f.model_count = n_models;
        if (config.cluster_count == ClusterCount::Boxes) {
            f.cluster_size = static_cast<int>(c.members.size());
        } else {
            std::set<int> models;
            for (auto m : c.members) models.insert(detections[m].model_id);
            f.cluster_size = static_cast<int>(models.size());
        }
        if (config.score_mode == ScoreMode::Max) {
            for (auto m : c.members) f.raw_score = std::max(f.raw_score, detections[m].score);
        } else {
            double sum = 0.0;
            for (auto m : c.members) sum += detections[m].score;
            f.raw_score = sum / static_cast<double>(c.members.size());
        }
        f.score = f.raw_score * std::min(f.cluster_size, n_models) / static_cast<double>(n_models);
        out.push_back(std::move(f));
    }
    std::stable_sort(out.begin(), out.end(), [](const FusedBox& a, const FusedBox& b) { return a.score > b.score; });
    return out;
}

}  // namespace crownfuse::wbf
