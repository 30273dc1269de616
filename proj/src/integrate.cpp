#include "crownfuse/integrate.hpp"

#include "crownfuse/probmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crownfuse::integrate {

namespace {

struct PixelBox {
    double x1, y1, x2, y2;
};

PixelBox expanded(const BoxExtent& box, double expansion, int width, int height) {
    const double x1 = box.x1 * width, x2 = box.x2 * width, y1 = box.y1 * height, y2 = box.y2 * height;
    const double dx = expansion * (x2 - x1), dy = expansion * (y2 - y1);
    return {x1 - dx, y1 - dy, x2 + dx, y2 + dy};
}

bool inside(const PixelBox& b, const TreeCenter& c) {
    const double x = c.x + 0.5, y = c.y + 0.5;
    return x >= b.x1 && x <= b.x2 && y >= b.y1 && y <= b.y2;
}

bool matches_crown(const Rect& r, const AvgCrownSize& avg, double tau_c) {
    return std::abs(r.width - avg.w_bar) / avg.w_bar <= tau_c && std::abs(r.height - avg.h_bar) / avg.h_bar <= tau_c;
}

// Local window around a centre, sized local_crop * (w_bar, h_bar).
Rect local_window(const TreeCenter& c, const AvgCrownSize& avg, double local_crop) {
    const int w = std::max(1, static_cast<int>(std::ceil(local_crop * avg.w_bar)));
    const int h = std::max(1, static_cast<int>(std::ceil(local_crop * avg.h_bar)));
    const int x0 = static_cast<int>(std::floor(c.x + 0.5 - w / 2.0));
    const int y0 = static_cast<int>(std::floor(c.y + 0.5 - h / 2.0));
    return {x0, y0, w, h};
}

enum class LocalOutcome { Match, NoMatch, OutOfBounds };

LocalOutcome local_contour_check(const TreeCenter& center, const AvgCrownSize& avg, const BinaryMap& c,
                                 const GrayMap& g, const IntegrationConfig& cfg) {
    if (!c.contains(center.x, center.y)) return LocalOutcome::OutOfBounds;
    const Rect window = raster::clamp_rect(local_window(center, avg, cfg.local_crop), c.width(), c.height());
    if (window.width == 0 || window.height == 0) return LocalOutcome::OutOfBounds;
    const auto joint = probmap::joint_probability_map(raster::crop(c, window), raster::crop(g, window), cfg.w1, cfg.w2);
    BinaryMap local;
    try {
        local = probmap::otsu_foreground(joint.values);
    } catch (const Error&) {
        return LocalOutcome::NoMatch;  // flat window, nothing to delineate
    }
    for (const auto& contour : raster::find_contours(local))
        if (matches_crown(contour.bounding_rect, avg, cfg.tau_c)) return LocalOutcome::Match;
    return LocalOutcome::NoMatch;
}

int segment_of(const TreeCenter& c, const SegmentationResult& seg) {
    const int count = static_cast<int>(seg.segments.size());
    if (c.segment_label >= 1 && c.segment_label <= count) return c.segment_label;
    if (seg.labels.contains(c.x, c.y)) return seg.labels(c.x, c.y);
    return 0;
}

}  // namespace

void IntegrationConfig::validate() const {
    if (!(tau_a > 0.0 && tau_a <= 1.0)) throw Error("integration: tau_a must be in (0,1]");
    if (!(expansion >= 0.0)) throw Error("integration: expansion must be >= 0");
    if (n_neighbors < 1) throw Error("integration: n_neighbors must be >= 1");
    if (!(tau_c > 0.0 && tau_c <= 1.0)) throw Error("integration: tau_c must be in (0,1]");
    if (!(local_crop >= 1.0)) throw Error("integration: local_crop must be >= 1");
    if (!(w1 >= 0.0 && w2 >= 0.0) || std::abs(w1 + w2 - 1.0) > 1e-9)
        throw Error("integration: weights must be non-negative and sum to 1");
    if (refine_open_radius < 1) throw Error("integration: refine_open_radius must be >= 1");
    if (!(fallback_w > 0.0 && fallback_h > 0.0)) throw Error("integration: fallback crown size must be positive");
}

double IntegrationConfig::neighbour_radius(double w_bar, double h_bar) const {
    return tau_d > 0.0 ? tau_d : 2.0 * std::max(w_bar, h_bar);
}

Rect expanded_pixel_rect(const BoxExtent& box, double expansion, int width, int height) {
    const PixelBox b = expanded(box, expansion, width, height);
    const int x0 = static_cast<int>(std::floor(b.x1)), y0 = static_cast<int>(std::floor(b.y1));
    const int x1 = static_cast<int>(std::ceil(b.x2)), y1 = static_cast<int>(std::ceil(b.y2));
    return {x0, y0, x1 - x0, y1 - y0};
}

std::vector<FusedBox> filter_boxes(std::span<const FusedBox> boxes, double tau_a) {
    std::vector<FusedBox> out;
    std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out),
                 [&](const FusedBox& b) { return b.score >= tau_a; });
    return out;
}

AvgCrownSize average_crown_size(std::span<const FusedBox> boxes, const SegmentationResult& seg, double expansion) {
    const int width = seg.labels.width(), height = seg.labels.height();
    const BinaryMap mask = segmentation::separated_foreground(seg.labels);
    double sum_w = 0.0, sum_h = 0.0;
    int n = 0;
    for (const auto& b : boxes) {
        const Rect r = raster::clamp_rect(expanded_pixel_rect(b.box, expansion, width, height), width, height);
        if (r.width == 0 || r.height == 0) continue;
        for (const auto& contour : raster::find_contours(raster::crop(mask, r))) {
            sum_w += contour.bounding_rect.width;
            sum_h += contour.bounding_rect.height;
            ++n;
        }
    }
    if (n == 0) throw Error("no crown statistics");
    return {sum_w / n, sum_h / n, n};
}

ReliableSet validate_centers(std::span<const TreeCenter> centers, std::span<const FusedBox> boxes,
                             const AvgCrownSize& avg, const BinaryMap& c, const GrayMap& g,
                             const IntegrationConfig& cfg) {
    cfg.validate();
    if (!(avg.w_bar > 0.0 && avg.h_bar > 0.0)) throw Error("validate_centers: crown size must be positive");
    if (!c.same_shape(g)) throw Error("validate_centers: C and G dimensions differ");
    const int width = c.width(), height = c.height();
    std::vector<PixelBox> regions;
    for (const auto& b : boxes) regions.push_back(expanded(b.box, cfg.expansion, width, height));
    const double radius = cfg.neighbour_radius(avg.w_bar, avg.h_bar);

    ReliableSet out;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        TreeCenter t = centers[i];
        if (std::any_of(regions.begin(), regions.end(), [&](const PixelBox& r) { return inside(r, t); })) {
            t.source = CenterSource::ValidatedBbox;
            out.centers.push_back(t);
            continue;
        }
        int neighbours = 0;
        for (std::size_t j = 0; j < centers.size(); ++j)
            if (j != i && std::hypot(centers[j].x - t.x, centers[j].y - t.y) <= radius) ++neighbours;
        if (neighbours >= cfg.n_neighbors) {
            t.source = CenterSource::ValidatedProximity;
            out.centers.push_back(t);
            continue;
        }
        switch (local_contour_check(t, avg, c, g, cfg)) {
            case LocalOutcome::Match:
                t.source = CenterSource::ValidatedLocal;
                out.centers.push_back(t);
                break;
            case LocalOutcome::OutOfBounds: out.rejected.push_back({t, "out of bounds"}); break;
            case LocalOutcome::NoMatch: out.rejected.push_back({t, "no support"}); break;
        }
    }
    return out;
}

Refinement refine_segmentation(const ReliableSet& reliable, const SegmentationResult& seg, int open_radius) {
    const auto& labels = seg.labels;
    const int width = labels.width(), height = labels.height();
    std::vector<int> support(seg.segments.size() + 1, 0);
    for (const auto& c : reliable.centers) ++support[static_cast<std::size_t>(segment_of(c, seg))];

    Refinement out;
    LabelMap staged(width, height);
    std::vector<int> origin{0};  // staged id -> input label
    for (const auto& s : seg.segments) {
        if (s.area == 0) continue;
        const int count = support[static_cast<std::size_t>(s.label)];
        if (count == 0) {
            ++out.dropped_segments;
            continue;
        }
        const Rect r = s.contour.bounding_rect;
        LabelMap split;
        if (count >= 2) {
            BinaryMap local(r.width, r.height);
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x) local(x, y) = labels(r.x + x, r.y + y) == s.label ? 1 : 0;
            split = segmentation::watershed_split(raster::morphological_open(local, open_radius, 1));
            if (raster::label_count(split) == 0) split = LabelMap();
        }
        const int base = static_cast<int>(origin.size());
        if (split.empty()) {
            origin.push_back(s.label);
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x)
                    if (labels(r.x + x, r.y + y) == s.label) staged(r.x + x, r.y + y) = base;
        } else {
            for (int l = 1; l <= raster::label_count(split); ++l) origin.push_back(s.label);
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x)
                    if (split(x, y) > 0) staged(r.x + x, r.y + y) = base + split(x, y) - 1;
        }
    }

    LabelMap refined = segmentation::canonical_labels(staged);
    const int count = raster::label_count(refined);
    std::vector<int> parent(static_cast<std::size_t>(count) + 1, 0);  // refined label -> input label
    for (std::size_t i = 0; i < refined.size(); ++i)
        if (refined.values()[i] > 0) parent[static_cast<std::size_t>(refined.values()[i])] = origin[static_cast<std::size_t>(staged.values()[i])];

    const GrayMap distance = raster::distance_transform(segmentation::foreground(refined));
    out.segmentation.segments = segmentation::describe_segments(refined, distance);

    for (TreeCenter c : reliable.centers) {
        const int old = segment_of(c, seg);
        int label = refined.contains(c.x, c.y) ? refined(c.x, c.y) : 0;
        if (label == 0 || (old > 0 && parent[static_cast<std::size_t>(label)] != old)) {
            // Nearest refined pixel descending from the same input segment, else any.
            double best = std::numeric_limits<double>::infinity(), best_any = best;
            int found = 0, found_any = 0;
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const int l = refined(x, y);
                    if (l == 0) continue;
                    const double d = std::hypot(x - c.x, y - c.y);
                    if (d < best_any) {
                        best_any = d;
                        found_any = l;
                    }
                    if (parent[static_cast<std::size_t>(l)] == old && d < best) {
                        best = d;
                        found = l;
                    }
                }
            }
            label = found ? found : found_any;
        }
        c.segment_label = label;
        out.segmentation.centers.push_back(c);
    }
    out.segmentation.labels = std::move(refined);
    return out;
}

IntegratedResult integrate(std::span<const FusedBox> fused, const SegmentationResult& seg, const BinaryMap& c,
                           const GrayMap& g, const IntegrationConfig& cfg) {
    cfg.validate();
    if (!seg.labels.same_shape(c)) throw Error("integrate: segmentation and feature dimensions differ");
    IntegratedResult out;
    out.accepted_boxes = filter_boxes(fused, cfg.tau_a);
    try {
        out.crown_size = average_crown_size(out.accepted_boxes, seg, cfg.expansion);
    } catch (const Error&) {
        out.crown_size = {cfg.fallback_w, cfg.fallback_h, 0};
        out.crown_size_fallback = true;
    }
    out.reliable = validate_centers(seg.centers, out.accepted_boxes, out.crown_size, c, g, cfg);
    out.refinement = refine_segmentation(out.reliable, seg, cfg.refine_open_radius);
    out.centers = out.refinement.segmentation.centers;

    const int width = c.width(), height = c.height();
    const auto& refined = out.refinement.segmentation.labels;
    const std::size_t reliable_count = out.centers.size();
    for (const auto& b : out.accepted_boxes) {
        const PixelBox region = expanded(b.box, cfg.expansion, width, height);
        const bool covered = std::any_of(out.centers.begin(), out.centers.begin() + static_cast<long>(reliable_count),
                                         [&](const TreeCenter& t) { return inside(region, t); });
        if (covered) continue;
        const int x = std::clamp(static_cast<int>(std::floor((b.box.x1 + b.box.x2) / 2.0 * width)), 0, width - 1);
        const int y = std::clamp(static_cast<int>(std::floor((b.box.y1 + b.box.y2) / 2.0 * height)), 0, height - 1);
        out.centers.push_back({x, y, refined(x, y), CenterSource::FusedBox});
    }
    return out;
}

}  // namespace crownfuse::integrate
