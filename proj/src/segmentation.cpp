#include "crownfuse/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace crownfuse {

namespace {

constexpr Point kNeighbours[8] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

struct FloodItem {
    double level;
    std::uint64_t seq;
    Point p;
};

struct FloodOrder {
    // Highest distance first; earlier insertion first among equals.
    bool operator()(const FloodItem& a, const FloodItem& b) const {
        if (a.level != b.level) return a.level < b.level;
        return a.seq > b.seq;
    }
};

// Minimal union-find for single-linkage clustering.
struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::string_view to_string(CenterSource source) {
    switch (source) {
        case CenterSource::Traditional: return "traditional";
        case CenterSource::ValidatedBbox: return "validated-bbox";
        case CenterSource::ValidatedProximity: return "validated-proximity";
        case CenterSource::ValidatedLocal: return "validated-local";
        case CenterSource::FusedBox: return "fused-box";
    }
    return "traditional";
}

std::optional<CenterSource> parse_center_source(std::string_view text) {
    for (auto s : {CenterSource::Traditional, CenterSource::ValidatedBbox, CenterSource::ValidatedProximity,
                   CenterSource::ValidatedLocal, CenterSource::FusedBox})
        if (to_string(s) == text) return s;
    return std::nullopt;
}

namespace segmentation {

LabelMap canonical_labels(const LabelMap& labels) {
    std::unordered_map<std::int32_t, std::int32_t> remap;
    LabelMap out(labels.width(), labels.height());
    std::int32_t next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto v = labels.values()[i];
        if (v == 0) continue;
        auto [it, inserted] = remap.try_emplace(v, next + 1);
        if (inserted) ++next;
        out.values()[i] = it->second;
    }
    return out;
}

LabelMap watershed_split(const BinaryMap& mask) {
    const GrayMap dist = raster::distance_transform(mask);
    LabelMap labels(mask.width(), mask.height());
    std::priority_queue<FloodItem, std::vector<FloodItem>, FloodOrder> queue;
    std::uint64_t seq = 0;
    std::int32_t marker = 0;
    for (const auto& plateau : raster::regional_maxima(dist, 1.0)) {
        ++marker;
        for (const auto& p : plateau.pixels) {
            labels(p.x, p.y) = marker;
            queue.push({dist(p.x, p.y), seq++, p});
        }
    }
    while (!queue.empty()) {
        const FloodItem item = queue.top();
        queue.pop();
        const auto label = labels(item.p.x, item.p.y);
        for (const auto& o : kNeighbours) {
            const int nx = item.p.x + o.x, ny = item.p.y + o.y;
            if (!mask.contains(nx, ny) || !mask(nx, ny) || labels(nx, ny) != 0) continue;
            labels(nx, ny) = label;
            queue.push({dist(nx, ny), seq++, {nx, ny}});
        }
    }
    return canonical_labels(labels);
}

BinaryMap foreground(const LabelMap& labels) {
    BinaryMap out(labels.width(), labels.height());
    for (std::size_t i = 0; i < labels.size(); ++i) out.values()[i] = labels.values()[i] > 0 ? 1 : 0;
    return out;
}

BinaryMap separated_foreground(const LabelMap& labels) {
    BinaryMap out(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const auto v = labels(x, y);
            if (v == 0) continue;
            bool keep = true;
            for (const auto& o : kNeighbours) {
                const int nx = x + o.x, ny = y + o.y;
                if (!labels.contains(nx, ny)) continue;
                const auto n = labels(nx, ny);
                if (n != 0 && n < v) {
                    keep = false;
                    break;
                }
            }
            out(x, y) = keep ? 1 : 0;
        }
    }
    return out;
}

std::vector<Segment> describe_segments(const LabelMap& labels, const GrayMap& distance) {
    if (!labels.same_shape(distance)) throw Error("labels and distance dimensions differ");
    const int count = raster::label_count(labels);
    std::vector<Segment> segments(static_cast<std::size_t>(count));
    std::vector<Rect> extent(static_cast<std::size_t>(count));
    std::vector<bool> seen(static_cast<std::size_t>(count), false);
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const auto v = labels(x, y);
            if (v <= 0) continue;
            const auto i = static_cast<std::size_t>(v - 1);
            ++segments[i].area;
            if (!seen[i]) {
                extent[i] = {x, y, 1, 1};
                seen[i] = true;
                continue;
            }
            auto& r = extent[i];
            const int x0 = std::min(r.x, x), y0 = std::min(r.y, y);
            const int x1 = std::max(r.x + r.width, x + 1), y1 = std::max(r.y + r.height, y + 1);
            r = {x0, y0, x1 - x0, y1 - y0};
        }
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        auto& seg = segments[i];
        seg.label = static_cast<int>(i + 1);
        if (seg.area == 0) continue;
        const Rect& r = extent[i];
        BinaryMap local(r.width, r.height);
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x) local(x, y) = labels(r.x + x, r.y + y) == seg.label ? 1 : 0;
        auto contours = raster::find_contours(local);
        // Largest piece first if a region is not 8-connected.
        std::stable_sort(contours.begin(), contours.end(), [](const Contour& a, const Contour& b) {
            return a.bounding_rect.width * a.bounding_rect.height > b.bounding_rect.width * b.bounding_rect.height;
        });
        seg.contour = std::move(contours.front());
        for (auto& p : seg.contour.points) p = {p.x + r.x, p.y + r.y};
        seg.contour.bounding_rect.x += r.x;
        seg.contour.bounding_rect.y += r.y;
    }
    for (const auto& plateau : raster::regional_maxima(distance, 1.0)) {
        const Point rep = plateau.representative();
        const auto v = labels(rep.x, rep.y);
        if (v > 0) segments[static_cast<std::size_t>(v - 1)].maxima.push_back(rep);
    }
    return segments;
}

SegmentationResult extract_centers(const LabelMap& labels, const GrayMap& distance, int th_area, double th_dist) {
    if (th_area < 1) throw Error("extract_centers: th_area must be >= 1");
    if (!(th_dist >= 1.0)) throw Error("extract_centers: th_dist must be >= 1");
    SegmentationResult result{labels, describe_segments(labels, distance), {}};

    for (const auto& seg : result.segments) {
        const auto& maxima = seg.maxima;
        if (maxima.empty()) continue;
        if (seg.area < th_area) {
            double sx = 0.0, sy = 0.0;
            for (const auto& m : maxima) {
                sx += m.x;
                sy += m.y;
            }
            const double n = static_cast<double>(maxima.size());
            result.centers.push_back({round_half_up(sx / n), round_half_up(sy / n), seg.label});
            continue;
        }
        DisjointSets sets(maxima.size());
        for (std::size_t a = 0; a < maxima.size(); ++a)
            for (std::size_t b = a + 1; b < maxima.size(); ++b)
                if (std::hypot(maxima[a].x - maxima[b].x, maxima[a].y - maxima[b].y) < th_dist) sets.unite(a, b);
        // Roots are the smallest member index, so clusters come out in maxima order.
        for (std::size_t root = 0; root < maxima.size(); ++root) {
            if (sets.find(root) != root) continue;
            double sx = 0.0, sy = 0.0, n = 0.0;
            for (std::size_t i = 0; i < maxima.size(); ++i) {
                if (sets.find(i) != root) continue;
                sx += maxima[i].x;
                sy += maxima[i].y;
                n += 1.0;
            }
            result.centers.push_back({round_half_up(sx / n), round_half_up(sy / n), seg.label});
        }
    }
    return result;
}

}  // namespace segmentation
}  // namespace crownfuse
