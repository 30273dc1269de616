// Independent brute-force reference implementations and fixture builders.
// Deliberately written the slow, obvious way; they share no code with the library.
#pragma once

#include "crownfuse/raster.hpp"
#include "crownfuse/wbf.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using namespace crownfuse;
using Rational = boost::multiprecision::cpp_rational;

/// Exhaustive Otsu: for every t in 1..255, classes {v < t} and {v >= t};
/// between-class variance w0*w1*(mu0-mu1)^2 in exact rationals; smallest maximiser.
/// Returns -1 when no split has both classes non-empty.
inline int otsu(const GrayMap& levels) {
    std::vector<int> values;
    for (double v : levels.values()) values.push_back(static_cast<int>(std::lround(v)));
    const Rational n = static_cast<long>(values.size());
    int best_t = -1;
    Rational best = -1;
    for (int t = 1; t < 256; ++t) {
        long n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int v : values) {
            if (v < t) {
                ++n0;
                s0 += v;
            } else {
                ++n1;
                s1 += v;
            }
        }
        if (n0 == 0 || n1 == 0) continue;
        const Rational w0 = Rational(n0) / n, w1 = Rational(n1) / n;
        const Rational mu0 = Rational(s0) / n0, mu1 = Rational(s1) / n1;
        const Rational var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best) {
            best = var;
            best_t = t;
        }
    }
    return best_t;
}

/// All-pairs city-block distance to the nearest background pixel, where the
/// ring just outside the raster is background too.
inline GrayMap distance(const BinaryMap& mask) {
    const int w = mask.width(), h = mask.height();
    std::vector<Point> background;
    for (int y = -1; y <= h; ++y)
        for (int x = -1; x <= w; ++x)
            if (!mask.contains(x, y) || !mask(x, y)) background.push_back({x, y});
    GrayMap out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            int best = std::numeric_limits<int>::max();
            for (const auto& b : background) best = std::min(best, std::abs(b.x - x) + std::abs(b.y - y));
            out(x, y) = best;
        }
    }
    return out;
}

/// Structuring element of the given disk iterated k times, as a set of offsets (Minkowski sum).
inline std::set<std::pair<int, int>> iterated_disk(int radius, int iterations) {
    std::set<std::pair<int, int>> base;
    const double r2 = (radius + 0.5) * (radius + 0.5);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= r2) base.insert({dx, dy});
    std::set<std::pair<int, int>> element{{0, 0}};
    for (int i = 0; i < iterations; ++i) {
        std::set<std::pair<int, int>> next;
        for (const auto& a : element)
            for (const auto& b : base) next.insert({a.first + b.first, a.second + b.second});
        element = std::move(next);
    }
    return element;
}

/// Opening as set arithmetic: a pixel survives iff some translate of the element
/// that fits inside the foreground (ignoring the part outside the raster) covers it.
inline BinaryMap open(const BinaryMap& mask, int radius, int iterations) {
    const auto element = iterated_disk(radius, iterations);
    const int w = mask.width(), h = mask.height();
    BinaryMap fits(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool ok = true;
            for (const auto& [dx, dy] : element) {
                const int px = x + dx, py = y + dy;
                if (mask.contains(px, py) && !mask(px, py)) {
                    ok = false;
                    break;
                }
            }
            fits(x, y) = ok && mask(x, y) ? 1 : 0;
        }
    BinaryMap out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (fits(x, y))
                for (const auto& [dx, dy] : element)
                    if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
    return out;
}

inline double iou(const BoxExtent& a, const BoxExtent& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

struct OracleBox {
    BoxExtent box;
    double raw = 0.0;
    double score = 0.0;
    int count = 0;
};

/// Brute-force WBF with unit model weights, max confidence and T = member count:
/// repeatedly take the best remaining box (highest score, then lowest model id,
/// then lowest index), recompute every cluster's weighted box from its members,
/// join the earliest cluster with IoU >= threshold.
inline std::vector<OracleBox> wbf(const std::vector<DetectionBox>& input, int n_models, double iou_threshold,
                                  double prefilter) {
    std::vector<bool> used(input.size(), false);
    std::vector<std::vector<std::size_t>> clusters;
    auto fused_of = [&](const std::vector<std::size_t>& members) {
        double sw = 0.0, x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
        for (auto m : members) {
            const double c = input[m].score;
            sw += c;
            x1 += c * input[m].box.x1;
            y1 += c * input[m].box.y1;
            x2 += c * input[m].box.x2;
            y2 += c * input[m].box.y2;
        }
        if (sw == 0.0) {
            const double k = static_cast<double>(members.size());
            sw = 0.0;
            x1 = y1 = x2 = y2 = 0.0;
            for (auto m : members) {
                x1 += input[m].box.x1;
                y1 += input[m].box.y1;
                x2 += input[m].box.x2;
                y2 += input[m].box.y2;
            }
            return BoxExtent{x1 / k, y1 / k, x2 / k, y2 / k};
        }
        return BoxExtent{x1 / sw, y1 / sw, x2 / sw, y2 / sw};
    };
    while (true) {
        std::size_t pick = input.size();
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (used[i] || input[i].score < prefilter) continue;
            if (pick == input.size()) {
                pick = i;
                continue;
            }
            const auto& a = input[i];
            const auto& b = input[pick];
            if (a.score > b.score || (a.score == b.score && a.model_id < b.model_id)) pick = i;
        }
        if (pick == input.size()) break;
        used[pick] = true;
        bool joined = false;
        for (auto& c : clusters) {
            if (iou(fused_of(c), input[pick].box) >= iou_threshold) {
                c.push_back(pick);
                joined = true;
                break;
            }
        }
        if (!joined) clusters.push_back({pick});
    }
    std::vector<OracleBox> out;
    for (const auto& c : clusters) {
        OracleBox o;
        o.box = fused_of(c);
        for (auto m : c) o.raw = std::max(o.raw, input[m].score);
        o.count = static_cast<int>(c.size());
        o.score = o.raw * std::min(o.count, n_models) / n_models;
        out.push_back(o);
    }
    std::stable_sort(out.begin(), out.end(), [](const OracleBox& a, const OracleBox& b) { return a.score > b.score; });
    return out;
}

}  // namespace oracle

namespace fixture {

using namespace crownfuse;

struct Disk {
    double cx, cy, r;
};

/// Pixels whose centre lies within r of (cx, cy).
inline BinaryMap disks(int w, int h, const std::vector<Disk>& list) {
    BinaryMap m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (const auto& d : list)
                if ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) <= d.r * d.r) m(x, y) = 1;
    return m;
}

inline BinaryMap random_mask(std::mt19937_64& rng, int w, int h, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BinaryMap m(w, h);
    for (auto& v : m.values()) v = u(rng) < density ? 1 : 0;
    return m;
}

/// Random blobs: a union of a few random disks plus some salt, to get both large components and specks.
inline BinaryMap blob_mask(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Disk> list;
    const int n = 1 + static_cast<int>(u(rng) * 6);
    for (int i = 0; i < n; ++i) list.push_back({u(rng) * w, u(rng) * h, 1.0 + u(rng) * std::min(w, h) / 3.0});
    BinaryMap m = disks(w, h, list);
    for (auto& v : m.values())
        if (u(rng) < 0.03) v = 1 - v;
    return m;
}

}  // namespace fixture
