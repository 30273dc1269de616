#include "crownfuse/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

namespace crownfuse {

namespace {

// Counter-clockwise on screen (row axis points down), starting east.
constexpr std::array<Point, 8> kRing = {{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};

constexpr std::array<Point, 8> kNeighbours = {{
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};

int ring_index(int dx, int dy) {
    for (int i = 0; i < 8; ++i)
        if (kRing[i].x == dx && kRing[i].y == dy) return i;
    return -1;
}

using u128 = unsigned __int128;
using i128 = __int128;

// Exact a/b comparison for non-negative fractions; returns a1/b1 > a2/b2.
bool fraction_greater(u128 a1, u128 b1, u128 a2, u128 b2) {
    const u128 q1 = a1 / b1, q2 = a2 / b2;
    if (q1 != q2) return q1 > q2;
    // remainders are < b, and b < 2^56, so the cross products fit.
    return (a1 % b1) * b2 > (a2 % b2) * b1;
}

}  // namespace

Point Plateau::representative() const {
    if (pixels.empty()) throw Error("empty plateau");
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pixels) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pixels.size());
    cy /= static_cast<double>(pixels.size());
    Point best = pixels.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : pixels) {
        const double d = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    }
    return best;
}

namespace raster {

int otsu_threshold(const GrayMap& map) {
    if (map.empty()) throw Error("otsu_threshold: empty map");
    std::array<std::uint64_t, 256> hist{};
    for (double v : map.values()) {
        const long bin = std::clamp(std::lround(v), 0L, 255L);
        ++hist[static_cast<std::size_t>(bin)];
    }
    std::uint64_t total = 0, total_sum = 0;
    for (std::size_t v = 0; v < 256; ++v) {
        total += hist[v];
        total_sum += v * hist[v];
    }
    if (total >= (std::uint64_t{1} << 28)) throw Error("otsu_threshold: map too large");

    // sigma_b^2 * N^2 = (s0*N - S*n0)^2 / (n0*(N-n0)); compared exactly.
    std::uint64_t n0 = 0, s0 = 0;
    int best_t = -1;
    u128 best_num = 0, best_den = 1;
    for (int t = 0; t < 256; ++t) {
        if (t > 0) {
            n0 += hist[static_cast<std::size_t>(t - 1)];
            s0 += static_cast<std::uint64_t>(t - 1) * hist[static_cast<std::size_t>(t - 1)];
        }
        if (n0 == 0 || n0 == total) continue;
        const i128 diff = static_cast<i128>(s0) * static_cast<i128>(total) -
                          static_cast<i128>(total_sum) * static_cast<i128>(n0);
        const u128 mag = static_cast<u128>(diff < 0 ? -diff : diff);
        const u128 num = mag * mag;
        const u128 den = static_cast<u128>(n0) * static_cast<u128>(total - n0);
        if (best_t < 0 || fraction_greater(num, den, best_num, best_den)) {
            best_t = t;
            best_num = num;
            best_den = den;
        }
    }
    if (best_t < 0 || best_num == 0) throw Error("degenerate histogram");
    return best_t;
}

std::vector<Point> disk_offsets(int radius) {
    if (radius < 0) throw Error("disk_offsets: negative radius");
    std::vector<Point> out;
    const double limit = (radius + 0.5) * (radius + 0.5);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= limit) out.push_back({dx, dy});
    return out;
}

BinaryMap erode(const BinaryMap& mask, std::span<const Point> element) {
    BinaryMap out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            bool keep = true;
            for (const auto& o : element) {
                const int nx = x + o.x, ny = y + o.y;
                if (mask.contains(nx, ny) && !mask(nx, ny)) {
                    keep = false;
                    break;
                }
            }
            out(x, y) = keep ? 1 : 0;
        }
    }
    return out;
}

BinaryMap dilate(const BinaryMap& mask, std::span<const Point> element) {
    BinaryMap out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            for (const auto& o : element) {
                const int nx = x + o.x, ny = y + o.y;
                if (out.contains(nx, ny)) out(nx, ny) = 1;
            }
        }
    }
    return out;
}

BinaryMap morphological_open(const BinaryMap& mask, int radius, int iterations) {
    if (radius < 1) throw Error("morphological_open: radius must be >= 1");
    if (iterations < 1) throw Error("morphological_open: iterations must be >= 1");
    const auto disk = disk_offsets(radius);
    std::set<Point> element(disk.begin(), disk.end());
    for (int i = 1; i < iterations; ++i) {
        std::set<Point> grown;
        for (const auto& a : element)
            for (const auto& b : disk) grown.insert({a.x + b.x, a.y + b.y});
        element = std::move(grown);
    }
    const std::vector<Point> offsets(element.begin(), element.end());
    return dilate(erode(mask, offsets), offsets);
}

GrayMap distance_transform(const BinaryMap& mask) {
    const int w = mask.width(), h = mask.height();
    Plane<int> d(w, h);
    const int far = w + h + 2;
    // Outside the raster is background at distance 0, so border pixels are at most 1.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            const int up = y > 0 ? d(x, y - 1) : 0;
            const int left = x > 0 ? d(x - 1, y) : 0;
            d(x, y) = std::min({far, up + 1, left + 1});
        }
    }
    for (int y = h - 1; y >= 0; --y) {
        for (int x = w - 1; x >= 0; --x) {
            if (!mask(x, y)) continue;
            const int down = y + 1 < h ? d(x, y + 1) : 0;
            const int right = x + 1 < w ? d(x + 1, y) : 0;
            d(x, y) = std::min({d(x, y), down + 1, right + 1});
        }
    }
    GrayMap out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(x, y) = d(x, y);
    return out;
}

LabelMap connected_components(const BinaryMap& mask) {
    LabelMap labels(mask.width(), mask.height());
    std::vector<Point> stack;
    std::int32_t next = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y) || labels(x, y)) continue;
            labels(x, y) = ++next;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                for (const auto& o : kNeighbours) {
                    const int nx = p.x + o.x, ny = p.y + o.y;
                    if (mask.contains(nx, ny) && mask(nx, ny) && !labels(nx, ny)) {
                        labels(nx, ny) = next;
                        stack.push_back({nx, ny});
                    }
                }
            }
        }
    }
    return labels;
}

int label_count(const LabelMap& labels) {
    std::int32_t n = 0;
    for (auto v : labels.values()) n = std::max(n, v);
    return n;
}

std::vector<Contour> find_contours(const BinaryMap& mask) {
    const int w = mask.width() + 2, h = mask.height() + 2;
    // Working copy with a one-pixel zero frame; border following rewrites it
    // with +/-NBD marks as in Suzuki & Abe (1985).
    Plane<int> f(w, h);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) f(x + 1, y + 1) = mask(x, y) ? 1 : 0;

    std::vector<Contour> contours;
    int nbd = 1;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const int v = f(x, y);
            if (v == 0) continue;
            bool outer = false;
            Point from;
            if (v == 1 && f(x - 1, y) == 0) {
                outer = true;
                from = {x - 1, y};
            } else if (v >= 1 && f(x + 1, y) == 0) {
                from = {x + 1, y};
            } else {
                continue;
            }
            ++nbd;
            const Point start{x, y};
            std::vector<Point> points;

            // Clockwise search around the start pixel for the first non-zero neighbour.
            const int d0 = ring_index(from.x - x, from.y - y);
            int found = -1;
            for (int k = 0; k < 8; ++k) {
                const int d = ((d0 - k) % 8 + 8) % 8;
                if (f(x + kRing[d].x, y + kRing[d].y) != 0) {
                    found = d;
                    break;
                }
            }
            if (found < 0) {
                f(x, y) = -nbd;
                points.push_back({x - 1, y - 1});
            } else {
                const Point first{x + kRing[found].x, y + kRing[found].y};
                Point prev = first;
                Point cur = start;
                while (true) {
                    points.push_back({cur.x - 1, cur.y - 1});
                    // Counter-clockwise from the element after prev.
                    const int dp = ring_index(prev.x - cur.x, prev.y - cur.y);
                    bool east_zero_examined = false;
                    Point next = prev;
                    for (int k = 1; k <= 8; ++k) {
                        const int d = (dp + k) % 8;
                        const Point q{cur.x + kRing[d].x, cur.y + kRing[d].y};
                        if (f(q.x, q.y) != 0) {
                            next = q;
                            break;
                        }
                        if (d == 0) east_zero_examined = true;
                    }
                    if (east_zero_examined)
                        f(cur.x, cur.y) = -nbd;
                    else if (f(cur.x, cur.y) == 1)
                        f(cur.x, cur.y) = nbd;
                    if (next == start && cur == first) break;
                    prev = cur;
                    cur = next;
                }
            }
            if (outer) contours.push_back({points, bounding_rect(points)});
        }
    }
    return contours;
}

std::vector<Point> local_maxima(const GrayMap& map, double min_value) {
    std::vector<Point> out;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            const double v = map(x, y);
            if (v < min_value) continue;
            bool peak = true;
            for (const auto& o : kNeighbours) {
                const int nx = x + o.x, ny = y + o.y;
                if (map.contains(nx, ny) && map(nx, ny) >= v) {
                    peak = false;
                    break;
                }
            }
            if (peak) out.push_back({x, y});
        }
    }
    return out;
}

std::vector<Plateau> regional_maxima(const GrayMap& map, double min_value) {
    std::vector<Plateau> out;
    Plane<std::uint8_t> seen(map.width(), map.height());
    std::vector<Point> stack;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            const double v = map(x, y);
            // A plateau below min_value never qualifies and only spreads over equal values.
            if (seen(x, y) || v < min_value) continue;
            seen(x, y) = 1;
            Plateau plateau{{}, v};
            bool peak = true;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                plateau.pixels.push_back(p);
                for (const auto& o : kNeighbours) {
                    const int nx = p.x + o.x, ny = p.y + o.y;
                    if (!map.contains(nx, ny)) continue;
                    const double nv = map(nx, ny);
                    if (nv > v) {
                        peak = false;
                    } else if (nv == v && !seen(nx, ny)) {
                        seen(nx, ny) = 1;
                        stack.push_back({nx, ny});
                    }
                }
            }
            if (peak && v >= min_value) {
                std::sort(plateau.pixels.begin(), plateau.pixels.end(),
                          [](const Point& a, const Point& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
                out.push_back(std::move(plateau));
            }
        }
    }
    return out;
}

Rect bounding_rect(std::span<const Point> points) {
    if (points.empty()) throw Error("bounding_rect: no points");
    int x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Rect clamp_rect(const Rect& rect, int width, int height) {
    const int x0 = std::max(rect.x, 0), y0 = std::max(rect.y, 0);
    const int x1 = std::min(rect.x + rect.width, width), y1 = std::min(rect.y + rect.height, height);
    if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
    return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace raster
}  // namespace crownfuse
