#include "crownfuse/synth.hpp"

#include <algorithm>
#include <cmath>

namespace crownfuse::synth {

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Channel ratios of crown foliage relative to green; hue stays near 110 degrees.
constexpr double kCrownRed = 0.45;
constexpr double kCrownBlue = 0.35;

}  // namespace

void SceneSpec::validate() const {
    if (width < 1 || height < 1) throw Error("scene: width and height must be >= 1");
    if (clutter < 0) throw Error("scene: clutter must be >= 0");
    for (const auto& c : crowns) {
        if (!(c.radius >= 2.0)) throw Error("scene: crown radius must be >= 2");
        if (c.cx - c.radius < 0.0 || c.cy - c.radius < 0.0 || c.cx + c.radius > width - 1 ||
            c.cy + c.radius > height - 1)
            throw Error("crown outside bounds");
    }
}

Scene render_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Scene scene{RgbRaster(spec.width, spec.height), {}};
    auto& img = scene.image;

    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double n = rng.uniform(0.95, 1.05);
            img.set(x, y, to_u8(spec.background[0] * n), to_u8(spec.background[1] * n),
                    to_u8(spec.background[2] * n));
        }
    }

    Plane<std::uint8_t> covered(spec.width, spec.height);
    int id = 0;
    for (const auto& c : spec.crowns) {
        const int x0 = static_cast<int>(std::ceil(c.cx - c.radius)), x1 = static_cast<int>(std::floor(c.cx + c.radius));
        const int y0 = static_cast<int>(std::ceil(c.cy - c.radius)), y1 = static_cast<int>(std::floor(c.cy + c.radius));
        int bx0 = x1, bx1 = x0, by0 = y1, by1 = y0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d2 = (x - c.cx) * (x - c.cx) + (y - c.cy) * (y - c.cy);
                if (d2 > c.radius * c.radius) continue;
                const double g = c.green * (1.0 - 0.4 * d2 / (c.radius * c.radius)) * rng.uniform(0.8, 1.2);
                img.set(x, y, to_u8(kCrownRed * g), to_u8(g), to_u8(kCrownBlue * g));
                covered(x, y) = 1;
                bx0 = std::min(bx0, x);
                bx1 = std::max(bx1, x);
                by0 = std::min(by0, y);
                by1 = std::max(by1, y);
            }
        }
        const double w = spec.width, h = spec.height;
        scene.ground_truth.push_back({id++, {bx0 / w, by0 / h, (bx1 + 1) / w, (by1 + 1) / h}});
    }

    for (int i = 0; i < spec.clutter; ++i) {
        const int x = rng.integer(0, spec.width - 1), y = rng.integer(0, spec.height - 1);
        const bool pair = rng.uniform() < 0.5, horizontal = rng.uniform() < 0.5;
        const double g = rng.uniform(110.0, 200.0);
        const int x2 = pair && horizontal ? x + 1 : x, y2 = pair && !horizontal ? y + 1 : y;
        for (const Point p : {Point{x, y}, Point{x2, y2}}) {
            if (!img.red.contains(p.x, p.y) || covered(p.x, p.y)) continue;
            img.set(p.x, p.y, to_u8(0.5 * g), to_u8(g), to_u8(0.4 * g));
        }
    }
    return scene;
}

std::vector<Crown> random_layout(const LayoutSpec& spec) {
    if (!(spec.radius_min >= 2.0 && spec.radius_min <= spec.radius_max))
        throw Error("layout: require 2 <= radius_min <= radius_max");
    Rng rng(spec.seed);
    const double spacing = 2.0 * spec.radius_max + spec.separation_margin;
    std::vector<Crown> crowns;
    const int max_attempts = 200 * std::max(spec.count, 1);
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(crowns.size()) < spec.count; ++attempt) {
        const double r = rng.uniform(spec.radius_min, spec.radius_max);
        const double cx = rng.uniform(r, spec.width - 1 - r);
        const double cy = rng.uniform(r, spec.height - 1 - r);
        const double green = rng.uniform(spec.green_min, spec.green_max);
        const bool clear = std::all_of(crowns.begin(), crowns.end(), [&](const Crown& o) {
            return std::hypot(o.cx - cx, o.cy - cy) >= spacing;
        });
        if (clear) crowns.push_back({cx, cy, r, green});
    }
    return crowns;
}

std::vector<DetectionBox> simulate_detections(const std::vector<GroundTruthBox>& gt, int n_models, double drop_rate,
                                              double jitter, std::uint64_t seed) {
    if (n_models < 1) throw Error("simulate_detections: n_models must be >= 1");
    if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw Error("simulate_detections: drop_rate must be in [0,1)");
    if (!(jitter >= 0.0 && jitter < 0.5)) throw Error("simulate_detections: jitter must be in [0,0.5)");
    Rng rng(seed);
    std::vector<DetectionBox> out;
    for (int m = 0; m < n_models; ++m) {
        for (const auto& g : gt) {
            if (rng.uniform() < drop_rate) continue;
            const double w = g.box.x2 - g.box.x1, h = g.box.y2 - g.box.y1;
            BoxExtent b = g.box;
            b.x1 += rng.uniform(-jitter, jitter) * w;
            b.y1 += rng.uniform(-jitter, jitter) * h;
            b.x2 += rng.uniform(-jitter, jitter) * w;
            b.y2 += rng.uniform(-jitter, jitter) * h;
            b.x1 = std::clamp(b.x1, 0.0, 1.0);
            b.y1 = std::clamp(b.y1, 0.0, 1.0);
            b.x2 = std::clamp(b.x2, 0.0, 1.0);
            b.y2 = std::clamp(b.y2, 0.0, 1.0);
            out.push_back({m, b, rng.uniform(0.7, 1.0)});
        }
    }
    return out;
}

}  // namespace crownfuse::synth
