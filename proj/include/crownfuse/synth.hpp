// Synthetic forest scenes with exactly known crowns, and simulated detector output.
#pragma once

#include "crownfuse/eval.hpp"
#include "crownfuse/raster.hpp"
#include "crownfuse/wbf.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace crownfuse::synth {

/// Seeded uniform generator. uniform() = (next 64-bit mt19937_64 output >> 11) * 2^-53,
/// which keeps draws identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }  // [lo, hi]

private:
    std::mt19937_64 engine_;
};

struct Crown {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 5.0;
    double green = 180.0;  // peak green-channel intensity
};

struct SceneSpec {
    int width = 512;
    int height = 512;
    std::vector<Crown> crowns;
    std::array<std::uint8_t, 3> background{128, 104, 72};
    int clutter = 0;  // low-vegetation speckles of at most 2 px
    std::uint64_t seed = 1;

    void validate() const;
};

struct Scene {
    RgbRaster image;
    std::vector<GroundTruthBox> ground_truth;
};

/// Textured green disks (radial falloff times per-pixel brightness noise) on a
/// lightly textured background. Ground truth is the tight pixel box of each disk.
/// Throws Error("crown outside bounds") when a disk leaves the raster.
Scene render_scene(const SceneSpec& spec);

/// Random non-touching crown layout: centre spacing >= 2 * radius_max + separation_margin.
struct LayoutSpec {
    int width = 512;
    int height = 512;
    int count = 10;
    double radius_min = 5.0;
    double radius_max = 15.0;
    double separation_margin = 4.0;
    double green_min = 150.0;
    double green_max = 230.0;
    std::uint64_t seed = 1;
};

/// Places up to `count` crowns by rejection sampling (fewer if the raster is full).
std::vector<Crown> random_layout(const LayoutSpec& spec);

/// Per model and per ground-truth box, in that order: one drop draw; if kept,
/// four jitter draws (x1, y1, x2, y2, each offset by uniform(-jitter, jitter)
/// times the box size) and one score draw uniform in [0.7, 1.0].
std::vector<DetectionBox> simulate_detections(const std::vector<GroundTruthBox>& gt, int n_models, double drop_rate,
                                              double jitter, std::uint64_t seed);

}  // namespace crownfuse::synth
