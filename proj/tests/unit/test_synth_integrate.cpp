#include "crownfuse/integrate.hpp"
#include "crownfuse/synth.hpp"
#include "crownfuse/traditional.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crownfuse;

TEST(Synth, CrownsBecomeGroundTruth) {
    synth::SceneSpec spec;
    spec.width = 200;
    spec.height = 120;
    for (int i = 0; i < 5; ++i) spec.crowns.push_back({20.0 + 35.0 * i, 60.0, 8.0, 190.0});
    const auto scene = synth::render_scene(spec);
    ASSERT_EQ(scene.ground_truth.size(), 5u);
    // Tight pixel box: pixels whose centre is within r of (cx, cy).
    const auto& b = scene.ground_truth[0].box;
    EXPECT_DOUBLE_EQ(b.x1 * 200, 12.0);
    EXPECT_DOUBLE_EQ(b.x2 * 200, 29.0);
    EXPECT_DOUBLE_EQ(b.y1 * 120, 52.0);
    EXPECT_DOUBLE_EQ(b.y2 * 120, 69.0);
}

TEST(Synth, ZeroCrownsIsBackgroundOnly) {
    synth::SceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    const auto scene = synth::render_scene(spec);
    EXPECT_TRUE(scene.ground_truth.empty());
    const auto c = features::green_dominance_map(scene.image, {});
    for (auto v : c.values()) EXPECT_EQ(v, 0);
}

TEST(Synth, SeededDeterminism) {
    synth::SceneSpec spec;
    spec.crowns = synth::random_layout({});
    spec.clutter = 30;
    EXPECT_EQ(synth::render_scene(spec).image, synth::render_scene(spec).image);
    EXPECT_EQ(synth::random_layout({}).size(), synth::random_layout({}).size());
}

TEST(Synth, CrownOutsideBounds) {
    synth::SceneSpec spec;
    spec.width = 50;
    spec.height = 50;
    spec.crowns.push_back({5.0, 25.0, 8.0, 180.0});
    try {
        synth::render_scene(spec);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "crown outside bounds");
    }
}

TEST(Synth, LayoutRespectsSpacing) {
    synth::LayoutSpec spec;
    spec.count = 50;
    spec.seed = 77;
    const auto crowns = synth::random_layout(spec);
    EXPECT_GT(crowns.size(), 20u);
    for (std::size_t i = 0; i < crowns.size(); ++i) {
        EXPECT_GE(crowns[i].radius, 5.0);
        EXPECT_LE(crowns[i].radius, 15.0);
        for (std::size_t j = i + 1; j < crowns.size(); ++j)
            EXPECT_GE(std::hypot(crowns[i].cx - crowns[j].cx, crowns[i].cy - crowns[j].cy), 34.0);
    }
}

namespace {

std::vector<GroundTruthBox> ten_boxes() {
    std::vector<GroundTruthBox> gt;
    for (int i = 0; i < 10; ++i) gt.push_back({i, {0.05 * i, 0.1, 0.05 * i + 0.04, 0.2}});
    return gt;
}

}  // namespace

TEST(SimulateDetections, LosslessSetting) {
    const auto gt = ten_boxes();
    const auto d = synth::simulate_detections(gt, 3, 0.0, 0.0, 5);
    ASSERT_EQ(d.size(), 30u);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d[i].box, gt[i % 10].box);
        EXPECT_EQ(d[i].model_id, static_cast<int>(i / 10));
        EXPECT_GE(d[i].score, 0.7);
        EXPECT_LE(d[i].score, 1.0);
    }
}

TEST(SimulateDetections, SeededReplay) {
    const auto gt = ten_boxes();
    const auto d = synth::simulate_detections(gt, 1, 0.2, 0.05, 7);
    // Replay: one drop draw per box; a kept box consumes four jitter draws and a score draw.
    std::mt19937_64 engine(7);
    auto next = [&] { return static_cast<double>(engine() >> 11) * 0x1.0p-53; };
    std::size_t expected = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (next() < 0.2) continue;
        const double w = gt[i].box.x2 - gt[i].box.x1;
        const double x1 = gt[i].box.x1 + (-0.05 + 0.1 * next()) * w;
        for (int k = 0; k < 3; ++k) next();
        const double score = 0.7 + 0.3 * next();
        ASSERT_LT(expected, d.size());
        EXPECT_NEAR(d[expected].box.x1, std::clamp(x1, 0.0, 1.0), 1e-15);
        EXPECT_DOUBLE_EQ(d[expected].score, score);
        ++expected;
    }
    EXPECT_EQ(d.size(), expected);
    EXPECT_LT(d.size(), 10u);  // this seed drops at least one box
}

// Fused boxes for an integration scene, all trusted.
namespace {

FusedBox trusted(const BoxExtent& b, double score = 0.9) {
    FusedBox f;
    f.box = b;
    f.score = score;
    f.raw_score = score;
    return f;
}

SegmentationResult segment(const BinaryMap& mask) {
    const GrayMap d = raster::distance_transform(mask);
    return segmentation::extract_centers(segmentation::watershed_split(mask), d);
}

}  // namespace

TEST(FilterBoxes, ThresholdIsInclusive) {
    const std::vector<FusedBox> boxes{trusted({0, 0, 0.1, 0.1}, 0.85), trusted({0, 0, 0.1, 0.1}, 0.79),
                                      trusted({0, 0, 0.1, 0.1}, 0.92), trusted({0, 0, 0.1, 0.1}, 0.80)};
    const auto kept = integrate::filter_boxes(boxes, 0.8);
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_DOUBLE_EQ(kept[0].score, 0.85);
    EXPECT_DOUBLE_EQ(kept[1].score, 0.92);
    EXPECT_DOUBLE_EQ(kept[2].score, 0.80);
    EXPECT_TRUE(integrate::filter_boxes({}, 0.8).empty());
}

TEST(FilterBoxes, IdempotentAndMonotone) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<FusedBox> boxes;
    for (int i = 0; i < 50; ++i) boxes.push_back(trusted({0, 0, 0.1, 0.1}, u(rng)));
    std::size_t prev = boxes.size() + 1;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
        const auto once = integrate::filter_boxes(boxes, t);
        EXPECT_EQ(integrate::filter_boxes(once, t).size(), once.size());
        EXPECT_LE(once.size(), prev);
        prev = once.size();
    }
}

TEST(CrownSize, MeanOfContourRects) {
    // Rect blobs of 10x20 and 20x10 pixels, each inside its own box.
    BinaryMap m(100, 100);
    for (int y = 10; y < 30; ++y)
        for (int x = 10; x < 20; ++x) m(x, y) = 1;
    for (int y = 60; y < 70; ++y)
        for (int x = 50; x < 70; ++x) m(x, y) = 1;
    const auto seg = segment(m);
    const std::vector<FusedBox> boxes{trusted({0.08, 0.08, 0.22, 0.32}), trusted({0.48, 0.58, 0.72, 0.72})};
    const auto avg = integrate::average_crown_size(boxes, seg, 0.0);
    EXPECT_DOUBLE_EQ(avg.w_bar, 15.0);
    EXPECT_DOUBLE_EQ(avg.h_bar, 15.0);
    EXPECT_EQ(avg.sample_count, 2);
}

TEST(CrownSize, SingleBlob) {
    BinaryMap m(40, 40);
    for (int y = 10; y < 18; ++y)
        for (int x = 10; x < 18; ++x) m(x, y) = 1;
    const auto avg = integrate::average_crown_size(std::vector<FusedBox>{trusted({0.2, 0.2, 0.5, 0.5})}, segment(m), 0.1);
    EXPECT_DOUBLE_EQ(avg.w_bar, 8.0);
    EXPECT_DOUBLE_EQ(avg.h_bar, 8.0);
}

TEST(CrownSize, NoBoxes) {
    try {
        integrate::average_crown_size({}, segment(BinaryMap(10, 10)), 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no crown statistics");
    }
}

namespace {

struct Scene {
    BinaryMap c;
    GrayMap g;
};

// C and G of a synthetic scene with the given disks.
Scene maps_of(int w, int h, const std::vector<fixture::Disk>& disks) {
    const BinaryMap c = fixture::disks(w, h, disks);
    GrayMap g(w, h);
    for (std::size_t i = 0; i < c.size(); ++i) g.values()[i] = c.values()[i] ? 0.8 : 0.1;
    return {c, g};
}

}  // namespace

TEST(ValidateCenters, RulesInOrder) {
    const auto maps = maps_of(200, 100, {{150, 50, 9}});
    const integrate::AvgCrownSize avg{19.0, 19.0, 1};
    integrate::IntegrationConfig cfg;
    const double tau_d = cfg.neighbour_radius(avg.w_bar, avg.h_bar);
    ASSERT_DOUBLE_EQ(tau_d, 38.0);
    const std::vector<TreeCenter> centers{
        {15, 15, 0, CenterSource::Traditional},             // inside the box
        {60, 60, 0, CenterSource::Traditional},             // two neighbours at tau_d - 1
        {60 + 37, 60, 0, CenterSource::Traditional},
        {60, 60 - 37, 0, CenterSource::Traditional},
        {150, 50, 0, CenterSource::Traditional},            // lone, on a crown of the mean size
        {5, 95, 0, CenterSource::Traditional},              // lone, no crown
    };
    const std::vector<FusedBox> boxes{trusted({0.05, 0.1, 0.1, 0.2})};
    const auto r = integrate::validate_centers(centers, boxes, avg, maps.c, maps.g, cfg);
    ASSERT_EQ(r.centers.size() + r.rejected.size(), centers.size());
    std::map<std::pair<int, int>, CenterSource> got;
    for (const auto& c : r.centers) got[{c.x, c.y}] = c.source;
    EXPECT_EQ((got[{15, 15}]), CenterSource::ValidatedBbox);
    EXPECT_EQ((got[{60, 60}]), CenterSource::ValidatedProximity);
    EXPECT_EQ((got[{150, 50}]), CenterSource::ValidatedLocal);
    // The two outer neighbours see only one other centre each and have no crown under them.
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected.back().center.x, 5);
    EXPECT_EQ(r.rejected.back().reason, "no support");
}

TEST(ValidateCenters, BoxDecisionIgnoresOtherThresholds) {
    const auto maps = maps_of(100, 100, {});
    const std::vector<TreeCenter> centers{{20, 20, 0, CenterSource::Traditional}};
    const std::vector<FusedBox> boxes{trusted({0.15, 0.15, 0.25, 0.25})};
    for (int nn : {1, 5})
        for (double tc : {0.1, 1.0}) {
            integrate::IntegrationConfig cfg;
            cfg.n_neighbors = nn;
            cfg.tau_c = tc;
            cfg.tau_d = 3.0;
            const auto r = integrate::validate_centers(centers, boxes, {10, 10, 1}, maps.c, maps.g, cfg);
            ASSERT_EQ(r.centers.size(), 1u);
            EXPECT_EQ(r.centers[0].source, CenterSource::ValidatedBbox);
        }
}

TEST(ValidateCenters, OutOfBounds) {
    const auto maps = maps_of(50, 50, {});
    const std::vector<TreeCenter> centers{{70, 70, 0, CenterSource::Traditional}};
    const auto r = integrate::validate_centers(centers, {}, {10, 10, 1}, maps.c, maps.g, {});
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0].reason, "out of bounds");
}

TEST(ValidateCenters, PartitionsInput) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<fixture::Disk> disks;
        for (int i = 0; i < 6; ++i)
            disks.push_back({10.0 + static_cast<double>(rng() % 100), 10.0 + static_cast<double>(rng() % 100), 5.0 + static_cast<double>(rng() % 6)});
        const auto maps = maps_of(120, 120, disks);
        std::vector<TreeCenter> centers;
        for (int i = 0; i < 8; ++i)
            centers.push_back({static_cast<int>(rng() % 120), static_cast<int>(rng() % 120), 0, CenterSource::Traditional});
        const std::vector<FusedBox> boxes{trusted({0.0, 0.0, 0.3, 0.3})};
        const auto r = integrate::validate_centers(centers, boxes, {12, 12, 1}, maps.c, maps.g, {});
        std::multiset<std::pair<int, int>> in, out;
        for (const auto& c : centers) in.insert({c.x, c.y});
        for (const auto& c : r.centers) out.insert({c.x, c.y});
        for (const auto& c : r.rejected) out.insert({c.center.x, c.center.y});
        EXPECT_EQ(in, out);
    }
}

TEST(Refine, DropSplitAndKeep) {
    // Segment A: dumbbell holding two reliable centres. B: one centre. C: none.
    const BinaryMap dumbbell = fixture::disks(120, 60, {{20, 30, 7}, {32, 30, 7}});
    BinaryMap m = dumbbell;
    const BinaryMap others = fixture::disks(120, 60, {{70, 30, 8}, {100, 30, 6}});
    for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] |= others.values()[i];
    // Merge the dumbbell into one label so that refinement has something to split.
    SegmentationResult seg;
    LabelMap labels = raster::connected_components(m);
    seg.labels = labels;
    seg.segments = segmentation::describe_segments(labels, raster::distance_transform(m));
    ASSERT_EQ(seg.segments.size(), 3u);
    integrate::ReliableSet reliable;
    reliable.centers = {{20, 30, labels(20, 30), CenterSource::ValidatedBbox},
                        {32, 30, labels(32, 30), CenterSource::ValidatedBbox},
                        {70, 30, labels(70, 30), CenterSource::ValidatedLocal}};
    const auto r = integrate::refine_segmentation(reliable, seg, 1);
    EXPECT_EQ(r.dropped_segments, 1);
    const auto& out = r.segmentation;
    EXPECT_EQ(raster::label_count(out.labels), 3);
    EXPECT_NE(out.labels(20, 30), out.labels(32, 30));
    EXPECT_EQ(out.labels(100, 30), 0);
    // The single-centre segment is untouched.
    for (int y = 0; y < 60; ++y)
        for (int x = 55; x < 90; ++x) EXPECT_EQ(out.labels(x, y) != 0, others(x, y) == 1);
    ASSERT_EQ(out.centers.size(), 3u);
    for (const auto& c : out.centers) EXPECT_EQ(c.segment_label, out.labels(c.x, c.y));
}

TEST(Integrate, FallbackCrownSizeAndFusedCentres) {
    const auto maps = maps_of(100, 100, {{50, 50, 8}});
    const auto seg = segment(BinaryMap(100, 100));
    const std::vector<FusedBox> boxes{trusted({0.1, 0.1, 0.2, 0.2}), trusted({0.4, 0.4, 0.6, 0.6}, 0.5)};
    const auto r = integrate::integrate(boxes, seg, maps.c, maps.g, {});
    EXPECT_TRUE(r.crown_size_fallback);
    EXPECT_DOUBLE_EQ(r.crown_size.w_bar, 20.0);
    ASSERT_EQ(r.accepted_boxes.size(), 1u);
    ASSERT_EQ(r.centers.size(), 1u);
    EXPECT_EQ(r.centers[0].source, CenterSource::FusedBox);
    EXPECT_EQ(r.centers[0].x, 15);
    EXPECT_EQ(r.centers[0].y, 15);
}

TEST(Integrate, DimensionMismatch) {
    const auto maps = maps_of(50, 50, {});
    EXPECT_THROW(integrate::integrate({}, segment(BinaryMap(40, 50)), maps.c, maps.g, {}), Error);
}
