#include "crownfuse/raster.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crownfuse;

namespace {

GrayMap levels(std::initializer_list<double> values) {
    GrayMap m(static_cast<int>(values.size()), 1);
    int i = 0;
    for (double v : values) m(i++, 0) = v;
    return m;
}

BinaryMap rows(const std::vector<std::string>& lines) {
    BinaryMap m(static_cast<int>(lines[0].size()), static_cast<int>(lines.size()));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) m(x, y) = lines[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#';
    return m;
}

}  // namespace

TEST(Otsu, TwoLevelsSplitJustAboveLowerLevel) {
    GrayMap m(20, 1);
    for (int x = 0; x < 20; ++x) m(x, 0) = x < 10 ? 50 : 200;
    EXPECT_EQ(raster::otsu_threshold(m), 51);
    EXPECT_EQ(oracle::otsu(m), 51);
}

TEST(Otsu, AlternatingExtremes) {
    GrayMap m(16, 1);
    for (int x = 0; x < 16; ++x) m(x, 0) = x % 2 ? 255 : 0;
    EXPECT_EQ(raster::otsu_threshold(m), 1);
}

TEST(Otsu, ConstantMapIsDegenerate) {
    GrayMap m(8, 8, 128.0);
    try {
        raster::otsu_threshold(m);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "degenerate histogram");
    }
}

TEST(Otsu, MatchesExhaustiveOracleOnRandomHistograms) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 300);
        const int spread = 2 + static_cast<int>(rng() % 255);
        GrayMap m(n, 1);
        for (int x = 0; x < n; ++x) m(x, 0) = static_cast<double>(rng() % static_cast<unsigned>(spread));
        const int expect = oracle::otsu(m);
        if (expect < 0) {
            EXPECT_THROW(raster::otsu_threshold(m), Error);
            continue;
        }
        EXPECT_EQ(raster::otsu_threshold(m), expect) << "trial " << trial;
    }
}

TEST(Otsu, TiesResolveToSmallestThreshold) {
    // Every t in 11..90 gives the same split of {10, 90}.
    EXPECT_EQ(raster::otsu_threshold(levels({10, 10, 90, 90})), 11);
}

TEST(Disk, RadiusOneIsFullSquare) {
    EXPECT_EQ(raster::disk_offsets(1).size(), 9u);
    EXPECT_EQ(raster::disk_offsets(0).size(), 1u);
    EXPECT_EQ(raster::disk_offsets(2).size(), 21u);
}

TEST(Opening, IsolatedPixelRemoved) {
    BinaryMap m(7, 7);
    m(3, 3) = 1;
    EXPECT_EQ(raster::morphological_open(m, 1, 1), BinaryMap(7, 7));
}

TEST(Opening, SolidSquareKept) {
    BinaryMap m(20, 20);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x) m(x, y) = 1;
    EXPECT_EQ(raster::morphological_open(m, 1, 1), m);
    EXPECT_EQ(oracle::open(m, 1, 1), m);
}

TEST(Opening, EmptyStaysEmpty) { EXPECT_EQ(raster::morphological_open(BinaryMap(9, 4), 1, 2), BinaryMap(9, 4)); }

TEST(Opening, MatchesSetArithmeticAndIsIdempotent) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 4 + static_cast<int>(rng() % 30), h = 4 + static_cast<int>(rng() % 30);
        const BinaryMap m = fixture::blob_mask(rng, w, h);
        for (int radius : {1, 2}) {
            for (int iterations : {1, 2}) {
                const BinaryMap once = raster::morphological_open(m, radius, iterations);
                EXPECT_EQ(once, oracle::open(m, radius, iterations)) << trial << " r" << radius << " k" << iterations;
                EXPECT_EQ(raster::morphological_open(once, radius, iterations), once);
                for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(once.values()[i], m.values()[i]);
            }
        }
    }
}

TEST(DistanceTransform, MiddleRowOfStackedMask) {
    const BinaryMap m = rows({".###.", ".###.", ".###.", ".###.", ".###."});
    const GrayMap d = raster::distance_transform(m);
    EXPECT_EQ(d(0, 2), 0);
    EXPECT_EQ(d(1, 2), 1);
    EXPECT_EQ(d(2, 2), 2);
    EXPECT_EQ(d(3, 2), 1);
    EXPECT_EQ(d(4, 2), 0);
}

TEST(DistanceTransform, SingleRowSeesBorderAsBackground) {
    const GrayMap d = raster::distance_transform(rows({".###."}));
    EXPECT_EQ(d(2, 0), 1);
}

TEST(DistanceTransform, AllBackgroundIsZero) {
    EXPECT_EQ(raster::distance_transform(BinaryMap(6, 3)), GrayMap(6, 3));
}

TEST(DistanceTransform, FullSquareCentreIsThree) {
    EXPECT_EQ(raster::distance_transform(BinaryMap(5, 5, 1))(2, 2), 3);
}

TEST(DistanceTransform, MatchesAllPairsOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
        const BinaryMap m = trial % 2 ? fixture::blob_mask(rng, w, h) : fixture::random_mask(rng, w, h, 0.8);
        EXPECT_EQ(raster::distance_transform(m), oracle::distance(m)) << "trial " << trial;
    }
}

TEST(ConnectedComponents, TwoBlocks) {
    const auto labels = raster::connected_components(rows({"##....", "##....", "....##", "....##"}));
    EXPECT_EQ(raster::label_count(labels), 2);
    EXPECT_EQ(labels(0, 0), 1);
    EXPECT_EQ(labels(5, 3), 2);
}

TEST(ConnectedComponents, DiagonalTouchIsOneComponent) {
    EXPECT_EQ(raster::label_count(raster::connected_components(rows({"#..", ".#.", "..#"}))), 1);
}

TEST(ConnectedComponents, Empty) { EXPECT_EQ(raster::label_count(raster::connected_components(BinaryMap(3, 3))), 0); }

TEST(Contours, BlockBoundingRect) {
    const auto contours = raster::find_contours(rows({"....", ".##.", ".##.", "...."}));
    ASSERT_EQ(contours.size(), 1u);
    EXPECT_EQ(contours[0].bounding_rect, (Rect{1, 1, 2, 2}));
    EXPECT_EQ(contours[0].points.size(), 4u);
}

TEST(Contours, EmptyAndTwoBlocksInRasterOrder) {
    EXPECT_TRUE(raster::find_contours(BinaryMap(5, 5)).empty());
    const auto contours = raster::find_contours(rows({"....##", "##..##", "##....", "......"}));
    ASSERT_EQ(contours.size(), 2u);
    EXPECT_EQ(contours[0].bounding_rect, (Rect{4, 0, 2, 2}));
    EXPECT_EQ(contours[1].bounding_rect, (Rect{0, 1, 2, 2}));
}

TEST(Contours, RingReportsOuterBorderOnly) {
    const auto contours = raster::find_contours(rows({"#####", "#...#", "#...#", "#####"}));
    ASSERT_EQ(contours.size(), 1u);
    EXPECT_EQ(contours[0].bounding_rect, (Rect{0, 0, 5, 4}));
}

TEST(Contours, RectsMatchComponentExtents) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 3 + static_cast<int>(rng() % 40), h = 3 + static_cast<int>(rng() % 40);
        const BinaryMap m = fixture::random_mask(rng, w, h, 0.35);
        const LabelMap labels = raster::connected_components(m);
        std::vector<Rect> extent(static_cast<std::size_t>(raster::label_count(labels)));
        std::vector<std::vector<Point>> pts(extent.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (labels(x, y)) pts[static_cast<std::size_t>(labels(x, y) - 1)].push_back({x, y});
        const auto contours = raster::find_contours(m);
        ASSERT_EQ(contours.size(), extent.size());
        for (std::size_t i = 0; i < contours.size(); ++i)
            EXPECT_EQ(contours[i].bounding_rect, raster::bounding_rect(pts[i])) << "trial " << trial << " #" << i;
    }
}

TEST(LocalMaxima, UniquePeak) {
    GrayMap m(3, 3);
    const double v[3][3] = {{1, 2, 1}, {2, 5, 2}, {1, 2, 1}};
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) m(x, y) = v[y][x];
    EXPECT_EQ(raster::local_maxima(m, 0.0), (std::vector<Point>{{1, 1}}));
}

TEST(LocalMaxima, ConstantMapHasNone) { EXPECT_TRUE(raster::local_maxima(GrayMap(4, 4, 2.0), 0.0).empty()); }

TEST(LocalMaxima, TwoPeaksAcrossValley) {
    const GrayMap m = levels({1, 5, 1, 1, 5, 1});
    EXPECT_EQ(raster::local_maxima(m, 0.0), (std::vector<Point>{{1, 0}, {4, 0}}));
}

TEST(LocalMaxima, InvariantUnderConstantShift) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        GrayMap m(12, 9);
        for (auto& v : m.values()) v = static_cast<double>(rng() % 6);
        GrayMap shifted = m;
        for (auto& v : shifted.values()) v += 7.0;
        EXPECT_EQ(raster::local_maxima(m, 2.0), raster::local_maxima(shifted, 9.0));
    }
}

TEST(RegionalMaxima, PlateauCountsOnce) {
    const auto plateaus = raster::regional_maxima(levels({1, 3, 3, 3, 1, 2, 0}), 0.0);
    ASSERT_EQ(plateaus.size(), 2u);
    EXPECT_EQ(plateaus[0].pixels.size(), 3u);
    EXPECT_EQ(plateaus[0].representative(), (Point{2, 0}));
    EXPECT_EQ(plateaus[1].pixels, (std::vector<Point>{{5, 0}}));
}

TEST(RegionalMaxima, ShoulderIsNotAMaximum) {
    // The 3-run touches a higher pixel, so it is not a regional maximum.
    EXPECT_EQ(raster::regional_maxima(levels({3, 3, 4, 1}), 0.0).size(), 1u);
}

TEST(ClampRect, IntersectsRaster) {
    EXPECT_EQ(raster::clamp_rect({-3, 2, 10, 10}, 5, 6), (Rect{0, 2, 5, 4}));
    EXPECT_EQ(raster::clamp_rect({9, 9, 3, 3}, 5, 5).width, 0);
}
