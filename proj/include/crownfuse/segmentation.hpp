// Crown segments and trunk positions from the candidate mask.
#pragma once

#include "crownfuse/raster.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace crownfuse {

/// Which rule produced (or confirmed) a tree centre.
enum class CenterSource {
    Traditional,          // segmentation pipeline, not yet validated
    ValidatedBbox,        // lies inside an accepted detector box
    ValidatedProximity,   // has enough nearby centres
    ValidatedLocal,       // local probability-map contour matches the mean crown size
    FusedBox,             // centre of an accepted detector box with no traditional centre in it
};

std::string_view to_string(CenterSource source);
std::optional<CenterSource> parse_center_source(std::string_view text);

struct TreeCenter {
    int x = 0;
    int y = 0;
    int segment_label = 0;
    CenterSource source = CenterSource::Traditional;
    bool operator==(const TreeCenter&) const = default;
};

struct Segment {
    int label = 0;
    int area = 0;
    Contour contour;
    std::vector<Point> maxima;
};

struct SegmentationResult {
    LabelMap labels;
    std::vector<Segment> segments;  // segments[i].label == i + 1
    std::vector<TreeCenter> centers;
};

namespace segmentation {

/// Marker-controlled watershed on the negated distance transform of the mask.
/// Markers are the regional maxima (>= 1) of the distance map; flooding uses
/// a priority queue keyed on distance with insertion order breaking ties.
/// Labels are renumbered in raster order of each region's first pixel.
LabelMap watershed_split(const BinaryMap& mask);

/// Area, outer contour and distance maxima of each labelled region.
/// `distance` must be the distance transform of labels > 0.
std::vector<Segment> describe_segments(const LabelMap& labels, const GrayMap& distance);

/// One trunk position per small segment (area < th_area, maxima averaged) and
/// one per single-linkage cluster of maxima closer than th_dist otherwise.
SegmentationResult extract_centers(const LabelMap& labels, const GrayMap& distance, int th_area = 64,
                                   double th_dist = 8.0);

/// labels > 0 as a mask.
BinaryMap foreground(const LabelMap& labels);

/// Foreground with inter-segment boundaries cut, so that distinct segments are
/// not 8-connected: a pixel is cleared when an 8-neighbour carries a smaller non-zero label.
BinaryMap separated_foreground(const LabelMap& labels);

/// Renumber labels 1..L in raster order of each region's first pixel.
LabelMap canonical_labels(const LabelMap& labels);

}  // namespace segmentation
}  // namespace crownfuse
