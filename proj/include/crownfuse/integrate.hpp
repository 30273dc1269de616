// Rule-based integration of fused detector boxes with the segmentation-based
// crown centres: box filtering, mean crown size, centre validation and
// segment refinement.
#pragma once

#include "crownfuse/raster.hpp"
#include "crownfuse/segmentation.hpp"
#include "crownfuse/wbf.hpp"

#include <span>
#include <string>
#include <vector>

namespace crownfuse::integrate {

struct IntegrationConfig {
    double tau_a = 0.8;       // minimum fused score
    double expansion = 0.10;  // box growth per side, fraction of box size
    int n_neighbors = 2;      // N_n
    double tau_d = 0.0;       // neighbour radius in px; <= 0 means 2 * max(w_bar, h_bar)
    double tau_c = 0.5;       // relative size tolerance of a local contour
    double local_crop = 1.5;  // local window in multiples of (w_bar, h_bar)
    double w1 = 0.5;          // weights of the local joint map
    double w2 = 0.5;
    int refine_open_radius = 1;
    double fallback_w = 20.0;  // crown size used when no box yields a contour
    double fallback_h = 20.0;

    void validate() const;
    double neighbour_radius(double w_bar, double h_bar) const;
};

struct AvgCrownSize {
    double w_bar = 0.0;
    double h_bar = 0.0;
    int sample_count = 0;
};

struct Rejection {
    TreeCenter center;
    std::string reason;
};

struct ReliableSet {
    std::vector<TreeCenter> centers;  // source is one of the validated-* tags
    std::vector<Rejection> rejected;
};

/// Pixel rectangle of a normalized box grown by `expansion` of its size on each side (not clamped).
Rect expanded_pixel_rect(const BoxExtent& box, double expansion, int width, int height);

/// Boxes with score >= tau_a, order preserved.
std::vector<FusedBox> filter_boxes(std::span<const FusedBox> boxes, double tau_a);

/// Mean bounding-rectangle size of the segment contours found in each
/// expanded box crop of the (segment-separated) segmentation mask.
/// Throws Error("no crown statistics") when no contour is found.
AvgCrownSize average_crown_size(std::span<const FusedBox> boxes, const SegmentationResult& seg, double expansion);

/// Applies, per centre and in this order: containment in an expanded box,
/// at least N_n other input centres within tau_d, and a contour of the local
/// joint probability map within tau_c of (w_bar, h_bar). Centres failing all
/// three are rejected.
ReliableSet validate_centers(std::span<const TreeCenter> centers, std::span<const FusedBox> boxes,
                             const AvgCrownSize& avg, const BinaryMap& c, const GrayMap& g,
                             const IntegrationConfig& cfg);

struct Refinement {
    SegmentationResult segmentation;  // centres = the reliable centres, relabelled
    int dropped_segments = 0;
};

/// Drops segments holding no reliable centre; segments holding two or more are
/// opened with a disk of `open_radius` and re-split by watershed. Labels,
/// segments and centres are renumbered consistently.
Refinement refine_segmentation(const ReliableSet& reliable, const SegmentationResult& seg, int open_radius = 1);

struct IntegratedResult {
    std::vector<TreeCenter> centers;  // reliable centres, then centres of accepted boxes holding none
    std::vector<FusedBox> accepted_boxes;
    AvgCrownSize crown_size;
    bool crown_size_fallback = false;
    ReliableSet reliable;
    Refinement refinement;
};

/// The four steps end to end for one image.
IntegratedResult integrate(std::span<const FusedBox> fused, const SegmentationResult& seg, const BinaryMap& c,
                           const GrayMap& g, const IntegrationConfig& cfg);

}  // namespace crownfuse::integrate
