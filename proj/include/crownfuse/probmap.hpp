// Joint crown-probability map J = w1*C + w2*G and the crown-candidate mask.
#pragma once

#include "crownfuse/raster.hpp"

namespace crownfuse::probmap {

struct ProbabilityMap {
    GrayMap values;  // unit range
    double w1 = 0.5;
    double w2 = 0.5;
};

/// Elementwise w1*C + w2*G. Weights must be non-negative and sum to 1.
ProbabilityMap joint_probability_map(const BinaryMap& c, const GrayMap& g, double w1 = 0.5, double w2 = 0.5);

/// J scaled to [0,255] with round-half-up.
GrayMap to_u8_levels(const GrayMap& unit);

/// Pixels of the upper Otsu class of the 0-255 levels, i.e. level >= t.
/// Propagates Error("degenerate histogram") for a constant map.
BinaryMap otsu_foreground(const GrayMap& unit);

/// Otsu foreground followed by a disk opening.
BinaryMap candidate_mask(const ProbabilityMap& j, int open_radius = 1, int open_iterations = 2);

}  // namespace crownfuse::probmap
