#include "crownfuse/probmap.hpp"

#include <algorithm>
#include <cmath>

namespace crownfuse::probmap {

namespace {
constexpr double kWeightTolerance = 1e-9;
}

ProbabilityMap joint_probability_map(const BinaryMap& c, const GrayMap& g, double w1, double w2) {
    if (!c.same_shape(g)) throw Error("joint_probability_map: C and G dimensions differ");
    if (!(w1 >= 0.0 && w2 >= 0.0) || std::abs(w1 + w2 - 1.0) > kWeightTolerance)
        throw Error("joint_probability_map: weights must be non-negative and sum to 1");
    ProbabilityMap j{GrayMap(c.width(), c.height()), w1, w2};
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double v = w1 * c.values()[i] + w2 * g.values()[i];
        j.values.values()[i] = std::clamp(v, 0.0, 1.0);
    }
    return j;
}

GrayMap to_u8_levels(const GrayMap& unit) {
    GrayMap out(unit.width(), unit.height());
    for (std::size_t i = 0; i < unit.size(); ++i)
        out.values()[i] = std::floor(std::clamp(unit.values()[i], 0.0, 1.0) * 255.0 + 0.5);
    return out;
}

BinaryMap otsu_foreground(const GrayMap& unit) {
    const GrayMap levels = to_u8_levels(unit);
    const int t = raster::otsu_threshold(levels);
    BinaryMap mask(unit.width(), unit.height());
    for (std::size_t i = 0; i < levels.size(); ++i) mask.values()[i] = levels.values()[i] >= t ? 1 : 0;
    return mask;
}

BinaryMap candidate_mask(const ProbabilityMap& j, int open_radius, int open_iterations) {
    return raster::morphological_open(otsu_foreground(j.values), open_radius, open_iterations);
}

}  // namespace crownfuse::probmap
