// The colour/texture/watershed crown detector, end to end for one image.
#pragma once

#include "crownfuse/features.hpp"
#include "crownfuse/probmap.hpp"
#include "crownfuse/segmentation.hpp"

namespace crownfuse::traditional {

struct Config {
    features::GreenDominanceSpec green;
    features::GaborBankSpec gabor = features::GaborBankSpec::defaults();
    double w1 = 0.5;
    double w2 = 0.5;
    int open_radius = 1;
    int open_iterations = 2;
    int th_area = 64;
    double th_dist = 8.0;
    unsigned workers = 0;
};

/// Every intermediate product, kept for export and for local validation.
struct Result {
    BinaryMap color;          // C
    GrayMap texture;          // G
    probmap::ProbabilityMap joint;
    BinaryMap mask;           // after Otsu and opening
    GrayMap distance;
    SegmentationResult segmentation;
};

/// Feature maps C and G only.
struct FeatureMaps {
    BinaryMap color;
    GrayMap texture;
};
FeatureMaps compute_features(const RgbRaster& image, const Config& config);

Result detect(const RgbRaster& image, const Config& config);

}  // namespace crownfuse::traditional
