#include "crownfuse/traditional.hpp"

namespace crownfuse::traditional {

FeatureMaps compute_features(const RgbRaster& image, const Config& config) {
    return {features::green_dominance_map(image, config.green),
            features::gabor_feature_map(image, config.gabor, config.workers)};
}

Result detect(const RgbRaster& image, const Config& config) {
    auto [color, texture] = compute_features(image, config);
    Result r;
    r.joint = probmap::joint_probability_map(color, texture, config.w1, config.w2);
    r.color = std::move(color);
    r.texture = std::move(texture);
    r.mask = probmap::candidate_mask(r.joint, config.open_radius, config.open_iterations);
    r.distance = raster::distance_transform(r.mask);
    const LabelMap labels = segmentation::watershed_split(r.mask);
    r.segmentation = segmentation::extract_centers(labels, r.distance, config.th_area, config.th_dist);
    return r;
}

}  // namespace crownfuse::traditional
