// Per-pixel crown features: the green colour-invariant mask C(x,y) and the
// Gabor texture map G(x,y).
#pragma once

#include "crownfuse/raster.hpp"

#include <vector>

namespace crownfuse::features {

struct HsvPixel {
    double hue = 0.0;         // degrees in [0,360); 0 when saturation is 0
    double saturation = 0.0;  // [0,1]
    double value = 0.0;       // [0,1]
};

using HsvPlane = Plane<HsvPixel>;

/// Hue window plus saturation/value floors that define "green is dominant".
struct GreenDominanceSpec {
    double hue_min = 60.0;
    double hue_max = 180.0;
    double sat_min = 0.2;
    double val_min = 0.2;

    void validate() const;
};

/// Even-symmetric Gabor filter bank.
///
/// Radial frequencies are expressed in cycles per `reference_width` pixels so
/// that the bank is tied to ground resolution rather than to raster size.
struct GaborBankSpec {
    std::vector<double> orientations;        // degrees
    std::vector<double> radial_frequencies;  // cycles per reference_width, strictly increasing
    double bandwidth = 1.0;                  // octaves
    double kernel_truncation = 3.0;          // half-size in multiples of sigma
    double reference_width = 256.0;          // pixels

    /// 4 orientations x {sqrt(2) * 2^k, k = 2..5} cycles per 256 px, 1 octave, 3 sigma.
    static GaborBankSpec defaults();
    void validate() const;
};

struct GaborKernel {
    double orientation = 0.0;  // degrees
    double frequency = 0.0;    // cycles per pixel
    double sigma = 0.0;        // pixels
    GrayMap taps;              // (2*half+1)^2, centre at (half, half)

    int half() const { return taps.width() / 2; }
};

HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
HsvPlane rgb_to_hsv(const RgbRaster& image);

BinaryMap green_dominance_map(const RgbRaster& image, const GreenDominanceSpec& spec);

/// Gaussian envelope sigma (pixels) for a frequency in cycles/pixel and a bandwidth in octaves.
double gabor_sigma(double cycles_per_pixel, double bandwidth_octaves);

/// One kernel per (orientation, frequency), orientation-major. Each kernel is
/// truncated, made zero-mean and scaled to unit L1 norm.
/// Throws Error("frequency too high for raster") when some sigma falls below one pixel.
std::vector<GaborKernel> gabor_bank(const GaborBankSpec& spec);

/// Mean |response| over every kernel and colour channel (reflect-padded
/// borders), min-max normalized to [0,1]. A response that is flat across the
/// image yields an all-zero map. `workers` = 0 picks the hardware concurrency.
/// Throws Error("image too small") when the raster is smaller than the largest kernel.
GrayMap gabor_feature_map(const RgbRaster& image, const GaborBankSpec& spec, unsigned workers = 0);

/// Un-normalized mean |response| of a single plane under the given kernels.
GrayMap gabor_energy(const GrayMap& plane, const std::vector<GaborKernel>& kernels, unsigned workers = 0);

}  // namespace crownfuse::features
