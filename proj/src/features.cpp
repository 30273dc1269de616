#include "crownfuse/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <thread>

namespace crownfuse::features {

namespace {

constexpr double kFlatResponse = 1e-9;

// fftw planning is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// FFTW's estimated plans run fastest on sizes dominated by a power of two;
// a slightly larger 2^a * {1,3,5,7,9} usually beats the tightest 7-smooth size.
int next_fast_size(int n) {
    int best = 0;
    for (int odd : {1, 3, 5, 7, 9}) {
        int m = odd;
        while (m < n) m *= 2;
        if (best == 0 || m < best) best = m;
    }
    return best;
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

unsigned resolve_workers(unsigned workers) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    return workers;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    workers = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

using Spectrum = std::vector<std::complex<double>>;

// Kernel spectra depend only on the transform size and the taps, so they are
// shared across calls (every scene of a batch usually has the same size).
class KernelSpectrumCache {
public:
    std::shared_ptr<const Spectrum> find(int nx, int ny, const GrayMap& taps) {
        std::lock_guard lock(mutex_);
        for (const auto& e : entries_)
            if (e.nx == nx && e.ny == ny && e.taps == taps) return e.spectrum;
        return nullptr;
    }
    void store(int nx, int ny, const GrayMap& taps, std::shared_ptr<const Spectrum> spectrum) {
        std::lock_guard lock(mutex_);
        if (entries_.size() >= 64) entries_.erase(entries_.begin());
        entries_.push_back({nx, ny, taps, std::move(spectrum)});
    }

private:
    struct Entry {
        int nx;
        int ny;
        GrayMap taps;
        std::shared_ptr<const Spectrum> spectrum;
    };
    std::mutex mutex_;
    std::vector<Entry> entries_;
};

KernelSpectrumCache& kernel_cache() {
    static KernelSpectrumCache cache;
    return cache;
}

// Frequency-domain convolution of several planes with several kernels.
// Planes are reflect-padded by the largest kernel half-size, so the circular
// convolution is exact over the original raster.
class SpectralConvolver {
public:
    SpectralConvolver(int width, int height, const std::vector<GaborKernel>& kernels)
        : width_(width), height_(height) {
        for (const auto& k : kernels) pad_ = std::max(pad_, k.half());
        nx_ = next_fast_size(width + 2 * pad_);
        ny_ = next_fast_size(height + 2 * pad_);
        spectrum_size_ = static_cast<std::size_t>(ny_) * static_cast<std::size_t>(nx_ / 2 + 1);

        auto real = fftw_buffer<double>(real_size());
        auto cplx = fftw_buffer<fftw_complex>(spectrum_size_);
        {
            std::lock_guard lock(planner_mutex());
            forward_.reset(fftw_plan_dft_r2c_2d(ny_, nx_, real.get(), cplx.get(), FFTW_ESTIMATE));
            inverse_.reset(fftw_plan_dft_c2r_2d(ny_, nx_, cplx.get(), real.get(), FFTW_ESTIMATE));
        }
        if (!forward_ || !inverse_) throw Error("fftw planning failed");

        kernel_spectra_.reserve(kernels.size());
        for (const auto& k : kernels) {
            auto cached = kernel_cache().find(nx_, ny_, k.taps);
            if (!cached) {
                std::fill_n(real.get(), real_size(), 0.0);
                const int h = k.half();
                for (int dy = -h; dy <= h; ++dy)
                    for (int dx = -h; dx <= h; ++dx) {
                        const int x = (dx + nx_) % nx_, y = (dy + ny_) % ny_;
                        real[static_cast<std::size_t>(y) * nx_ + x] = k.taps(dx + h, dy + h);
                    }
                cached = std::make_shared<const Spectrum>(transform(real.get()));
                kernel_cache().store(nx_, ny_, k.taps, cached);
            }
            kernel_spectra_.push_back(std::move(cached));
        }
    }

    Spectrum plane_spectrum(const GrayMap& plane) const {
        auto real = fftw_buffer<double>(real_size());
        const int wp = width_ + 2 * pad_, hp = height_ + 2 * pad_;
        std::vector<int> sx(static_cast<std::size_t>(wp));
        for (int x = 0; x < wp; ++x) sx[static_cast<std::size_t>(x)] = reflect101(x - pad_, width_);
        for (int y = 0; y < ny_; ++y) {
            double* row = real.get() + static_cast<std::size_t>(y) * nx_;
            if (y >= hp) {
                std::fill_n(row, nx_, 0.0);
                continue;
            }
            const double* src = &plane.values()[static_cast<std::size_t>(reflect101(y - pad_, height_)) * width_];
            for (int x = 0; x < wp; ++x) row[x] = src[sx[static_cast<std::size_t>(x)]];
            std::fill(row + wp, row + nx_, 0.0);
        }
        return transform(real.get());
    }

    /// Scratch buffers for one worker.
    struct Scratch {
        FftwBuffer<fftw_complex> cplx;
        FftwBuffer<double> real;
    };
    Scratch scratch() const { return {fftw_buffer<fftw_complex>(spectrum_size_), fftw_buffer<double>(real_size())}; }

    /// Adds |plane * kernel| to acc (raster-sized).
    void accumulate_magnitude(const Spectrum& plane_spec, std::size_t kernel, GrayMap& acc, Scratch& s) const {
        // Plain arithmetic; std::complex multiplication takes a slow NaN-aware path.
        const auto* a = reinterpret_cast<const double*>(plane_spec.data());
        const auto* b = reinterpret_cast<const double*>(kernel_spectra_[kernel]->data());
        double* prod = s.cplx.get()[0];
        for (std::size_t i = 0; i < 2 * spectrum_size_; i += 2) {
            prod[i] = a[i] * b[i] - a[i + 1] * b[i + 1];
            prod[i + 1] = a[i] * b[i + 1] + a[i + 1] * b[i];
        }
        fftw_execute_dft_c2r(inverse_.get(), s.cplx.get(), s.real.get());
        const double scale = 1.0 / (static_cast<double>(nx_) * static_cast<double>(ny_));
        for (int y = 0; y < height_; ++y) {
            const double* row = s.real.get() + static_cast<std::size_t>(y + pad_) * nx_ + pad_;
            double* out = &acc.values()[static_cast<std::size_t>(y) * width_];
            for (int x = 0; x < width_; ++x) out[x] += std::abs(row[x] * scale);
        }
    }

private:
    std::size_t real_size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }

    Spectrum transform(double* real) const {
        Spectrum out(spectrum_size_);
        fftw_execute_dft_r2c(forward_.get(), real, reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }

    int width_;
    int height_;
    int pad_ = 0;
    int nx_ = 0;
    int ny_ = 0;
    std::size_t spectrum_size_ = 0;
    Plan forward_;
    Plan inverse_;
    std::vector<std::shared_ptr<const Spectrum>> kernel_spectra_;
};

int largest_kernel(const std::vector<GaborKernel>& kernels) {
    int size = 0;
    for (const auto& k : kernels) size = std::max(size, k.taps.width());
    return size;
}

// Mean |response| across planes and kernels; per-kernel partial sums are
// reduced in a fixed order so the result does not depend on `workers`.
GrayMap mean_energy(const std::vector<const GrayMap*>& planes, const std::vector<GaborKernel>& kernels,
                    unsigned workers) {
    const int w = planes.front()->width(), h = planes.front()->height();
    const int need = largest_kernel(kernels);
    if (w < need || h < need) throw Error("image too small");

    // Each kernel only needs padding by its own half-size, so kernels sharing a
    // transform size are grouped; small kernels then run on smaller transforms.
    std::vector<std::pair<std::pair<int, int>, std::vector<GaborKernel>>> groups;
    for (const auto& k : kernels) {
        const std::pair size{next_fast_size(w + 2 * k.half()), next_fast_size(h + 2 * k.half())};
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == size; });
        if (it == groups.end()) it = groups.insert(groups.end(), {size, {}});
        it->second.push_back(k);
    }

    // Kernels run in chunks of one per worker; partial sums are added in a
    // fixed order, so any worker count gives the same bits.
    const unsigned slots = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), kernels.size()));
    std::vector<GrayMap> partial(slots, GrayMap(w, h));
    GrayMap out(w, h);
    for (const auto& [size, members] : groups) {
        const SpectralConvolver conv(w, h, members);
        std::vector<Spectrum> spectra(planes.size());
        parallel_for(planes.size(), workers, [&](std::size_t i) { spectra[i] = conv.plane_spectrum(*planes[i]); });
        std::vector<SpectralConvolver::Scratch> scratch;
        for (unsigned i = 0; i < slots; ++i) scratch.push_back(conv.scratch());
        for (std::size_t first = 0; first < members.size(); first += slots) {
            const std::size_t count = std::min<std::size_t>(slots, members.size() - first);
            parallel_for(count, workers, [&](std::size_t j) {
                std::fill(partial[j].values().begin(), partial[j].values().end(), 0.0);
                for (const auto& spec : spectra) conv.accumulate_magnitude(spec, first + j, partial[j], scratch[j]);
            });
            for (std::size_t j = 0; j < count; ++j)
                for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += partial[j].values()[i];
        }
    }
    const double n = static_cast<double>(kernels.size() * planes.size());
    for (auto& v : out.values()) v /= n;
    return out;
}

GrayMap to_plane(const Plane<std::uint8_t>& channel) {
    GrayMap out(channel.width(), channel.height());
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = channel.values()[i];
    return out;
}

}  // namespace

void GreenDominanceSpec::validate() const {
    if (!(hue_min >= 0.0 && hue_min < hue_max && hue_max < 360.0))
        throw Error("green dominance: require 0 <= hue_min < hue_max < 360");
    if (!(sat_min >= 0.0 && sat_min <= 1.0)) throw Error("green dominance: sat_min must be in [0,1]");
    if (!(val_min >= 0.0 && val_min <= 1.0)) throw Error("green dominance: val_min must be in [0,1]");
}

GaborBankSpec GaborBankSpec::defaults() {
    GaborBankSpec spec;
    spec.orientations = {0.0, 45.0, 90.0, 135.0};
    for (int k = 2; k <= 5; ++k) spec.radial_frequencies.push_back(std::numbers::sqrt2 * std::ldexp(1.0, k));
    return spec;
}

void GaborBankSpec::validate() const {
    if (orientations.empty()) throw Error("gabor bank: no orientations");
    if (radial_frequencies.empty()) throw Error("gabor bank: no radial frequencies");
    for (std::size_t i = 0; i < radial_frequencies.size(); ++i) {
        if (!(radial_frequencies[i] > 0.0)) throw Error("gabor bank: frequencies must be positive");
        if (i > 0 && !(radial_frequencies[i] > radial_frequencies[i - 1]))
            throw Error("gabor bank: frequencies must be strictly increasing");
    }
    if (!(bandwidth > 0.0)) throw Error("gabor bank: bandwidth must be positive");
    if (!(kernel_truncation > 0.0)) throw Error("gabor bank: kernel_truncation must be positive");
    if (!(reference_width > 0.0)) throw Error("gabor bank: reference_width must be positive");
}

HsvPixel rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double delta = mx - mn;
    HsvPixel px;
    px.value = mx;
    px.saturation = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) return px;
    double h;
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / delta + 2.0);
    else
        h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    px.hue = h;
    return px;
}

HsvPlane rgb_to_hsv(const RgbRaster& image) {
    HsvPlane out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            out(x, y) = rgb_to_hsv(image.red(x, y), image.green(x, y), image.blue(x, y));
    return out;
}

BinaryMap green_dominance_map(const RgbRaster& image, const GreenDominanceSpec& spec) {
    spec.validate();
    BinaryMap out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto px = rgb_to_hsv(image.red(x, y), image.green(x, y), image.blue(x, y));
            const bool green = px.hue >= spec.hue_min && px.hue <= spec.hue_max &&
                               px.saturation >= spec.sat_min && px.value >= spec.val_min;
            out(x, y) = green ? 1 : 0;
        }
    }
    return out;
}

double gabor_sigma(double cycles_per_pixel, double bandwidth_octaves) {
    const double b = std::exp2(bandwidth_octaves);
    return std::sqrt(std::numbers::ln2 / 2.0) / (std::numbers::pi * cycles_per_pixel) * (b + 1.0) / (b - 1.0);
}

std::vector<GaborKernel> gabor_bank(const GaborBankSpec& spec) {
    spec.validate();
    std::vector<GaborKernel> bank;
    for (double theta_deg : spec.orientations) {
        const double theta = theta_deg * std::numbers::pi / 180.0;
        const double c = std::cos(theta), s = std::sin(theta);
        for (double f_ref : spec.radial_frequencies) {
            const double f = f_ref / spec.reference_width;
            const double sigma = gabor_sigma(f, spec.bandwidth);
            if (sigma < 1.0) throw Error("frequency too high for raster");
            const int half = static_cast<int>(std::ceil(spec.kernel_truncation * sigma));
            const int size = 2 * half + 1;
            GaborKernel k{theta_deg, f, sigma, GrayMap(size, size)};
            double mean = 0.0;
            for (int y = -half; y <= half; ++y) {
                for (int x = -half; x <= half; ++x) {
                    const double env = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
                    const double v = env * std::cos(2.0 * std::numbers::pi * f * (x * c + y * s));
                    k.taps(x + half, y + half) = v;
                    mean += v;
                }
            }
            mean /= static_cast<double>(size) * size;
            double l1 = 0.0;
            for (auto& v : k.taps.values()) {
                v -= mean;
                l1 += std::abs(v);
            }
            for (auto& v : k.taps.values()) v /= l1;
            bank.push_back(std::move(k));
        }
    }
    return bank;
}

GrayMap gabor_energy(const GrayMap& plane, const std::vector<GaborKernel>& kernels, unsigned workers) {
    if (kernels.empty()) throw Error("gabor_energy: no kernels");
    return mean_energy({&plane}, kernels, workers);
}

GrayMap gabor_feature_map(const RgbRaster& image, const GaborBankSpec& spec, unsigned workers) {
    const auto kernels = gabor_bank(spec);
    const int need = largest_kernel(kernels);
    if (image.width() < need || image.height() < need) throw Error("image too small");
    const GrayMap r = to_plane(image.red), g = to_plane(image.green), b = to_plane(image.blue);
    GrayMap energy = mean_energy({&r, &g, &b}, kernels, workers);

    const auto [lo, hi] = std::minmax_element(energy.values().begin(), energy.values().end());
    const double min = *lo, range = *hi - *lo;
    if (range <= kFlatResponse) {
        std::fill(energy.values().begin(), energy.values().end(), 0.0);
        return energy;
    }
    for (auto& v : energy.values()) v = (v - min) / range;
    return energy;
}

}  // namespace crownfuse::features
