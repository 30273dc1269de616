// Pixel grids and the low-level image primitives used by every later stage.
//
// Conventions shared by the whole library:
//   - row-major storage, origin top-left, x = column (rightward), y = row (downward)
//   - connectivity is the 8-neighbourhood everywhere
#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crownfuse {

/// Base exception for all library failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Point {
    int x = 0;
    int y = 0;
    auto operator<=>(const Point&) const = default;
};

/// Axis-aligned pixel rectangle, (x, y) is the top-left corner.
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    bool operator==(const Rect&) const = default;
};

/// Dense single-channel pixel grid.
template <typename T>
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked(width)) * static_cast<std::size_t>(checked(height)), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool same_shape(const auto& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    bool operator==(const Plane&) const = default;

private:
    static int checked(int n) {
        if (n < 0) throw Error("negative plane dimension");
        return n;
    }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Real-valued map. Depending on the producer the values are either in [0,1]
/// ("unit") or in [0,255] ("u8-normalized").
using GrayMap = Plane<double>;
/// Mask over {0,1}.
using BinaryMap = Plane<std::uint8_t>;
/// Region labels, 0 = background, 1..L otherwise.
using LabelMap = Plane<std::int32_t>;

/// Three 8-bit planes of equal shape.
struct RgbRaster {
    Plane<std::uint8_t> red;
    Plane<std::uint8_t> green;
    Plane<std::uint8_t> blue;

    RgbRaster() = default;
    RgbRaster(int width, int height) : red(width, height), green(width, height), blue(width, height) {}

    int width() const { return red.width(); }
    int height() const { return red.height(); }
    bool empty() const { return red.empty(); }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        red(x, y) = r;
        green(x, y) = g;
        blue(x, y) = b;
    }

    bool operator==(const RgbRaster&) const = default;
};

/// Border of one 8-connected region. Consecutive points are 8-adjacent.
struct Contour {
    std::vector<Point> points;
    Rect bounding_rect;
};

/// Equal-valued 8-connected set of pixels whose outside neighbours are all strictly lower.
struct Plateau {
    std::vector<Point> pixels;  // raster order
    double value = 0.0;

    /// Pixel of the plateau closest to its centroid (raster order breaks ties).
    Point representative() const;
};

namespace raster {

/// Otsu threshold over the 256-bin histogram of a u8-normalized map.
///
/// The split at t puts values < t in the lower class and values >= t in the
/// upper class. Returns the smallest t that maximises the between-class
/// variance, so a caller keeps the upper class with `value >= t`.
/// Throws Error("degenerate histogram") when the map holds a single value.
int otsu_threshold(const GrayMap& map);

/// Integer offsets of the discrete disk of the given radius (dx^2 + dy^2 <= (r + 1/2)^2).
std::vector<Point> disk_offsets(int radius);

BinaryMap erode(const BinaryMap& mask, std::span<const Point> element);
BinaryMap dilate(const BinaryMap& mask, std::span<const Point> element);

/// Opening with a disk element. `iterations` erosions followed by as many
/// dilations, which is the single opening by the iterated (Minkowski) element.
/// Pixels outside the raster are neutral: they never erode and never dilate.
BinaryMap morphological_open(const BinaryMap& mask, int radius, int iterations);

/// City-block distance from every foreground pixel to the nearest background
/// pixel; the area outside the raster counts as background.
GrayMap distance_transform(const BinaryMap& mask);

/// 8-connected labelling, labels assigned in raster order of each component's first pixel.
LabelMap connected_components(const BinaryMap& mask);
/// Number of labels L in a map produced by this library (its maximum value).
int label_count(const LabelMap& labels);

/// Outer borders of every 8-connected component, traced by Suzuki-Abe border
/// following, in raster order of each component's first pixel. Hole borders
/// are followed internally but not returned.
std::vector<Contour> find_contours(const BinaryMap& mask);

/// Pixels strictly greater than each of their (in-raster) 8-neighbours and >= min_value.
/// Flat peaks are excluded. Raster order.
std::vector<Point> local_maxima(const GrayMap& map, double min_value);

/// Regional maxima (flat peaks included, one plateau each) with value >= min_value.
/// Ordered by the raster position of each plateau's first pixel.
std::vector<Plateau> regional_maxima(const GrayMap& map, double min_value);

/// Tight rectangle around a set of points. Throws on an empty set.
Rect bounding_rect(std::span<const Point> points);

/// Copy of the [rect] window; rect must lie inside the plane.
template <typename T>
Plane<T> crop(const Plane<T>& plane, const Rect& rect) {
    Plane<T> out(rect.width, rect.height);
    for (int y = 0; y < rect.height; ++y)
        for (int x = 0; x < rect.width; ++x) out(x, y) = plane(rect.x + x, rect.y + y);
    return out;
}

/// Intersection of rect with [0,width)x[0,height); zero-sized when disjoint.
Rect clamp_rect(const Rect& rect, int width, int height);

}  // namespace raster
}  // namespace crownfuse
