#pragma once

#include <cstddef>
#include <vector>

#include "dronedet/errors.hpp"
#include "dronedet/rng.hpp"

namespace dronedet {

struct GridShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  bool operator==(const GridShape&) const = default;
  std::size_t cell_count() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
};

// Dense rank-3 numeric array, row-major in (channel, y, x) order. All kernels
// in the toolkit run on one image at a time, so there is no batch axis.
class Grid {
 public:
  Grid() = default;

  Grid(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    if (channels < 1 || height < 1 || width < 1) {
      throw_shape("grid dimensions must be >= 1, got (", channels, ", ",
                  height, ", ", width, ")");
    }
    values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  Grid(int channels, int height, int width, std::vector<double> values)
      : channels_(channels), height_(height), width_(width),
        values_(std::move(values)) {
    if (channels < 1 || height < 1 || width < 1) {
      throw_shape("grid dimensions must be >= 1, got (", channels, ", ",
                  height, ", ", width, ")");
    }
    if (values_.size() != static_cast<std::size_t>(channels) * height * width) {
      throw_shape("grid value count ", values_.size(), " != ", channels, "*",
                  height, "*", width);
    }
  }

  static Grid random(int channels, int height, int width, Rng& rng,
                     double lo = -1.0, double hi = 1.0) {
    Grid g(channels, height, width);
    for (double& v : g.values_) v = rng.uniform(lo, hi);
    return g;
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  GridShape shape() const { return {channels_, height_, width_}; }
  std::size_t size() const { return values_.size(); }

  double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[index(c, y, x)]; }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Grid& other) const { return shape() == other.shape(); }

  bool operator==(const Grid&) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

}  // namespace dronedet
