#pragma once

#include <algorithm>
#include <cmath>

#include "dronedet/errors.hpp"

namespace dronedet {

// Axis-aligned box. Anchor and augmentation code keeps coordinates
// normalized to [0,1]; dataset records and the evaluator use pixel
// coordinates. The geometry is the same either way.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  static Box from_center_size(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  Box clipped(double lo = 0.0, double hi = 1.0) const {
    return {std::clamp(x_min, lo, hi), std::clamp(y_min, lo, hi),
            std::clamp(x_max, lo, hi), std::clamp(y_max, lo, hi)};
  }

  bool operator==(const Box&) const = default;
};

// Intersection-over-union. An empty union (two zero-area boxes) gives 0.
inline double iou(const Box& a, const Box& b) {
  double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  double inter = std::max(0.0, ix) * std::max(0.0, iy);
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace dronedet
