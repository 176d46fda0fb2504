#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dronedet/boxes.hpp"
#include "dronedet/errors.hpp"

namespace dronedet {

// Linear scale schedule: s_k = s_min + (s_max - s_min)/(m-1) * (k-1),
// k = 1..m.
inline std::vector<double> scale_schedule(double s_min, double s_max, int m) {
  if (!(0.0 < s_min && s_min < s_max && s_max <= 1.0))
    throw_value("scale_schedule: need 0 < s_min < s_max <= 1, got ", s_min,
                ", ", s_max);
  if (m < 2) throw_value("scale_schedule: m must be >= 2, got ", m);
  std::vector<double> s(m);
  for (int k = 1; k <= m; ++k)
    s[k - 1] = s_min + (s_max - s_min) / (m - 1) * (k - 1);
  return s;
}

// Per-layer progressive decay: s'_k = beta_k * s_k.
inline std::vector<double> weighted_scales(const std::vector<double>& schedule,
                                           const std::vector<double>& beta) {
  if (beta.size() != schedule.size())
    throw_shape("weighted_scales: beta length ", beta.size(),
                " != schedule length ", schedule.size());
  for (double b : beta)
    if (!(b > 0.0 && b <= 1.0))
      throw_value("weighted_scales: beta values must be in (0,1], got ", b);
  std::vector<double> out(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i)
    out[i] = beta[i] * schedule[i];
  return out;
}

// The eight tailored per-layer pixel sizes for 512x512 input, lowest layer
// first, plus the closing size that bounds the last layer's extra box.
inline const std::vector<double>& tailored_min_sizes() {
  static const std::vector<double> sizes = {28, 56, 118, 176, 232, 326, 408,
                                            484};
  return sizes;
}
inline constexpr double kTailoredClosingSize = 526.0;

// Decay vector chosen so that round(512 * beta_k * s_k) reproduces the
// tailored sizes exactly; the weights are not tabulated anywhere, only the
// resulting sizes are.
inline std::vector<double> default_beta(double s_min = 0.15,
                                        double s_max = 0.95,
                                        int image_size = 512) {
  std::vector<double> schedule = scale_schedule(s_min, s_max, 8);
  std::vector<double> beta(8);
  for (int i = 0; i < 8; ++i)
    beta[i] = tailored_min_sizes()[i] / (image_size * schedule[i]);
  return beta;
}

struct LayerAnchorConfig {
  std::string name;
  int stride = 0;
  int grid_h = 0;
  int grid_w = 0;
  double min_size = 0.0;  // pixels
  double max_size = 0.0;  // pixels; side of the extra box = sqrt(min*max)
  std::vector<double> ratios;  // w/h aspect ratios, e.g. {1, 0.5, 2}

  int anchors_per_cell() const { return static_cast<int>(ratios.size()) + 1; }
  long long anchor_count() const {
    return static_cast<long long>(grid_h) * grid_w * anchors_per_cell();
  }
};

// Ratio families from the tailored design: the first and the last two layers
// use {1, 1:2, 2:1}, the middle layers add 1:3 and 3:1.
inline std::vector<double> narrow_ratio_set() { return {1.0, 0.5, 2.0}; }
inline std::vector<double> wide_ratio_set() {
  return {1.0, 0.5, 1.0 / 3.0, 2.0, 3.0};
}

// Builds the eight-layer configuration from a scale schedule and decay
// vector (512 input, strides 4..512). min sizes are round(512 * beta_k *
// s_k); each layer's max size is the next layer's min size, closed by
// kTailoredClosingSize.
inline std::vector<LayerAnchorConfig> layer_configs_from_scales(
    double s_min = 0.15, double s_max = 0.95,
    const std::vector<double>& beta = default_beta(), int image_size = 512) {
  std::vector<double> scales =
      weighted_scales(scale_schedule(s_min, s_max, 8), beta);
  std::vector<double> sizes(8);
  for (int i = 0; i < 8; ++i) sizes[i] = std::round(image_size * scales[i]);

  std::vector<LayerAnchorConfig> configs(8);
  for (int i = 0; i < 8; ++i) {
    LayerAnchorConfig& c = configs[i];
    c.name = detail::cat("of_", i + 1);
    c.stride = 4 << i;
    c.grid_h = c.grid_w = image_size / c.stride;
    c.min_size = sizes[i];
    c.max_size = (i + 1 < 8) ? sizes[i + 1] : kTailoredClosingSize;
    c.ratios = (i == 0 || i >= 6) ? narrow_ratio_set() : wide_ratio_set();
  }
  return configs;
}

inline std::vector<LayerAnchorConfig> default_layer_configs() {
  return layer_configs_from_scales();
}

// The classic 300-input six-layer configuration, expressed through the same
// generator; reproducing its anchor count is the regression guard that the
// generator keeps the inherited box semantics.
inline std::vector<LayerAnchorConfig> ssd300_reference_configs() {
  const int grids[6] = {38, 19, 10, 5, 3, 1};
  const int strides[6] = {8, 16, 32, 64, 100, 300};
  const double mins[6] = {30, 60, 111, 162, 213, 264};
  const double maxs[6] = {60, 111, 162, 213, 264, 315};
  std::vector<LayerAnchorConfig> configs(6);
  for (int i = 0; i < 6; ++i) {
    LayerAnchorConfig& c = configs[i];
    c.name = detail::cat("ssd_", i + 1);
    c.stride = strides[i];
    c.grid_h = c.grid_w = grids[i];
    c.min_size = mins[i];
    c.max_size = maxs[i];
    c.ratios = (i == 0 || i >= 4) ? narrow_ratio_set() : wide_ratio_set();
  }
  return configs;
}

struct AnchorSet {
  std::vector<Box> boxes;  // layer-major, row-major, ratio-minor, extra last
  std::vector<std::pair<std::size_t, std::size_t>> layer_ranges;
  std::vector<LayerAnchorConfig> configs;
  int image_size = 512;

  std::size_t size() const { return boxes.size(); }

  int layer_of(std::size_t anchor_index) const {
    for (std::size_t l = 0; l < layer_ranges.size(); ++l)
      if (anchor_index >= layer_ranges[l].first &&
          anchor_index < layer_ranges[l].second)
        return static_cast<int>(l);
    throw_value("anchor index ", anchor_index, " out of range");
  }
};

// Enumerates every default box. Per cell (i,j) of a layer with stride s the
// center is ((j+0.5)*s, (i+0.5)*s)/image; each listed ratio a contributes a
// box of area min_size^2 with w/h = a, then one extra 1:1 box of side
// sqrt(min*max). Boxes are normalized and (optionally) clipped to the unit
// square after construction, so off-boundary areas are exact.
inline AnchorSet generate_anchors(const std::vector<LayerAnchorConfig>& configs,
                                  int image_size, bool clip = true) {
  if (image_size < 1) throw_value("generate_anchors: bad image size");
  AnchorSet set;
  set.configs = configs;
  set.image_size = image_size;
  for (const LayerAnchorConfig& c : configs) {
    if (c.grid_h < 1 || c.grid_w < 1 || c.stride < 1)
      throw_value("generate_anchors: layer ", c.name, " has empty grid");
    std::size_t begin = set.boxes.size();
    double inv = 1.0 / image_size;
    for (int i = 0; i < c.grid_h; ++i) {
      for (int j = 0; j < c.grid_w; ++j) {
        double cx = (j + 0.5) * c.stride * inv;
        double cy = (i + 0.5) * c.stride * inv;
        for (double a : c.ratios) {
          double w = c.min_size * std::sqrt(a) * inv;
          double h = c.min_size / std::sqrt(a) * inv;
          Box box = Box::from_center_size(cx, cy, w, h);
          set.boxes.push_back(clip ? box.clipped() : box);
        }
        double extra = std::sqrt(c.min_size * c.max_size) * inv;
        Box box = Box::from_center_size(cx, cy, extra, extra);
        set.boxes.push_back(clip ? box.clipped() : box);
      }
    }
    set.layer_ranges.emplace_back(begin, set.boxes.size());
  }
  return set;
}

}  // namespace dronedet
