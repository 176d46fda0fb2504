#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dronedet/boxes.hpp"
#include "dronedet/errors.hpp"
#include "dronedet/grid.hpp"
#include "dronedet/rng.hpp"

namespace dronedet {

// One training image: 3-channel pixel grid with values in [0,1] and
// normalized ground-truth boxes.
struct Sample {
  Grid image;
  std::vector<Box> gts;
  std::vector<int> gt_classes;
};

struct AugmentConfig {
  double crop_probability = 3.0 / 5.0;
  // Crop semantics marker: in anchor_sampling_v1 the drawn ratio fixes the
  // drone's share of the resized training image (longer side = out_size *
  // ratio), and the crop window is derived from that.
  std::string crop_mode = "anchor_sampling_v1";
  std::vector<double> crop_ratios = {0.1, 0.3, 0.5, 0.7, 0.9};
  double blur_sigma_min = 1.0;
  double blur_sigma_max = 3.0;
  double flip_probability = 0.5;
  double jitter_probability = 0.5;
  double brightness_delta = 0.125;   // additive, drawn from [-d, d]
  double contrast_range = 0.5;       // factor drawn from [1-c, 1+c]
  double saturation_range = 0.5;     // factor drawn from [1-s, 1+s]
  int out_size = 512;
};

namespace detail {

// Symmetric (edge-duplicating) reflection; folds as often as needed so any
// radius is safe on any image size. This padding redistributes mass without
// losing it, so a normalized kernel preserves the image mean exactly.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

// Separable Gaussian filter with reflect padding; boxes are untouched.
inline Sample gaussian_blur(const Sample& sample, double sigma) {
  if (!(sigma > 0.0)) throw_value("gaussian_blur: sigma must be > 0");
  std::vector<double> kernel = detail::gaussian_kernel(sigma);
  int radius = static_cast<int>(kernel.size() / 2);
  const Grid& src = sample.image;

  Grid horiz(src.channels(), src.height(), src.width());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] *
                 src.at(c, y, detail::reflect_index(x + k, src.width()));
        horiz.at(c, y, x) = acc;
      }

  Sample out = sample;
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] *
                 horiz.at(c, detail::reflect_index(y + k, src.height()), x);
        out.image.at(c, y, x) = acc;
      }
  return out;
}

inline Sample horizontal_flip(const Sample& sample) {
  Sample out = sample;
  const Grid& src = sample.image;
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x)
        out.image.at(c, y, x) = src.at(c, y, src.width() - 1 - x);
  for (Box& b : out.gts) {
    double x_min = 1.0 - b.x_max;
    double x_max = 1.0 - b.x_min;
    b.x_min = x_min;
    b.x_max = x_max;
  }
  return out;
}

// Brightness / contrast / saturation jitter with amplitudes from the
// config; all channels clamped back to [0,1]. Zero amplitudes reproduce the
// input exactly.
inline Sample color_jitter(const Sample& sample, Rng& rng,
                           const AugmentConfig& cfg = {}) {
  double brightness = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
  double contrast = rng.uniform(1.0 - cfg.contrast_range, 1.0 + cfg.contrast_range);
  double saturation =
      rng.uniform(1.0 - cfg.saturation_range, 1.0 + cfg.saturation_range);

  Sample out = sample;
  Grid& img = out.image;
  double mean = 0.0;
  for (double v : img.values()) mean += v;
  mean /= static_cast<double>(img.values().size());

  std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
  for (std::size_t i = 0; i < plane; ++i) {
    double gray = 0.0;
    for (int c = 0; c < img.channels(); ++c)
      gray += img.values()[c * plane + i];
    gray /= img.channels();
    for (int c = 0; c < img.channels(); ++c) {
      double& v = img.values()[c * plane + i];
      v = gray + (v - gray) * saturation;        // toward/away from gray
      v = mean + (v - mean) * contrast;          // around the image mean
      v = std::clamp(v + brightness, 0.0, 1.0);  // shift and clamp
    }
  }
  return out;
}

inline Grid resize_bilinear(const Grid& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw_value("resize_bilinear: empty output");
  Grid out(src.channels(), out_h, out_w);
  double sy = static_cast<double>(src.height()) / out_h;
  double sx = static_cast<double>(src.width()) / out_w;
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                               static_cast<double>(src.height() - 1));
        double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                               static_cast<double>(src.width() - 1));
        int y0 = static_cast<int>(fy);
        int x0 = static_cast<int>(fx);
        int y1 = std::min(y0 + 1, src.height() - 1);
        int x1 = std::min(x0 + 1, src.width() - 1);
        double wy = fy - y0, wx = fx - x0;
        out.at(c, y, x) = (1 - wy) * ((1 - wx) * src.at(c, y0, x0) +
                                      wx * src.at(c, y0, x1)) +
                          wy * ((1 - wx) * src.at(c, y1, x0) +
                                wx * src.at(c, y1, x1));
      }
  return out;
}

struct CropOutcome {
  Sample sample;
  int gt_index = -1;   // which drone was selected
  double rho = 0.0;    // drawn size ratio
  Box window;          // normalized crop window in source coordinates
};

// Deterministic core of the anchor-based sampler: crops a square around
// ground truth `gt_index` sized so that, once the crop is resized to the
// training resolution, the drone's longer side covers ~rho of it. Boxes are
// re-expressed in crop coordinates; ground truths whose centers fall outside
// the window are dropped. The selected drone's center always stays inside.
inline CropOutcome anchor_based_crop_at(const Sample& sample, int gt_index,
                                        double rho) {
  if (sample.gts.empty()) throw_value("anchor_based_crop: sample has no gts");
  if (gt_index < 0 || gt_index >= static_cast<int>(sample.gts.size()))
    throw_value("anchor_based_crop: gt index ", gt_index, " out of range");
  if (!(rho > 0.0 && rho <= 1.0))
    throw_value("anchor_based_crop: ratio must be in (0,1], got ", rho);

  const Box& drone = sample.gts[gt_index];
  double longer = std::max(drone.width(), drone.height());
  double side = std::min(1.0, longer / rho);
  double x0 = std::clamp(drone.center_x() - side / 2.0, 0.0, 1.0 - side);
  double y0 = std::clamp(drone.center_y() - side / 2.0, 0.0, 1.0 - side);

  const Grid& img = sample.image;
  int px = static_cast<int>(std::lround(x0 * img.width()));
  int py = static_cast<int>(std::lround(y0 * img.height()));
  int pw = std::max(1, static_cast<int>(std::lround(side * img.width())));
  int ph = std::max(1, static_cast<int>(std::lround(side * img.height())));
  px = std::min(px, img.width() - pw);
  py = std::min(py, img.height() - ph);

  CropOutcome out;
  out.gt_index = gt_index;
  out.rho = rho;
  out.window = {static_cast<double>(px) / img.width(),
                static_cast<double>(py) / img.height(),
                static_cast<double>(px + pw) / img.width(),
                static_cast<double>(py + ph) / img.height()};

  out.sample.image = Grid(img.channels(), ph, pw);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        out.sample.image.at(c, y, x) = img.at(c, py + y, px + x);

  for (std::size_t g = 0; g < sample.gts.size(); ++g) {
    const Box& b = sample.gts[g];
    double cx = (b.center_x() - out.window.x_min) / out.window.width();
    double cy = (b.center_y() - out.window.y_min) / out.window.height();
    bool keep = cx >= 0.0 && cx < 1.0 && cy >= 0.0 && cy < 1.0;
    if (static_cast<int>(g) == gt_index && !keep)
      throw_value("anchor_based_crop: selected drone escaped the window");
    if (!keep) continue;
    Box moved{(b.x_min - out.window.x_min) / out.window.width(),
              (b.y_min - out.window.y_min) / out.window.height(),
              (b.x_max - out.window.x_min) / out.window.width(),
              (b.y_max - out.window.y_min) / out.window.height()};
    out.sample.gts.push_back(moved.clipped());
    out.sample.gt_classes.push_back(sample.gt_classes[g]);
  }
  return out;
}

inline CropOutcome anchor_based_crop_traced(const Sample& sample, Rng& rng,
                                            const AugmentConfig& cfg = {}) {
  if (cfg.crop_mode != "anchor_sampling_v1")
    throw_value("anchor_based_crop: unknown crop mode '", cfg.crop_mode, "'");
  if (sample.gts.empty()) throw_value("anchor_based_crop: sample has no gts");
  int gt_index = static_cast<int>(rng.below(sample.gts.size()));
  double rho = cfg.crop_ratios[rng.below(cfg.crop_ratios.size())];
  return anchor_based_crop_at(sample, gt_index, rho);
}

inline Sample anchor_based_crop(const Sample& sample, Rng& rng,
                                const AugmentConfig& cfg = {}) {
  return anchor_based_crop_traced(sample, rng, cfg).sample;
}

struct PipelineTrace {
  bool crop_branch = false;
  int gt_index = -1;
  double rho = 0.0;
  double sigma = 0.0;
  bool flipped = false;
  bool jittered = false;
};

struct PipelineResult {
  Sample sample;
  PipelineTrace trace;
};

// Full sampler: crop with probability crop_probability, otherwise blur with
// a sigma drawn from the configured range; resize to out_size; then flip
// and color-jitter, each with its own independent coin. Draw order is
// pinned (branch coin, branch parameters, flip coin, jitter coin, jitter
// parameters) so a seed fully determines the output.
inline PipelineResult pipeline(const Sample& sample, Rng& rng,
                               const AugmentConfig& cfg = {}) {
  PipelineResult result;
  result.trace.crop_branch =
      !sample.gts.empty() && rng.bernoulli(cfg.crop_probability);
  if (result.trace.crop_branch) {
    CropOutcome crop = anchor_based_crop_traced(sample, rng, cfg);
    result.trace.gt_index = crop.gt_index;
    result.trace.rho = crop.rho;
    result.sample = std::move(crop.sample);
  } else {
    result.trace.sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
    result.sample = gaussian_blur(sample, result.trace.sigma);
  }

  result.sample.image =
      resize_bilinear(result.sample.image, cfg.out_size, cfg.out_size);

  result.trace.flipped = rng.bernoulli(cfg.flip_probability);
  if (result.trace.flipped) result.sample = horizontal_flip(result.sample);

  result.trace.jittered = rng.bernoulli(cfg.jitter_probability);
  if (result.trace.jittered)
    result.sample = color_jitter(result.sample, rng, cfg);
  return result;
}

}  // namespace dronedet
