#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dronedet/anchors.hpp"
#include "dronedet/boxes.hpp"
#include "dronedet/errors.hpp"

namespace dronedet {

// Per-anchor assignment. label[a] is the matched ground-truth index or -1
// for negatives; forced[a] marks anchors claimed by the best-match phase
// (those may sit below the IoU threshold).
struct MatchResult {
  std::vector<int> labels;
  std::vector<bool> forced;
  std::vector<std::array<double, 4>> offsets;  // encoded regression targets

  int positive_count() const {
    int n = 0;
    for (int l : labels) n += (l >= 0);
    return n;
  }
};

// Center-size offset codec with the inherited variance scaling.
struct BoxCodec {
  double center_variance = 0.1;
  double size_variance = 0.2;

  std::array<double, 4> encode(const Box& anchor, const Box& gt) const {
    double aw = anchor.width();
    double ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0)
      throw_value("encode: degenerate anchor of size ", aw, "x", ah);
    double gw = gt.width();
    double gh = gt.height();
    if (gw <= 0.0 || gh <= 0.0)
      throw_value("encode: degenerate ground-truth box of size ", gw, "x", gh);
    return {(gt.center_x() - anchor.center_x()) / aw / center_variance,
            (gt.center_y() - anchor.center_y()) / ah / center_variance,
            std::log(gw / aw) / size_variance,
            std::log(gh / ah) / size_variance};
  }

  Box decode(const Box& anchor, const std::array<double, 4>& t) const {
    double aw = anchor.width();
    double ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0)
      throw_value("decode: degenerate anchor of size ", aw, "x", ah);
    double cx = t[0] * center_variance * aw + anchor.center_x();
    double cy = t[1] * center_variance * ah + anchor.center_y();
    double w = std::exp(t[2] * size_variance) * aw;
    double h = std::exp(t[3] * size_variance) * ah;
    return Box::from_center_size(cx, cy, w, h);
  }
};

// Bidirectional anchor assignment.
//
// Phase 1 (ground truth -> anchor): every ground truth claims one anchor,
// even below the threshold. Claims are resolved globally: repeatedly take
// the unclaimed (anchor, gt) pair with the highest IoU (ties: lower anchor
// index, then lower gt index), so the forced matches are injective.
//
// Phase 2 (anchor -> ground truth): every remaining anchor with IoU >=
// threshold to some gt becomes positive for its argmax gt (ties: lower gt
// index). Everything else is negative; there is no ignore band.
inline MatchResult match(const std::vector<Box>& anchors,
                         const std::vector<Box>& gts,
                         double threshold = 0.5,
                         const BoxCodec& codec = {}) {
  if (anchors.empty()) throw_value("match: no anchors");
  MatchResult result;
  result.labels.assign(anchors.size(), -1);
  result.forced.assign(anchors.size(), false);
  result.offsets.assign(anchors.size(), {0.0, 0.0, 0.0, 0.0});
  if (gts.empty()) return result;

  std::vector<std::vector<double>> overlap(
      anchors.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (std::size_t g = 0; g < gts.size(); ++g)
      overlap[a][g] = iou(anchors[a], gts[g]);

  std::vector<bool> gt_claimed(gts.size(), false);
  std::vector<bool> anchor_claimed(anchors.size(), false);
  std::size_t rounds = std::min(anchors.size(), gts.size());
  for (std::size_t round = 0; round < rounds; ++round) {
    double best = -1.0;
    std::size_t best_a = 0, best_g = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (anchor_claimed[a]) continue;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gt_claimed[g]) continue;
        if (overlap[a][g] > best) {
          best = overlap[a][g];
          best_a = a;
          best_g = g;
        }
      }
    }
    anchor_claimed[best_a] = true;
    gt_claimed[best_g] = true;
    result.labels[best_a] = static_cast<int>(best_g);
    result.forced[best_a] = true;
  }

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (result.forced[a]) continue;
    double best = -1.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (overlap[a][g] > best) {
        best = overlap[a][g];
        best_g = static_cast<int>(g);
      }
    if (best >= threshold) result.labels[a] = best_g;
  }

  for (std::size_t a = 0; a < anchors.size(); ++a)
    if (result.labels[a] >= 0)
      result.offsets[a] = codec.encode(anchors[a], gts[result.labels[a]]);
  return result;
}

inline MatchResult match(const AnchorSet& anchors, const std::vector<Box>& gts,
                         double threshold = 0.5, const BoxCodec& codec = {}) {
  return match(anchors.boxes, gts, threshold, codec);
}

struct LossConfig {
  double alpha = 1.0;          // localization weight
  int neg_pos_ratio = 3;       // mined negatives per positive
  int background_class = 0;
};

struct LossBreakdown {
  double total = 0.0;
  double conf = 0.0;
  double loc = 0.0;
};

namespace detail {

inline double smooth_l1(double x) {
  double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

// -log softmax(logits)[target]
inline double cross_entropy(const std::vector<double>& logits, int target) {
  double peak = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - peak);
  return std::log(denom) - (logits[target] - peak);
}

}  // namespace detail

// Weighted sum of localization and confidence losses:
// total = (conf + alpha * loc) / N over the positives, with hard-negative
// mining at neg_pos_ratio:1 (negatives ranked by background cross-entropy,
// ties by lower anchor index). N = 0 defines the loss as 0.
inline LossBreakdown ssd_loss(
    const std::vector<std::vector<double>>& class_scores,
    const std::vector<std::array<double, 4>>& box_preds,
    const MatchResult& match_result, const std::vector<int>& gt_classes,
    const LossConfig& cfg = {}) {
  std::size_t n_anchors = match_result.labels.size();
  if (class_scores.size() != n_anchors)
    throw_shape("ssd_loss: class score rows ", class_scores.size(),
                " != anchor count ", n_anchors);
  if (box_preds.size() != n_anchors)
    throw_shape("ssd_loss: box prediction rows ", box_preds.size(),
                " != anchor count ", n_anchors);

  LossBreakdown out;
  int n_pos = match_result.positive_count();
  if (n_pos == 0) return out;

  std::vector<std::pair<double, std::size_t>> negative_losses;
  for (std::size_t a = 0; a < n_anchors; ++a) {
    int gt = match_result.labels[a];
    if (gt >= 0) {
      if (gt >= static_cast<int>(gt_classes.size()))
        throw_shape("ssd_loss: matched gt index ", gt,
                    " outside gt_classes of size ", gt_classes.size());
      out.conf += detail::cross_entropy(class_scores[a], gt_classes[gt]);
      for (int k = 0; k < 4; ++k)
        out.loc += detail::smooth_l1(box_preds[a][k] -
                                     match_result.offsets[a][k]);
    } else {
      negative_losses.emplace_back(
          -detail::cross_entropy(class_scores[a], cfg.background_class), a);
    }
  }

  std::size_t n_mined = std::min(
      negative_losses.size(), static_cast<std::size_t>(cfg.neg_pos_ratio) *
                                  static_cast<std::size_t>(n_pos));
  std::stable_sort(negative_losses.begin(), negative_losses.end());
  for (std::size_t i = 0; i < n_mined; ++i)
    out.conf += -negative_losses[i].first;

  out.total = (out.conf + cfg.alpha * out.loc) / n_pos;
  return out;
}

// A scored box prediction.
struct Detection {
  std::string image_id;
  Box box;
  double score = 0.0;
  int class_id = 1;
  long long id = -1;  // stable identity for deterministic ordering
};

// Greedy non-maximum suppression over one group of detections (the caller
// groups per image / per class as needed). A detection is dropped when its
// IoU with any higher-ranked kept detection exceeds iou_threshold. Ranking
// is by descending score, ties by lower position in the input list.
inline std::vector<Detection> nms(const std::vector<Detection>& dets,
                                  double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (const Detection& k : kept)
      if (iou(dets[idx].box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

}  // namespace dronedet
