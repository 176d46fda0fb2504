#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dronedet/boxes.hpp"
#include "dronedet/errors.hpp"
#include "dronedet/matching.hpp"

namespace dronedet {

// Ground truth for evaluation. Boxes are in pixels of the original
// annotation resolution; the size buckets below are defined on those areas.
struct GroundTruth {
  std::string image_id;
  Box box;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  bool operator==(const PrPoint&) const = default;
};

// Size buckets partition the ground truths by pixel area:
// small < 32^2, 32^2 <= medium <= 96^2, large > 96^2.
enum class SizeBucket { All, Small, Medium, Large };

inline bool bucket_contains(SizeBucket bucket, double area) {
  switch (bucket) {
    case SizeBucket::All: return true;
    case SizeBucket::Small: return area < 1024.0;
    case SizeBucket::Medium: return area >= 1024.0 && area <= 9216.0;
    case SizeBucket::Large: return area > 9216.0;
  }
  return false;
}

inline std::vector<double> coco_iou_thresholds() {
  std::vector<double> t(10);
  for (int i = 0; i < 10; ++i) t[i] = 0.50 + 0.05 * i;
  return t;
}

struct EvalReport {
  double ap_5095 = 0, ap_50 = 0, ap_75 = 0;
  double ap_small = 0, ap_medium = 0, ap_large = 0;
  double ar_5095 = 0, ar_50 = 0, ar_75 = 0;
  double ar_small = 0, ar_medium = 0, ar_large = 0;
  std::vector<double> iou_thresholds;
  // Per threshold: the 101-point interpolated precision-recall curve of the
  // "all" bucket (recall grid 0.00, 0.01, ..., 1.00).
  std::vector<std::vector<PrPoint>> pr_curves;

  std::vector<std::pair<std::string, double>> metric_rows() const {
    return {{"ap_5095", ap_5095},   {"ap_50", ap_50},
            {"ap_75", ap_75},       {"ap_small", ap_small},
            {"ap_medium", ap_medium}, {"ap_large", ap_large},
            {"ar_5095", ar_5095},   {"ar_50", ar_50},
            {"ar_75", ar_75},       {"ar_small", ar_small},
            {"ar_medium", ar_medium}, {"ar_large", ar_large}};
  }
};

namespace detail {

struct DetRef {
  std::size_t index;  // into the caller's detection list
  long long id;
  double score;
};

// Global evaluation order: descending score, ties by ascending id. Ids
// default to the input position; duplicate ids are rejected so the order
// (and thus the whole report) is independent of input order.
inline std::vector<DetRef> sorted_detections(const std::vector<Detection>& dets) {
  std::vector<DetRef> refs;
  refs.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    long long id = dets[i].id >= 0 ? dets[i].id : static_cast<long long>(i);
    refs.push_back({i, id, dets[i].score});
  }
  std::sort(refs.begin(), refs.end(), [](const DetRef& a, const DetRef& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::map<long long, int> seen;
  for (const DetRef& r : refs)
    if (++seen[r.id] > 1) throw_value("evaluator: duplicate detection id ", r.id);
  return refs;
}

// Outcome of one detection under a (threshold, bucket) evaluation.
enum class DetOutcome : int { TruePositive, FalsePositive, Ignored };

struct MatchedSequence {
  std::vector<DetOutcome> outcomes;  // aligned with the sorted order
  int counted_gts = 0;
};

// Greedy matching in score order with single-use ground truths and
// cross-image separation. Bucket handling: ground truths outside the bucket
// are "ignored" (matchable, but matches neither score nor count); a
// detection is matched to the best unmatched in-bucket gt with IoU >=
// threshold, falling back to ignored gts; unmatched detections whose own
// area lies outside the bucket are ignored rather than counted as false
// positives.
inline MatchedSequence greedy_match(const std::vector<Detection>& dets,
                                    const std::vector<DetRef>& order,
                                    const std::vector<GroundTruth>& gts,
                                    double iou_threshold, SizeBucket bucket) {
  std::map<std::string, std::vector<std::size_t>> gts_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g)
    gts_by_image[gts[g].image_id].push_back(g);

  MatchedSequence seq;
  std::vector<bool> gt_ignored(gts.size(), false);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_ignored[g] = !bucket_contains(bucket, gts[g].box.area());
    if (!gt_ignored[g]) ++seq.counted_gts;
  }

  std::vector<bool> gt_used(gts.size(), false);
  seq.outcomes.reserve(order.size());
  for (const DetRef& ref : order) {
    const Detection& det = dets[ref.index];
    auto it = gts_by_image.find(det.image_id);
    int best_counted = -1, best_ignored = -1;
    double best_counted_iou = 0.0, best_ignored_iou = 0.0;
    if (it != gts_by_image.end()) {
      for (std::size_t g : it->second) {
        if (gt_used[g]) continue;
        double v = iou(det.box, gts[g].box);
        if (v < iou_threshold) continue;
        if (!gt_ignored[g]) {
          if (best_counted < 0 || v > best_counted_iou) {
            best_counted = static_cast<int>(g);
            best_counted_iou = v;
          }
        } else if (best_ignored < 0 || v > best_ignored_iou) {
          best_ignored = static_cast<int>(g);
          best_ignored_iou = v;
        }
      }
    }
    if (best_counted >= 0) {
      gt_used[best_counted] = true;
      seq.outcomes.push_back(DetOutcome::TruePositive);
    } else if (best_ignored >= 0) {
      gt_used[best_ignored] = true;
      seq.outcomes.push_back(DetOutcome::Ignored);
    } else if (!bucket_contains(bucket, det.box.area())) {
      seq.outcomes.push_back(DetOutcome::Ignored);
    } else {
      seq.outcomes.push_back(DetOutcome::FalsePositive);
    }
  }
  return seq;
}

inline std::vector<PrPoint> curve_from_sequence(const MatchedSequence& seq) {
  std::vector<PrPoint> curve;
  if (seq.counted_gts == 0) return curve;
  int tp = 0, fp = 0;
  for (DetOutcome o : seq.outcomes) {
    if (o == DetOutcome::Ignored) continue;
    if (o == DetOutcome::TruePositive) ++tp;
    else ++fp;
    curve.push_back({static_cast<double>(tp) / seq.counted_gts,
                     static_cast<double>(tp) / (tp + fp)});
  }
  return curve;
}

}  // namespace detail

// Raw rank curve at one IoU threshold over the full ("all") bucket: one
// (recall, precision) point per counted detection, in score order.
inline std::vector<PrPoint> pr_curve(const std::vector<Detection>& dets,
                                     const std::vector<GroundTruth>& gts,
                                     double iou_threshold) {
  auto order = detail::sorted_detections(dets);
  return detail::curve_from_sequence(
      detail::greedy_match(dets, order, gts, iou_threshold, SizeBucket::All));
}

// 101-point interpolated average precision: the precision envelope (running
// maximum from the right) sampled on the recall grid 0.00..1.00. An empty
// curve has AP 0.
inline double average_precision(const std::vector<PrPoint>& curve) {
  if (curve.empty()) return 0.0;
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    double r = i / 100.0;
    double envelope = 0.0;
    for (const PrPoint& p : curve)
      if (p.recall >= r) envelope = std::max(envelope, p.precision);
    sum += envelope;
  }
  return sum / 101.0;
}

inline std::vector<PrPoint> interpolated_curve(const std::vector<PrPoint>& curve) {
  std::vector<PrPoint> out(101);
  for (int i = 0; i <= 100; ++i) {
    double r = i / 100.0;
    double envelope = 0.0;
    for (const PrPoint& p : curve)
      if (p.recall >= r) envelope = std::max(envelope, p.precision);
    out[i] = {r, envelope};
  }
  return out;
}

struct EvalOptions {
  int workers = 1;  // threads over the independent (threshold, bucket) cells
};

// Full metric family: AP averaged over the 10-threshold sweep, single
// thresholds at 0.50/0.75, size-bucketed APs, and the AR (maximum recall)
// analogues. Buckets with no counted ground truths contribute 0. The 40
// (threshold, bucket) cells are independent; they may be computed by a
// bounded worker pool and are reduced in a fixed order, so the report does
// not depend on scheduling.
inline EvalReport coco_summary(const std::vector<Detection>& dets,
                               const std::vector<GroundTruth>& gts,
                               const EvalOptions& options = {}) {
  EvalReport report;
  report.iou_thresholds = coco_iou_thresholds();
  auto order = detail::sorted_detections(dets);

  const SizeBucket buckets[4] = {SizeBucket::All, SizeBucket::Small,
                                 SizeBucket::Medium, SizeBucket::Large};
  std::size_t n_thr = report.iou_thresholds.size();

  struct Cell {
    double ap = 0.0;
    double max_recall = 0.0;
    std::vector<PrPoint> raw_curve;
  };
  std::vector<Cell> cells(n_thr * 4);
  auto run_cell = [&](std::size_t index) {
    std::size_t t = index / 4;
    int b = static_cast<int>(index % 4);
    auto seq = detail::greedy_match(dets, order, gts,
                                    report.iou_thresholds[t], buckets[b]);
    Cell& cell = cells[index];
    cell.raw_curve = detail::curve_from_sequence(seq);
    cell.ap = average_precision(cell.raw_curve);
    for (const PrPoint& p : cell.raw_curve)
      cell.max_recall = std::max(cell.max_recall, p.recall);
  };

  int workers = std::clamp(options.workers, 1, static_cast<int>(cells.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < cells.size(); i += workers) run_cell(i);
      });
    for (std::thread& th : pool) th.join();
  }

  double ap_sum[4] = {0, 0, 0, 0};
  double ar_sum[4] = {0, 0, 0, 0};
  for (std::size_t t = 0; t < n_thr; ++t) {
    for (int b = 0; b < 4; ++b) {
      const Cell& cell = cells[t * 4 + b];
      ap_sum[b] += cell.ap;
      ar_sum[b] += cell.max_recall;
      if (b == 0) {
        report.pr_curves.push_back(interpolated_curve(cell.raw_curve));
        if (t == 0) {  // threshold 0.50
          report.ap_50 = cell.ap;
          report.ar_50 = cell.max_recall;
        }
        if (t == 5) {  // threshold 0.75
          report.ap_75 = cell.ap;
          report.ar_75 = cell.max_recall;
        }
      }
    }
  }

  double n = static_cast<double>(report.iou_thresholds.size());
  report.ap_5095 = ap_sum[0] / n;
  report.ap_small = ap_sum[1] / n;
  report.ap_medium = ap_sum[2] / n;
  report.ap_large = ap_sum[3] / n;
  report.ar_5095 = ar_sum[0] / n;
  report.ar_small = ar_sum[1] / n;
  report.ar_medium = ar_sum[2] / n;
  report.ar_large = ar_sum[3] / n;
  return report;
}

// ---------------------------------------------------------------------------
// Report emission. The CSV holds 12 metric rows plus one row per curve
// point (thresholds x 101), after the schema tag; values print with 17
// significant digits so a re-read reproduces them bit-exactly.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "dronedet.evalreport.v1\n";
  for (const auto& [name, value] : report.metric_rows())
    os << "metric," << name << "," << detail::format_double(value) << "\n";
  for (std::size_t t = 0; t < report.pr_curves.size(); ++t)
    for (const PrPoint& p : report.pr_curves[t])
      os << "curve," << detail::format_double(report.iou_thresholds[t]) << ","
         << detail::format_double(p.recall) << ","
         << detail::format_double(p.precision) << "\n";
  return os.str();
}

inline EvalReport parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "dronedet.evalreport.v1")
    throw_io("eval report parse: missing schema tag");
  EvalReport report;
  std::map<std::string, double> metrics;
  std::map<std::string, std::vector<PrPoint>> curves;  // keyed by text thr
  std::vector<std::string> curve_order;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    std::getline(ls, kind, ',');
    if (kind == "metric") {
      std::string name, value;
      std::getline(ls, name, ',');
      std::getline(ls, value);
      metrics[name] = std::stod(value);
    } else if (kind == "curve") {
      std::string thr, r, p;
      std::getline(ls, thr, ',');
      std::getline(ls, r, ',');
      std::getline(ls, p);
      if (!curves.count(thr)) curve_order.push_back(thr);
      curves[thr].push_back({std::stod(r), std::stod(p)});
    } else {
      throw_io("eval report parse: unknown row kind '", kind, "'");
    }
  }
  auto metric = [&](const char* name) {
    auto it = metrics.find(name);
    if (it == metrics.end()) throw_io("eval report parse: missing ", name);
    return it->second;
  };
  report.ap_5095 = metric("ap_5095");
  report.ap_50 = metric("ap_50");
  report.ap_75 = metric("ap_75");
  report.ap_small = metric("ap_small");
  report.ap_medium = metric("ap_medium");
  report.ap_large = metric("ap_large");
  report.ar_5095 = metric("ar_5095");
  report.ar_50 = metric("ar_50");
  report.ar_75 = metric("ar_75");
  report.ar_small = metric("ar_small");
  report.ar_medium = metric("ar_medium");
  report.ar_large = metric("ar_large");
  for (const std::string& thr : curve_order) {
    report.iou_thresholds.push_back(std::stod(thr));
    report.pr_curves.push_back(curves[thr]);
  }
  return report;
}

// Simple PR plot: one polyline per IoU threshold, axes in [0,1]^2.
inline std::string report_to_svg(const EvalReport& report, int size_px = 480) {
  int margin = 40;
  int plot = size_px - 2 * margin;
  auto px = [&](double v) { return margin + v * plot; };
  auto py = [&](double v) { return size_px - margin - v * plot; };
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?><!-- dronedet.prcurve-svg.v1 -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px
     << "\" height=\"" << size_px << "\">\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot
     << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << size_px / 2 << "\" y=\"" << size_px - 8
     << "\" text-anchor=\"middle\">recall</text>\n";
  os << "<text x=\"12\" y=\"" << size_px / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 12 "
     << size_px / 2 << ")\">precision</text>\n";
  for (std::size_t t = 0; t < report.pr_curves.size(); ++t) {
    int level = report.pr_curves.size() > 1
                    ? static_cast<int>(200 * t / (report.pr_curves.size() - 1))
                    : 0;
    os << "<polyline fill=\"none\" stroke=\"rgb(" << level << "," << level
       << "," << level << ")\" points=\"";
    for (std::size_t i = 0; i < report.pr_curves[t].size(); ++i) {
      const PrPoint& p = report.pr_curves[t][i];
      os << (i ? " " : "") << px(p.recall) << "," << py(p.precision);
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Writes report.csv and pr_curves.svg into `out_dir`.
inline void emit_report(const EvalReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec && !fs::is_directory(out_dir))
    throw_io("emit_report: cannot create directory '", out_dir, "': ",
             ec.message());
  for (const auto& [name, text] :
       {std::pair<std::string, std::string>{"report.csv", report_to_csv(report)},
        {"pr_curves.svg", report_to_svg(report)}}) {
    fs::path path = fs::path(out_dir) / name;
    std::ofstream out(path);
    if (!out) throw_io("emit_report: cannot open '", path.string(), "'");
    out << text;
    if (!out.good()) throw_io("emit_report: write failed for '", path.string(), "'");
  }
}

}  // namespace dronedet
