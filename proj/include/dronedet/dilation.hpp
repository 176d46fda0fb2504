#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dronedet/errors.hpp"

namespace dronedet {

// Maximum-distance sequence of the hybrid-dilated-convolution constraint.
// With rates r_1..r_n (r_1 nearest the input) the recursion runs from the
// boundary M_n = r_n down to M_1:
//
//   M_i = max[ M_{i+1} - 2 r_i,  M_{i+1} - 2 (M_{i+1} - r_i),  r_i ]
//
// Returned in index order M_1..M_n.
inline std::vector<int> hdc_distances(const std::vector<int>& rates,
                                      int kernel) {
  if (rates.empty()) throw_value("hdc_distances: empty rate sequence");
  if (kernel < 3 || kernel % 2 == 0)
    throw_value("hdc_distances: kernel must be odd and >= 3, got ", kernel);
  for (int r : rates)
    if (r < 1) throw_value("hdc_distances: rates must be >= 1, got ", r);

  std::vector<int> m(rates.size());
  m.back() = rates.back();
  for (int i = static_cast<int>(rates.size()) - 2; i >= 0; --i) {
    int next = m[i + 1];
    int r = rates[i];
    m[i] = std::max({next - 2 * r, next - 2 * (next - r), r});
  }
  return m;
}

struct HdcWitness {
  bool pass = false;
  int m2 = 0;  // 0 when the sequence has length 1 (M_2 undefined)
  int kernel = 0;
  std::vector<int> distances;
  std::string reason;
};

// The published condition is M_2 <= K; its gap-filling argument additionally
// assumes the innermost convolution is undilated (its kernel covers K
// contiguous cells), so r_1 = 1 is required as well. Length-1 sequences pass
// vacuously: a single dilated kernel has no serial gridding to check.
inline HdcWitness hdc_check(const std::vector<int>& rates, int kernel) {
  HdcWitness w;
  w.kernel = kernel;
  w.distances = hdc_distances(rates, kernel);
  if (rates.size() == 1) {
    w.pass = true;
    w.reason = "single layer, vacuously valid";
    return w;
  }
  w.m2 = w.distances[1];
  if (rates.front() != 1) {
    w.pass = false;
    w.reason = detail::cat("innermost rate ", rates.front(),
                           " != 1; the M_2 bound assumes a contiguous "
                           "bottom kernel");
    return w;
  }
  w.pass = w.m2 <= kernel;
  w.reason = detail::cat("M_2 = ", w.m2, w.pass ? " <= K = " : " > K = ",
                         kernel);
  return w;
}

// Touch-count map of the center output cell of a serial dilated-conv stack
// (all strides 1, padded): counts[cell] = number of distinct tap paths from
// the output cell down to that input cell.
struct CoverageMap {
  int grid_size = 0;
  int center = 0;
  std::vector<long long> counts;  // grid_size x grid_size, row-major

  long long at(int y, int x) const { return counts[static_cast<std::size_t>(y) * grid_size + x]; }
  long long& at(int y, int x) { return counts[static_cast<std::size_t>(y) * grid_size + x]; }

  long long total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
  }

  // Bounding box of nonzero cells: {y0, x0, y1, x1} inclusive.
  std::array<int, 4> nonzero_bbox() const {
    int y0 = grid_size, x0 = grid_size, y1 = -1, x1 = -1;
    for (int y = 0; y < grid_size; ++y)
      for (int x = 0; x < grid_size; ++x)
        if (at(y, x) != 0) {
          y0 = std::min(y0, y);
          x0 = std::min(x0, x);
          y1 = std::max(y1, y);
          x1 = std::max(x1, x);
        }
    return {y0, x0, y1, x1};
  }

  // A hole is a zero-count cell inside the bounding box of nonzero cells.
  bool has_interior_zero() const {
    auto [y0, x0, y1, x1] = nonzero_bbox();
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (at(y, x) == 0) return true;
    return false;
  }

  long long min_interior_count() const {
    auto [y0, x0, y1, x1] = nonzero_bbox();
    long long best = -1;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (best < 0 || at(y, x) < best) best = at(y, x);
    return best;
  }
};

// Half-extent of the stacked receptive field: sum of r_i * (k-1)/2.
inline int coverage_half_extent(const std::vector<int>& rates, int kernel) {
  int half = 0;
  for (int r : rates) half += r * (kernel - 1) / 2;
  return half;
}

inline CoverageMap coverage_map(const std::vector<int>& rates, int kernel,
                                int grid_size) {
  if (rates.empty()) throw_value("coverage_map: empty rate sequence");
  if (kernel < 3 || kernel % 2 == 0)
    throw_value("coverage_map: kernel must be odd and >= 3");
  int half = coverage_half_extent(rates, kernel);
  int center = grid_size / 2;
  if (center - half < 0 || center + half >= grid_size)
    throw_value("coverage_map: grid size ", grid_size,
                " too small for receptive-field half extent ", half,
                " (need >= ", 2 * half + 1, ")");

  CoverageMap map;
  map.grid_size = grid_size;
  map.center = center;
  map.counts.assign(static_cast<std::size_t>(grid_size) * grid_size, 0);
  map.at(center, center) = 1;

  // Walking from the output cell toward the input, each layer fans every
  // reached cell out to its kernel taps; counts accumulate per path.
  int reach = kernel / 2;
  for (auto it = rates.rbegin(); it != rates.rend(); ++it) {
    int r = *it;
    CoverageMap next = map;
    next.counts.assign(map.counts.size(), 0);
    for (int y = 0; y < grid_size; ++y)
      for (int x = 0; x < grid_size; ++x) {
        long long c = map.at(y, x);
        if (c == 0) continue;
        for (int ky = -reach; ky <= reach; ++ky)
          for (int kx = -reach; kx <= reach; ++kx)
            next.at(y + ky * r, x + kx * r) += c;
      }
    map.counts = std::move(next.counts);
  }
  return map;
}

inline CoverageMap coverage_map_auto(const std::vector<int>& rates,
                                     int kernel) {
  return coverage_map(rates, kernel,
                      2 * coverage_half_extent(rates, kernel) + 3);
}

// Dilation plan: the rates, the kernel they are designed for, and the
// max-distance sequence of the constraint recursion.
struct DilationPlan {
  std::vector<int> rates;
  int kernel = 3;
  std::vector<int> max_distances;
};

// Smallest lexicographic strictly increasing rate sequence of the given
// depth that passes hdc_check and whose coverage map is hole-free. The
// strictly-increasing form is the serial progressive design the checker is
// meant for; without it the degenerate all-ones sequence would always win.
inline DilationPlan plan_rates(int depth, int kernel, int max_rate = 8) {
  if (depth < 1) throw_value("plan_rates: depth must be >= 1");
  if (kernel < 3 || kernel % 2 == 0)
    throw_value("plan_rates: kernel must be odd and >= 3");

  std::vector<int> rates(depth);
  // Depth-first lexicographic search over strictly increasing tuples.
  std::function<bool(int, int)> fill = [&](int index, int lo) -> bool {
    if (index == depth) {
      if (!hdc_check(rates, kernel).pass) return false;
      return !coverage_map_auto(rates, kernel).has_interior_zero();
    }
    for (int r = lo; r <= max_rate; ++r) {
      rates[index] = r;
      if (fill(index + 1, r + 1)) return true;
    }
    return false;
  };
  if (!fill(0, 1))
    throw_value("plan_rates: no valid sequence of depth ", depth,
                " with rates <= ", max_rate);

  DilationPlan plan;
  plan.rates = rates;
  plan.kernel = kernel;
  plan.max_distances = hdc_distances(rates, kernel);
  return plan;
}

// ---------------------------------------------------------------------------
// Emission helpers used by the CLI.

inline std::string coverage_to_csv(const CoverageMap& map) {
  std::ostringstream os;
  os << "dronedet.coverage.v1\n";
  for (int y = 0; y < map.grid_size; ++y) {
    for (int x = 0; x < map.grid_size; ++x)
      os << (x ? "," : "") << map.at(y, x);
    os << "\n";
  }
  return os.str();
}

// Monochrome heatmap: darker cell = more tap paths.
inline std::string coverage_to_svg(const CoverageMap& map, int cell_px = 12) {
  long long peak = 0;
  for (long long c : map.counts) peak = std::max(peak, c);
  int side = map.grid_size * cell_px;
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?><!-- dronedet.coverage-svg.v1 -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side
     << "\" height=\"" << side << "\">\n";
  for (int y = 0; y < map.grid_size; ++y)
    for (int x = 0; x < map.grid_size; ++x) {
      int level = 255;
      if (peak > 0 && map.at(y, x) > 0)
        level = 235 - static_cast<int>(215 * map.at(y, x) / peak);
      os << "<rect x=\"" << x * cell_px << "\" y=\"" << y * cell_px
         << "\" width=\"" << cell_px << "\" height=\"" << cell_px
         << "\" fill=\"rgb(" << level << "," << level << "," << level
         << ")\"/>\n";
    }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dronedet
