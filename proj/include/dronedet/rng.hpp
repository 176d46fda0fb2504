#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dronedet {

// Deterministic random source. mt19937_64 output is fully specified by the
// standard; the derived draws below avoid std distributions, whose exact
// sequences are implementation-defined, so that identical seeds give
// bit-identical results on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    // Multiply-shift; bias is negligible for desk-scale n and the mapping is
    // pinned here rather than delegated to the standard library.
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(6.283185307179586476925287 * u2);
    have_spare_ = true;
    return mean + stddev * mag * std::cos(6.283185307179586476925287 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream, e.g. one per graph node or per image.
  Rng fork(std::uint64_t stream_id) {
    std::uint64_t mixed = engine_() ^ (stream_id * 0x9e3779b97f4a7c15ULL);
    mixed ^= mixed >> 30;
    mixed *= 0xbf58476d1ce4e5b9ULL;
    mixed ^= mixed >> 27;
    return Rng(mixed);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dronedet
