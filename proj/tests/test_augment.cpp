#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dronedet/augment.hpp"
#include "dronedet/rng.hpp"

using namespace dronedet;

namespace {

Sample make_sample(int h, int w, Rng& rng, std::vector<Box> gts) {
  Sample s;
  s.image = Grid::random(3, h, w, rng, 0.0, 1.0);
  s.gts = std::move(gts);
  s.gt_classes.assign(s.gts.size(), 1);
  return s;
}

double image_mean(const Grid& g) {
  double sum = 0.0;
  for (double v : g.values()) sum += v;
  return sum / static_cast<double>(g.values().size());
}

double image_variance(const Grid& g) {
  double mean = image_mean(g);
  double acc = 0.0;
  for (double v : g.values()) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(g.values().size());
}

}  // namespace

TEST_CASE("anchor_based_crop closed form: drone 0.2, rho 0.5, side 0.4") {
  Rng rng(1);
  Sample s = make_sample(100, 100, rng, {{0.4, 0.4, 0.6, 0.6}});
  CropOutcome crop = anchor_based_crop_at(s, 0, 0.5);
  CHECK(crop.window.width() == Catch::Approx(0.4).margin(1e-9));
  CHECK(crop.sample.image.width() == 40);
  CHECK(crop.sample.image.height() == 40);
  REQUIRE(crop.sample.gts.size() == 1);
  // The drone now spans half the crop, centered.
  CHECK(crop.sample.gts[0].x_min == Catch::Approx(0.25).margin(1e-9));
  CHECK(crop.sample.gts[0].x_max == Catch::Approx(0.75).margin(1e-9));
  // Pixels are copied verbatim from the window.
  CHECK(crop.sample.image.at(0, 0, 0) == s.image.at(0, 30, 30));
}

TEST_CASE("crop ratio draw is uniform over its five values") {
  Rng rng(2024);
  Sample s = make_sample(24, 24, rng, {{0.4, 0.4, 0.6, 0.6}});
  std::map<double, int> freq;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CropOutcome c = anchor_based_crop_traced(s, rng);
    ++freq[c.rho];
  }
  REQUIRE(freq.size() == 5);
  double expected = n / 5.0;
  double sigma = std::sqrt(n * 0.2 * 0.8);
  for (const auto& [rho, count] : freq) {
    INFO("rho = " << rho);
    CHECK(std::abs(count - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("the selected drone is always retained") {
  Rng rng(5150);
  for (int trial = 0; trial < 200; ++trial) {
    double w = rng.uniform(0.05, 0.5);
    double h = rng.uniform(0.05, 0.5);
    double x = rng.uniform(0.0, 1.0 - w);
    double y = rng.uniform(0.0, 1.0 - h);
    Sample s = make_sample(32, 32, rng, {{x, y, x + w, y + h}});
    CropOutcome c = anchor_based_crop_traced(s, rng);
    CHECK(!c.sample.gts.empty());
    for (const Box& b : c.sample.gts) {
      CHECK(b.valid());
      CHECK(b.x_min >= 0.0);
      CHECK(b.y_min >= 0.0);
      CHECK(b.x_max <= 1.0);
      CHECK(b.y_max <= 1.0);
    }
  }
}

TEST_CASE("anchor_based_crop requires ground truths") {
  Rng rng(3);
  Sample s = make_sample(16, 16, rng, {});
  REQUIRE_THROWS_AS(anchor_based_crop(s, rng), ValueError);
}

TEST_CASE("gaussian_blur leaves constant images unchanged") {
  Sample s;
  s.image = Grid(3, 12, 12, 0.37);
  Sample out = gaussian_blur(s, 2.0);
  for (double v : out.image.values())
    CHECK(v == Catch::Approx(0.37).margin(1e-12));
}

TEST_CASE("gaussian_blur of a delta reproduces a unit-mass kernel") {
  Sample s;
  s.image = Grid(1, 21, 21, 0.0);
  s.image.at(0, 10, 10) = 1.0;
  Sample out = gaussian_blur(s, 1.5);
  double sum = 0.0;
  for (double v : out.image.values()) sum += v;
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  // Peak stays at the center.
  for (double v : out.image.values()) CHECK(v <= out.image.at(0, 10, 10));
}

TEST_CASE("gaussian_blur reduces variance and preserves the mean") {
  Rng rng(9);
  Sample s = make_sample(24, 24, rng, {});
  Sample out = gaussian_blur(s, 1.5);
  CHECK(image_variance(out.image) < image_variance(s.image));
  CHECK(image_mean(out.image) == Catch::Approx(image_mean(s.image)).margin(1e-6));
  CHECK(out.gts == s.gts);
}

TEST_CASE("horizontal_flip mirrors boxes and is an involution") {
  Rng rng(10);
  Sample s = make_sample(16, 16, rng, {{0.1, 0.2, 0.3, 0.4}});
  Sample flipped = horizontal_flip(s);
  REQUIRE(flipped.gts.size() == 1);
  CHECK(flipped.gts[0].x_min == Catch::Approx(0.7).margin(1e-12));
  CHECK(flipped.gts[0].y_min == Catch::Approx(0.2).margin(1e-12));
  CHECK(flipped.gts[0].x_max == Catch::Approx(0.9).margin(1e-12));
  CHECK(flipped.gts[0].y_max == Catch::Approx(0.4).margin(1e-12));

  Sample twice = horizontal_flip(flipped);
  CHECK(twice.image == s.image);
  for (std::size_t i = 0; i < s.gts.size(); ++i) {
    CHECK(twice.gts[i].x_min == Catch::Approx(s.gts[i].x_min).margin(1e-12));
    CHECK(twice.gts[i].x_max == Catch::Approx(s.gts[i].x_max).margin(1e-12));
  }
}

TEST_CASE("color_jitter with zero amplitudes is the identity") {
  Rng rng(11);
  Sample s = make_sample(8, 8, rng, {});
  AugmentConfig cfg;
  cfg.brightness_delta = 0.0;
  cfg.contrast_range = 0.0;
  cfg.saturation_range = 0.0;
  Sample out = color_jitter(s, rng, cfg);
  for (std::size_t i = 0; i < s.image.values().size(); ++i)
    CHECK(out.image.values()[i] ==
          Catch::Approx(s.image.values()[i]).margin(1e-12));
}

TEST_CASE("color_jitter stays inside [0,1]") {
  Rng rng(12);
  Sample s = make_sample(8, 8, rng, {});
  for (int i = 0; i < 20; ++i) {
    Sample out = color_jitter(s, rng);
    for (double v : out.image.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("pipeline emits the configured output size and valid boxes") {
  Rng rng(13);
  Sample s = make_sample(20, 20, rng, {{0.2, 0.2, 0.5, 0.6}});
  AugmentConfig cfg;
  cfg.out_size = 64;
  for (int i = 0; i < 30; ++i) {
    PipelineResult r = pipeline(s, rng, cfg);
    CHECK(r.sample.image.height() == 64);
    CHECK(r.sample.image.width() == 64);
    CHECK(r.sample.image.channels() == 3);
    for (const Box& b : r.sample.gts) {
      CHECK(b.valid());
      CHECK(b.x_min >= 0.0);
      CHECK(b.x_max <= 1.0);
      CHECK(b.y_min >= 0.0);
      CHECK(b.y_max <= 1.0);
    }
    for (double v : r.sample.image.values()) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("pipeline default resize target is 512") {
  Rng rng(14);
  Sample s = make_sample(10, 10, rng, {{0.3, 0.3, 0.6, 0.6}});
  PipelineResult r = pipeline(s, rng);
  CHECK(r.sample.image.height() == 512);
  CHECK(r.sample.image.width() == 512);
}

TEST_CASE("pipeline is deterministic under a fixed seed") {
  Rng rng_a(99), rng_b(99);
  Rng mk(15);
  Sample s = make_sample(16, 16, mk, {{0.25, 0.25, 0.75, 0.75}});
  AugmentConfig cfg;
  cfg.out_size = 32;
  PipelineResult a = pipeline(s, rng_a, cfg);
  PipelineResult b = pipeline(s, rng_b, cfg);
  CHECK(a.sample.image == b.sample.image);
  CHECK(a.sample.gts.size() == b.sample.gts.size());
  CHECK(a.trace.crop_branch == b.trace.crop_branch);
  CHECK(a.trace.rho == b.trace.rho);
}

TEST_CASE("pipeline branch frequencies approach 3/5 vs 2/5") {
  Rng mk(16);
  Sample s = make_sample(8, 8, mk, {{0.3, 0.3, 0.7, 0.7}});
  AugmentConfig cfg;
  cfg.out_size = 8;  // keep the statistical run cheap
  Rng rng(1234);
  const int n = 20000;
  int crops = 0;
  std::map<double, int> rho_freq;
  for (int i = 0; i < n; ++i) {
    PipelineResult r = pipeline(s, rng, cfg);
    if (r.trace.crop_branch) {
      ++crops;
      ++rho_freq[r.trace.rho];
    } else {
      CHECK(r.trace.sigma >= cfg.blur_sigma_min);
      CHECK(r.trace.sigma <= cfg.blur_sigma_max);
    }
  }
  double sigma_branch = std::sqrt(n * 0.6 * 0.4);
  CHECK(std::abs(crops - 0.6 * n) <= 3.0 * sigma_branch);

  REQUIRE(rho_freq.size() == 5);
  double sigma_rho = std::sqrt(crops * 0.2 * 0.8);
  for (const auto& [rho, count] : rho_freq)
    CHECK(std::abs(count - crops / 5.0) <= 3.0 * sigma_rho);
}
