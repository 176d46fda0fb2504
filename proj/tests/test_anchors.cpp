#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dronedet/anchors.hpp"

using namespace dronedet;

TEST_CASE("scale_schedule endpoints and interior values") {
  auto s = scale_schedule(0.15, 0.95, 8);
  REQUIRE(s.size() == 8);
  CHECK(s.front() == Catch::Approx(0.15).margin(1e-12));
  CHECK(s.back() == Catch::Approx(0.95).margin(1e-12));
  CHECK(s[1] == Catch::Approx(0.15 + 0.8 / 7.0).margin(1e-9));
  for (int k = 0; k < 8; ++k)
    CHECK(s[k] == Catch::Approx(0.15 + 0.8 / 7.0 * k).margin(1e-9));

  REQUIRE_THROWS_AS(scale_schedule(0.15, 0.95, 1), ValueError);
  REQUIRE_THROWS_AS(scale_schedule(0.95, 0.15, 8), ValueError);
}

TEST_CASE("weighted_scales with unit decay is the identity") {
  auto s = scale_schedule(0.15, 0.95, 8);
  auto w = weighted_scales(s, std::vector<double>(8, 1.0));
  CHECK(w == s);
  REQUIRE_THROWS_AS(weighted_scales(s, std::vector<double>(5, 1.0)),
                    ShapeError);
}

TEST_CASE("default decay reproduces the tailored sizes after rounding") {
  auto s = scale_schedule(0.15, 0.95, 8);
  auto beta = default_beta();
  auto weighted = weighted_scales(s, beta);
  const auto& sizes = tailored_min_sizes();
  for (int k = 0; k < 8; ++k)
    CHECK(std::round(512.0 * weighted[k]) == sizes[k]);

  // The weighted scales stay strictly increasing and the decay weights
  // approach 1 with depth.
  for (int k = 1; k < 8; ++k) {
    CHECK(weighted[k] > weighted[k - 1]);
    CHECK(beta[k] > beta[k - 1]);
  }
  for (double b : beta) CHECK((b > 0.0 && b <= 1.0));
}

TEST_CASE("per-layer anchor counts match the tailored table") {
  auto configs = default_layer_configs();
  REQUIRE(configs.size() == 8);
  const long long want[8] = {65536, 24576, 6144, 1536, 384, 96, 16, 4};
  const int strides[8] = {4, 8, 16, 32, 64, 128, 256, 512};
  const int grids[8] = {128, 64, 32, 16, 8, 4, 2, 1};
  for (int i = 0; i < 8; ++i) {
    CHECK(configs[i].stride == strides[i]);
    CHECK(configs[i].grid_h == grids[i]);
    CHECK(configs[i].anchors_per_cell() ==
          static_cast<int>(configs[i].ratios.size()) + 1);
    CHECK(configs[i].anchor_count() == want[i]);
  }

  AnchorSet set = generate_anchors(configs, 512);
  REQUIRE(set.layer_ranges.size() == 8);
  long long total = 0;
  for (int i = 0; i < 8; ++i) {
    long long n = static_cast<long long>(set.layer_ranges[i].second -
                                         set.layer_ranges[i].first);
    CHECK(n == want[i]);
    total += n;
  }
  CHECK(total == 98292);
  CHECK(set.size() == 98292);
}

TEST_CASE("classic 300-input configuration yields 8732 anchors") {
  AnchorSet set = generate_anchors(ssd300_reference_configs(), 300);
  CHECK(set.size() == 8732);
}

TEST_CASE("anchor centers lie inside the unit square") {
  AnchorSet set = generate_anchors(default_layer_configs(), 512);
  for (const Box& b : set.boxes) {
    CHECK(b.center_x() >= 0.0);
    CHECK(b.center_x() <= 1.0);
    CHECK(b.center_y() >= 0.0);
    CHECK(b.center_y() <= 1.0);
    CHECK(b.valid());
    CHECK(b.x_min >= 0.0);
    CHECK(b.x_max <= 1.0);
  }
}

TEST_CASE("pre-clip boxes have the exact requested area and ratio") {
  auto configs = default_layer_configs();
  AnchorSet raw = generate_anchors(configs, 512, /*clip=*/false);
  for (std::size_t l = 0; l < configs.size(); ++l) {
    const LayerAnchorConfig& c = configs[l];
    auto [begin, end] = raw.layer_ranges[l];
    int per_cell = c.anchors_per_cell();
    for (std::size_t a = begin; a < end; ++a) {
      int slot = static_cast<int>((a - begin) % per_cell);
      const Box& b = raw.boxes[a];
      double area_px = b.area() * 512.0 * 512.0;
      double ratio = b.width() / b.height();
      if (slot < static_cast<int>(c.ratios.size())) {
        CHECK(area_px == Catch::Approx(c.min_size * c.min_size).margin(1e-9 * c.min_size * c.min_size + 1e-9));
        CHECK(ratio == Catch::Approx(c.ratios[slot]).margin(1e-9));
      } else {
        CHECK(area_px == Catch::Approx(c.min_size * c.max_size).margin(1e-9 * c.min_size * c.max_size + 1e-9));
        CHECK(ratio == Catch::Approx(1.0).margin(1e-9));
      }
    }
  }
}

TEST_CASE("enumeration order is layer-major, row-major, ratio-minor") {
  auto configs = default_layer_configs();
  AnchorSet raw = generate_anchors(configs, 512, /*clip=*/false);

  // First cell of of_1 sits at stride 4: center (0.5*4/512, 0.5*4/512).
  double c0 = 0.5 * 4.0 / 512.0;
  const Box& first = raw.boxes[0];
  CHECK(first.center_x() == Catch::Approx(c0).margin(1e-12));
  CHECK(first.center_y() == Catch::Approx(c0).margin(1e-12));
  CHECK(first.width() == Catch::Approx(28.0 / 512.0).margin(1e-12));

  // Second box of the cell is the 1:2 ratio, then 2:1, then the extra box.
  CHECK(raw.boxes[1].width() / raw.boxes[1].height() ==
        Catch::Approx(0.5).margin(1e-12));
  CHECK(raw.boxes[2].width() / raw.boxes[2].height() ==
        Catch::Approx(2.0).margin(1e-12));
  CHECK(raw.boxes[3].width() ==
        Catch::Approx(std::sqrt(28.0 * 56.0) / 512.0).margin(1e-12));

  // Fifth box starts the next cell to the right (row-major).
  CHECK(raw.boxes[4].center_x() == Catch::Approx(1.5 * 4.0 / 512.0).margin(1e-12));
  CHECK(raw.boxes[4].center_y() == Catch::Approx(c0).margin(1e-12));

  // Layer ranges are consecutive and in layer order.
  for (std::size_t l = 1; l < raw.layer_ranges.size(); ++l)
    CHECK(raw.layer_ranges[l].first == raw.layer_ranges[l - 1].second);
  CHECK(raw.layer_of(0) == 0);
  CHECK(raw.layer_of(raw.size() - 1) == 7);
}
