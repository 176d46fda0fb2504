#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dronedet/matching.hpp"
#include "dronedet/rng.hpp"

using namespace dronedet;

namespace {

double brute_iou(const Box& a, const Box& b) {
  double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  double inter = w * h;
  double u = (a.x_max - a.x_min) * (a.y_max - a.y_min) +
             (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  return u > 0 ? inter / u : 0.0;
}

// Exhaustive re-statement of the bidirectional contract, kept structurally
// separate from match(): materialize the IoU table, then (1) repeatedly pull
// the globally best unclaimed pair scanning in index order, (2) threshold
// the rest by per-anchor argmax.
std::vector<int> oracle_match(const std::vector<Box>& anchors,
                              const std::vector<Box>& gts, double thr) {
  std::size_t na = anchors.size(), ng = gts.size();
  std::vector<int> labels(na, -1);
  if (ng == 0) return labels;
  std::vector<std::vector<double>> m(na, std::vector<double>(ng));
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t g = 0; g < ng; ++g) m[a][g] = brute_iou(anchors[a], gts[g]);

  std::vector<bool> a_used(na, false), g_used(ng, false);
  for (std::size_t round = 0; round < std::min(na, ng); ++round) {
    double best = -1;
    std::size_t ba = 0, bg = 0;
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g)
        if (!a_used[a] && !g_used[g] && m[a][g] > best) {
          best = m[a][g];
          ba = a;
          bg = g;
        }
    a_used[ba] = true;
    g_used[bg] = true;
    labels[ba] = static_cast<int>(bg);
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (a_used[a]) continue;
    double best = -1;
    int bg = -1;
    for (std::size_t g = 0; g < ng; ++g)
      if (m[a][g] > best) {
        best = m[a][g];
        bg = static_cast<int>(g);
      }
    if (best >= thr) labels[a] = bg;
  }
  return labels;
}

Box random_box(Rng& rng, double min_side = 0.05) {
  double w = rng.uniform(min_side, 0.4);
  double h = rng.uniform(min_side, 0.4);
  double x = rng.uniform(0.0, 1.0 - w);
  double y = rng.uniform(0.0, 1.0 - h);
  return {x, y, x + w, y + h};
}

// Flag-matrix NMS reference.
std::vector<Detection> oracle_nms(const std::vector<Detection>& dets,
                                  double thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  std::vector<bool> dead(dets.size(), false);
  std::vector<Detection> out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (dead[order[r]]) continue;
    out.push_back(dets[order[r]]);
    for (std::size_t s = r + 1; s < order.size(); ++s)
      if (!dead[order[s]] &&
          brute_iou(dets[order[r]].box, dets[order[s]].box) > thr)
        dead[order[s]] = true;
  }
  return out;
}

}  // namespace

TEST_CASE("iou identities") {
  Box a{0.1, 0.1, 0.5, 0.5};
  CHECK(iou(a, a) == 1.0);
  Box b{0.6, 0.6, 0.9, 0.9};
  CHECK(iou(a, b) == 0.0);
  Box unit{0.0, 0.0, 1.0, 1.0};
  Box half{0.0, 0.0, 0.5, 1.0};
  CHECK(iou(unit, half) == Catch::Approx(0.5).margin(1e-12));

  Box point{0.3, 0.3, 0.3, 0.3};
  CHECK(iou(point, point) == 0.0);  // empty union convention

  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    Box p = random_box(rng), q = random_box(rng);
    CHECK(iou(p, q) == Catch::Approx(iou(q, p)).margin(0.0));
    CHECK(iou(p, q) >= 0.0);
    CHECK(iou(p, q) <= 1.0);
    CHECK(iou(p, p) == 1.0);
  }
}

TEST_CASE("match assigns a coincident anchor and leaves the rest negative") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3},
                              {0.5, 0.5, 0.7, 0.7},
                              {0.0, 0.6, 0.2, 0.8}};
  std::vector<Box> gts = {{0.1, 0.1, 0.3, 0.3}};
  MatchResult r = match(anchors, gts);
  CHECK(r.labels == std::vector<int>{0, -1, -1});
  CHECK(r.forced[0]);
  CHECK(r.offsets[0] == std::array<double, 4>{0, 0, 0, 0});
}

TEST_CASE("a ground truth below threshold still claims its best anchor") {
  std::vector<Box> anchors = {{0.0, 0.0, 0.2, 0.2}, {0.5, 0.5, 0.9, 0.9}};
  // Overlaps anchor 1 with IoU well under 0.5.
  std::vector<Box> gts = {{0.55, 0.55, 0.65, 0.65}};
  MatchResult r = match(anchors, gts);
  CHECK(r.labels[1] == 0);
  CHECK(r.forced[1]);
  CHECK(iou(anchors[1], gts[0]) < 0.5);
}

TEST_CASE("match with no ground truths is all negative") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3}};
  MatchResult r = match(anchors, {});
  CHECK(r.labels == std::vector<int>{-1});
  CHECK(r.positive_count() == 0);
}

TEST_CASE("match equals the exhaustive oracle on random instances") {
  Rng rng(4242);
  for (int trial = 0; trial < 250; ++trial) {
    std::size_t na = 1 + rng.below(30);
    std::size_t ng = rng.below(std::min<std::size_t>(na, 5) + 1);
    std::vector<Box> anchors, gts;
    for (std::size_t i = 0; i < na; ++i) anchors.push_back(random_box(rng));
    for (std::size_t g = 0; g < ng; ++g) gts.push_back(random_box(rng));

    MatchResult r = match(anchors, gts);
    CHECK(r.labels == oracle_match(anchors, gts, 0.5));

    // Every gt has at least one positive anchor; forced matches injective.
    std::vector<int> forced_per_gt(ng, 0), positives_per_gt(ng, 0);
    for (std::size_t a = 0; a < na; ++a) {
      if (r.labels[a] < 0) continue;
      ++positives_per_gt[r.labels[a]];
      if (r.forced[a]) ++forced_per_gt[r.labels[a]];
      if (!r.forced[a])
        CHECK(iou(anchors[a], gts[r.labels[a]]) >= 0.5);
    }
    for (std::size_t g = 0; g < ng; ++g) {
      CHECK(positives_per_gt[g] >= 1);
      CHECK(forced_per_gt[g] == 1);
    }
  }
}

TEST_CASE("encode of the anchor itself is the zero offset") {
  BoxCodec codec;
  Box a{0.2, 0.2, 0.4, 0.4};
  auto t = codec.encode(a, a);
  for (double v : t) CHECK(v == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("half-width shift encodes to 0.5 over the center variance") {
  BoxCodec codec;
  Box a{0.2, 0.2, 0.4, 0.4};
  Box g{0.3, 0.2, 0.5, 0.4};  // shifted right by half the anchor width
  auto t = codec.encode(a, g);
  CHECK(t[0] == Catch::Approx(0.5 / codec.center_variance).margin(1e-12));
  CHECK(t[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(t[2] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("encode/decode round-trips to 1e-9") {
  BoxCodec codec;
  Rng rng(777);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Box a = random_box(rng, 0.01);
    Box g = random_box(rng, 0.01);
    Box back = codec.decode(a, codec.encode(a, g));
    worst = std::max({worst, std::abs(back.x_min - g.x_min),
                      std::abs(back.y_min - g.y_min),
                      std::abs(back.x_max - g.x_max),
                      std::abs(back.y_max - g.y_max)});
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("encode rejects degenerate anchors") {
  BoxCodec codec;
  Box zero{0.2, 0.2, 0.2, 0.4};
  Box g{0.1, 0.1, 0.3, 0.3};
  REQUIRE_THROWS_AS(codec.encode(zero, g), ValueError);
}

TEST_CASE("ssd_loss is zero-loc for perfect predictions and scales with alpha") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3}, {0.6, 0.6, 0.8, 0.8}};
  std::vector<Box> gts = {{0.12, 0.12, 0.32, 0.32}};
  MatchResult r = match(anchors, gts);
  REQUIRE(r.labels[0] == 0);
  REQUIRE(r.labels[1] == -1);

  // Perfect offsets, confidently correct classes.
  std::vector<std::array<double, 4>> preds = {r.offsets[0], {0, 0, 0, 0}};
  std::vector<std::vector<double>> scores = {{-40.0, 40.0}, {40.0, -40.0}};
  LossBreakdown l = ssd_loss(scores, preds, r, {1});
  CHECK(l.loc == 0.0);
  CHECK(l.conf == Catch::Approx(0.0).margin(1e-12));
  CHECK(l.total == Catch::Approx(0.0).margin(1e-12));

  // alpha = 0 drops the localization term entirely.
  preds[0] = {3.0, 0.0, 0.0, 0.0};
  LossConfig cfg;
  cfg.alpha = 0.0;
  LossBreakdown l2 = ssd_loss(scores, preds, r, {1}, cfg);
  CHECK(l2.total == Catch::Approx(l2.conf / 1.0).margin(1e-15));
  CHECK(l2.loc > 0.0);
}

TEST_CASE("ssd_loss five-anchor fixture equals the hand computation") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3},
                              {0.5, 0.5, 0.7, 0.7},
                              {0.0, 0.5, 0.2, 0.7},
                              {0.5, 0.0, 0.7, 0.2},
                              {0.8, 0.8, 0.9, 0.9}};
  std::vector<Box> gts = {{0.1, 0.1, 0.3, 0.3}};
  MatchResult r = match(anchors, gts);
  REQUIRE(r.labels == std::vector<int>{0, -1, -1, -1, -1});

  std::vector<std::vector<double>> scores = {
      {0.0, 0.0},   // positive: CE = ln 2
      {0.0, 0.0},   // background CE = ln 2
      {0.0, 1.0},   // background CE = ln(1 + e)
      {0.0, -1.0},  // background CE = ln(1 + e^-1)
      {0.0, 2.0},   // background CE = ln(1 + e^2)
  };
  std::vector<std::array<double, 4>> preds(5, {0, 0, 0, 0});
  preds[0] = {r.offsets[0][0] + 0.5, r.offsets[0][1], r.offsets[0][2],
              r.offsets[0][3]};

  // N = 1, so mining keeps the 3 hardest negatives: anchors 4, 2, 1.
  double conf = std::log(2.0) + std::log(1.0 + std::exp(2.0)) +
                std::log(1.0 + std::exp(1.0)) + std::log(2.0);
  double loc = 0.5 * 0.5 * 0.5;  // smooth-L1 of 0.5
  LossBreakdown l = ssd_loss(scores, preds, r, {1});
  CHECK(l.conf == Catch::Approx(conf).margin(1e-12));
  CHECK(l.loc == Catch::Approx(loc).margin(1e-12));
  CHECK(l.total == Catch::Approx(conf + loc).margin(1e-12));
}

TEST_CASE("ssd_loss is non-negative on random predictions") {
  Rng rng(606);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t na = 2 + rng.below(12);
    std::vector<Box> anchors, gts;
    for (std::size_t a = 0; a < na; ++a) anchors.push_back(random_box(rng));
    std::size_t ng = 1 + rng.below(3);
    for (std::size_t g = 0; g < ng && g < na; ++g)
      gts.push_back(random_box(rng));
    MatchResult m = match(anchors, gts);
    std::vector<std::vector<double>> scores(na);
    std::vector<std::array<double, 4>> preds(na);
    for (std::size_t a = 0; a < na; ++a) {
      scores[a] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
      for (double& v : preds[a]) v = rng.uniform(-2, 2);
    }
    std::vector<int> classes(gts.size(), 1);
    LossBreakdown l = ssd_loss(scores, preds, m, classes);
    CHECK(l.total >= 0.0);
    CHECK(l.conf >= 0.0);
    CHECK(l.loc >= 0.0);
  }
}

TEST_CASE("ssd_loss without positives is defined as zero") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3}};
  MatchResult r = match(anchors, {});
  LossBreakdown l = ssd_loss({{0.0, 0.0}}, {{0, 0, 0, 0}}, r, {});
  CHECK(l.total == 0.0);
}

TEST_CASE("ssd_loss validates anchor-aligned shapes") {
  std::vector<Box> anchors = {{0.1, 0.1, 0.3, 0.3}};
  MatchResult r = match(anchors, {{0.1, 0.1, 0.3, 0.3}});
  REQUIRE_THROWS_AS(
      ssd_loss({{0.0, 0.0}, {0.0, 0.0}}, {{0, 0, 0, 0}}, r, {1}),
      ShapeError);
}

TEST_CASE("nms keeps a single detection and resolves duplicates by score") {
  Detection d1{"img", {0.1, 0.1, 0.3, 0.3}, 0.9, 1, 0};
  CHECK(nms({d1}, 0.5).size() == 1);

  Detection d2 = d1;
  d2.score = 0.8;
  auto kept = nms({d2, d1}, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms equals the flag-matrix reference on random sets") {
  Rng rng(888);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Detection> dets;
    std::size_t n = 1 + rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      Detection d;
      d.image_id = "img";
      d.box = random_box(rng);
      d.score = rng.uniform01();
      d.id = static_cast<long long>(i);
      dets.push_back(d);
    }
    double thr = rng.uniform(0.1, 0.7);
    auto got = nms(dets, thr);
    auto want = oracle_nms(dets, thr);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == want[i].id);
  }
}
