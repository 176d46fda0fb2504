#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dronedet/pyramid.hpp"
#include "dronedet/rng.hpp"

using namespace dronedet;

namespace {

BackboneConfig small_cfg(int divider = 32) {
  BackboneConfig cfg;
  cfg.width_divider = divider;
  return cfg;
}

ArchGraph full_graph(int divider = 32) {
  return attach_fmre(attach_fms(build_backbone(small_cfg(divider))));
}

// Reachability of `target_cell` of `node_name` from an input impulse placed
// at (row, col).
bool reaches(const ArchGraph& graph, const std::string& node_name,
             std::pair<int, int> target_cell, int row, int col) {
  Grid impulse(3, graph.declared_input.height, graph.declared_input.width);
  for (int c = 0; c < 3; ++c) impulse.at(c, row, col) = 1.0;
  WeightBank empty;
  ForwardOptions opt;
  opt.probe_reachability = true;
  ArchGraph probe = graph;
  probe.named.clear();
  probe.named["__t"] = graph.id_of(node_name);
  ForwardResult r = forward(probe, impulse, empty, opt);
  const Grid& out = r.at("__t");
  for (int c = 0; c < out.channels(); ++c)
    if (out.at(c, target_cell.first, target_cell.second) != 0.0) return true;
  return false;
}

}  // namespace

TEST_CASE("backbone shape chain: eight halving maps with strides 4..512") {
  ArchGraph g = build_backbone(small_cfg());
  auto rows = shape_table(g);
  REQUIRE(rows.size() == 8);
  int want_size = 128, want_stride = 4;
  for (const ShapeRow& row : rows) {
    CHECK(row.height == want_size);
    CHECK(row.width == want_size);
    CHECK(row.stride == want_stride);
    want_size /= 2;
    want_stride *= 2;
  }
  // Uniform channel width across the pyramid.
  for (const ShapeRow& row : rows) CHECK(row.channels == rows[0].channels);
}

TEST_CASE("backbone rejects non-512 inputs") {
  BackboneConfig cfg;
  cfg.input_size = 300;
  REQUIRE_THROWS_AS(build_backbone(cfg), ValueError);
}

TEST_CASE("backbone graph is acyclic and shape-consistent") {
  ArchGraph g = build_backbone(small_cfg(64));
  for (const Node& n : g.nodes)
    for (int in : n.inputs) CHECK(in < n.id);
  // infer_shapes re-run is a fixed point.
  ArchGraph copy = g;
  infer_shapes(copy);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    CHECK(copy.nodes[i].out_shape == g.nodes[i].out_shape);
}

TEST_CASE("forward emits all maps at the tabulated sizes, deterministically") {
  ArchGraph g = full_graph(32);
  Rng rng(42);
  Grid input = Grid::random(3, 512, 512, rng, 0.0, 1.0);

  ForwardResult a = forward_pyramid(g, input, 7);
  int want = 128;
  for (int k = 1; k <= 8; ++k) {
    const Grid& of = a.at(detail::cat("of_", k));
    const Grid& enh = a.at(detail::cat("enh_", k));
    CHECK(of.height() == want);
    CHECK(of.width() == want);
    CHECK(enh.shape() == of.shape());
    want /= 2;
  }

  ForwardResult b = forward_pyramid(g, input, 7);
  for (int k = 1; k <= 8; ++k)
    CHECK(a.at(detail::cat("enh_", k)) == b.at(detail::cat("enh_", k)));
}

TEST_CASE("executed shapes equal inferred shapes for every node") {
  ArchGraph g = full_graph(64);
  Rng rng(1);
  Grid input = Grid::random(3, 512, 512, rng, 0.0, 1.0);
  WeightBank bank = init_weights(g, 3);
  ForwardOptions opt;
  opt.keep_all = true;
  ForwardResult r = forward(g, input, bank, opt);
  REQUIRE(r.by_id.size() == g.nodes.size());
  for (const Node& n : g.nodes)
    CHECK(r.by_id.at(n.id).shape() == n.out_shape);
}

TEST_CASE("fms supplement lands exactly on of_1's shape") {
  ArchGraph g = attach_fms(build_backbone(small_cfg(32)));
  const Node& supplement = g.node(g.id_of("fms_supplement"));
  const Node& of1 = g.node(g.id_of("of_1"));
  const Node& base = g.node(g.id_of("of_1_base"));
  CHECK(supplement.out_shape == base.out_shape);
  CHECK(of1.out_shape == base.out_shape);

  // The shuffled stack must carry factor^2 times the supplement channels.
  const Node& shuffle = supplement;
  REQUIRE(shuffle.kind == OpKind::PixelShuffle);
  const Node& stacked = g.node(shuffle.inputs[0]);
  CHECK(stacked.out_shape.channels == 4 * supplement.out_shape.channels);
  CHECK(stacked.out_shape.channels % 4 == 0);
}

TEST_CASE("fms rejects incompatible taps") {
  FmsSpec bad;
  bad.bb1 = "c2";  // 128x128 vs j3 at 64x64
  REQUIRE_THROWS_AS(attach_fms(build_backbone(small_cfg(64)), bad),
                    ShapeError);
  FmsSpec gridding;
  gridding.serial_rates = {3, 3, 3};
  REQUIRE_THROWS_AS(attach_fms(build_backbone(small_cfg(64)), gridding),
                    ValueError);
}

TEST_CASE("an impulse at a bb2 cell reaches of_1 only inside its field") {
  ArchGraph g = attach_fms(build_backbone(small_cfg(64)));
  int j3 = g.id_of("j3");
  const GridShape& s = g.node(j3).out_shape;
  REQUIRE(s.height == 64);

  Grid delta(s.channels, s.height, s.width);
  delta.at(0, 32, 32) = 1.0;
  std::map<int, Grid> overrides;
  overrides[j3] = delta;

  ForwardOptions opt;
  opt.probe_reachability = true;
  opt.overrides = &overrides;
  WeightBank empty;
  Grid zero(3, 512, 512);
  ForwardResult r = forward(g, zero, empty, opt);

  // Supplement path: dilated conv (+-2) then serial rates 1 and 2 (+-3)
  // at the tap resolution, then the x2 shuffle: |cell - 2*32| <= 2*5 + 1.
  const Grid& of1 = r.at("of_1");
  int activated = 0;
  for (int y = 0; y < of1.height(); ++y)
    for (int x = 0; x < of1.width(); ++x) {
      bool on = false;
      for (int c = 0; c < of1.channels() && !on; ++c)
        on = of1.at(c, y, x) != 0.0;
      if (!on) continue;
      ++activated;
      CHECK(std::abs(y - 64) <= 11);
      CHECK(std::abs(x - 64) <= 11);
    }
  CHECK(activated > 0);
}

TEST_CASE("fms strictly widens the receptive field of an of_1 cell") {
  ArchGraph pre = build_backbone(small_cfg(64));
  ArchGraph post = attach_fms(pre);

  // The field of of_1 cell (0,0) along row 0 is a contiguous prefix; find
  // its pre-attachment right edge by bisection.
  auto reach_pre = [&](int x) { return reaches(pre, "of_1", {0, 0}, 0, x); };
  REQUIRE(reach_pre(0));
  int lo = 0, hi = 511;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (reach_pre(mid)) lo = mid;
    else hi = mid - 1;
  }
  int pre_edge = lo;
  REQUIRE(pre_edge < 511);
  REQUIRE_FALSE(reach_pre(pre_edge + 1));

  bool extended = false;
  for (int x = pre_edge + 1; x <= std::min(511, pre_edge + 64) && !extended; ++x)
    extended = reaches(post, "of_1", {0, 0}, 0, x);
  CHECK(extended);
}

TEST_CASE("fmre enhancement keeps every map shape and 4x concat width") {
  ArchGraph g = full_graph(32);
  for (int k = 1; k <= 8; ++k) {
    const Node& of = g.node(g.id_of(detail::cat("of_", k)));
    const Node& enh = g.node(g.id_of(detail::cat("enh_", k)));
    CHECK(enh.out_shape == of.out_shape);
    if (k >= 2) {
      const Node& btu = g.node(g.id_of(detail::cat("btu_", k)));
      CHECK(btu.out_shape == of.out_shape);
      const Node& stacked = g.node(g.id_of(detail::cat("utb_concat_", k)));
      CHECK(stacked.out_shape.channels == 4 * of.out_shape.channels);
    }
  }
}

TEST_CASE("a zero upper map with a zero up-path leaves the lower map unchanged") {
  ArchGraph g = full_graph(64);
  WeightBank bank = init_weights(g, 11);

  // Zero every parameter of the up-to-bottom path feeding utb_1 (the nodes
  // between utb_2 and utb_1) and zero all batchnorm shifts on it.
  int utb2 = g.id_of("utb_2");
  int utb1 = g.id_of("utb_1");
  for (const Node& n : g.nodes) {
    if (n.id <= utb2 || n.id >= utb1) continue;
    NodeParams& p = bank.at(n.id);
    for (double& v : p.weights) v = 0.0;
    for (double& v : p.bias) v = 0.0;
    for (double& v : p.shift) v = 0.0;
  }

  // Replace the upper map with zeros.
  std::map<int, Grid> overrides;
  const GridShape& us = g.node(utb2).out_shape;
  overrides[utb2] = Grid(us.channels, us.height, us.width, 0.0);

  ForwardOptions opt;
  opt.overrides = &overrides;
  opt.keep_all = true;
  Rng rng(5);
  Grid input = Grid::random(3, 512, 512, rng, 0.0, 1.0);
  ForwardResult r = forward(g, input, bank, opt);

  const Grid& lower = r.by_id.at(g.id_of("btu_1"));
  const Grid& enhanced = r.by_id.at(utb1);
  CHECK(enhanced == lower);
}

TEST_CASE("every registered dilation sequence satisfies the constraint") {
  ArchGraph g = full_graph(64);
  CHECK(g.registered_rate_sequences.size() >= 5);
  for (const auto& rates : g.registered_rate_sequences) {
    INFO("rates of size " << rates.size());
    CHECK(hdc_check(rates, 3).pass);
  }
}

TEST_CASE("doubling a head's weights doubles its pre-activation outputs") {
  std::vector<int> apc = {4, 6, 6, 6, 6, 6, 4, 4};
  ArchGraph g = attach_prediction_heads(full_graph(64), apc);
  const Node& cls1 = g.node(g.id_of("head_cls_1"));
  CHECK(cls1.out_shape.channels == 4 * 2);

  Rng rng(9);
  Grid input = Grid::random(3, 512, 512, rng, 0.0, 1.0);
  WeightBank bank = init_weights(g, 21);
  ForwardResult base = forward(g, input, bank);

  WeightBank doubled = bank;
  for (double& w : doubled.at(g.id_of("head_cls_1")).weights) w *= 2.0;
  ForwardResult twice = forward(g, input, doubled);

  const Grid& a = base.at("head_cls_1");
  const Grid& b = twice.at("head_cls_1");
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.values().size(); ++i)
    CHECK(b.values()[i] == 2.0 * a.values()[i]);
  CHECK(base.at("head_loc_1") == twice.at("head_loc_1"));
}

TEST_CASE("graph serialization covers the full pyramid") {
  ArchGraph g = full_graph(64);
  std::string text = serialize_graph(g);
  ArchGraph parsed = parse_graph(text);
  CHECK(parsed.nodes.size() == g.nodes.size());
  CHECK(serialize_graph(parsed) == text);
  CHECK(parsed.id_of("enh_8") == g.id_of("enh_8"));
}
