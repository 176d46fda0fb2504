#pragma once

#include <string>
#include <vector>

#include "dronedet/dilation.hpp"
#include "dronedet/errors.hpp"
#include "dronedet/graph.hpp"

namespace dronedet {

// Configuration of the modified encoder-decoder backbone. width_divider
// scales every channel count down uniformly so the graph stays executable
// at desk scale; the spatial calculus is identical at any width.
struct BackboneConfig {
  int input_size = 512;
  int width_divider = 16;
  std::vector<int> center_rates = {1, 2, 3};  // relocated dilated block
};

// Feature-maps-supplement attachment. Two backbone taps at the same
// resolution feed two parallel Submap chains; their concatenation is
// pixel-shuffled up and added onto the first pyramid level.
struct FmsSpec {
  std::string bb1 = "c3";  // encoder-side junction tap
  std::string bb2 = "j3";  // decoder-side junction tap (deeper)
  int bb2_dilation = 2;    // lone dilated conv applied to bb2 before fusion
  std::vector<int> serial_rates = {1, 2};
  int shuffle_factor = 2;
};

// Feature-maps-recombination-enhancement attachment.
struct FmreSpec {
  std::vector<int> up_to_bottom_rates = {1, 2, 3};
  // Strided dilated conv replacing pooling on the bottom-to-up path; halves
  // the spatial size exactly: k=3, d=2, s=2, p=2.
  int down_kernel = 3;
  int down_dilation = 2;
  int down_stride = 2;
  int down_padding = 2;
  int head_kernel = 3;  // normalization head: 3x3 conv + mish
};

namespace detail {

inline int scaled(int base_channels, int divider) {
  return std::max(1, base_channels / divider);
}

// conv + inference-mode batchnorm + relu
inline int conv_bn_relu(GraphBuilder& b, int in, int out_c, int k, int s,
                        int d, int p) {
  return b.relu(b.batchnorm(b.conv(in, out_c, k, s, d, p)));
}

inline int bottleneck(GraphBuilder& b, int in, int mid_c, int out_c,
                      int stride) {
  int x = conv_bn_relu(b, in, mid_c, 1, 1, 1, 0);
  x = conv_bn_relu(b, x, mid_c, 3, stride, 1, 1);
  x = b.batchnorm(b.conv(x, out_c, 1, 1, 1, 0));
  int shortcut = in;
  if (b.channels_of(in) != out_c || stride != 1)
    shortcut = b.batchnorm(b.conv(in, out_c, 1, stride, 1, 0));
  return b.relu(b.add(x, shortcut));
}

inline int encoder_stage(GraphBuilder& b, int in, int mid_c, int out_c,
                         int blocks, int stride) {
  int x = bottleneck(b, in, mid_c, out_c, stride);
  for (int i = 1; i < blocks; ++i) x = bottleneck(b, x, mid_c, out_c, 1);
  return x;
}

// LinkNet decoder block: 1x1 squeeze, stride-2 transposed 3x3, 1x1 expand.
inline int decoder_block(GraphBuilder& b, int in, int out_c) {
  int mid = std::max(1, b.channels_of(in) / 4);
  int x = conv_bn_relu(b, in, mid, 1, 1, 1, 0);
  x = b.relu(b.batchnorm(b.conv_transpose(x, mid, 3, 2)));
  return conv_bn_relu(b, x, out_c, 1, 1, 1, 0);
}

// Cascaded dilated block with partial-sum shortcuts: out = x + c1 + c2 + c3
// where c_{i} = relu(conv3x3(c_{i-1}, dilation = rates[i])).
inline int dilated_cascade(GraphBuilder& b, int in,
                           const std::vector<int>& rates) {
  int channels = b.channels_of(in);
  int sum = in;
  int cur = in;
  for (int r : rates) {
    cur = b.relu(b.conv3x3(cur, channels, 1, r));
    sum = b.add(sum, cur);
  }
  b.register_rates(rates);
  return sum;
}

}  // namespace detail

// Builds the modified backbone graph for a 3x512x512 input:
//  - deep-residual encoder (stem + 3/4/6/3 bottleneck stages),
//  - decoder truncated after the stride-4 block, so the first feature map
//    is 128x128 instead of a further-upsampled one,
//  - the deepest skip connection removed,
//  - the dilated center block relocated onto the shallow (stride-4)
//    encoder-decoder connection,
//  - stride-2 feature extraction layers continuing the halving chain down
//    to 1x1 (of_1..of_8, all with the same channel count).
inline ArchGraph build_backbone(const BackboneConfig& cfg = {}) {
  if (cfg.input_size != 512)
    throw_value("build_backbone: the shape table is defined for 512x512 "
                "input, got ", cfg.input_size);
  if (!hdc_check(cfg.center_rates, 3).pass)
    throw_value("build_backbone: center rates fail the dilation constraint");
  const int d = cfg.width_divider;
  if (d < 1) throw_value("build_backbone: width divider must be >= 1");

  GraphBuilder b(3, cfg.input_size, cfg.input_size);

  // Stem: 7x7/2 + pool/2 -> stride 4.
  int stem = detail::conv_bn_relu(b, b.input(), detail::scaled(64, d), 7, 2, 1, 3);
  int pooled = b.maxpool(stem, 3, 2, 1);

  int c2 = detail::encoder_stage(b, pooled, detail::scaled(64, d),
                                 detail::scaled(256, d), 3, 1);
  int c3 = detail::encoder_stage(b, c2, detail::scaled(128, d),
                                 detail::scaled(512, d), 4, 2);
  int c4 = detail::encoder_stage(b, c3, detail::scaled(256, d),
                                 detail::scaled(1024, d), 6, 2);
  int c5 = detail::encoder_stage(b, c4, detail::scaled(512, d),
                                 detail::scaled(2048, d), 3, 2);
  b.name("c2", c2);
  b.name("c3", c3);
  b.name("c4", c4);
  b.name("c5", c5);

  // Decoder. The deepest block keeps no skip connection; the middle one
  // fuses with the encoder at stride 8.
  int d4 = detail::decoder_block(b, c5, detail::scaled(1024, d));
  int d3 = detail::decoder_block(b, d4, detail::scaled(512, d));
  int j3 = b.add(d3, c3);
  b.name("d4", d4);
  b.name("j3", j3);

  int d2 = detail::decoder_block(b, j3, detail::scaled(256, d));

  // Relocated center block on the shallow connection.
  int center = detail::dilated_cascade(b, c2, cfg.center_rates);
  int of1 = b.add(d2, center);
  b.name("of_1", of1);
  b.name("of_1_base", of1);

  // Extra feature layers: 1x1 squeeze + 3x3/2, keeping the channel count.
  int channels = b.channels_of(of1);
  int cur = of1;
  for (int k = 2; k <= 8; ++k) {
    int squeezed = detail::conv_bn_relu(b, cur, std::max(1, channels / 2), 1,
                                        1, 1, 0);
    cur = detail::conv_bn_relu(b, squeezed, channels, 3, 2, 1, 1);
    b.name(dronedet::detail::cat("of_", k), cur);
  }

  return b.take();
}

// Adds the feature-maps-supplement paths onto of_1. The attachment point
// named "of_1" moves to the enhanced sum; the pre-supplement map stays
// addressable as of_1_base (the deeper extraction layers keep consuming
// it).
inline ArchGraph attach_fms(ArchGraph graph, const FmsSpec& spec = {}) {
  if (!hdc_check(spec.serial_rates, 3).pass)
    throw_value("attach_fms: serial rates fail the dilation constraint");
  GraphBuilder b(std::move(graph));
  int bb1 = b.graph().id_of(spec.bb1);
  int bb2 = b.graph().id_of(spec.bb2);
  if (bb2 <= bb1)
    throw_value("attach_fms: bb2 ('", spec.bb2,
                "') must be deeper in the graph than bb1 ('", spec.bb1, "')");
  const GridShape& s1 = b.shape_of(bb1);
  const GridShape& s2 = b.shape_of(bb2);
  if (s1.height != s2.height || s1.width != s2.width)
    throw_shape("attach_fms: tap spatial sizes differ: ", s1.height, "x",
                s1.width, " vs ", s2.height, "x", s2.width);

  int of1 = b.graph().id_of("of_1");
  GridShape of1_shape = b.shape_of(of1);
  int f2 = spec.shuffle_factor * spec.shuffle_factor;
  if (s1.height * spec.shuffle_factor != of1_shape.height ||
      s1.width * spec.shuffle_factor != of1_shape.width)
    throw_shape("attach_fms: taps at ", s1.height, "x", s1.width,
                " cannot shuffle x", spec.shuffle_factor, " onto of_1 at ",
                of1_shape.height, "x", of1_shape.width);

  // Chain width: the two Submaps concatenate to factor^2 times the of_1
  // channel count so the shuffle lands exactly on of_1's shape.
  int chain_c = of1_shape.channels * f2 / 2;

  auto submap_chain = [&]() {
    int fused_b = detail::conv_bn_relu(b, bb2, s1.channels, 3, 1,
                                       spec.bb2_dilation, spec.bb2_dilation);
    int fused = b.concat({bb1, fused_b});
    int cur = fused;
    for (int r : spec.serial_rates)
      cur = detail::conv_bn_relu(b, cur, chain_c, 3, 1, r, r);
    return cur;
  };
  int submap_1 = submap_chain();
  int submap_2 = submap_chain();
  b.register_rates({spec.bb2_dilation});
  b.register_rates(spec.serial_rates);
  b.register_rates(spec.serial_rates);

  int stacked = b.concat({submap_1, submap_2});
  int supplement = b.pixel_shuffle(stacked, spec.shuffle_factor);
  b.name("fms_supplement", supplement);
  int enhanced = b.add(of1, supplement);
  b.name("of_1", enhanced);
  return b.take();
}

// Adds the two-direction recombination enhancement and the per-map
// normalization head.
//
// Bottom-to-up: btu_l = of_l + strided-dilated-conv(of_{l-1}) — an in-shape
// addition, the lower (larger) map reduced by the stride-2 dilated conv.
//
// Up-to-bottom: walking from the smallest map down, three dilated convs
// synthesize same-size auxiliaries from the enhanced upper map; original +
// auxiliaries concatenate to 4x channels and a periodic-sampling shuffle
// doubles the size for the addition onto the next lower map.
//
// Every map then passes the 3x3 conv + mish head, emitted as enh_1..enh_8.
inline ArchGraph attach_fmre(ArchGraph graph, const FmreSpec& spec = {}) {
  if (!hdc_check(spec.up_to_bottom_rates, 3).pass)
    throw_value("attach_fmre: up-to-bottom rates fail the dilation constraint");
  GraphBuilder b(std::move(graph));

  std::vector<int> of(9, -1);
  for (int k = 1; k <= 8; ++k)
    of[k] = b.graph().id_of(dronedet::detail::cat("of_", k));

  // Bottom-to-up. The largest map has nothing below it and passes through.
  std::vector<int> btu(9, -1);
  btu[1] = of[1];
  b.name("btu_1", btu[1]);
  for (int k = 2; k <= 8; ++k) {
    int down = detail::conv_bn_relu(b, of[k - 1], b.channels_of(of[k]),
                                    spec.down_kernel, spec.down_stride,
                                    spec.down_dilation, spec.down_padding);
    btu[k] = b.add(of[k], down);
    b.name(dronedet::detail::cat("btu_", k), btu[k]);
  }
  b.register_rates({spec.down_dilation});

  // Up-to-bottom over the btu maps, cascading from the smallest map.
  std::vector<int> utb(9, -1);
  utb[8] = btu[8];
  for (int k = 7; k >= 1; --k) {
    int upper = utb[k + 1];
    int channels = b.channels_of(upper);
    std::vector<int> maps = {upper};
    for (int r : spec.up_to_bottom_rates)
      maps.push_back(detail::conv_bn_relu(b, upper, channels, 3, 1, r, r));
    int stacked = b.concat(maps);
    b.name(dronedet::detail::cat("utb_concat_", k + 1), stacked);
    int up = b.pixel_shuffle(stacked, 2);
    utb[k] = b.add(btu[k], up);
    b.name(dronedet::detail::cat("utb_", k), utb[k]);
  }
  b.register_rates(spec.up_to_bottom_rates);

  // Normalization head before prediction.
  for (int k = 1; k <= 8; ++k) {
    int head = b.mish(b.conv(utb[k], b.channels_of(utb[k]), spec.head_kernel,
                             1, 1, spec.head_kernel / 2));
    b.name(dronedet::detail::cat("enh_", k), head);
  }
  return b.take();
}

// Plain 3x3 prediction heads (class logits and 4 box offsets per anchor),
// attached to the enhanced maps when present.
inline ArchGraph attach_prediction_heads(ArchGraph graph,
                                         const std::vector<int>& anchors_per_cell,
                                         int num_classes = 2) {
  if (anchors_per_cell.size() != 8)
    throw_value("attach_prediction_heads: need 8 per-layer anchor counts");
  GraphBuilder b(std::move(graph));
  for (int k = 1; k <= 8; ++k) {
    std::string enh = dronedet::detail::cat("enh_", k);
    std::string of = dronedet::detail::cat("of_", k);
    int src = b.graph().has_name(enh) ? b.graph().id_of(enh)
                                      : b.graph().id_of(of);
    int apc = anchors_per_cell[k - 1];
    b.name(dronedet::detail::cat("head_cls_", k),
           b.conv(src, apc * num_classes, 3, 1, 1, 1));
    b.name(dronedet::detail::cat("head_loc_", k), b.conv(src, apc * 4, 3, 1, 1, 1));
  }
  return b.take();
}

// Seeded end-to-end execution; emits every named map.
inline ForwardResult forward_pyramid(const ArchGraph& graph, const Grid& input,
                                     std::uint64_t seed) {
  WeightBank bank = init_weights(graph, seed);
  return forward(graph, input, bank);
}

struct ShapeRow {
  std::string name;
  int stride = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
};

// The shape/stride table of the eight pyramid levels.
inline std::vector<ShapeRow> shape_table(const ArchGraph& graph) {
  std::vector<ShapeRow> rows;
  for (int k = 1; k <= 8; ++k) {
    std::string name = dronedet::detail::cat("of_", k);
    const Node& n = graph.node(graph.id_of(name));
    ShapeRow row;
    row.name = name;
    row.height = n.out_shape.height;
    row.width = n.out_shape.width;
    row.channels = n.out_shape.channels;
    row.stride = graph.declared_input.height / n.out_shape.height;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dronedet
