#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dronedet/errors.hpp"
#include "dronedet/grid.hpp"

namespace dronedet {

// Parameters of a (possibly dilated) 2-D convolution. Weights are laid out
// out-major: weights[((o * in + i) * k + ky) * k + kx].
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  int padding = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  // (k - 1) * dilation + 1
  int effective_extent() const { return (kernel - 1) * dilation + 1; }

  void validate() const {
    if (in_channels < 1 || out_channels < 1)
      throw_value("conv channels must be >= 1");
    if (kernel < 1) throw_value("conv kernel must be >= 1, got ", kernel);
    if (stride < 1) throw_value("conv stride must be >= 1, got ", stride);
    if (dilation < 1) throw_value("conv dilation must be >= 1, got ", dilation);
    if (padding < 0) throw_value("conv padding must be >= 0, got ", padding);
    std::size_t want = static_cast<std::size_t>(out_channels) * in_channels *
                       kernel * kernel;
    if (weights.size() != want)
      throw_shape("conv weight count ", weights.size(), " != out*in*k*k = ",
                  want);
    if (bias.size() != static_cast<std::size_t>(out_channels))
      throw_shape("conv bias count ", bias.size(), " != out_channels = ",
                  out_channels);
  }

  static ConvSpec ones(int in_c, int out_c, int kernel, int stride = 1,
                       int dilation = 1, int padding = 0) {
    ConvSpec s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = kernel;
    s.stride = stride;
    s.dilation = dilation;
    s.padding = padding;
    s.weights.assign(
        static_cast<std::size_t>(out_c) * in_c * kernel * kernel, 1.0);
    s.bias.assign(out_c, 0.0);
    return s;
  }
};

inline int conv_output_size(int in_size, const ConvSpec& spec) {
  int numer = in_size + 2 * spec.padding - spec.effective_extent();
  if (numer < 0) return 0;
  return numer / spec.stride + 1;
}

// Direct-sum convolution in double precision. No im2col, no FFT; the point
// is an exact, deterministic reference kernel.
inline Grid conv2d(const Grid& input, const ConvSpec& spec) {
  spec.validate();
  if (input.channels() != spec.in_channels)
    throw_shape("conv2d: input channels ", input.channels(),
                " != spec.in_channels ", spec.in_channels);
  int out_h = conv_output_size(input.height(), spec);
  int out_w = conv_output_size(input.width(), spec);
  if (out_h < 1 || out_w < 1)
    throw_shape("conv2d: output spatial size ", out_h, "x", out_w,
                " < 1 for input ", input.height(), "x", input.width());

  Grid out(spec.out_channels, out_h, out_w);
  const int k = spec.kernel;
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = spec.bias[oc];
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * spec.stride - spec.padding + ky * spec.dilation;
            if (iy < 0 || iy >= input.height()) continue;
            for (int kx = 0; kx < k; ++kx) {
              int ix = ox * spec.stride - spec.padding + kx * spec.dilation;
              if (ix < 0 || ix >= input.width()) continue;
              acc += spec.weights[((static_cast<std::size_t>(oc) *
                                    spec.in_channels + ic) * k + ky) * k + kx] *
                     input.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

// Transposed convolution (scatter-sum). Output size is exactly
// stride * input_size: the natural output of (in-1)*stride + extent is
// cropped symmetrically, with the extra cell (if the crop is odd) taken from
// the trailing edge. Weights are laid out like ConvSpec with in/out meaning
// input/output channels of *this* op.
inline Grid conv_transpose2d(const Grid& input, const ConvSpec& spec) {
  spec.validate();
  if (spec.stride != 1 && spec.stride != 2)
    throw_value("conv_transpose2d: stride must be 1 or 2, got ", spec.stride);
  if (input.channels() != spec.in_channels)
    throw_shape("conv_transpose2d: input channels ", input.channels(),
                " != spec.in_channels ", spec.in_channels);
  int crop_total = spec.effective_extent() - spec.stride;
  if (crop_total < 0)
    throw_value("conv_transpose2d: kernel extent ", spec.effective_extent(),
                " smaller than stride ", spec.stride);
  int crop_lead = crop_total / 2;
  int out_h = spec.stride * input.height();
  int out_w = spec.stride * input.width();

  // weights[((i_in * out + o) ... ] would be the autograd-transpose layout;
  // here the kernel is indexed exactly like conv2d so a spec can be reused.
  Grid out(spec.out_channels, out_h, out_w);
  const int k = spec.kernel;
  for (int oc = 0; oc < spec.out_channels; ++oc)
    for (int i = 0; i < out_h * out_w; ++i)
      out.values()[oc * static_cast<std::size_t>(out_h) * out_w + i] =
          spec.bias[oc];

  for (int ic = 0; ic < spec.in_channels; ++ic) {
    for (int iy = 0; iy < input.height(); ++iy) {
      for (int ix = 0; ix < input.width(); ++ix) {
        double v = input.at(ic, iy, ix);
        if (v == 0.0) continue;
        for (int oc = 0; oc < spec.out_channels; ++oc) {
          for (int ky = 0; ky < k; ++ky) {
            int oy = iy * spec.stride - crop_lead + ky * spec.dilation;
            if (oy < 0 || oy >= out_h) continue;
            for (int kx = 0; kx < k; ++kx) {
              int ox = ix * spec.stride - crop_lead + kx * spec.dilation;
              if (ox < 0 || ox >= out_w) continue;
              out.at(oc, oy, ox) +=
                  v * spec.weights[((static_cast<std::size_t>(oc) *
                                     spec.in_channels + ic) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
  return out;
}

struct PoolSpec {
  int kernel = 3;
  int stride = 2;
  int padding = 1;
};

inline Grid maxpool2d(const Grid& input, const PoolSpec& spec) {
  ConvSpec shape_probe;
  shape_probe.kernel = spec.kernel;
  shape_probe.stride = spec.stride;
  shape_probe.padding = spec.padding;
  int out_h = conv_output_size(input.height(), shape_probe);
  int out_w = conv_output_size(input.width(), shape_probe);
  if (out_h < 1 || out_w < 1)
    throw_shape("maxpool2d: output spatial size < 1");
  Grid out(input.channels(), out_h, out_w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        bool seen = false;
        for (int ky = 0; ky < spec.kernel; ++ky) {
          int iy = oy * spec.stride - spec.padding + ky;
          if (iy < 0 || iy >= input.height()) continue;
          for (int kx = 0; kx < spec.kernel; ++kx) {
            int ix = ox * spec.stride - spec.padding + kx;
            if (ix < 0 || ix >= input.width()) continue;
            best = std::max(best, input.at(c, iy, ix));
            seen = true;
          }
        }
        out.at(c, oy, ox) = seen ? best : 0.0;
      }
    }
  }
  return out;
}

// Channel-to-space rearrangement: out[c][y*f+dy][x*f+dx] =
// in[c*f*f + dy*f + dx][y][x]. A pure (bijective) permutation of values.
inline Grid pixel_shuffle(const Grid& input, int factor) {
  if (factor < 1) throw_value("pixel_shuffle: factor must be >= 1");
  int f2 = factor * factor;
  if (input.channels() % f2 != 0)
    throw_shape("pixel_shuffle: channels ", input.channels(),
                " not divisible by factor^2 = ", f2);
  int out_c = input.channels() / f2;
  Grid out(out_c, input.height() * factor, input.width() * factor);
  for (int c = 0; c < out_c; ++c)
    for (int dy = 0; dy < factor; ++dy)
      for (int dx = 0; dx < factor; ++dx) {
        int src_c = c * f2 + dy * factor + dx;
        for (int y = 0; y < input.height(); ++y)
          for (int x = 0; x < input.width(); ++x)
            out.at(c, y * factor + dy, x * factor + dx) = input.at(src_c, y, x);
      }
  return out;
}

// Inverse rearrangement of pixel_shuffle.
inline Grid pixel_unshuffle(const Grid& input, int factor) {
  if (factor < 1) throw_value("pixel_unshuffle: factor must be >= 1");
  if (input.height() % factor != 0 || input.width() % factor != 0)
    throw_shape("pixel_unshuffle: spatial size ", input.height(), "x",
                input.width(), " not divisible by factor ", factor);
  int f2 = factor * factor;
  Grid out(input.channels() * f2, input.height() / factor,
           input.width() / factor);
  for (int c = 0; c < input.channels(); ++c)
    for (int dy = 0; dy < factor; ++dy)
      for (int dx = 0; dx < factor; ++dx) {
        int dst_c = c * f2 + dy * factor + dx;
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x)
            out.at(dst_c, y, x) = input.at(c, y * factor + dy, x * factor + dx);
      }
  return out;
}

inline Grid concat_channels(const std::vector<Grid>& inputs) {
  if (inputs.empty()) throw_value("concat_channels: no inputs");
  int h = inputs.front().height();
  int w = inputs.front().width();
  int total_c = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].height() != h || inputs[i].width() != w)
      throw_shape("concat_channels: input ", i, " spatial size ",
                  inputs[i].height(), "x", inputs[i].width(), " != ", h, "x",
                  w);
    total_c += inputs[i].channels();
  }
  Grid out(total_c, h, w);
  std::size_t offset = 0;
  for (const Grid& g : inputs) {
    std::copy(g.values().begin(), g.values().end(),
              out.values().begin() + offset);
    offset += g.values().size();
  }
  return out;
}

// Returns channels [first, first+count) as a new grid.
inline Grid slice_channels(const Grid& input, int first, int count) {
  if (first < 0 || count < 1 || first + count > input.channels())
    throw_shape("slice_channels: range [", first, ", ", first + count,
                ") outside 0..", input.channels());
  Grid out(count, input.height(), input.width());
  std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
  std::copy(input.values().begin() + first * plane,
            input.values().begin() + (first + count) * plane,
            out.values().begin());
  return out;
}

inline Grid add_elementwise(const Grid& a, const Grid& b) {
  if (!a.same_shape(b))
    throw_shape("add_elementwise: shapes (", a.channels(), ",", a.height(),
                ",", a.width(), ") vs (", b.channels(), ",", b.height(), ",",
                b.width(), ") differ");
  Grid out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i)
    out.values()[i] += b.values()[i];
  return out;
}

inline double softplus(double x) {
  // Stable on both tails.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double mish_scalar(double x) { return x * std::tanh(softplus(x)); }

// x * tanh(softplus(x)), applied pointwise.
inline Grid mish(const Grid& input) {
  Grid out = input;
  for (double& v : out.values()) v = mish_scalar(v);
  return out;
}

inline Grid relu(const Grid& input) {
  Grid out = input;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

// Per-channel affine map: out = scale[c] * x + shift[c]. This is batch
// normalization in inference mode with the statistics already folded in.
inline Grid channel_affine(const Grid& input, const std::vector<double>& scale,
                           const std::vector<double>& shift) {
  if (scale.size() != static_cast<std::size_t>(input.channels()) ||
      shift.size() != static_cast<std::size_t>(input.channels()))
    throw_shape("channel_affine: parameter count ", scale.size(), "/",
                shift.size(), " != channels ", input.channels());
  Grid out = input;
  std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
  for (int c = 0; c < input.channels(); ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.values()[c * plane + i];
      v = scale[c] * v + shift[c];
    }
  return out;
}

}  // namespace dronedet
