#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dronedet/errors.hpp"
#include "dronedet/grid.hpp"
#include "dronedet/ops.hpp"
#include "dronedet/rng.hpp"

namespace dronedet {

enum class OpKind {
  Input,
  Conv,
  ConvTranspose,
  MaxPool,
  PixelShuffle,
  Concat,
  Add,
  ReLU,
  Mish,
  BatchNorm,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Input: return "input";
    case OpKind::Conv: return "conv";
    case OpKind::ConvTranspose: return "conv_transpose";
    case OpKind::MaxPool: return "maxpool";
    case OpKind::PixelShuffle: return "pixel_shuffle";
    case OpKind::Concat: return "concat";
    case OpKind::Add: return "add";
    case OpKind::ReLU: return "relu";
    case OpKind::Mish: return "mish";
    case OpKind::BatchNorm: return "batchnorm";
  }
  return "?";
}

inline std::optional<OpKind> op_kind_from_name(const std::string& s) {
  for (OpKind k : {OpKind::Input, OpKind::Conv, OpKind::ConvTranspose,
                   OpKind::MaxPool, OpKind::PixelShuffle, OpKind::Concat,
                   OpKind::Add, OpKind::ReLU, OpKind::Mish, OpKind::BatchNorm})
    if (s == op_kind_name(k)) return k;
  return std::nullopt;
}

struct Node {
  int id = -1;
  OpKind kind = OpKind::Input;
  std::vector<int> inputs;

  // Conv / ConvTranspose / MaxPool parameters (unused fields stay at 0/1).
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  int factor = 0;  // PixelShuffle

  GridShape out_shape;  // filled by infer_shapes
};

// Directed acyclic layer graph. Nodes are stored in topological order (a
// node's inputs always have smaller ids), which the builder guarantees by
// construction.
struct ArchGraph {
  GridShape declared_input;
  std::vector<Node> nodes;
  std::map<std::string, int> named;  // e.g. "of_1" -> node id
  // Every serial dilation-rate sequence registered while building, so the
  // whole graph can be audited against the HDC constraint.
  std::vector<std::vector<int>> registered_rate_sequences;

  const Node& node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes.size()))
      throw_value("graph: no node with id ", id);
    return nodes[id];
  }

  int id_of(const std::string& name) const {
    auto it = named.find(name);
    if (it == named.end()) throw_value("graph: no named output '", name, "'");
    return it->second;
  }

  bool has_name(const std::string& name) const {
    return named.find(name) != named.end();
  }
};

namespace detail {

inline ConvSpec conv_spec_for(const Node& n) {
  ConvSpec s;
  s.in_channels = n.in_channels;
  s.out_channels = n.out_channels;
  s.kernel = n.kernel;
  s.stride = n.stride;
  s.dilation = n.dilation;
  s.padding = n.padding;
  return s;
}

}  // namespace detail

// Computes (and stores) every node's output shape from its producers, and
// validates the wiring. Throws ShapeError naming the offending node.
inline void infer_shapes(ArchGraph& graph) {
  for (Node& n : graph.nodes) {
    for (int in : n.inputs)
      if (in < 0 || in >= n.id)
        throw_shape("node ", n.id, ": input id ", in,
                    " is not an earlier node (graph must be acyclic)");
    auto in_shape = [&](std::size_t i) -> const GridShape& {
      return graph.nodes[n.inputs[i]].out_shape;
    };
    switch (n.kind) {
      case OpKind::Input:
        n.out_shape = graph.declared_input;
        break;
      case OpKind::Conv: {
        const GridShape& s = in_shape(0);
        if (s.channels != n.in_channels)
          throw_shape("node ", n.id, " (conv): input channels ", s.channels,
                      " != ", n.in_channels);
        ConvSpec cs = detail::conv_spec_for(n);
        int oh = conv_output_size(s.height, cs);
        int ow = conv_output_size(s.width, cs);
        if (oh < 1 || ow < 1)
          throw_shape("node ", n.id, " (conv): empty output");
        n.out_shape = {n.out_channels, oh, ow};
        break;
      }
      case OpKind::ConvTranspose: {
        const GridShape& s = in_shape(0);
        if (s.channels != n.in_channels)
          throw_shape("node ", n.id, " (conv_transpose): input channels ",
                      s.channels, " != ", n.in_channels);
        n.out_shape = {n.out_channels, s.height * n.stride,
                       s.width * n.stride};
        break;
      }
      case OpKind::MaxPool: {
        const GridShape& s = in_shape(0);
        ConvSpec cs;
        cs.kernel = n.kernel;
        cs.stride = n.stride;
        cs.padding = n.padding;
        n.out_shape = {s.channels, conv_output_size(s.height, cs),
                       conv_output_size(s.width, cs)};
        break;
      }
      case OpKind::PixelShuffle: {
        const GridShape& s = in_shape(0);
        if (s.channels % (n.factor * n.factor) != 0)
          throw_shape("node ", n.id, " (pixel_shuffle): channels ", s.channels,
                      " not divisible by ", n.factor * n.factor);
        n.out_shape = {s.channels / (n.factor * n.factor),
                       s.height * n.factor, s.width * n.factor};
        break;
      }
      case OpKind::Concat: {
        int c = 0;
        const GridShape& first = in_shape(0);
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const GridShape& s = in_shape(i);
          if (s.height != first.height || s.width != first.width)
            throw_shape("node ", n.id, " (concat): input ", i,
                        " spatial mismatch");
          c += s.channels;
        }
        n.out_shape = {c, first.height, first.width};
        break;
      }
      case OpKind::Add: {
        const GridShape& a = in_shape(0);
        const GridShape& b = in_shape(1);
        if (!(a == b))
          throw_shape("node ", n.id, " (add): shape mismatch (", a.channels,
                      ",", a.height, ",", a.width, ") vs (", b.channels, ",",
                      b.height, ",", b.width, ")");
        n.out_shape = a;
        break;
      }
      case OpKind::ReLU:
      case OpKind::Mish:
      case OpKind::BatchNorm:
        n.out_shape = in_shape(0);
        break;
    }
  }
}

// Per-node learnable parameters. Conv-like nodes use weights/bias, BatchNorm
// uses scale/shift.
struct NodeParams {
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> scale;
  std::vector<double> shift;
};

struct WeightBank {
  std::map<int, NodeParams> params;

  NodeParams& at(int id) {
    auto it = params.find(id);
    if (it == params.end()) throw_value("weight bank: no params for node ", id);
    return it->second;
  }
  const NodeParams& at(int id) const {
    auto it = params.find(id);
    if (it == params.end()) throw_value("weight bank: no params for node ", id);
    return it->second;
  }
};

// Deterministic seeded initialization: every node draws from its own stream,
// so edits to one part of the graph do not shift another part's weights.
inline WeightBank init_weights(const ArchGraph& graph, std::uint64_t seed) {
  WeightBank bank;
  Rng root(seed);
  for (const Node& n : graph.nodes) {
    Rng rng = root.fork(static_cast<std::uint64_t>(n.id) + 1);
    NodeParams p;
    switch (n.kind) {
      case OpKind::Conv:
      case OpKind::ConvTranspose: {
        std::size_t count = static_cast<std::size_t>(n.out_channels) *
                            n.in_channels * n.kernel * n.kernel;
        double fan_in = static_cast<double>(n.in_channels) * n.kernel * n.kernel;
        double bound = std::sqrt(2.0 / fan_in);
        p.weights.resize(count);
        for (double& w : p.weights) w = rng.uniform(-bound, bound);
        p.bias.assign(n.out_channels, 0.0);
        break;
      }
      case OpKind::BatchNorm: {
        int c = graph.nodes[n.inputs[0]].out_shape.channels;
        p.scale.resize(c);
        p.shift.resize(c);
        for (double& v : p.scale) v = 0.8 + 0.4 * rng.uniform01();
        for (double& v : p.shift) v = 0.1 * (rng.uniform01() - 0.5);
        break;
      }
      default:
        break;
    }
    bank.params[n.id] = std::move(p);
  }
  return bank;
}

struct ForwardOptions {
  // Reachability probe: all conv weights 1, biases 0, BatchNorm/activations
  // replaced by identity, and every node output saturated to {0,1}. With
  // non-negative inputs this computes exactly "is there a nonzero path",
  // without overflow on deep graphs.
  bool probe_reachability = false;
  // Replaces the produced output of selected nodes, e.g. to inject an
  // impulse at an interior tap.
  const std::map<int, Grid>* overrides = nullptr;
  // Keep every node's output in the result (otherwise only named ones).
  bool keep_all = false;
};

struct ForwardResult {
  std::map<std::string, Grid> named;
  std::map<int, Grid> by_id;  // filled when keep_all

  const Grid& at(const std::string& name) const {
    auto it = named.find(name);
    if (it == named.end())
      throw_value("forward result: no named output '", name, "'");
    return it->second;
  }
};

namespace detail {

inline void saturate(Grid& g) {
  for (double& v : g.values()) v = (v != 0.0) ? 1.0 : 0.0;
}

}  // namespace detail

// Executes the graph on one input grid. Deterministic; verifies that every
// node's produced shape equals the inferred shape.
inline ForwardResult forward(const ArchGraph& graph, const Grid& input,
                             const WeightBank& bank,
                             const ForwardOptions& opt = {}) {
  if (!(input.shape() == graph.declared_input))
    throw_shape("forward: input shape (", input.channels(), ",",
                input.height(), ",", input.width(), ") != declared (",
                graph.declared_input.channels, ",", graph.declared_input.height,
                ",", graph.declared_input.width, ")");

  // Free each intermediate grid after its last consumer has run.
  std::vector<int> remaining_uses(graph.nodes.size(), 0);
  for (const Node& n : graph.nodes)
    for (int in : n.inputs) ++remaining_uses[in];
  for (const auto& entry : graph.named) ++remaining_uses[entry.second];

  std::vector<std::optional<Grid>> values(graph.nodes.size());
  ForwardResult result;

  auto param_or_ones = [&](const Node& n) {
    ConvSpec spec = detail::conv_spec_for(n);
    if (opt.probe_reachability) {
      spec.weights.assign(static_cast<std::size_t>(n.out_channels) *
                              n.in_channels * n.kernel * n.kernel,
                          1.0);
      spec.bias.assign(n.out_channels, 0.0);
    } else {
      const NodeParams& p = bank.at(n.id);
      spec.weights = p.weights;
      spec.bias = p.bias;
    }
    return spec;
  };

  for (const Node& n : graph.nodes) {
    Grid out;
    bool overridden = false;
    if (opt.overrides != nullptr) {
      auto it = opt.overrides->find(n.id);
      if (it != opt.overrides->end()) {
        out = it->second;
        if (!(out.shape() == n.out_shape))
          throw_shape("node ", n.id, ": override shape mismatch");
        overridden = true;
      }
    }
    try {
      if (!overridden) switch (n.kind) {
        case OpKind::Input:
          out = input;
          break;
        case OpKind::Conv:
          out = conv2d(*values[n.inputs[0]], param_or_ones(n));
          break;
        case OpKind::ConvTranspose:
          out = conv_transpose2d(*values[n.inputs[0]], param_or_ones(n));
          break;
        case OpKind::MaxPool:
          out = maxpool2d(*values[n.inputs[0]],
                          PoolSpec{n.kernel, n.stride, n.padding});
          break;
        case OpKind::PixelShuffle:
          out = pixel_shuffle(*values[n.inputs[0]], n.factor);
          break;
        case OpKind::Concat: {
          std::vector<Grid> ins;
          ins.reserve(n.inputs.size());
          for (int in : n.inputs) ins.push_back(*values[in]);
          out = concat_channels(ins);
          break;
        }
        case OpKind::Add:
          out = add_elementwise(*values[n.inputs[0]], *values[n.inputs[1]]);
          break;
        case OpKind::ReLU:
          out = opt.probe_reachability ? *values[n.inputs[0]]
                                       : relu(*values[n.inputs[0]]);
          break;
        case OpKind::Mish:
          out = opt.probe_reachability ? *values[n.inputs[0]]
                                       : mish(*values[n.inputs[0]]);
          break;
        case OpKind::BatchNorm: {
          if (opt.probe_reachability) {
            out = *values[n.inputs[0]];
          } else {
            const NodeParams& p = bank.at(n.id);
            out = channel_affine(*values[n.inputs[0]], p.scale, p.shift);
          }
          break;
        }
      }
    } catch (const Error& e) {
      throw ShapeError(detail::cat("node ", n.id, " (", op_kind_name(n.kind),
                                   "): ", e.what()));
    }
    if (opt.probe_reachability) detail::saturate(out);
    if (!(out.shape() == n.out_shape))
      throw_shape("node ", n.id, " (", op_kind_name(n.kind),
                  "): executed shape (", out.channels(), ",", out.height(),
                  ",", out.width(), ") != inferred (", n.out_shape.channels,
                  ",", n.out_shape.height, ",", n.out_shape.width, ")");
    values[n.id] = std::move(out);
    if (opt.keep_all) result.by_id[n.id] = *values[n.id];

    // Release finished producers.
    for (int in : n.inputs) {
      if (--remaining_uses[in] == 0 && !opt.keep_all) values[in].reset();
    }
  }

  for (const auto& [name, id] : graph.named) result.named[name] = *values[id];
  return result;
}

// Exact set of input cells with a nonzero path to `pos` of `node`, measured
// empirically: one reachability forward per input cell (all-ones weights,
// identity activations).
inline std::set<std::pair<int, int>> receptive_field(const ArchGraph& graph,
                                                     int node_id,
                                                     std::pair<int, int> pos) {
  const Node& target = graph.node(node_id);
  if (pos.first < 0 || pos.first >= target.out_shape.height ||
      pos.second < 0 || pos.second >= target.out_shape.width)
    throw_value("receptive_field: position (", pos.first, ",", pos.second,
                ") outside node ", node_id, " output ",
                target.out_shape.height, "x", target.out_shape.width);

  WeightBank empty;
  ForwardOptions opt;
  opt.probe_reachability = true;

  ArchGraph probe = graph;
  probe.named.clear();
  probe.named["__rf"] = node_id;

  std::set<std::pair<int, int>> cells;
  Grid impulse(graph.declared_input.channels, graph.declared_input.height,
               graph.declared_input.width);
  for (int y = 0; y < graph.declared_input.height; ++y) {
    for (int x = 0; x < graph.declared_input.width; ++x) {
      for (int c = 0; c < impulse.channels(); ++c) impulse.at(c, y, x) = 1.0;
      ForwardResult r = forward(probe, impulse, empty, opt);
      if (r.at("__rf").at(0, pos.first, pos.second) != 0.0)
        cells.insert({y, x});
      for (int c = 0; c < impulse.channels(); ++c) impulse.at(c, y, x) = 0.0;
    }
  }
  return cells;
}

inline std::set<std::pair<int, int>> receptive_field(const ArchGraph& graph,
                                                     const std::string& name,
                                                     std::pair<int, int> pos) {
  return receptive_field(graph, graph.id_of(name), pos);
}

// Convenience wrapper for assembling graphs in topological order.
class GraphBuilder {
 public:
  explicit GraphBuilder(int channels, int height, int width) {
    graph_.declared_input = {channels, height, width};
    Node n;
    n.id = 0;
    n.kind = OpKind::Input;
    n.out_shape = graph_.declared_input;
    graph_.nodes.push_back(n);
  }

  // Continues building on top of an existing graph.
  explicit GraphBuilder(ArchGraph graph) : graph_(std::move(graph)) {
    infer_shapes(graph_);
  }

  int input() const { return 0; }

  int conv(int in, int out_channels, int kernel, int stride = 1,
           int dilation = 1, int padding = 0) {
    Node n;
    n.kind = OpKind::Conv;
    n.inputs = {in};
    n.in_channels = channels_of(in);
    n.out_channels = out_channels;
    n.kernel = kernel;
    n.stride = stride;
    n.dilation = dilation;
    n.padding = padding;
    return push(std::move(n));
  }

  // 3x3 same-padding convolution with the given dilation.
  int conv3x3(int in, int out_channels, int stride = 1, int dilation = 1) {
    return conv(in, out_channels, 3, stride, dilation, dilation);
  }

  int conv_transpose(int in, int out_channels, int kernel, int stride) {
    Node n;
    n.kind = OpKind::ConvTranspose;
    n.inputs = {in};
    n.in_channels = channels_of(in);
    n.out_channels = out_channels;
    n.kernel = kernel;
    n.stride = stride;
    return push(std::move(n));
  }

  int maxpool(int in, int kernel, int stride, int padding) {
    Node n;
    n.kind = OpKind::MaxPool;
    n.inputs = {in};
    n.kernel = kernel;
    n.stride = stride;
    n.padding = padding;
    return push(std::move(n));
  }

  int pixel_shuffle(int in, int factor) {
    Node n;
    n.kind = OpKind::PixelShuffle;
    n.inputs = {in};
    n.factor = factor;
    return push(std::move(n));
  }

  int concat(std::vector<int> ins) {
    Node n;
    n.kind = OpKind::Concat;
    n.inputs = std::move(ins);
    return push(std::move(n));
  }

  int add(int a, int b) {
    Node n;
    n.kind = OpKind::Add;
    n.inputs = {a, b};
    return push(std::move(n));
  }

  int relu(int in) { return push_unary(OpKind::ReLU, in); }
  int mish(int in) { return push_unary(OpKind::Mish, in); }
  int batchnorm(int in) { return push_unary(OpKind::BatchNorm, in); }

  int bn_relu(int in) { return relu(batchnorm(in)); }

  void name(const std::string& n, int id) { graph_.named[n] = id; }

  void register_rates(std::vector<int> rates) {
    graph_.registered_rate_sequences.push_back(std::move(rates));
  }

  const GridShape& shape_of(int id) const { return graph_.nodes[id].out_shape; }
  int channels_of(int id) const { return graph_.nodes[id].out_shape.channels; }

  ArchGraph take() { return std::move(graph_); }
  const ArchGraph& graph() const { return graph_; }

 private:
  int push_unary(OpKind kind, int in) {
    Node n;
    n.kind = kind;
    n.inputs = {in};
    return push(std::move(n));
  }

  int push(Node n) {
    n.id = static_cast<int>(graph_.nodes.size());
    graph_.nodes.push_back(std::move(n));
    // Incremental shape inference keeps channels_of usable while building.
    infer_shapes(graph_);
    return graph_.nodes.back().id;
  }

  ArchGraph graph_;
};

// ---------------------------------------------------------------------------
// Line-delimited text serialization, one node per line.

inline std::string serialize_graph(const ArchGraph& graph) {
  std::ostringstream os;
  os << "dronedet.archgraph.v1\n";
  os << "input " << graph.declared_input.channels << " "
     << graph.declared_input.height << " " << graph.declared_input.width
     << "\n";
  for (const Node& n : graph.nodes) {
    os << "node " << n.id << " " << op_kind_name(n.kind);
    os << " in=";
    for (std::size_t i = 0; i < n.inputs.size(); ++i)
      os << (i ? "," : "") << n.inputs[i];
    if (n.inputs.empty()) os << "-";
    switch (n.kind) {
      case OpKind::Conv:
      case OpKind::ConvTranspose:
        os << " cin=" << n.in_channels << " cout=" << n.out_channels
           << " k=" << n.kernel << " s=" << n.stride << " d=" << n.dilation
           << " p=" << n.padding;
        break;
      case OpKind::MaxPool:
        os << " k=" << n.kernel << " s=" << n.stride << " p=" << n.padding;
        break;
      case OpKind::PixelShuffle:
        os << " f=" << n.factor;
        break;
      default:
        break;
    }
    os << "\n";
  }
  for (const auto& [name, id] : graph.named)
    os << "name " << name << " " << id << "\n";
  for (const auto& rates : graph.registered_rate_sequences) {
    os << "rates ";
    for (std::size_t i = 0; i < rates.size(); ++i)
      os << (i ? "," : "") << rates[i];
    os << "\n";
  }
  return os.str();
}

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  if (s == "-") return out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline ArchGraph parse_graph(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "dronedet.archgraph.v1")
    throw_io("graph parse: missing schema tag");
  ArchGraph g;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "input") {
      ls >> g.declared_input.channels >> g.declared_input.height >>
          g.declared_input.width;
    } else if (tag == "node") {
      Node n;
      std::string kind;
      ls >> n.id >> kind;
      auto k = op_kind_from_name(kind);
      if (!k) throw_io("graph parse: unknown op kind '", kind, "'");
      n.kind = *k;
      std::string field;
      while (ls >> field) {
        std::size_t eq = field.find('=');
        if (eq == std::string::npos)
          throw_io("graph parse: bad field '", field, "'");
        std::string key = field.substr(0, eq);
        std::string val = field.substr(eq + 1);
        if (key == "in") n.inputs = detail::parse_int_list(val);
        else if (key == "cin") n.in_channels = std::stoi(val);
        else if (key == "cout") n.out_channels = std::stoi(val);
        else if (key == "k") n.kernel = std::stoi(val);
        else if (key == "s") n.stride = std::stoi(val);
        else if (key == "d") n.dilation = std::stoi(val);
        else if (key == "p") n.padding = std::stoi(val);
        else if (key == "f") n.factor = std::stoi(val);
        else throw_io("graph parse: unknown key '", key, "'");
      }
      if (n.id != static_cast<int>(g.nodes.size()))
        throw_io("graph parse: node ids must be dense and ordered");
      g.nodes.push_back(std::move(n));
    } else if (tag == "name") {
      std::string name;
      int id;
      ls >> name >> id;
      g.named[name] = id;
    } else if (tag == "rates") {
      std::string val;
      ls >> val;
      g.registered_rate_sequences.push_back(detail::parse_int_list(val));
    } else {
      throw_io("graph parse: unknown line tag '", tag, "'");
    }
  }
  infer_shapes(g);
  return g;
}

}  // namespace dronedet
