// Copyright 2026 The Plasmo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "plasmo/netzoo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plasmo {

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::plain_conv: return "plain_conv";
    case BlockKind::depthwise_separable: return "depthwise_separable";
    case BlockKind::inception: return "inception";
    case BlockKind::residual: return "residual";
    case BlockKind::dense_block: return "dense_block";
  }
  return "?";
}

BlockKind parse_block_kind(std::string_view s) {
  for (BlockKind k : {BlockKind::plain_conv, BlockKind::depthwise_separable, BlockKind::inception, BlockKind::residual,
                      BlockKind::dense_block}) {
    if (to_string(k) == s) return k;
  }
  throw ParameterError("unknown block kind '" + std::string(s) + "'");
}

void BlockSpec::validate() const {
  if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) throw ParameterError("width multiplier must be in (0, 1]");
  if (kernel < 1 || kernel % 2 == 0) throw ParameterError("block kernel must be odd and positive");
  if (stride < 1) throw ParameterError("block stride must be >= 1");
  if (channels_in < 0) throw ParameterError("channels_in must be >= 0");
  if (pool_after < 0) throw ParameterError("pool_after must be >= 0");
  switch (kind) {
    case BlockKind::plain_conv:
    case BlockKind::depthwise_separable:
    case BlockKind::residual:
      if (channels_out < 1) throw ParameterError(std::string(to_string(kind)) + " needs channels_out >= 1");
      break;
    case BlockKind::inception:
      for (int w : branch_widths) {
        if (w < 1) throw ParameterError("inception branch widths must be >= 1");
      }
      break;
    case BlockKind::dense_block:
      if (growth_rate < 1 || layers < 1) throw ParameterError("dense_block needs growth_rate and layers >= 1");
      break;
  }
  if (kind == BlockKind::residual && stride != 1) throw ParameterError("residual blocks keep resolution (stride 1)");
}

int ModelSpec::effective_input_size() const {
  return std::max(1, static_cast<int>(std::lround(input_size * resolution_multiplier)));
}

int scale_channels(int channels, double alpha) {
  return std::max(1, static_cast<int>(std::lround(alpha * channels)));
}

namespace {

Tensor he_uniform(Shape shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (float& v : t.values()) v = static_cast<float>(dist(rng));
  return t;
}

// Appends nodes for one block. Keeps track of the channel count of the
// current tensor so weights can be shaped.
class BlockWriter {
 public:
  BlockWriter(LayerGraph& graph, std::string prefix, std::mt19937_64& rng)
      : graph_(graph), prefix_(std::move(prefix)), rng_(rng) {}

  int channels(int node) const { return graph_.output_shape(node)[0]; }

  int conv(int input, int out, int kernel, int stride, const std::string& name) {
    const int in = channels(input);
    LayerNode n{prefix_ + name, LayerKind::conv2d, {input}, {}};
    n.attrs.stride = stride;
    n.attrs.padding = kernel / 2;
    return graph_.add(std::move(n), {{"weight", he_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng_)}});
  }

  int depthwise(int input, int kernel, int stride, const std::string& name) {
    const int c = channels(input);
    LayerNode n{prefix_ + name, LayerKind::depthwise_conv2d, {input}, {}};
    n.attrs.stride = stride;
    n.attrs.padding = kernel / 2;
    return graph_.add(std::move(n), {{"weight", he_uniform({c, 1, kernel, kernel}, kernel * kernel, rng_)}});
  }

  int bn(int input, const std::string& name) {
    const int c = channels(input);
    return graph_.add(LayerNode{prefix_ + name, LayerKind::batch_norm, {input}, {}},
                      {{"gamma", Tensor({c}, 1.0f)},
                       {"beta", Tensor({c}, 0.0f)},
                       {"running_mean", Tensor({c}, 0.0f)},
                       {"running_var", Tensor({c}, 1.0f)}});
  }

  int relu(int input, const std::string& name) {
    LayerNode n{prefix_ + name, LayerKind::activation, {input}, {}};
    n.attrs.activation = ActivationMode::relu;
    return graph_.add(std::move(n));
  }

  int conv_bn_relu(int input, int out, int kernel, int stride, const std::string& name) {
    const int c = conv(input, out, kernel, stride, name + ".conv");
    return relu(bn(c, name + ".bn"), name + ".relu");
  }

  int max_pool(int input, int window, int stride, int padding, const std::string& name) {
    LayerNode n{prefix_ + name, LayerKind::pool2d, {input}, {}};
    n.attrs.pool_mode = PoolMode::max;
    n.attrs.window = window;
    n.attrs.stride = stride;
    n.attrs.padding = padding;
    return graph_.add(std::move(n));
  }

  int merge(std::vector<int> inputs, MergeMode mode, const std::string& name) {
    LayerNode n{prefix_ + name, LayerKind::merge, std::move(inputs), {}};
    n.attrs.merge = mode;
    return graph_.add(std::move(n));
  }

 private:
  LayerGraph& graph_;
  std::string prefix_;
  std::mt19937_64& rng_;
};

}  // namespace

int build_block(LayerGraph& graph, const BlockSpec& spec, int input, const std::string& prefix, std::mt19937_64& rng,
                double extra_alpha) {
  spec.validate();
  BlockWriter w(graph, prefix, rng);
  const int in_c = w.channels(input);
  if (spec.channels_in > 0 && spec.channels_in != in_c) {
    throw DimensionError("axis 1 (channels): block expects " + std::to_string(spec.channels_in) +
                         " input channels but receives " + std::to_string(in_c));
  }
  const double alpha = spec.width_multiplier * extra_alpha;
  int out = input;
  switch (spec.kind) {
    case BlockKind::plain_conv:
      out = w.conv_bn_relu(input, scale_channels(spec.channels_out, alpha), spec.kernel, spec.stride, "conv");
      break;
    case BlockKind::depthwise_separable: {
      const int d = w.relu(w.bn(w.depthwise(input, spec.kernel, spec.stride, "dw"), "dw.bn"), "dw.relu");
      out = w.conv_bn_relu(d, scale_channels(spec.channels_out, alpha), 1, 1, "pw");
      break;
    }
    case BlockKind::inception: {
      const auto& bw = spec.branch_widths;
      const int b1 = w.conv_bn_relu(input, scale_channels(bw[0], alpha), 1, spec.stride, "b1x1");
      const int b3 = w.conv_bn_relu(input, scale_channels(bw[1], alpha), 3, spec.stride, "b3x3");
      const int b5 = w.conv_bn_relu(input, scale_channels(bw[2], alpha), 5, spec.stride, "b5x5");
      const int p = w.max_pool(input, 3, spec.stride, 1, "bpool.pool");
      const int bp = w.conv_bn_relu(p, scale_channels(bw[3], alpha), 1, 1, "bpool");
      out = w.merge({b1, b3, b5, bp}, MergeMode::concat_channels, "concat");
      break;
    }
    case BlockKind::residual: {
      const int oc = scale_channels(spec.channels_out, alpha);
      const int a = w.conv_bn_relu(input, oc, spec.kernel, 1, "conv1");
      const int b = w.conv_bn_relu(a, oc, spec.kernel, 1, "conv2");
      const int shortcut = oc == in_c ? input : w.conv(input, oc, 1, 1, "proj");
      out = w.merge({b, shortcut}, MergeMode::add, "add");
      break;
    }
    case BlockKind::dense_block: {
      const int k = scale_channels(spec.growth_rate, alpha);
      std::vector<int> features{input};
      int current = input;
      for (int j = 0; j < spec.layers; ++j) {
        const std::string name = "layer" + std::to_string(j);
        const int y = w.conv_bn_relu(current, k, spec.kernel, 1, name);
        features.push_back(y);
        current = w.merge(features, MergeMode::concat_channels, name + ".concat");
      }
      out = current;
      break;
    }
  }
  if (spec.pool_after > 0) out = w.max_pool(out, spec.pool_after, spec.pool_after, 0, "pool");
  return out;
}

LayerGraph assemble_model(const ModelSpec& spec, std::uint64_t seed) {
  if (!(spec.resolution_multiplier > 0.0 && spec.resolution_multiplier <= 1.0)) {
    throw ParameterError("resolution multiplier must be in (0, 1]");
  }
  if (!(spec.width_multiplier > 0.0 && spec.width_multiplier <= 1.0)) {
    throw ParameterError("width multiplier must be in (0, 1]");
  }
  if (spec.blocks.empty()) throw ParameterError("model needs at least one block");
  const int size = spec.effective_input_size();
  LayerGraph graph({spec.input_channels(), size, size});
  std::mt19937_64 rng(seed);
  int node = kGraphInput;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    try {
      node = build_block(graph, spec.blocks[i], node, "block" + std::to_string(i) + ".", rng, spec.width_multiplier);
    } catch (const DimensionError& e) {
      throw DimensionError("block " + std::to_string(i) + ": " + e.what());
    }
  }
  const int c = graph.output_shape(node)[0];
  const int gap = graph.add(LayerNode{"head.gap", LayerKind::global_avg_pool, {node}, {}});
  const int logit = graph.add(LayerNode{"head.logit", LayerKind::dense, {gap}, {}},
                              {{"weight", he_uniform({c, 1}, c, rng)}, {"bias", Tensor({1}, 0.0f)}});
  LayerNode prob{"head.prob", LayerKind::activation, {logit}, {}};
  prob.attrs.activation = ActivationMode::sigmoid;
  graph.add(std::move(prob));
  graph.metadata()["arch"] = spec.name;
  graph.metadata()["input_mode"] = std::string(to_string(spec.input_mode));
  graph.metadata()["spec"] = format_model_spec(spec);
  return graph;
}

std::vector<std::string> preset_names() {
  return {"tiny_vgg", "tiny_mobile", "tiny_inception", "tiny_residual", "tiny_dense"};
}

bool is_preset(std::string_view name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

BlockSpec plain(int out, int kernel = 3, int stride = 1, int pool = 0) {
  BlockSpec b;
  b.kind = BlockKind::plain_conv;
  b.channels_out = out;
  b.kernel = kernel;
  b.stride = stride;
  b.pool_after = pool;
  return b;
}

BlockSpec of_kind(BlockKind kind, int out, int pool = 0) {
  BlockSpec b;
  b.kind = kind;
  b.channels_out = out;
  b.pool_after = pool;
  return b;
}

BlockSpec inception(std::array<int, 4> widths, int pool = 0) {
  BlockSpec b;
  b.kind = BlockKind::inception;
  b.branch_widths = widths;
  b.pool_after = pool;
  return b;
}

BlockSpec dense_block(int growth, int layers, int pool = 0) {
  BlockSpec b;
  b.kind = BlockKind::dense_block;
  b.growth_rate = growth;
  b.layers = layers;
  b.pool_after = pool;
  return b;
}

}  // namespace

ModelSpec preset_spec(std::string_view name, InputMode mode) {
  ModelSpec spec;
  spec.name = std::string(name);
  spec.input_mode = mode;
  // Every preset starts with a strided stem and pools down to 4x4 before the head.
  if (name == "tiny_vgg") {
    spec.blocks = {plain(8, 3, 2, 2), plain(16, 3, 1, 2), plain(64, 3, 1, 2), plain(128)};
  } else if (name == "tiny_mobile") {
    spec.blocks = {plain(16, 3, 2, 2), of_kind(BlockKind::depthwise_separable, 32, 2),
                   of_kind(BlockKind::depthwise_separable, 64, 2), of_kind(BlockKind::depthwise_separable, 128),
                   of_kind(BlockKind::depthwise_separable, 128)};
  } else if (name == "tiny_inception") {
    spec.blocks = {plain(16, 3, 2, 2), inception({8, 16, 4, 4}, 2), inception({16, 32, 8, 8}, 2), plain(96)};
  } else if (name == "tiny_residual") {
    spec.blocks = {plain(16, 3, 2, 2), of_kind(BlockKind::residual, 16, 2), of_kind(BlockKind::residual, 32, 2),
                   of_kind(BlockKind::residual, 64)};
  } else if (name == "tiny_dense") {
    spec.blocks = {plain(16, 3, 2, 2), dense_block(12, 3, 2), plain(48, 1), dense_block(16, 3, 2), plain(96)};
  } else {
    throw ParameterError("unknown preset '" + std::string(name) + "'");
  }
  return spec;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParameterError("model spec: '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParameterError("model spec: '" + key + "' expects a number, got '" + v + "'");
  }
}

BlockSpec parse_block(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  BlockSpec b;
  b.kind = parse_block_kind(kind);
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParameterError("model spec: block option '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "in") b.channels_in = to_int(value, key);
    else if (key == "out") b.channels_out = to_int(value, key);
    else if (key == "kernel") b.kernel = to_int(value, key);
    else if (key == "stride") b.stride = to_int(value, key);
    else if (key == "alpha") b.width_multiplier = to_double(value, key);
    else if (key == "growth") b.growth_rate = to_int(value, key);
    else if (key == "layers") b.layers = to_int(value, key);
    else if (key == "pool") b.pool_after = to_int(value, key);
    else if (key == "branches") {
      std::istringstream parts(value);
      std::string part;
      for (int& w : b.branch_widths) {
        if (!std::getline(parts, part, ',')) throw ParameterError("model spec: branches needs four widths");
        w = to_int(part, key);
      }
      if (std::getline(parts, part, ',')) throw ParameterError("model spec: branches needs exactly four widths");
    } else {
      throw ParameterError("model spec: unknown block option '" + key + "'");
    }
  }
  b.validate();
  return b;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ModelSpec parse_model_spec(std::string_view text) {
  ModelSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string l = trim(line.substr(0, line.find('#')));
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("model spec line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(l.substr(0, eq)), value = trim(l.substr(eq + 1));
    if (key == "name") spec.name = value;
    else if (key == "input_mode") spec.input_mode = parse_input_mode(value);
    else if (key == "input_size") spec.input_size = to_int(value, key);
    else if (key == "resolution_multiplier") spec.resolution_multiplier = to_double(value, key);
    else if (key == "width_multiplier") spec.width_multiplier = to_double(value, key);
    else if (key == "block") spec.blocks.push_back(parse_block(value));
    else throw ParameterError("model spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  if (spec.blocks.empty()) throw ParameterError("model spec declares no blocks");
  return spec;
}

std::string format_model_spec(const ModelSpec& spec) {
  std::ostringstream os;
  os << "name = " << spec.name << "\n"
     << "input_mode = " << to_string(spec.input_mode) << "\n"
     << "input_size = " << spec.input_size << "\n"
     << "resolution_multiplier = " << format_number(spec.resolution_multiplier) << "\n"
     << "width_multiplier = " << format_number(spec.width_multiplier) << "\n";
  for (const BlockSpec& b : spec.blocks) {
    os << "block = " << to_string(b.kind);
    if (b.channels_in > 0) os << " in=" << b.channels_in;
    switch (b.kind) {
      case BlockKind::plain_conv:
      case BlockKind::depthwise_separable:
      case BlockKind::residual:
        os << " out=" << b.channels_out;
        break;
      case BlockKind::inception:
        os << " branches=" << b.branch_widths[0] << "," << b.branch_widths[1] << "," << b.branch_widths[2] << ","
           << b.branch_widths[3];
        break;
      case BlockKind::dense_block:
        os << " growth=" << b.growth_rate << " layers=" << b.layers;
        break;
    }
    os << " kernel=" << b.kernel << " stride=" << b.stride;
    if (b.width_multiplier != 1.0) os << " alpha=" << format_number(b.width_multiplier);
    if (b.pool_after > 0) os << " pool=" << b.pool_after;
    os << "\n";
  }
  return os.str();
}

std::size_t count_params(const LayerGraph& graph) {
  std::size_t n = 0;
  for (const auto& node : graph.nodes()) {
    for (const auto& [key, p] : node.params) {
      if (p.trainable) n += p.size();
    }
  }
  return n;
}

std::string last_conv_layer(const LayerGraph& graph) {
  for (auto it = graph.nodes().rbegin(); it != graph.nodes().rend(); ++it) {
    if (is_conv_family(it->layer.kind)) return it->layer.name;
  }
  return {};
}

int logit_node(const LayerGraph& graph) {
  const int out = graph.output();
  const LayerNode& last = graph.node(out).layer;
  if (last.kind == LayerKind::activation && last.attrs.activation == ActivationMode::sigmoid) return last.inputs[0];
  return out;
}

PreprocessConfig model_preprocess_config(const LayerGraph& graph) {
  const Shape& in = graph.input_shape();
  if (in.size() != 3) throw StateError("model has no input shape");
  PreprocessConfig config;
  config.target_height = in[1];
  config.target_width = in[2];
  const auto it = graph.metadata().find("input_mode");
  if (it != graph.metadata().end()) {
    config.input_mode = parse_input_mode(it->second);
  } else {
    switch (in[0]) {
      case 1: config.input_mode = InputMode::edges; break;
      case 3: config.input_mode = InputMode::rgb; break;
      case 4: config.input_mode = InputMode::rgb_plus_edge; break;
      default: throw StateError("cannot infer input mode for " + std::to_string(in[0]) + " channels");
    }
  }
  if (input_channels(config.input_mode) != in[0]) {
    throw StateError("input mode " + std::string(to_string(config.input_mode)) + " does not match " +
                     std::to_string(in[0]) + " input channels");
  }
  return config;
}

}  // namespace plasmo
