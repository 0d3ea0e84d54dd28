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

#include "plasmo/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace plasmo {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise_conv2d: return "depthwise_conv2d";
    case LayerKind::pool2d: return "pool2d";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::activation: return "activation";
    case LayerKind::merge: return "merge";
  }
  return "?";
}

std::string_view to_string(PoolMode mode) { return mode == PoolMode::max ? "max" : "avg"; }

std::string_view to_string(ActivationMode mode) {
  switch (mode) {
    case ActivationMode::relu: return "relu";
    case ActivationMode::sigmoid: return "sigmoid";
    case ActivationMode::softmax: return "softmax";
  }
  return "?";
}

std::string_view to_string(MergeMode mode) { return mode == MergeMode::add ? "add" : "concat_channels"; }

LayerKind parse_layer_kind(std::string_view s) {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::depthwise_conv2d, LayerKind::pool2d, LayerKind::global_avg_pool,
                      LayerKind::dense, LayerKind::batch_norm, LayerKind::activation, LayerKind::merge}) {
    if (to_string(k) == s) return k;
  }
  throw FormatError("unknown layer kind '" + std::string(s) + "'");
}

PoolMode parse_pool_mode(std::string_view s) {
  if (s == "max") return PoolMode::max;
  if (s == "avg") return PoolMode::avg;
  throw FormatError("unknown pool mode '" + std::string(s) + "'");
}

ActivationMode parse_activation_mode(std::string_view s) {
  for (ActivationMode m : {ActivationMode::relu, ActivationMode::sigmoid, ActivationMode::softmax}) {
    if (to_string(m) == s) return m;
  }
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

MergeMode parse_merge_mode(std::string_view s) {
  if (s == "add") return MergeMode::add;
  if (s == "concat_channels") return MergeMode::concat_channels;
  throw FormatError("unknown merge mode '" + std::string(s) + "'");
}

bool is_conv_family(LayerKind kind) {
  return kind == LayerKind::conv2d || kind == LayerKind::depthwise_conv2d;
}

namespace {

bool trainable_key(const std::string& key) { return key != "running_mean" && key != "running_var"; }

template <typename T>
const BasicTensor<T>& resolve(const Parameter<T>& p, BasicTensor<T>& scratch) {
  if (!p.quantized) return p.value;
  scratch = p.quantized->template dequantize<T>();
  return scratch;
}

template <typename T>
const Parameter<T>* find_param(const typename BasicGraph<T>::Node& node, const char* key) {
  auto it = node.params.find(key);
  return it == node.params.end() ? nullptr : &it->second;
}

std::string node_context(const LayerNode& layer) {
  return "layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) + ")";
}

}  // namespace

template <typename T>
BasicGraph<T>::BasicGraph(Shape input_shape) : input_shape_(std::move(input_shape)) {
  if (input_shape_.size() != 3) throw DimensionError("graph input shape must be (C, H, W)");
  shape_numel(input_shape_);
}

template <typename T>
void BasicGraph<T>::set_output(int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= nodes_.size()) {
    throw ParameterError("set_output: node index out of range");
  }
  output_ = index;
}

template <typename T>
int BasicGraph<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].layer.name == name) return static_cast<int>(i);
  }
  return -1;
}

template <typename T>
const Shape& BasicGraph<T>::output_shape(int index) const {
  if (index == kGraphInput) return input_shape_;
  return node(index).output_shape;
}

template <typename T>
Shape BasicGraph<T>::infer_output_shape(const LayerNode& layer,
                                        const std::map<std::string, Parameter<T>>& params) const {
  std::vector<Shape> in;
  for (int i : layer.inputs) {
    Shape s = output_shape(i);
    s.insert(s.begin(), 1);
    in.push_back(std::move(s));
  }
  auto spatial = [&](int kernel_h, int kernel_w) {
    const Shape& s = in.front();
    if (s.size() != 4) throw DimensionError(node_context(layer) + ": expected an image-shaped input");
    const int h = window_extent(s[2], kernel_h, layer.attrs.stride, layer.attrs.padding);
    const int w = window_extent(s[3], kernel_w, layer.attrs.stride, layer.attrs.padding);
    return std::pair{h, w};
  };
  auto weight_shape = [&](const char* key) -> const Shape& {
    auto it = params.find(key);
    if (it == params.end()) throw ParameterError(node_context(layer) + ": missing parameter '" + key + "'");
    return it->second.shape();
  };
  auto check_bias = [&](int expected) {
    auto it = params.find("bias");
    if (it != params.end() && it->second.shape() != Shape{expected}) {
      throw DimensionError(node_context(layer) + ": bias must have shape (" + std::to_string(expected) + ")");
    }
  };

  switch (layer.kind) {
    case LayerKind::conv2d: {
      const Shape& w = weight_shape("weight");
      if (w.size() != 4) throw DimensionError(node_context(layer) + ": weight must be (O, C, kH, kW)");
      if (in.front().size() != 4 || in.front()[1] != w[1]) {
        throw DimensionError(node_context(layer) + ": axis 1 (channels) of input " + shape_string(in.front()) +
                             " does not match weight " + shape_string(w));
      }
      check_bias(w[0]);
      auto [h, wd] = spatial(w[2], w[3]);
      return {w[0], h, wd};
    }
    case LayerKind::depthwise_conv2d: {
      const Shape& w = weight_shape("weight");
      if (w.size() != 4 || w[1] != 1) throw DimensionError(node_context(layer) + ": weight must be (C, 1, kH, kW)");
      if (in.front().size() != 4 || in.front()[1] != w[0]) {
        throw DimensionError(node_context(layer) + ": axis 1 (channels) of input " + shape_string(in.front()) +
                             " does not match weight " + shape_string(w));
      }
      check_bias(w[0]);
      auto [h, wd] = spatial(w[2], w[3]);
      return {w[0], h, wd};
    }
    case LayerKind::pool2d: {
      if (layer.attrs.padding >= layer.attrs.window) {
        throw ParameterError(node_context(layer) + ": padding must be smaller than the window");
      }
      auto [h, wd] = spatial(layer.attrs.window, layer.attrs.window);
      return {in.front()[1], h, wd};
    }
    case LayerKind::global_avg_pool:
      if (in.front().size() != 4) throw DimensionError(node_context(layer) + ": expected an image-shaped input");
      return {in.front()[1], 1, 1};
    case LayerKind::dense: {
      const Shape& w = weight_shape("weight");
      if (w.size() != 2) throw DimensionError(node_context(layer) + ": weight must be (F, O)");
      const std::size_t f = shape_numel(in.front());
      if (static_cast<std::size_t>(w[0]) != f) {
        throw DimensionError(node_context(layer) + ": axis 1 (features) of input is " + std::to_string(f) +
                             " but weight expects " + std::to_string(w[0]));
      }
      check_bias(w[1]);
      return {w[1]};
    }
    case LayerKind::batch_norm: {
      const int c = in.front().size() >= 2 ? in.front()[1] : -1;
      for (const char* key : {"gamma", "beta", "running_mean", "running_var"}) {
        if (weight_shape(key) != Shape{c}) {
          throw DimensionError(node_context(layer) + ": axis 1 (channels) of input is " + std::to_string(c) +
                               " but '" + key + "' has shape " + shape_string(weight_shape(key)));
        }
      }
      Shape out = in.front();
      out.erase(out.begin());
      return out;
    }
    case LayerKind::activation: {
      Shape out = in.front();
      out.erase(out.begin());
      return out;
    }
    case LayerKind::merge: {
      std::vector<BasicTensor<T>> probes;
      std::vector<const BasicTensor<T>*> ptrs;
      probes.reserve(in.size());
      for (const Shape& s : in) probes.emplace_back(s);
      for (const auto& p : probes) ptrs.push_back(&p);
      Shape out;
      try {
        out = merge(ptrs, layer.attrs.merge).shape();
      } catch (const DimensionError& e) {
        throw DimensionError(node_context(layer) + ": " + e.what());
      }
      out.erase(out.begin());
      return out;
    }
  }
  throw ParameterError(node_context(layer) + ": unsupported layer kind");
}

template <typename T>
int BasicGraph<T>::add(LayerNode layer, std::map<std::string, BasicTensor<T>> params) {
  if (input_shape_.empty()) throw StateError("graph input shape must be set before adding layers");
  if (layer.name.empty()) throw ParameterError("layer name must not be empty");
  if (find(layer.name) >= 0) throw ParameterError("duplicate layer name '" + layer.name + "'");
  const int index = static_cast<int>(nodes_.size());
  if (layer.inputs.empty()) throw ParameterError(node_context(layer) + ": needs at least one input");
  if (layer.kind != LayerKind::merge && layer.inputs.size() != 1) {
    throw ParameterError(node_context(layer) + ": expects exactly one input");
  }
  for (int i : layer.inputs) {
    if (i != kGraphInput && (i < 0 || i >= index)) {
      throw ParameterError(node_context(layer) + ": inputs must reference the graph input or earlier nodes");
    }
  }
  Node node;
  for (auto& [key, value] : params) {
    Parameter<T> p;
    p.value = std::move(value);
    p.trainable = trainable_key(key);
    node.params.emplace(key, std::move(p));
  }
  node.output_shape = infer_output_shape(layer, node.params);
  node.layer = std::move(layer);
  nodes_.push_back(std::move(node));
  output_ = index;
  return index;
}

template <typename T>
std::vector<std::string> BasicGraph<T>::parameter_names(bool trainable_only) const {
  std::vector<std::string> names;
  for (const Node& n : nodes_) {
    for (const auto& [key, p] : n.params) {
      if (!trainable_only || p.trainable) names.push_back(n.layer.name + "." + key);
    }
  }
  return names;
}

template <typename T>
Parameter<T>& BasicGraph<T>::parameter(const std::string& full_name) {
  const auto dot = full_name.rfind('.');
  if (dot != std::string::npos) {
    const int idx = find(std::string_view(full_name).substr(0, dot));
    if (idx >= 0) {
      auto& params = nodes_[static_cast<std::size_t>(idx)].params;
      auto it = params.find(full_name.substr(dot + 1));
      if (it != params.end()) return it->second;
    }
  }
  throw ParameterError("unknown parameter '" + full_name + "'");
}

template <typename T>
const Parameter<T>& BasicGraph<T>::parameter(const std::string& full_name) const {
  return const_cast<BasicGraph*>(this)->parameter(full_name);
}

template <typename T>
bool BasicGraph<T>::quantized() const {
  for (const Node& n : nodes_) {
    for (const auto& [key, p] : n.params) {
      if (p.quantized) return true;
    }
  }
  return false;
}

template <typename T>
template <typename U>
BasicGraph<U> BasicGraph<T>::cast() const {
  BasicGraph<U> out;
  out.input_shape_ = input_shape_;
  out.output_ = output_;
  out.metadata_ = metadata_;
  for (const Node& n : nodes_) {
    typename BasicGraph<U>::Node m;
    m.layer = n.layer;
    m.output_shape = n.output_shape;
    for (const auto& [key, p] : n.params) {
      Parameter<U> q;
      q.trainable = p.trainable;
      q.value = p.quantized ? p.quantized->template dequantize<U>() : p.value.template cast<U>();
      m.params.emplace(key, std::move(q));
    }
    out.nodes_.push_back(std::move(m));
  }
  return out;
}

template <typename T>
void ForwardContext<T>::clear() {
  ready_ = false;
  input_ = {};
  outputs_.clear();
  bn_.clear();
}

template <typename T>
BasicTensor<T> forward(const BasicGraph<T>& graph, const BasicTensor<T>& input, Phase phase, ForwardContext<T>* ctx) {
  if (graph.size() == 0) throw StateError("forward on an empty graph");
  require_rank(input, 4, "graph input");
  if (input.dim(1) != graph.input_shape()[0]) {
    throw DimensionError("graph input: axis 1 (channels) is " + std::to_string(input.dim(1)) + " but the model expects " +
                         std::to_string(graph.input_shape()[0]));
  }
  std::vector<BasicTensor<T>> outputs(graph.size());
  std::vector<BatchNormState<T>> bn(graph.size());
  const BatchNormMode bn_mode = phase == Phase::train ? BatchNormMode::train : BatchNormMode::infer;
  BasicTensor<T> scratch;
  const BasicTensor<T> none;

  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& node = graph.nodes()[i];
    const LayerNode& layer = node.layer;
    auto in = [&](std::size_t k) -> const BasicTensor<T>& {
      const int src = layer.inputs[k];
      return src == kGraphInput ? input : outputs[static_cast<std::size_t>(src)];
    };
    auto param = [&](const char* key) -> const Parameter<T>& { return node.params.at(key); };
    auto bias = [&]() -> const BasicTensor<T>& {
      auto it = node.params.find("bias");
      return it == node.params.end() ? none : it->second.value;
    };
    switch (layer.kind) {
      case LayerKind::conv2d:
        outputs[i] = conv2d(in(0), resolve(param("weight"), scratch), bias(), layer.attrs.stride, layer.attrs.padding);
        break;
      case LayerKind::depthwise_conv2d:
        outputs[i] = depthwise_conv2d(in(0), resolve(param("weight"), scratch), bias(), layer.attrs.stride,
                                      layer.attrs.padding);
        break;
      case LayerKind::pool2d:
        outputs[i] = pool2d(in(0), layer.attrs.pool_mode, layer.attrs.window, layer.attrs.stride, layer.attrs.padding);
        break;
      case LayerKind::global_avg_pool:
        outputs[i] = global_avg_pool(in(0));
        break;
      case LayerKind::dense:
        outputs[i] = dense(in(0), resolve(param("weight"), scratch), bias());
        break;
      case LayerKind::batch_norm:
        outputs[i] = batch_norm_forward(in(0), param("gamma").value, param("beta").value, param("running_mean").value,
                                        param("running_var").value, bn_mode, layer.attrs.epsilon, bn[i]);
        break;
      case LayerKind::activation:
        outputs[i] = activation(in(0), layer.attrs.activation);
        break;
      case LayerKind::merge: {
        std::vector<const BasicTensor<T>*> ptrs;
        for (std::size_t k = 0; k < layer.inputs.size(); ++k) ptrs.push_back(&in(k));
        outputs[i] = merge(ptrs, layer.attrs.merge);
        break;
      }
    }
  }
  BasicTensor<T> result = outputs[static_cast<std::size_t>(graph.output())];
  if (ctx) {
    ctx->ready_ = true;
    ctx->phase_ = phase;
    ctx->input_ = input;
    ctx->outputs_ = std::move(outputs);
    ctx->bn_ = std::move(bn);
  }
  return result;
}

template <typename T>
Gradients<T> backprop(const BasicGraph<T>& graph, const ForwardContext<T>& ctx, const BasicTensor<T>& seed_grad,
                      int seed_node) {
  if (!ctx.ready()) throw StateError("backprop called before a forward pass");
  if (ctx.outputs().size() != graph.size()) throw StateError("forward context belongs to a different graph");
  const int seed = seed_node == kGraphOutput ? graph.output() : seed_node;
  if (seed < 0 || static_cast<std::size_t>(seed) >= graph.size()) throw ParameterError("backprop: bad seed node");
  if (seed_grad.shape() != ctx.output(seed).shape()) {
    throw DimensionError("backprop: seed gradient shape " + shape_string(seed_grad.shape()) +
                         " does not match node output " + shape_string(ctx.output(seed).shape()));
  }

  Gradients<T> grads;
  grads.nodes.resize(graph.size());
  grads.nodes[static_cast<std::size_t>(seed)] = seed_grad;
  grads.input = BasicTensor<T>(ctx.input().shape());
  const BatchNormMode bn_mode = ctx.phase() == Phase::train ? BatchNormMode::train : BatchNormMode::infer;
  BasicTensor<T> scratch;

  auto accumulate = [&](int src, BasicTensor<T>&& g) {
    BasicTensor<T>& dst = src == kGraphInput ? grads.input : grads.nodes[static_cast<std::size_t>(src)];
    if (dst.empty()) {
      dst = std::move(g);
    } else {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }
  };
  auto put_param = [&](const LayerNode& layer, const char* key, BasicTensor<T>&& g) {
    grads.params[layer.name + "." + key] = std::move(g);
  };

  for (int i = seed; i >= 0; --i) {
    const auto& node = graph.nodes()[static_cast<std::size_t>(i)];
    const LayerNode& layer = node.layer;
    const BasicTensor<T>& gout = grads.nodes[static_cast<std::size_t>(i)];
    if (gout.empty()) continue;
    auto in = [&](std::size_t k) -> const BasicTensor<T>& {
      const int src = layer.inputs[k];
      return src == kGraphInput ? ctx.input() : ctx.output(src);
    };
    const bool has_bias = node.params.count("bias") > 0;
    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::depthwise_conv2d:
      case LayerKind::dense: {
        const BasicTensor<T>& w = resolve(node.params.at("weight"), scratch);
        ConvGrads<T> g = layer.kind == LayerKind::conv2d
                             ? conv2d_backward(in(0), w, has_bias, layer.attrs.stride, layer.attrs.padding, gout)
                         : layer.kind == LayerKind::depthwise_conv2d
                             ? depthwise_conv2d_backward(in(0), w, has_bias, layer.attrs.stride, layer.attrs.padding,
                                                         gout)
                             : dense_backward(in(0), w, has_bias, gout);
        put_param(layer, "weight", std::move(g.weights));
        if (has_bias) put_param(layer, "bias", std::move(g.bias));
        accumulate(layer.inputs[0], std::move(g.input));
        break;
      }
      case LayerKind::pool2d:
        accumulate(layer.inputs[0], pool2d_backward(in(0), layer.attrs.pool_mode, layer.attrs.window,
                                                    layer.attrs.stride, layer.attrs.padding, gout));
        break;
      case LayerKind::global_avg_pool:
        accumulate(layer.inputs[0], global_avg_pool_backward(in(0).shape(), gout));
        break;
      case LayerKind::batch_norm: {
        BatchNormGrads<T> g =
            batch_norm_backward(ctx.batch_norm_state(i), node.params.at("gamma").value, bn_mode, gout);
        put_param(layer, "gamma", std::move(g.gamma));
        put_param(layer, "beta", std::move(g.beta));
        accumulate(layer.inputs[0], std::move(g.input));
        break;
      }
      case LayerKind::activation:
        accumulate(layer.inputs[0], activation_backward(ctx.output(i), layer.attrs.activation, gout));
        break;
      case LayerKind::merge: {
        std::vector<Shape> shapes;
        for (std::size_t k = 0; k < layer.inputs.size(); ++k) shapes.push_back(in(k).shape());
        std::vector<BasicTensor<T>> g = merge_backward(shapes, layer.attrs.merge, gout);
        for (std::size_t k = 0; k < g.size(); ++k) accumulate(layer.inputs[k], std::move(g[k]));
        break;
      }
    }
  }

  for (const auto& node : graph.nodes()) {
    for (const auto& [key, p] : node.params) {
      if (!p.trainable) continue;
      const std::string name = node.layer.name + "." + key;
      if (!grads.params.count(name)) grads.params.emplace(name, BasicTensor<T>(p.shape()));
    }
  }
  return grads;
}

template <typename T>
void apply_batch_statistics(BasicGraph<T>& graph, const ForwardContext<T>& ctx) {
  if (!ctx.ready() || ctx.phase() != Phase::train) {
    throw StateError("apply_batch_statistics needs a train-phase forward context");
  }
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto& node = graph.node(static_cast<int>(i));
    if (node.layer.kind != LayerKind::batch_norm) continue;
    const BatchNormState<T>& st = ctx.batch_norm_state(static_cast<int>(i));
    const T m = static_cast<T>(node.layer.attrs.momentum);
    BasicTensor<T>& rm = node.params.at("running_mean").value;
    BasicTensor<T>& rv = node.params.at("running_var").value;
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = m * rm[c] + (T{1} - m) * st.mean[c];
      rv[c] = m * rv[c] + (T{1} - m) * st.var[c];
    }
  }
}

namespace {

using Graph64 = BasicGraph<double>;
using Tensor64 = BasicTensor<double>;

// Records which side of every relu/max-pool kink the pass landed on.
std::vector<long> kink_signature(const Graph64& graph, const ForwardContext<double>& ctx) {
  std::vector<long> sig;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerNode& layer = graph.nodes()[i].layer;
    if (layer.kind == LayerKind::activation && layer.attrs.activation == ActivationMode::relu) {
      const Tensor64& out = ctx.output(static_cast<int>(i));
      for (std::size_t k = 0; k < out.size(); ++k) sig.push_back(out[k] > 0.0 ? 1 : 0);
    } else if (layer.kind == LayerKind::pool2d && layer.attrs.pool_mode == PoolMode::max) {
      const int src = layer.inputs[0];
      const Tensor64& in = src == kGraphInput ? ctx.input() : ctx.output(src);
      const std::vector<long> arg = max_pool_argmax(in, layer.attrs.window, layer.attrs.stride, layer.attrs.padding);
      sig.insert(sig.end(), arg.begin(), arg.end());
    }
  }
  return sig;
}

double projected_loss(const Tensor64& out, const Tensor64& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

}  // namespace

GradCheckReport grad_check(const LayerGraph& graph, const Tensor& input, std::uint64_t seed,
                           const GradCheckOptions& options) {
  Graph64 g = graph.cast<double>();
  Tensor64 x = input.cast<double>();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x67636b00u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  ForwardContext<double> ctx;
  const Tensor64 out = forward(g, x, options.phase, &ctx);
  Tensor64 proj(out.shape());
  for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = uni(rng);
  const Gradients<double> analytic = backprop(g, ctx, proj);

  GradCheckReport report;
  const double h = options.step;
  auto evaluate = [&](double& coord, double analytic_value) {
    const double original = coord;
    ForwardContext<double> plus_ctx, minus_ctx;
    coord = original + h;
    const double lp = projected_loss(forward(g, x, options.phase, &plus_ctx), proj);
    coord = original - h;
    const double lm = projected_loss(forward(g, x, options.phase, &minus_ctx), proj);
    coord = original;
    if (kink_signature(g, plus_ctx) != kink_signature(g, minus_ctx)) {
      ++report.skipped;
      return;
    }
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic_value), std::abs(numeric), 1e-8});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(analytic_value - numeric) / denom);
    ++report.checked;
  };
  auto sample_indices = [&](std::size_t n) {
    std::vector<std::size_t> idx;
    if (n <= static_cast<std::size_t>(options.samples_per_tensor)) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (int k = 0; k < options.samples_per_tensor; ++k) idx.push_back(pick(rng));
    }
    return idx;
  };

  for (const std::string& name : g.parameter_names(true)) {
    Tensor64& value = g.parameter(name).value;
    const Tensor64& grad = analytic.params.at(name);
    for (std::size_t i : sample_indices(value.size())) evaluate(value[i], grad[i]);
  }
  for (std::size_t i : sample_indices(x.size())) evaluate(x[i], analytic.input[i]);
  return report;
}

template class BasicGraph<float>;
template class BasicGraph<double>;
template BasicGraph<double> BasicGraph<float>::cast<double>() const;
template class ForwardContext<float>;
template class ForwardContext<double>;

#define PLASMO_INSTANTIATE_GRAPH(T)                                                                                \
  template BasicTensor<T> forward(const BasicGraph<T>&, const BasicTensor<T>&, Phase, ForwardContext<T>*);        \
  template Gradients<T> backprop(const BasicGraph<T>&, const ForwardContext<T>&, const BasicTensor<T>&, int);     \
  template void apply_batch_statistics(BasicGraph<T>&, const ForwardContext<T>&);

PLASMO_INSTANTIATE_GRAPH(float)
PLASMO_INSTANTIATE_GRAPH(double)

#undef PLASMO_INSTANTIATE_GRAPH

}  // namespace plasmo
