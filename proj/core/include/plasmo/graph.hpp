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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plasmo/ops.hpp"
#include "plasmo/tensor.hpp"

namespace plasmo {

enum class LayerKind { conv2d, depthwise_conv2d, pool2d, global_avg_pool, dense, batch_norm, activation, merge };

std::string_view to_string(LayerKind kind);
std::string_view to_string(PoolMode mode);
std::string_view to_string(ActivationMode mode);
std::string_view to_string(MergeMode mode);
LayerKind parse_layer_kind(std::string_view s);
PoolMode parse_pool_mode(std::string_view s);
ActivationMode parse_activation_mode(std::string_view s);
MergeMode parse_merge_mode(std::string_view s);

/// Conv-family layers are valid Grad-CAM targets.
bool is_conv_family(LayerKind kind);

struct LayerAttrs {
  int stride = 1;
  int padding = 0;
  int window = 2;  // pool2d only
  PoolMode pool_mode = PoolMode::max;
  ActivationMode activation = ActivationMode::relu;
  MergeMode merge = MergeMode::concat_channels;
  double epsilon = 1e-5;
  double momentum = 0.9;
};

/// Producer index meaning "the graph input".
inline constexpr int kGraphInput = -1;
/// Seed index meaning "the designated graph output".
inline constexpr int kGraphOutput = -2;

struct LayerNode {
  std::string name;
  LayerKind kind = LayerKind::activation;
  std::vector<int> inputs;
  LayerAttrs attrs;
};

/// A named tensor of a layer. Conv and dense weights may instead be held in
/// quantized form, in which case `value` is empty and forward passes
/// dequantize on the fly.
template <typename T>
struct Parameter {
  BasicTensor<T> value;
  std::optional<QuantizedTensor> quantized;
  bool trainable = true;

  const Shape& shape() const { return quantized ? quantized->shape : value.shape(); }
  std::size_t size() const { return quantized ? quantized->size() : value.size(); }
};

enum class Phase { infer, train };

/// Directed acyclic graph of layers. Nodes may only consume the graph input or
/// earlier nodes, so insertion order is a topological order.
template <typename T>
class BasicGraph {
 public:
  struct Node {
    LayerNode layer;
    std::map<std::string, Parameter<T>> params;
    Shape output_shape;  // per-sample (C, H, W) or (F) for the declared input shape
  };

  BasicGraph() = default;
  /// input_shape is (C, H, W).
  explicit BasicGraph(Shape input_shape);

  /// Appends a node after validating its producers, parameters, and output
  /// shape. Returns the node index. The newest node becomes the output.
  int add(LayerNode layer, std::map<std::string, BasicTensor<T>> params = {});

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  Node& node(int index) { return nodes_.at(static_cast<std::size_t>(index)); }

  int output() const noexcept { return output_; }
  void set_output(int index);

  /// Index of the node called `name`, or -1.
  int find(std::string_view name) const;
  /// Shape a node produces for a single sample of the declared input shape.
  const Shape& output_shape(int index) const;

  /// Parameters are addressed as "<node>.<key>", e.g. "conv1.weight".
  std::vector<std::string> parameter_names(bool trainable_only = true) const;
  Parameter<T>& parameter(const std::string& full_name);
  const Parameter<T>& parameter(const std::string& full_name) const;

  bool quantized() const;

  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  /// Converts every parameter to element type U, dequantizing as needed.
  template <typename U>
  BasicGraph<U> cast() const;

 private:
  template <typename>
  friend class BasicGraph;

  Shape infer_output_shape(const LayerNode& layer, const std::map<std::string, Parameter<T>>& params) const;

  Shape input_shape_;
  std::vector<Node> nodes_;
  int output_ = -1;
  std::map<std::string, std::string> metadata_;
};

using LayerGraph = BasicGraph<float>;

/// Retained intermediates of one forward pass. Each concurrent caller owns its
/// own context; the graph itself is never mutated by a forward pass.
template <typename T>
class ForwardContext {
 public:
  bool ready() const noexcept { return ready_; }
  Phase phase() const noexcept { return phase_; }
  const BasicTensor<T>& input() const { return input_; }
  const BasicTensor<T>& output(int node) const { return outputs_.at(static_cast<std::size_t>(node)); }
  const std::vector<BasicTensor<T>>& outputs() const noexcept { return outputs_; }
  const BatchNormState<T>& batch_norm_state(int node) const { return bn_.at(static_cast<std::size_t>(node)); }

  void clear();

 private:
  template <typename U>
  friend BasicTensor<U> forward(const BasicGraph<U>&, const BasicTensor<U>&, Phase, ForwardContext<U>*);

  bool ready_ = false;
  Phase phase_ = Phase::infer;
  BasicTensor<T> input_;
  std::vector<BasicTensor<T>> outputs_;
  std::vector<BatchNormState<T>> bn_;
};

/// Runs the graph on an (N, C, H, W) batch. When `ctx` is given, all node
/// outputs are retained there for backprop and activation capture.
template <typename T>
BasicTensor<T> forward(const BasicGraph<T>& graph, const BasicTensor<T>& input, Phase phase = Phase::infer,
                       ForwardContext<T>* ctx = nullptr);

template <typename T>
struct Gradients {
  std::map<std::string, BasicTensor<T>> params;  // one entry per trainable parameter
  BasicTensor<T> input;
  std::vector<BasicTensor<T>> nodes;  // gradient w.r.t. each node output; empty when unreached
};

/// Reverse-mode pass from `seed_node` (default: graph output) given the
/// gradient of the loss w.r.t. that node's output. Throws StateError when
/// `ctx` holds no forward pass.
template <typename T>
Gradients<T> backprop(const BasicGraph<T>& graph, const ForwardContext<T>& ctx, const BasicTensor<T>& seed_grad,
                      int seed_node = kGraphOutput);

/// Folds the batch statistics recorded by a train-phase forward into the
/// running statistics of every batch-norm node.
template <typename T>
void apply_batch_statistics(BasicGraph<T>& graph, const ForwardContext<T>& ctx);

struct GradCheckOptions {
  double step = 1e-3;
  int samples_per_tensor = 6;
  Phase phase = Phase::train;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  int checked = 0;
  /// Samples discarded because the +/- step crossed a relu or max-pool kink.
  int skipped = 0;
};

/// Compares backprop against central finite differences on the scalar loss
/// sum(r * output) for a seeded random r. Runs in double precision. Sampled
/// coordinates include every trainable tensor and the input.
GradCheckReport grad_check(const LayerGraph& graph, const Tensor& input, std::uint64_t seed,
                           const GradCheckOptions& options = {});

}  // namespace plasmo
