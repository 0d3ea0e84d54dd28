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

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/imgproc.hpp"

namespace plasmo {

enum class BlockKind { plain_conv, depthwise_separable, inception, residual, dense_block };

std::string_view to_string(BlockKind kind);
BlockKind parse_block_kind(std::string_view s);

struct BlockSpec {
  BlockKind kind = BlockKind::plain_conv;
  int channels_in = 0;   // 0: take whatever the previous block produces
  int channels_out = 0;  // plain_conv, depthwise_separable, residual
  int kernel = 3;
  int stride = 1;                 // first convolution of the block
  double width_multiplier = 1.0;  // alpha, in (0, 1]
  int growth_rate = 12;           // dense_block: channels added per layer
  int layers = 3;                 // dense_block
  std::array<int, 4> branch_widths{8, 16, 4, 4};  // inception: 1x1, 3x3, 5x5, pool+1x1
  int pool_after = 0;             // >0: max-pool with this window and stride after the block

  /// Throws ParameterError when a field is out of range.
  void validate() const;
};

struct ModelSpec {
  std::string name = "custom";
  InputMode input_mode = InputMode::rgb_plus_edge;
  int input_size = 75;
  double resolution_multiplier = 1.0;  // rho, in (0, 1]
  double width_multiplier = 1.0;       // alpha applied on top of each block's own
  std::vector<BlockSpec> blocks;

  int input_channels() const { return input_mode_channels(); }
  /// round(input_size * rho), at least 1.
  int effective_input_size() const;

 private:
  int input_mode_channels() const { return plasmo::input_channels(input_mode); }
};

/// Channel count after alpha scaling: max(1, round(alpha * channels)).
int scale_channels(int channels, double alpha);

/// Appends one block to `graph`, reading from node `input` (or kGraphInput).
/// Layer names are prefixed with `prefix`. Returns the block's output node.
/// Weights use He-uniform initialization drawn from `rng`.
int build_block(LayerGraph& graph, const BlockSpec& spec, int input, const std::string& prefix, std::mt19937_64& rng,
                double extra_alpha = 1.0);

/// Full classifier: blocks -> global average pool -> dense(1) -> sigmoid.
/// Dimension errors are reported with the failing block index.
LayerGraph assemble_model(const ModelSpec& spec, std::uint64_t seed = 0);

std::vector<std::string> preset_names();
/// tiny_vgg, tiny_mobile, tiny_inception, tiny_residual, tiny_dense.
ModelSpec preset_spec(std::string_view name, InputMode mode = InputMode::rgb_plus_edge);
bool is_preset(std::string_view name);

/// Line-oriented "key = value" text; blocks are "block = <kind> key=value ...".
ModelSpec parse_model_spec(std::string_view text);
std::string format_model_spec(const ModelSpec& spec);

/// Total element count of all trainable parameter tensors.
std::size_t count_params(const LayerGraph& graph);

/// Name of the final conv-family layer, or empty when there is none.
std::string last_conv_layer(const LayerGraph& graph);

/// Node whose output is the pre-sigmoid logit, or the graph output if the
/// model does not end in a sigmoid.
int logit_node(const LayerGraph& graph);

/// Preprocessing that matches a model's input: target size from the graph
/// input shape, input mode from the "input_mode" metadata (or the channel
/// count when absent).
PreprocessConfig model_preprocess_config(const LayerGraph& graph);

}  // namespace plasmo
