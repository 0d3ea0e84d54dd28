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
#include <map>
#include <string>
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/image.hpp"

namespace plasmo {

/// Row-major heat values in [0, 1].
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::string source_layer;
  int map_width = 0;   // resolution of the feature map before upsampling
  int map_height = 0;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Output of every node for a forward pass on `input`, keyed by layer name.
std::map<std::string, Tensor> layer_activations(const LayerGraph& model, const Tensor& input);

enum class ClassSign { positive, negative };

/// Raw Grad-CAM map before relu: sum_k mean(G_k) * A_k, for one sample.
/// Both tensors are (1, K, H, W). Returned row-major (H * W).
std::vector<double> grad_cam_map(const Tensor& activations, const Tensor& gradients);

/// Applies relu, bilinear upsampling to out_w x out_h, and max-normalization.
Heatmap finish_heatmap(const std::vector<double>& raw, int map_w, int map_h, int out_w, int out_h,
                       std::string source_layer);

/// Gradient of the pre-sigmoid logit (negated for ClassSign::negative) with
/// respect to a conv-family layer. Input is (1, C, H, W). The heatmap is
/// upsampled to out_w x out_h, defaulting to the input size.
Heatmap grad_cam(const LayerGraph& model, const Tensor& input, const std::string& target_layer,
                 ClassSign sign = ClassSign::positive, int out_w = 0, int out_h = 0);

using ColorTable = std::array<std::array<std::uint8_t, 3>, 256>;
const ColorTable& heat_colormap();

/// out = (1 - alpha) * base + alpha * colormap(heat), rounded; RGB result.
Image render_overlay(const Heatmap& heatmap, const Image& base, double alpha);

}  // namespace plasmo
