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

#include "plasmo/explainer.hpp"

#include <algorithm>
#include <cmath>

#include "plasmo/imgproc.hpp"
#include "plasmo/netzoo.hpp"

namespace plasmo {

std::map<std::string, Tensor> layer_activations(const LayerGraph& model, const Tensor& input) {
  ForwardContext<float> ctx;
  forward(model, input, Phase::infer, &ctx);
  std::map<std::string, Tensor> out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    out.emplace(model.nodes()[i].layer.name, ctx.output(static_cast<int>(i)));
  }
  return out;
}

std::vector<double> grad_cam_map(const Tensor& activations, const Tensor& gradients) {
  require_rank(activations, 4, "grad_cam_map activations");
  if (activations.shape() != gradients.shape()) {
    throw DimensionError("grad_cam_map: gradient shape " + shape_string(gradients.shape()) +
                         " does not match activations " + shape_string(activations.shape()));
  }
  if (activations.dim(0) != 1) throw DimensionError("grad_cam_map: expected a single sample");
  const int k = activations.dim(1), h = activations.dim(2), w = activations.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> raw(plane, 0.0);
  for (int c = 0; c < k; ++c) {
    const float* g = gradients.data() + c * plane;
    const float* a = activations.data() + c * plane;
    double weight = 0.0;
    for (std::size_t i = 0; i < plane; ++i) weight += g[i];
    weight /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) raw[i] += weight * a[i];
  }
  return raw;
}

Heatmap finish_heatmap(const std::vector<double>& raw, int map_w, int map_h, int out_w, int out_h,
                       std::string source_layer) {
  if (raw.size() != static_cast<std::size_t>(map_w) * map_h) throw DimensionError("heatmap size mismatch");
  std::vector<float> plane(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) plane[i] = static_cast<float>(std::max(0.0, raw[i]));
  Heatmap hm;
  hm.width = out_w;
  hm.height = out_h;
  hm.map_width = map_w;
  hm.map_height = map_h;
  hm.source_layer = std::move(source_layer);
  hm.values = (out_w == map_w && out_h == map_h) ? plane : resize_bilinear(plane, map_w, map_h, out_w, out_h);
  const float peak = *std::max_element(hm.values.begin(), hm.values.end());
  if (peak > 0.0f) {
    for (float& v : hm.values) v = std::clamp(v / peak, 0.0f, 1.0f);
  } else {
    std::fill(hm.values.begin(), hm.values.end(), 0.0f);
  }
  return hm;
}

Heatmap grad_cam(const LayerGraph& model, const Tensor& input, const std::string& target_layer, ClassSign sign,
                 int out_w, int out_h) {
  const int target = model.find(target_layer);
  if (target < 0) throw ParameterError("unknown layer '" + target_layer + "'");
  if (!is_conv_family(model.node(target).layer.kind)) {
    throw ParameterError("layer '" + target_layer + "' is a " + std::string(to_string(model.node(target).layer.kind)) +
                         " layer; Grad-CAM needs a convolution");
  }
  require_rank(input, 4, "grad_cam input");
  if (input.dim(0) != 1) throw DimensionError("grad_cam: expected a single sample");
  if (out_w <= 0) out_w = input.dim(3);
  if (out_h <= 0) out_h = input.dim(2);

  ForwardContext<float> ctx;
  forward(model, input, Phase::infer, &ctx);
  const int logit = logit_node(model);
  Tensor seed(ctx.output(logit).shape(), sign == ClassSign::positive ? 1.0f : -1.0f);
  const Gradients<float> grads = backprop(model, ctx, seed, logit);
  const Tensor& acts = ctx.output(target);
  const Tensor& g = grads.nodes[static_cast<std::size_t>(target)];
  const std::vector<double> raw = g.empty() ? std::vector<double>(acts.size() / acts.dim(1), 0.0)
                                            : grad_cam_map(acts, g);
  return finish_heatmap(raw, acts.dim(3), acts.dim(2), out_w, out_h, target_layer);
}

const ColorTable& heat_colormap() {
  static const ColorTable table = {{
#include "colormap_table.inc"
  }};
  return table;
}

Image render_overlay(const Heatmap& heatmap, const Image& base, double alpha) {
  if (heatmap.width != base.width || heatmap.height != base.height) {
    throw DimensionError("heatmap is " + std::to_string(heatmap.width) + "x" + std::to_string(heatmap.height) +
                         " but the base image is " + std::to_string(base.width) + "x" + std::to_string(base.height));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("overlay alpha must be in [0, 1]");
  const ColorTable& lut = heat_colormap();
  Image out(base.width, base.height, 3);
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      const double h = std::clamp(static_cast<double>(heatmap.at(x, y)), 0.0, 1.0);
      const auto& color = lut[static_cast<std::size_t>(std::lround(h * 255.0))];
      for (int c = 0; c < 3; ++c) {
        const double b = base.at(x, y, base.channels >= 3 ? c : 0);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * b + alpha * color[c]));
      }
    }
  }
  return out;
}

}  // namespace plasmo
