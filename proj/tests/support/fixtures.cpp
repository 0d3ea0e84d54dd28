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

#include "fixtures.hpp"

#include <cmath>
#include <random>

#include "testkit.hpp"

namespace plasmo::testkit {

SingleLayer single_layer(LayerKind kind, std::uint64_t seed, ActivationMode act, PoolMode pool, MergeMode mm) {
  std::mt19937_64 rng(seed);
  SingleLayer s{LayerGraph({3, 7, 7}), random_tensor({2, 3, 7, 7}, rng)};
  LayerGraph& g = s.graph;
  LayerNode n{"x", kind, {kGraphInput}, {}};
  switch (kind) {
    case LayerKind::conv2d:
      n.attrs.stride = 2;
      n.attrs.padding = 1;
      g.add(n, {{"weight", random_tensor({4, 3, 3, 3}, rng)}, {"bias", random_tensor({4}, rng)}});
      break;
    case LayerKind::depthwise_conv2d:
      n.attrs.padding = 1;
      g.add(n, {{"weight", random_tensor({3, 1, 3, 3}, rng)}, {"bias", random_tensor({3}, rng)}});
      break;
    case LayerKind::pool2d:
      n.attrs.pool_mode = pool;
      n.attrs.window = 3;
      n.attrs.stride = 2;
      n.attrs.padding = 1;
      g.add(n);
      break;
    case LayerKind::global_avg_pool:
      g.add(n);
      break;
    case LayerKind::dense:
      g.add(n, {{"weight", random_tensor({147, 5}, rng)}, {"bias", random_tensor({5}, rng)}});
      break;
    case LayerKind::batch_norm:
      g.add(n, {{"gamma", random_tensor({3}, rng, 0.5f, 1.5f)},
                {"beta", random_tensor({3}, rng)},
                {"running_mean", random_tensor({3}, rng)},
                {"running_var", random_tensor({3}, rng, 0.5f, 2.0f)}});
      break;
    case LayerKind::activation:
      n.attrs.activation = act;
      if (act == ActivationMode::softmax) {
        g.add(LayerNode{"fc", LayerKind::dense, {kGraphInput}, {}},
              {{"weight", random_tensor({147, 6}, rng, -0.2f, 0.2f)}, {"bias", Tensor({6})}});
        n.inputs = {0};
      }
      g.add(n);
      break;
    case LayerKind::merge: {
      LayerNode a{"a", LayerKind::conv2d, {kGraphInput}, {}};
      a.attrs.padding = 1;
      g.add(a, {{"weight", random_tensor({3, 3, 3, 3}, rng)}});
      n.attrs.merge = mm;
      n.inputs = {kGraphInput, 0};
      g.add(n);
      break;
    }
  }
  return s;
}

std::vector<KindCase> layer_kind_cases() {
  return {
      {"conv", LayerKind::conv2d, {}, {}, {}, Phase::train},
      {"depthwise", LayerKind::depthwise_conv2d, {}, {}, {}, Phase::train},
      {"maxpool", LayerKind::pool2d, {}, PoolMode::max, {}, Phase::train},
      {"avgpool", LayerKind::pool2d, {}, PoolMode::avg, {}, Phase::train},
      {"gap", LayerKind::global_avg_pool, {}, {}, {}, Phase::train},
      {"dense", LayerKind::dense, {}, {}, {}, Phase::train},
      {"bn_train", LayerKind::batch_norm, {}, {}, {}, Phase::train},
      {"bn_infer", LayerKind::batch_norm, {}, {}, {}, Phase::infer},
      {"relu", LayerKind::activation, ActivationMode::relu, {}, {}, Phase::train},
      {"sigmoid", LayerKind::activation, ActivationMode::sigmoid, {}, {}, Phase::train},
      {"softmax", LayerKind::activation, ActivationMode::softmax, {}, {}, Phase::train},
      {"add", LayerKind::merge, {}, {}, MergeMode::add, Phase::train},
      {"concat", LayerKind::merge, {}, {}, MergeMode::concat_channels, Phase::train},
  };
}

Image step_edge_image() {
  Image img(40, 30, 1);
  for (int y = 0; y < 30; ++y)
    for (int x = 17; x < 40; ++x) img.at(x, y) = 255;
  return img;
}

Image two_segment_image() {
  Image img(96, 48, 1);
  for (int y = 24; y < 48; ++y)
    for (int x = 0; x < 96; ++x) {
      const double v = x < 20 ? 255.0 : x > 60 ? 30.0 : 255.0 - (x - 20) * 225.0 / 40.0;
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  for (int y = 4; y < 14; ++y)
    for (int x = 30; x < 60; ++x) img.at(x, y) = 30;
  return img;
}

LayerGraph gap_head_model(std::uint64_t seed, int channels) {
  std::mt19937_64 rng(seed);
  LayerGraph g({2, 6, 6});
  LayerNode conv{"conv", LayerKind::conv2d, {kGraphInput}, {}};
  conv.attrs.padding = 1;
  const int c = g.add(conv, {{"weight", random_tensor({channels, 2, 3, 3}, rng)},
                             {"bias", random_tensor({channels}, rng, 0.0f, 0.5f)}});
  LayerNode relu{"relu", LayerKind::activation, {c}, {}};
  relu.attrs.activation = ActivationMode::relu;
  const int r = g.add(relu);
  const int gap = g.add(LayerNode{"gap", LayerKind::global_avg_pool, {r}, {}});
  const int fc = g.add(LayerNode{"fc", LayerKind::dense, {gap}, {}},
                       {{"weight", random_tensor({channels, 1}, rng)}, {"bias", Tensor({1}, 0.1f)}});
  LayerNode prob{"prob", LayerKind::activation, {fc}, {}};
  prob.attrs.activation = ActivationMode::sigmoid;
  g.add(prob);
  return g;
}

}  // namespace plasmo::testkit
