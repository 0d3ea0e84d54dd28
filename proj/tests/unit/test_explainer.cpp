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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "plasmo/explainer.hpp"
#include "plasmo/netzoo.hpp"
#include "fixtures.hpp"
#include "testkit.hpp"

using namespace plasmo;

namespace {

Tensor map2x2(std::vector<float> v) {
  const int k = static_cast<int>(v.size() / 4);
  return Tensor({1, k, 2, 2}, std::move(v));
}

}  // namespace

TEST(GradCamMap, HandComputedTwoChannels) {
  const Tensor a = map2x2({1, 2, 3, 4, 4, 0, -1, 2});
  const Tensor g = map2x2({1, 0, 0, 1, -1, 0, 0, 0});
  const std::vector<double> raw = grad_cam_map(a, g);
  const std::vector<double> expect{0.5 * 1 - 0.25 * 4, 0.5 * 2 - 0.25 * 0, 0.5 * 3 + 0.25 * 1, 0.5 * 4 - 0.25 * 2};
  ASSERT_EQ(raw.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(raw[i], expect[i], 1e-6) << i;
  const Heatmap h = finish_heatmap(raw, 2, 2, 2, 2, "x");
  EXPECT_FLOAT_EQ(h.values[0], 0.0f);
  EXPECT_NEAR(h.values[1], 1.0 / 1.75, 1e-6);
  EXPECT_FLOAT_EQ(h.values[2], 1.0f);
  EXPECT_NEAR(h.values[3], 1.5 / 1.75, 1e-6);
}

TEST(GradCamMap, ZeroGradientGivesZeroMap) {
  std::mt19937_64 rng(2);
  const Tensor a = testkit::random_tensor({1, 5, 4, 4}, rng);
  const std::vector<double> raw = grad_cam_map(a, Tensor({1, 5, 4, 4}));
  for (double v : raw) EXPECT_EQ(v, 0.0);
  const Heatmap h = finish_heatmap(raw, 4, 4, 9, 7, "x");
  EXPECT_EQ(h.width, 9);
  EXPECT_EQ(h.height, 7);
  for (float v : h.values) EXPECT_EQ(v, 0.0f);
}

TEST(GradCamMap, SingleMapIsProportionalToRelu) {
  std::mt19937_64 rng(3);
  const Tensor a = testkit::random_tensor({1, 1, 5, 5}, rng);
  const Tensor g({1, 1, 5, 5}, 0.37f);
  const Heatmap h = finish_heatmap(grad_cam_map(a, g), 5, 5, 5, 5, "x");
  const float mx = *std::max_element(a.values().begin(), a.values().end());
  ASSERT_GT(mx, 0.0f);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(h.values[i], std::max(0.0f, a[i]) / mx, 1e-6) << i;
}

TEST(GradCamMap, ShapeMismatchThrows) {
  EXPECT_THROW(grad_cam_map(Tensor({1, 2, 2, 2}), Tensor({1, 3, 2, 2})), DimensionError);
}

TEST(FinishHeatmap, ValuesInUnitRangeAndZeroIffNonPositive) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> raw(36);
    for (double& v : raw) v = u(rng) - (trial % 4 == 0 ? 2.0 : 0.0);
    const Heatmap h = finish_heatmap(raw, 6, 6, 13, 11, "x");
    const bool any_positive = std::any_of(raw.begin(), raw.end(), [](double v) { return v > 0; });
    float mx = 0;
    for (float v : h.values) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      mx = std::max(mx, v);
    }
    EXPECT_EQ(mx > 0, any_positive);
    if (any_positive) EXPECT_FLOAT_EQ(mx, 1.0f);
  }
}

TEST(GradCam, MatchesClosedFormOnGapHead) {
  const LayerGraph m = testkit::gap_head_model(5);
  std::mt19937_64 rng(6);
  const Tensor x = testkit::random_tensor({1, 2, 6, 6}, rng);
  const auto acts = layer_activations(m, x);
  const Tensor& a = acts.at("conv");
  const Tensor& relu_out = acts.at("relu");
  const Tensor& w = m.parameter("fc.weight").value;
  // d logit / d conv_k(p) = w_k / 36 where the relu is open, else 0.
  std::vector<double> raw(36, 0.0);
  for (int k = 0; k < 3; ++k) {
    double mean_g = 0;
    for (int p = 0; p < 36; ++p) mean_g += relu_out.at(0, k, p / 6, p % 6) > 0 ? w[static_cast<std::size_t>(k)] / 36.0 : 0.0;
    mean_g /= 36.0;
    for (int p = 0; p < 36; ++p) raw[static_cast<std::size_t>(p)] += mean_g * a.at(0, k, p / 6, p % 6);
  }
  const Heatmap expect = finish_heatmap(raw, 6, 6, 6, 6, "conv");
  const Heatmap h = grad_cam(m, x, "conv");
  EXPECT_EQ(h.source_layer, "conv");
  ASSERT_EQ(h.values.size(), 36u);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(h.values[i], expect.values[i], 1e-5) << i;
}

TEST(GradCam, ZeroHeadWeightsGiveZeroHeatmap) {
  LayerGraph m = testkit::gap_head_model(7);
  m.parameter("fc.weight").value.fill(0.0f);
  std::mt19937_64 rng(8);
  const Heatmap h = grad_cam(m, testkit::random_tensor({1, 2, 6, 6}, rng), "conv", ClassSign::positive, 30, 30);
  EXPECT_EQ(h.width, 30);
  for (float v : h.values) EXPECT_EQ(v, 0.0f);
}

TEST(GradCam, InvariantToPositiveHeadRescaling) {
  const LayerGraph m = testkit::gap_head_model(9);
  std::mt19937_64 rng(10);
  const Tensor x = testkit::random_tensor({1, 2, 6, 6}, rng);
  const Heatmap base = grad_cam(m, x, "conv");
  for (float c : {0.25f, 3.0f, 40.0f}) {
    LayerGraph scaled = m;
    for (float& v : scaled.parameter("fc.weight").value.values()) v *= c;
    for (float& v : scaled.parameter("fc.bias").value.values()) v *= c;
    const Heatmap h = grad_cam(scaled, x, "conv");
    for (std::size_t i = 0; i < h.values.size(); ++i) EXPECT_NEAR(h.values[i], base.values[i], 1e-5) << c;
  }
}

TEST(GradCam, NegativeSignUsesOppositeEvidence) {
  const LayerGraph m = testkit::gap_head_model(11);
  std::mt19937_64 rng(12);
  const Tensor x = testkit::random_tensor({1, 2, 6, 6}, rng);
  const Heatmap pos = grad_cam(m, x, "conv", ClassSign::positive);
  const Heatmap neg = grad_cam(m, x, "conv", ClassSign::negative);
  for (std::size_t i = 0; i < pos.values.size(); ++i) EXPECT_FALSE(pos.values[i] > 0 && neg.values[i] > 0) << i;
}

TEST(GradCam, RejectsUnknownAndNonConvLayers) {
  const LayerGraph m = testkit::gap_head_model(13);
  const Tensor x({1, 2, 6, 6}, 0.5f);
  EXPECT_THROW(grad_cam(m, x, "nope"), ParameterError);
  EXPECT_THROW(grad_cam(m, x, "gap"), ParameterError);
  EXPECT_THROW(grad_cam(m, x, "relu"), ParameterError);
}

TEST(GradCam, WorksOnEveryPreset) {
  std::mt19937_64 rng(14);
  const Tensor x = testkit::random_tensor({1, 4, 75, 75}, rng, 0.0f, 1.0f);
  for (const std::string& name : preset_names()) {
    const LayerGraph m = assemble_model(preset_spec(name), 2);
    const Heatmap h = grad_cam(m, x, last_conv_layer(m));
    EXPECT_EQ(h.width, 75);
    EXPECT_EQ(h.height, 75);
    for (float v : h.values) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(LayerActivations, OneEntryPerNodeWithForwardShapes) {
  const LayerGraph m = assemble_model(preset_spec("tiny_residual"), 3);
  std::mt19937_64 rng(15);
  const Tensor x = testkit::random_tensor({1, 4, 75, 75}, rng, 0.0f, 1.0f);
  const Tensor before = forward(m, x, Phase::infer);
  const auto acts = layer_activations(m, x);
  EXPECT_EQ(acts.size(), m.nodes().size());
  for (std::size_t i = 0; i < m.nodes().size(); ++i) {
    const LayerNode& layer = m.nodes()[i].layer;
    const Tensor& a = acts.at(layer.name);
    Shape expect{1};
    for (int d : m.output_shape(static_cast<int>(i))) expect.push_back(d);
    EXPECT_EQ(a.shape(), expect) << layer.name;
    if (layer.kind == LayerKind::activation && layer.attrs.activation == ActivationMode::relu) {
      for (float v : a.values()) EXPECT_GE(v, 0.0f);
    }
  }
  EXPECT_EQ(forward(m, x, Phase::infer), before);
  EXPECT_EQ(acts.at("head.prob"), before);
}

TEST(Colormap, EndpointsAndMonotoneChannels) {
  const ColorTable& t = heat_colormap();
  EXPECT_EQ(t[0], (std::array<std::uint8_t, 3>{0, 0, 255}));
  EXPECT_EQ(t[255], (std::array<std::uint8_t, 3>{255, 0, 0}));
  for (int i = 1; i < 256; ++i) {
    EXPECT_GE(t[i][0], t[i - 1][0]);
    EXPECT_LE(t[i][2], t[i - 1][2]);
  }
  EXPECT_GT(t[128][1], 200);
}

TEST(RenderOverlay, AlphaEndpoints) {
  std::mt19937_64 rng(16);
  const Image base = testkit::background(8, 6, rng);
  Heatmap h{8, 6, std::vector<float>(48), "x", 8, 6};
  for (std::size_t i = 0; i < 48; ++i) h.values[i] = static_cast<float>(i) / 47.0f;
  h.values[0] = 0.0f;
  h.values[47] = 1.0f;
  EXPECT_EQ(render_overlay(h, base, 0.0), base);
  const Image full = render_overlay(h, base, 1.0);
  const ColorTable& t = heat_colormap();
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(full.at(0, 0, c), t[0][static_cast<std::size_t>(c)]);
    EXPECT_EQ(full.at(7, 5, c), t[255][static_cast<std::size_t>(c)]);
  }
  const Image half = render_overlay(h, base, 0.5);
  for (int c = 0; c < 3; ++c) {
    const double expect = 0.5 * base.at(0, 0, c) + 0.5 * t[0][static_cast<std::size_t>(c)];
    EXPECT_NEAR(half.at(0, 0, c), expect, 0.5 + 1e-9);
  }
}

TEST(RenderOverlay, Errors) {
  const Image base(8, 6, 3);
  const Heatmap h{4, 4, std::vector<float>(16), "x", 4, 4};
  EXPECT_THROW(render_overlay(h, base, 0.5), DimensionError);
  const Heatmap ok{8, 6, std::vector<float>(48), "x", 8, 6};
  EXPECT_THROW(render_overlay(ok, base, 1.5), ParameterError);
  EXPECT_THROW(render_overlay(ok, base, -0.1), ParameterError);
}
