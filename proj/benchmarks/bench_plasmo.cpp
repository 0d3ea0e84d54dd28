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

#include <benchmark/benchmark.h>

#include <random>

#include "plasmo/imgproc.hpp"
#include "plasmo/netzoo.hpp"
#include "plasmo/ops.hpp"
#include "plasmo/quantizer.hpp"

using namespace plasmo;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

Image noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(w, h, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

// Args: channels in, channels out, spatial size.
void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), o = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2));
  const Tensor x = random_tensor({1, c, s, s}, 1);
  const Tensor w = random_tensor({o, c, 3, 3}, 2);
  const Tensor b = random_tensor({o}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(o) * c * 9 * s * s);
}
BENCHMARK(BM_Conv2d)->Args({4, 16, 75})->Args({16, 32, 38})->Args({32, 64, 19})->Unit(benchmark::kMicrosecond);

void BM_DepthwiseConv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const Tensor x = random_tensor({1, c, s, s}, 1);
  const Tensor k = random_tensor({c, 1, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(depthwise_conv2d(x, k, Tensor(), 1, 1));
}
BENCHMARK(BM_DepthwiseConv2d)->Args({32, 38})->Args({64, 19})->Unit(benchmark::kMicrosecond);

void BM_Canny(benchmark::State& state) {
  const Image gray = to_grayscale(noise_image(75, 75, 4));
  for (auto _ : state) benchmark::DoNotOptimize(canny(gray, 80, 160));
}
BENCHMARK(BM_Canny)->Unit(benchmark::kMicrosecond);

void BM_Preprocess(benchmark::State& state) {
  const Image img = noise_image(142, 142, 5);
  const PreprocessConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(build_input_tensor(img, cfg));
}
BENCHMARK(BM_Preprocess)->Unit(benchmark::kMicrosecond);

// Arg 0 indexes preset_names(); arg 1 selects the int8 model.
void BM_Forward(benchmark::State& state) {
  const std::string name = preset_names().at(static_cast<std::size_t>(state.range(0)));
  LayerGraph model = assemble_model(preset_spec(name), 1);
  if (state.range(1)) model = quantize_model(model);
  const Tensor x = random_tensor({1, 4, 75, 75}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x));
  state.SetLabel(name + (state.range(1) ? " int8" : " float32"));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1, 2, 3, 4}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
