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

#include "testkit.hpp"

#include <algorithm>
#include <cmath>

namespace plasmo::testkit {

namespace {

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void blend(Image& img, int x, int y, const double rgb[3], double a) {
  for (int c = 0; c < 3; ++c) img.at(x, y, c) = clamp_u8((1.0 - a) * img.at(x, y, c) + a * rgb[c]);
}

}  // namespace

Image background(int width, int height, std::mt19937_64& rng) {
  Image img(width, height, 3);
  std::normal_distribution<double> noise(0.0, 3.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double n = noise(rng);
      img.at(x, y, 0) = clamp_u8(236 + n);
      img.at(x, y, 1) = clamp_u8(224 + n);
      img.at(x, y, 2) = clamp_u8(230 + n);
    }
  }
  return img;
}

void draw_cell(Image& img, double cx, double cy, double radius, bool parasitized, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 3.0);
  const double rx = radius * (0.94 + 0.12 * u(rng));
  const double ry = radius * (0.94 + 0.12 * u(rng));
  const double body[3] = {214, 150, 172};
  const double rim[3] = {188, 118, 146};
  const int x0 = std::max(0, static_cast<int>(cx - rx - 2)), x1 = std::min(img.width - 1, static_cast<int>(cx + rx + 2));
  const int y0 = std::max(0, static_cast<int>(cy - ry - 2)), y1 = std::min(img.height - 1, static_cast<int>(cy + ry + 2));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double edge = (1.0 - d) * std::min(rx, ry);  // pixels inside the boundary
      if (edge <= -0.5) continue;
      const double a = std::clamp(edge + 0.5, 0.0, 1.0);
      const double t = std::clamp((d - 0.75) / 0.25, 0.0, 1.0);
      const double n = noise(rng);
      const double col[3] = {body[0] + t * (rim[0] - body[0]) + n, body[1] + t * (rim[1] - body[1]) + n,
                             body[2] + t * (rim[2] - body[2]) + n};
      blend(img, x, y, col, a);
    }
  }
  if (!parasitized) return;
  const int dots = 1 + static_cast<int>(u(rng) * 3.0);
  const double ink[3] = {86, 34, 118};
  for (int k = 0; k < dots; ++k) {
    const double ang = u(rng) * 2.0 * M_PI, rad = u(rng) * 0.5 * radius;
    const double px = cx + rad * std::cos(ang), py = cy + rad * std::sin(ang);
    const double pr = std::max(2.0, radius * (0.12 + 0.08 * u(rng)));
    for (int y = static_cast<int>(py - pr - 1); y <= static_cast<int>(py + pr + 1); ++y) {
      for (int x = static_cast<int>(px - pr - 1); x <= static_cast<int>(px + pr + 1); ++x) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        const double d = std::hypot(x + 0.5 - px, y + 0.5 - py);
        const double a = std::clamp(pr - d + 0.5, 0.0, 1.0);
        if (a > 0.0) blend(img, x, y, ink, a);
      }
    }
  }
}

Image positive_patch(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-8.0, 8.0), rad(29.0, 33.0);
  Image img = background(75, 75, rng);
  draw_cell(img, 37.5 + jitter(rng), 37.5 + jitter(rng), rad(rng), true, rng);
  return img;
}

Image negative_patch(NegativeKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-8.0, 8.0), rad(29.0, 33.0), u(0.0, 1.0);
  Image img = background(75, 75, rng);
  switch (kind) {
    case NegativeKind::background:
      break;
    case NegativeKind::uninfected:
      draw_cell(img, 37.5 + jitter(rng), 37.5 + jitter(rng), rad(rng), false, rng);
      break;
    case NegativeKind::offset: {
      const double far = (20.0 + 24.0 * u(rng)) * (u(rng) < 0.5 ? -1.0 : 1.0);
      const double near = jitter(rng);
      const bool along_x = u(rng) < 0.5;
      draw_cell(img, 37.5 + (along_x ? far : near), 37.5 + (along_x ? near : far), rad(rng), true, rng);
      break;
    }
    case NegativeKind::shrunken:
      draw_cell(img, 37.5 + jitter(rng), 37.5 + jitter(rng), rad(rng) * (0.4 + 0.24 * u(rng)), true, rng);
      break;
  }
  return img;
}

std::vector<LabeledPatch> patch_set(int positives, int negatives, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledPatch> out;
  for (int i = 0; i < positives; ++i) out.push_back({positive_patch(rng), kParasitized});
  const NegativeKind kinds[] = {NegativeKind::background, NegativeKind::uninfected, NegativeKind::offset,
                                NegativeKind::shrunken};
  for (int i = 0; i < negatives; ++i) out.push_back({negative_patch(kinds[i % 4], rng), kUninfected});
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

SampleSet to_samples(const std::vector<LabeledPatch>& patches, const PreprocessConfig& config) {
  SampleSet out;
  for (const auto& p : patches) out.push_back({build_input_tensor(p.image, config), p.label});
  return out;
}

void write_dataset(const std::filesystem::path& root, const std::vector<LabeledPatch>& patches) {
  std::filesystem::create_directories(root / "Parasitized");
  std::filesystem::create_directories(root / "Uninfected");
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto dir = root / (patches[i].label == kParasitized ? "Parasitized" : "Uninfected");
    char name[32];
    std::snprintf(name, sizeof name, "cell_%04zu.png", i);
    save_png(patches[i].image, dir / name);
  }
}

Composite composite(int cells, std::uint64_t seed, int size, int min_gap) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(0, size - 75);
  std::uniform_real_distribution<double> rad(29.0, 33.0);
  Composite out;
  for (int attempt = 0; static_cast<int>(out.truth.size()) < cells; ++attempt) {
    if (attempt > 10000) {
      out.truth.clear();
      attempt = 0;
    }
    const Box b{pos(rng), pos(rng), 75, 75};
    const bool clear = std::all_of(out.truth.begin(), out.truth.end(), [&](const Box& o) {
      return std::abs(o.x - b.x) >= min_gap || std::abs(o.y - b.y) >= min_gap;
    });
    if (clear) out.truth.push_back(b);
  }
  out.image = background(size, size, rng);
  for (const Box& b : out.truth) draw_cell(out.image, b.x + 37.5, b.y + 37.5, rad(rng), true, rng);
  return out;
}

std::vector<LabeledPatch> black_white_set(int per_class) {
  std::vector<LabeledPatch> out;
  for (int i = 0; i < per_class; ++i) {
    out.push_back({Image(75, 75, 3, 255), kParasitized});
    out.push_back({Image(75, 75, 3, 0), kUninfected});
  }
  return out;
}

ToyModel train_toy_model(const std::string& arch, int positives, int negatives, int epochs, std::uint64_t seed) {
  ToyModel toy;
  toy.model = assemble_model(preset_spec(arch), seed);
  const PreprocessConfig pre = model_preprocess_config(toy.model);
  const auto patches = patch_set(positives, negatives, seed);
  const std::size_t n_val = patches.size() / 5;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    (i < n_val ? toy.val : toy.train).push_back({build_input_tensor(patches[i].image, pre), patches[i].label});
  }
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 16;
  cfg.seed = seed;
  cfg.early_stop_val_acc = 0.995;
  toy.history = train(toy.model, toy.train, toy.val, cfg).history;
  return toy;
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

std::filesystem::path temp_dir(const std::string& name) {
  static std::mt19937_64 rng{std::random_device{}()};
  const auto dir = std::filesystem::temp_directory_path() / ("plasmo_" + name + "_" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace plasmo::testkit
