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

#include "plasmo/localizer.hpp"

#include <algorithm>
#include <cmath>

#include "plasmo/imgproc.hpp"
#include "plasmo/netzoo.hpp"
#include "plasmo/trainer.hpp"

namespace plasmo {

void LocalizeConfig::validate() const {
  if (stride < 1) throw ParameterError("localizer stride must be >= 1");
  if (!(pyramid_scale > 1.0)) throw ParameterError("pyramid scale must be > 1");
  if (window < 1) throw ParameterError("window must be positive");
  if (window > min_size) throw ParameterError("window must not exceed the pyramid min size");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw ParameterError("nms IoU threshold must be in [0, 1]");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
}

std::vector<Image> build_pyramid(const Image& image, double scale, int min_size) {
  if (!(scale > 1.0)) throw ParameterError("pyramid scale must be > 1");
  if (image.width < min_size || image.height < min_size) {
    throw DimensionError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " is smaller than the minimum pyramid size " + std::to_string(min_size));
  }
  std::vector<Image> levels{image};
  int w = image.width, h = image.height;
  for (;;) {
    w = static_cast<int>(std::floor(w / scale));
    h = static_cast<int>(std::floor(h / scale));
    if (w < min_size || h < min_size) break;
    levels.push_back(resize_bilinear(image, w, h));
  }
  return levels;
}

std::vector<std::pair<int, int>> window_positions(int width, int height, int window, int stride) {
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (window < 1 || window > width || window > height) {
    throw DimensionError("window " + std::to_string(window) + " does not fit a " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
  }
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y + window <= height; y += stride) {
    for (int x = 0; x + window <= width; x += stride) out.emplace_back(x, y);
  }
  return out;
}

std::vector<Window> slide_windows(const Image& image, int window, int stride) {
  std::vector<Window> out;
  for (const auto& [x, y] : window_positions(image.width, image.height, window, stride)) {
    out.push_back({x, y, crop(image, x, y, window, window)});
  }
  return out;
}

double iou(const Box& a, const Box& b) {
  const long iw = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const long ih = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const long inter = iw * ih;
  const long uni = static_cast<long>(a.w) * a.h + static_cast<long>(b.w) * b.h - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    return a.box.y < b.box.y;
  });
  std::vector<Detection> kept;
  std::vector<bool> removed(candidates.size(), false);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(candidates[i]);
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      if (!removed[j] && iou(candidates[i].box, candidates[j].box) > iou_threshold) removed[j] = true;
    }
  }
  return kept;
}

Box to_original(const Box& box, double scale, int level, int width, int height) {
  const double f = std::pow(scale, level);
  auto r = [f](int v) { return static_cast<int>(std::lround(v * f)); };
  Box b{r(box.x), r(box.y), r(box.w), r(box.h)};
  b.x = std::clamp(b.x, 0, width - 1);
  b.y = std::clamp(b.y, 0, height - 1);
  b.w = std::min(b.w, width - b.x);
  b.h = std::min(b.h, height - b.y);
  return b;
}

LocalizeResult detect_cells(const Image& image, const LayerGraph& model, const LocalizeConfig& config) {
  config.validate();
  const PreprocessConfig pre = model_preprocess_config(model);
  const std::vector<Image> levels = build_pyramid(image, config.pyramid_scale, config.min_size);

  struct Pending {
    int level, x, y;
  };
  LocalizeResult result;
  std::vector<Detection> candidates;
  std::vector<Pending> pending;
  SampleSet batch;
  auto flush = [&] {
    if (batch.empty()) return;
    const std::vector<float> scores = predict(model, batch, static_cast<int>(batch.size()));
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < config.score_threshold) continue;
      const Pending& p = pending[i];
      const Box b = to_original(Box{p.x, p.y, config.window, config.window}, config.pyramid_scale, p.level,
                                image.width, image.height);
      candidates.push_back({b, scores[i], p.level});
    }
    result.windows_scored += static_cast<int>(batch.size());
    batch.clear();
    pending.clear();
  };
  for (int level = 0; level < static_cast<int>(levels.size()); ++level) {
    const Image& img = levels[static_cast<std::size_t>(level)];
    for (const auto& [x, y] : window_positions(img.width, img.height, config.window, config.stride)) {
      batch.push_back({build_input_tensor(crop(img, x, y, config.window, config.window), pre), kUninfected});
      pending.push_back({level, x, y});
      if (static_cast<int>(batch.size()) == config.batch_size) flush();
    }
  }
  flush();
  result.detections = nms(std::move(candidates), config.nms_iou);
  result.count = static_cast<int>(result.detections.size());
  return result;
}

Image draw_boxes(const Image& image, const std::vector<Detection>& detections) {
  Image out(image.width, image.height, 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x, y, image.channels == 3 ? c : 0);
    }
  }
  auto plot = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    out.at(x, y, 0) = 255;
    out.at(x, y, 1) = 230;
    out.at(x, y, 2) = 0;
  };
  for (const auto& d : detections) {
    const Box& b = d.box;
    for (int t = 0; t < 2; ++t) {
      for (int x = b.x; x < b.x + b.w; ++x) {
        plot(x, b.y + t);
        plot(x, b.y + b.h - 1 - t);
      }
      for (int y = b.y; y < b.y + b.h; ++y) {
        plot(b.x + t, y);
        plot(b.x + b.w - 1 - t, y);
      }
    }
  }
  return out;
}

}  // namespace plasmo
