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

#include <utility>
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/image.hpp"

namespace plasmo {

/// Pixel rectangle covering columns x .. x+w-1 and rows y .. y+h-1.
struct Box {
  int x = 0, y = 0, w = 0, h = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  Box box;  // original-image coordinates
  float score = 0.0f;
  int level = 0;  // pyramid index the window came from
};

struct LocalizeConfig {
  int window = 75;
  int stride = 16;
  double pyramid_scale = 1.25;
  int min_size = 75;
  double score_threshold = 0.5;
  double nms_iou = 0.3;
  int batch_size = 32;

  void validate() const;
};

/// Level 0 is the original; level i+1 has dims floor(dims_i / scale). Stops
/// before either dimension drops below min_size.
std::vector<Image> build_pyramid(const Image& image, double scale, int min_size);

/// Top-left corners in row-major order: x, y in {0, s, 2s, ...} with the
/// window fully inside.
std::vector<std::pair<int, int>> window_positions(int width, int height, int window, int stride);

struct Window {
  int x = 0;
  int y = 0;
  Image patch;
};

std::vector<Window> slide_windows(const Image& image, int window, int stride);

/// Intersection over union of pixel areas.
double iou(const Box& a, const Box& b);

/// Greedy suppression: highest score first, ties to the smaller (x, y).
/// Drops every remaining box whose IoU with a kept box exceeds the threshold.
std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold);

/// Maps a box found at pyramid `level` back to level-0 coordinates by
/// multiplying by scale^level (rounded), then clips it to width x height.
Box to_original(const Box& box, double scale, int level, int width, int height);

struct LocalizeResult {
  std::vector<Detection> detections;
  int count = 0;
  int windows_scored = 0;
};

/// Scores every window at every pyramid level with the classifier and
/// returns the boxes that survive suppression.
LocalizeResult detect_cells(const Image& image, const LayerGraph& model, const LocalizeConfig& config = {});

/// RGB copy of `image` with 2-pixel box outlines.
Image draw_boxes(const Image& image, const std::vector<Detection>& detections);

}  // namespace plasmo
