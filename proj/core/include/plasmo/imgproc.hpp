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
#include <span>
#include <string_view>
#include <vector>

#include "plasmo/image.hpp"
#include "plasmo/tensor.hpp"

namespace plasmo {

/// Which planes the classifier consumes.
enum class InputMode { rgb, edges, rgb_plus_edge };

std::string_view to_string(InputMode mode);
InputMode parse_input_mode(std::string_view s);
int input_channels(InputMode mode);

/// sigma = 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8, i.e. 1.4 for a 7x7 kernel.
double default_gaussian_sigma(int kernel_size);

struct PreprocessConfig {
  int target_width = 75;
  int target_height = 75;
  int gaussian_kernel_size = 7;
  double gaussian_sigma = default_gaussian_sigma(7);
  double canny_low = 80.0;
  double canny_high = 160.0;
  InputMode input_mode = InputMode::rgb_plus_edge;

  /// Throws ParameterError on an even kernel, non-positive sigma/size, or
  /// thresholds outside 0 < low < high.
  void validate() const;
};

/// Bilinear resampling with half-pixel centers: src = (dst + 0.5) * in / out - 0.5,
/// clamped to the image. Results are rounded half away from zero.
Image resize_bilinear(const Image& image, int out_w, int out_h);

/// Same mapping on a single-channel float plane.
std::vector<float> resize_bilinear(std::span<const float> plane, int in_w, int in_h, int out_w, int out_h);

/// size x size weights proportional to exp(-(x^2 + y^2) / (2 sigma^2)) about the
/// center, normalized to sum to 1. Row-major.
std::vector<double> gaussian_kernel(int size, double sigma);

/// Per-channel Gaussian smoothing with border replication.
Image gaussian_blur(const Image& image, int kernel_size, double sigma);
Image gaussian_blur(const Image& image, const PreprocessConfig& config);

/// Rec.601 luma, rounded. Gray images are returned unchanged.
Image to_grayscale(const Image& image);

/// Intermediate stages of the edge detector, exposed for inspection.
struct CannyTrace {
  std::vector<float> magnitude;  // L2 norm of the 3x3 Sobel response
  Image suppressed;              // 255 where a pixel survives non-maximum suppression
  Image edges;                   // final hysteresis output
};

CannyTrace canny_trace(const Image& image, double low, double high);

/// Binary (0/255) edge map: Sobel gradients, 4-sector non-maximum
/// suppression, and double thresholding with 8-connected hysteresis.
Image canny(const Image& image, double low, double high);

/// resize -> blur -> canny, assembled into a (1, C, H, W) float tensor in [0, 1].
Tensor build_input_tensor(const Image& image, const PreprocessConfig& config);
Tensor build_input_tensor(std::span<const std::uint8_t> encoded, const PreprocessConfig& config);

/// The resized image and its edge map, for debug dumps.
struct PreprocessedViews {
  Image resized;
  Image blurred;
  Image edges;
};
PreprocessedViews preprocess_views(const Image& image, const PreprocessConfig& config);

}  // namespace plasmo
