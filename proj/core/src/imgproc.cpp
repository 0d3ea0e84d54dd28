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

#include "plasmo/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace plasmo {

std::string_view to_string(InputMode mode) {
  switch (mode) {
    case InputMode::rgb: return "rgb";
    case InputMode::edges: return "edges";
    case InputMode::rgb_plus_edge: return "rgb_plus_edge";
  }
  return "?";
}

InputMode parse_input_mode(std::string_view s) {
  for (InputMode m : {InputMode::rgb, InputMode::edges, InputMode::rgb_plus_edge}) {
    if (to_string(m) == s) return m;
  }
  throw ParameterError("unknown input mode '" + std::string(s) + "' (expected rgb, edges, or rgb_plus_edge)");
}

int input_channels(InputMode mode) {
  switch (mode) {
    case InputMode::rgb: return 3;
    case InputMode::edges: return 1;
    case InputMode::rgb_plus_edge: return 4;
  }
  return 0;
}

double default_gaussian_sigma(int kernel_size) { return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8; }

void PreprocessConfig::validate() const {
  if (target_width < 1 || target_height < 1) throw ParameterError("target size must be positive");
  if (gaussian_kernel_size < 1 || gaussian_kernel_size % 2 == 0) {
    throw ParameterError("gaussian kernel size must be odd and positive");
  }
  if (!(gaussian_sigma > 0.0)) throw ParameterError("gaussian sigma must be positive");
  if (!(canny_low > 0.0 && canny_low < canny_high)) {
    throw ParameterError("canny thresholds must satisfy 0 < low < high");
  }
}

namespace {

std::uint8_t to_u8(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

struct AxisSample {
  int i0;
  int i1;
  double frac;
};

std::vector<AxisSample> axis_samples(int in, int out) {
  std::vector<AxisSample> s(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    s[static_cast<std::size_t>(d)] = {i0, i1, src - i0};
  }
  return s;
}

}  // namespace

Image resize_bilinear(const Image& image, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ParameterError("resize target must be at least 1x1");
  if (image.empty()) throw FormatError("cannot resize an empty image");
  if (out_w == image.width && out_h == image.height) return image;
  const auto xs = axis_samples(image.width, out_w);
  const auto ys = axis_samples(image.height, out_h);
  Image out(out_w, out_h, image.channels);
  for (int y = 0; y < out_h; ++y) {
    const AxisSample& sy = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const AxisSample& sx = xs[static_cast<std::size_t>(x)];
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(sx.i0, sy.i0, c) * (1.0 - sx.frac) + image.at(sx.i1, sy.i0, c) * sx.frac;
        const double bot = image.at(sx.i0, sy.i1, c) * (1.0 - sx.frac) + image.at(sx.i1, sy.i1, c) * sx.frac;
        out.at(x, y, c) = to_u8(top * (1.0 - sy.frac) + bot * sy.frac);
      }
    }
  }
  return out;
}

std::vector<float> resize_bilinear(std::span<const float> plane, int in_w, int in_h, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1 || in_w < 1 || in_h < 1) throw ParameterError("resize dimensions must be positive");
  if (plane.size() != static_cast<std::size_t>(in_w) * in_h) throw DimensionError("plane size mismatch");
  const auto xs = axis_samples(in_w, out_w);
  const auto ys = axis_samples(in_h, out_h);
  std::vector<float> out(static_cast<std::size_t>(out_w) * out_h);
  auto at = [&](int x, int y) { return static_cast<double>(plane[static_cast<std::size_t>(y) * in_w + x]); };
  for (int y = 0; y < out_h; ++y) {
    const AxisSample& sy = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const AxisSample& sx = xs[static_cast<std::size_t>(x)];
      const double top = at(sx.i0, sy.i0) * (1.0 - sx.frac) + at(sx.i1, sy.i0) * sx.frac;
      const double bot = at(sx.i0, sy.i1) * (1.0 - sx.frac) + at(sx.i1, sy.i1) * sx.frac;
      out[static_cast<std::size_t>(y) * out_w + x] = static_cast<float>(top * (1.0 - sy.frac) + bot * sy.frac);
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ParameterError("gaussian kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be positive");
  const int r = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double x = j - r, y = i - r;
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(i) * size + j] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& image, int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ParameterError("gaussian kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be positive");
  // The 2-D kernel is the outer product of this normalized 1-D profile.
  const int r = kernel_size / 2;
  std::vector<double> g(static_cast<std::size_t>(kernel_size));
  double sum = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    const double x = i - r;
    g[static_cast<std::size_t>(i)] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;

  const int w = image.width, h = image.height, ch = image.channels;
  std::vector<double> tmp(static_cast<std::size_t>(w) * h * ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) {
          const int sx = std::clamp(x + k, 0, w - 1);
          s += g[static_cast<std::size_t>(k + r)] * image.at(sx, y, c);
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = s;
      }
    }
  }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) {
          const int sy = std::clamp(y + k, 0, h - 1);
          s += g[static_cast<std::size_t>(k + r)] * tmp[(static_cast<std::size_t>(sy) * w + x) * ch + c];
        }
        out.at(x, y, c) = to_u8(s);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& image, const PreprocessConfig& config) {
  return gaussian_blur(image, config.gaussian_kernel_size, config.gaussian_sigma);
}

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.width, image.height, 1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      out.at(x, y) = to_u8(0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2));
    }
  }
  return out;
}

CannyTrace canny_trace(const Image& image, double low, double high) {
  if (!(low > 0.0 && low < high)) throw ParameterError("canny thresholds must satisfy 0 < low < high");
  const Image gray = to_grayscale(image);
  const int w = gray.width, h = gray.height;
  auto px = [&](int x, int y) { return static_cast<int>(gray.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1))); };

  std::vector<int> gx(static_cast<std::size_t>(w) * h), gy(gx.size());
  CannyTrace trace;
  trace.magnitude.resize(gx.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int dy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = dx;
      gy[i] = dy;
      trace.magnitude[i] = static_cast<float>(std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy));
    }
  }

  auto mag = [&](int x, int y) -> float {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0f;
    return trace.magnitude[static_cast<std::size_t>(y) * w + x];
  };
  static const double tan22 = std::tan(22.5 * M_PI / 180.0);
  static const double tan67 = std::tan(67.5 * M_PI / 180.0);

  trace.suppressed = Image(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float m = trace.magnitude[i];
      if (m < low) continue;
      const double ax = std::abs(gx[i]), ay = std::abs(gy[i]);
      float before, after;  // neighbors against and along the gradient direction
      if (ay <= ax * tan22) {
        before = mag(x - 1, y);
        after = mag(x + 1, y);
      } else if (ay >= ax * tan67) {
        before = mag(x, y - 1);
        after = mag(x, y + 1);
      } else if ((gx[i] > 0) == (gy[i] > 0)) {
        before = mag(x - 1, y - 1);
        after = mag(x + 1, y + 1);
      } else {
        before = mag(x + 1, y - 1);
        after = mag(x - 1, y + 1);
      }
      if (m > before && m >= after) trace.suppressed.at(x, y) = 255;
    }
  }

  trace.edges = Image(w, h, 1);
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (trace.suppressed.pixels[i] && trace.magnitude[i] >= high) {
        trace.edges.pixels[i] = 255;
        stack.push_back(i);
      }
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (trace.suppressed.pixels[j] && !trace.edges.pixels[j]) {
          trace.edges.pixels[j] = 255;
          stack.push_back(j);
        }
      }
    }
  }
  return trace;
}

Image canny(const Image& image, double low, double high) { return canny_trace(image, low, high).edges; }

PreprocessedViews preprocess_views(const Image& image, const PreprocessConfig& config) {
  config.validate();
  PreprocessedViews v;
  v.resized = resize_bilinear(image, config.target_width, config.target_height);
  if (config.input_mode != InputMode::rgb) {
    v.blurred = gaussian_blur(v.resized, config);
    v.edges = canny(v.blurred, config.canny_low, config.canny_high);
  }
  return v;
}

Tensor build_input_tensor(const Image& image, const PreprocessConfig& config) {
  const PreprocessedViews v = preprocess_views(image, config);
  const int w = config.target_width, h = config.target_height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  Tensor t({1, input_channels(config.input_mode), h, w});
  float* dst = t.data();
  if (config.input_mode != InputMode::edges) {
    for (int c = 0; c < 3; ++c) {
      const int src_c = v.resized.channels == 3 ? c : 0;
      for (std::size_t i = 0; i < plane; ++i) {
        dst[c * plane + i] = static_cast<float>(v.resized.pixels[i * v.resized.channels + src_c]) / 255.0f;
      }
    }
    dst += 3 * plane;
  }
  if (config.input_mode != InputMode::rgb) {
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(v.edges.pixels[i]) / 255.0f;
  }
  return t;
}

Tensor build_input_tensor(std::span<const std::uint8_t> encoded, const PreprocessConfig& config) {
  return build_input_tensor(decode_image(encoded), config);
}

}  // namespace plasmo
