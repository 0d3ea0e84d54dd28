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

#include "plasmo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace plasmo {
namespace {

const char* axis_name(int axis) {
  switch (axis) {
    case 0: return "batch";
    case 1: return "channels";
    case 2: return "height";
    case 3: return "width";
    default: return "axis";
  }
}

int checked_extent(const char* op, int axis, int size, int kernel, int stride, int padding) {
  if (size + 2 * padding < kernel) {
    throw DimensionError(std::string(op) + ": window " + std::to_string(kernel) + " exceeds axis " +
                         std::to_string(axis) + " (" + axis_name(axis) + ") extent " + std::to_string(size) +
                         (padding ? " plus padding " + std::to_string(padding) : std::string()));
  }
  return (size + 2 * padding - kernel) / stride + 1;
}

void check_window_params(const char* op, int stride, int padding) {
  if (stride < 1) throw ParameterError(std::string(op) + ": stride must be >= 1");
  if (padding < 0) throw ParameterError(std::string(op) + ": padding must be >= 0");
}

template <typename T>
void check_bias(const char* op, const BasicTensor<T>& bias, int expected) {
  if (bias.empty()) return;
  if (bias.rank() != 1 || bias.dim(0) != expected) {
    throw DimensionError(std::string(op) + ": bias shape " + shape_string(bias.shape()) + " does not match axis 0 (" +
                         std::to_string(expected) + " outputs)");
  }
}

struct ConvGeometry {
  int n, c, h, w;
  int kh, kw;
  int ho, wo;
  int stride, padding;
};

template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* dst = cols + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.padding + i;
          T* row = dst + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.wo, T{0});
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.padding + j;
            row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* img) {
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* src = cols + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.padding + i;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          const T* row = src + static_cast<std::size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.padding + j;
            if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const char* op, const BasicTensor<T>& input, const BasicTensor<T>& weights, int stride,
                           int padding) {
  require_rank(input, 4, op);
  require_rank(weights, 4, op);
  check_window_params(op, stride, padding);
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.kh = weights.dim(2);
  g.kw = weights.dim(3);
  g.stride = stride;
  g.padding = padding;
  g.ho = checked_extent(op, 2, g.h, g.kh, stride, padding);
  g.wo = checked_extent(op, 3, g.w, g.kw, stride, padding);
  return g;
}

}  // namespace

int window_extent(int size, int kernel, int stride, int padding) {
  check_window_params("window_extent", stride, padding);
  return checked_extent("window_extent", 2, size, kernel, stride, padding);
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                      int stride, int padding) {
  const ConvGeometry g = conv_geometry("conv2d", input, weights, stride, padding);
  const int out_c = weights.dim(0);
  if (weights.dim(1) != g.c) {
    throw DimensionError("conv2d: axis 1 (channels) of input is " + std::to_string(g.c) + " but weights expect " +
                         std::to_string(weights.dim(1)));
  }
  check_bias("conv2d", bias, out_c);

  const std::size_t k = static_cast<std::size_t>(g.c) * g.kh * g.kw;
  const std::size_t p = static_cast<std::size_t>(g.ho) * g.wo;
  BasicTensor<T> out({g.n, out_c, g.ho, g.wo});
  std::vector<T> cols(k * p);
  const T* w = weights.data();
  for (int n = 0; n < g.n; ++n) {
    im2col(input.data() + static_cast<std::size_t>(n) * g.c * g.h * g.w, g, cols.data());
    T* dst = out.data() + static_cast<std::size_t>(n) * out_c * p;
    for (int o = 0; o < out_c; ++o) {
      T* orow = dst + static_cast<std::size_t>(o) * p;
      const T b = bias.empty() ? T{0} : bias[static_cast<std::size_t>(o)];
      std::fill(orow, orow + p, b);
      const T* wrow = w + static_cast<std::size_t>(o) * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T wv = wrow[kk];
        const T* crow = cols.data() + kk * p;
        for (std::size_t q = 0; q < p; ++q) orow[q] += wv * crow[q];
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, bool has_bias, int stride,
                             int padding, const BasicTensor<T>& grad_output) {
  const ConvGeometry g = conv_geometry("conv2d_backward", input, weights, stride, padding);
  const int out_c = weights.dim(0);
  if (grad_output.shape() != Shape{g.n, out_c, g.ho, g.wo}) {
    throw DimensionError("conv2d_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
  }
  const std::size_t k = static_cast<std::size_t>(g.c) * g.kh * g.kw;
  const std::size_t p = static_cast<std::size_t>(g.ho) * g.wo;
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), {}};
  if (has_bias) grads.bias = BasicTensor<T>({out_c});
  std::vector<T> cols(k * p);
  std::vector<T> dcols(k * p);
  const T* w = weights.data();
  T* dw = grads.weights.data();
  for (int n = 0; n < g.n; ++n) {
    const std::size_t in_off = static_cast<std::size_t>(n) * g.c * g.h * g.w;
    im2col(input.data() + in_off, g, cols.data());
    std::fill(dcols.begin(), dcols.end(), T{0});
    const T* gout = grad_output.data() + static_cast<std::size_t>(n) * out_c * p;
    for (int o = 0; o < out_c; ++o) {
      const T* grow = gout + static_cast<std::size_t>(o) * p;
      if (has_bias) {
        T s{0};
        for (std::size_t q = 0; q < p; ++q) s += grow[q];
        grads.bias[static_cast<std::size_t>(o)] += s;
      }
      const T* wrow = w + static_cast<std::size_t>(o) * k;
      T* dwrow = dw + static_cast<std::size_t>(o) * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T* crow = cols.data() + kk * p;
        T s{0};
        for (std::size_t q = 0; q < p; ++q) s += grow[q] * crow[q];
        dwrow[kk] += s;
        const T wv = wrow[kk];
        T* drow = dcols.data() + kk * p;
        for (std::size_t q = 0; q < p; ++q) drow[q] += wv * grow[q];
      }
    }
    col2im_add(dcols.data(), g, grads.input.data() + in_off);
  }
  return grads;
}

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                                int stride, int padding) {
  const ConvGeometry g = conv_geometry("depthwise_conv2d", input, kernels, stride, padding);
  if (kernels.dim(0) != g.c || kernels.dim(1) != 1) {
    throw DimensionError("depthwise_conv2d: axis 1 (channels) of input is " + std::to_string(g.c) +
                         " but kernels have shape " + shape_string(kernels.shape()));
  }
  check_bias("depthwise_conv2d", bias, g.c);
  BasicTensor<T> out({g.n, g.c, g.ho, g.wo});
  for (int n = 0; n < g.n; ++n) {
    for (int c = 0; c < g.c; ++c) {
      const T* src = input.data() + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
      const T* ker = kernels.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      T* dst = out.data() + (static_cast<std::size_t>(n) * g.c + c) * g.ho * g.wo;
      const T b = bias.empty() ? T{0} : bias[static_cast<std::size_t>(c)];
      for (int oy = 0; oy < g.ho; ++oy) {
        T* row = dst + static_cast<std::size_t>(oy) * g.wo;
        std::fill(row, row + g.wo, b);
        for (int i = 0; i < g.kh; ++i) {
          const int iy = oy * g.stride - g.padding + i;
          if (iy < 0 || iy >= g.h) continue;
          const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
          for (int j = 0; j < g.kw; ++j) {
            // Output columns whose tap j lands inside the row.
            const int off = j - g.padding;
            const int lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
            const int hi = std::min(g.wo, off >= g.w ? 0 : (g.w - 1 - off) / g.stride + 1);
            const T k = ker[i * g.kw + j];
            if (g.stride == 1) {
              for (int ox = lo; ox < hi; ++ox) row[ox] += in_row[ox + off] * k;
            } else {
              for (int ox = lo; ox < hi; ++ox) row[ox] += in_row[ox * g.stride + off] * k;
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels, bool has_bias,
                                       int stride, int padding, const BasicTensor<T>& grad_output) {
  const ConvGeometry g = conv_geometry("depthwise_conv2d_backward", input, kernels, stride, padding);
  if (grad_output.shape() != Shape{g.n, g.c, g.ho, g.wo}) {
    throw DimensionError("depthwise_conv2d_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
  }
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape()), {}};
  if (has_bias) grads.bias = BasicTensor<T>({g.c});
  for (int n = 0; n < g.n; ++n) {
    for (int c = 0; c < g.c; ++c) {
      const std::size_t in_off = (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
      const T* src = input.data() + in_off;
      T* dsrc = grads.input.data() + in_off;
      const T* ker = kernels.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      T* dker = grads.weights.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      const T* gout = grad_output.data() + (static_cast<std::size_t>(n) * g.c + c) * g.ho * g.wo;
      for (int oy = 0; oy < g.ho; ++oy) {
        for (int ox = 0; ox < g.wo; ++ox) {
          const T gv = gout[oy * g.wo + ox];
          if (has_bias) grads.bias[static_cast<std::size_t>(c)] += gv;
          for (int i = 0; i < g.kh; ++i) {
            const int iy = oy * g.stride - g.padding + i;
            if (iy < 0 || iy >= g.h) continue;
            for (int j = 0; j < g.kw; ++j) {
              const int ix = ox * g.stride - g.padding + j;
              if (ix < 0 || ix >= g.w) continue;
              dker[i * g.kw + j] += src[iy * g.w + ix] * gv;
              dsrc[iy * g.w + ix] += ker[i * g.kw + j] * gv;
            }
          }
        }
      }
    }
  }
  return grads;
}

namespace {

template <typename T>
ConvGeometry pool_geometry(const char* op, const BasicTensor<T>& input, int window, int stride, int padding) {
  require_rank(input, 4, op);
  check_window_params(op, stride, padding);
  if (window < 1) throw ParameterError(std::string(op) + ": window must be >= 1");
  if (padding >= window) throw ParameterError(std::string(op) + ": padding must be smaller than the window");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.kh = g.kw = window;
  g.stride = stride;
  g.padding = padding;
  g.ho = checked_extent(op, 2, g.h, window, stride, padding);
  g.wo = checked_extent(op, 3, g.w, window, stride, padding);
  return g;
}

}  // namespace

template <typename T>
std::vector<long> max_pool_argmax(const BasicTensor<T>& input, int window, int stride, int padding) {
  const ConvGeometry g = pool_geometry("pool2d", input, window, stride, padding);
  std::vector<long> arg(static_cast<std::size_t>(g.n) * g.c * g.ho * g.wo, -1);
  std::size_t idx = 0;
  for (int nc = 0; nc < g.n * g.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * g.h * g.w;
    for (int oy = 0; oy < g.ho; ++oy) {
      for (int ox = 0; ox < g.wo; ++ox, ++idx) {
        long best = -1;
        T best_v = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < window; ++i) {
          const int iy = oy * stride - padding + i;
          if (iy < 0 || iy >= g.h) continue;
          for (int j = 0; j < window; ++j) {
            const int ix = ox * stride - padding + j;
            if (ix < 0 || ix >= g.w) continue;
            const std::size_t off = base + static_cast<std::size_t>(iy) * g.w + ix;
            if (best < 0 || input[off] > best_v || std::isnan(input[off])) {
              best = static_cast<long>(off);
              best_v = input[off];
            }
          }
        }
        arg[idx] = best;
      }
    }
  }
  return arg;
}

template <typename T>
BasicTensor<T> pool2d(const BasicTensor<T>& input, PoolMode mode, int window, int stride, int padding) {
  const ConvGeometry g = pool_geometry("pool2d", input, window, stride, padding);
  BasicTensor<T> out({g.n, g.c, g.ho, g.wo});
  if (mode == PoolMode::max) {
    const std::vector<long> arg = max_pool_argmax(input, window, stride, padding);
    for (std::size_t i = 0; i < arg.size(); ++i) out[i] = arg[i] < 0 ? T{0} : input[static_cast<std::size_t>(arg[i])];
    return out;
  }
  std::size_t idx = 0;
  for (int nc = 0; nc < g.n * g.c; ++nc) {
    const T* src = input.data() + static_cast<std::size_t>(nc) * g.h * g.w;
    for (int oy = 0; oy < g.ho; ++oy) {
      for (int ox = 0; ox < g.wo; ++ox, ++idx) {
        T s{0};
        int count = 0;
        for (int i = 0; i < window; ++i) {
          const int iy = oy * stride - padding + i;
          if (iy < 0 || iy >= g.h) continue;
          for (int j = 0; j < window; ++j) {
            const int ix = ox * stride - padding + j;
            if (ix < 0 || ix >= g.w) continue;
            s += src[iy * g.w + ix];
            ++count;
          }
        }
        out[idx] = count ? s / static_cast<T>(count) : T{0};
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pool2d_backward(const BasicTensor<T>& input, PoolMode mode, int window, int stride, int padding,
                               const BasicTensor<T>& grad_output) {
  const ConvGeometry g = pool_geometry("pool2d_backward", input, window, stride, padding);
  if (grad_output.shape() != Shape{g.n, g.c, g.ho, g.wo}) {
    throw DimensionError("pool2d_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
  }
  BasicTensor<T> grad(input.shape());
  if (mode == PoolMode::max) {
    const std::vector<long> arg = max_pool_argmax(input, window, stride, padding);
    for (std::size_t i = 0; i < arg.size(); ++i) {
      if (arg[i] >= 0) grad[static_cast<std::size_t>(arg[i])] += grad_output[i];
    }
    return grad;
  }
  std::size_t idx = 0;
  for (int nc = 0; nc < g.n * g.c; ++nc) {
    T* dst = grad.data() + static_cast<std::size_t>(nc) * g.h * g.w;
    for (int oy = 0; oy < g.ho; ++oy) {
      for (int ox = 0; ox < g.wo; ++ox, ++idx) {
        const int y0 = std::max(0, oy * stride - padding);
        const int y1 = std::min(g.h, oy * stride - padding + window);
        const int x0 = std::max(0, ox * stride - padding);
        const int x1 = std::min(g.w, ox * stride - padding + window);
        const int count = (y1 - y0) * (x1 - x0);
        if (count <= 0) continue;
        const T share = grad_output[idx] / static_cast<T>(count);
        for (int iy = y0; iy < y1; ++iy) {
          for (int ix = x0; ix < x1; ++ix) dst[iy * g.w + ix] += share;
        }
      }
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input, 4, "global_avg_pool");
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t hw = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  BasicTensor<T> out({n, c, 1, 1});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
    const T* src = input.data() + nc * hw;
    T s{0};
    for (std::size_t i = 0; i < hw; ++i) s += src[i];
    out[nc] = s / static_cast<T>(hw);
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_output) {
  if (input_shape.size() != 4) throw DimensionError("global_avg_pool_backward: expected rank 4 input shape");
  BasicTensor<T> grad(input_shape);
  const std::size_t hw = static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  const std::size_t planes = static_cast<std::size_t>(input_shape[0]) * input_shape[1];
  if (grad_output.size() != planes) throw DimensionError("global_avg_pool_backward: gradient size mismatch");
  for (std::size_t nc = 0; nc < planes; ++nc) {
    const T share = grad_output[nc] / static_cast<T>(hw);
    std::fill(grad.data() + nc * hw, grad.data() + (nc + 1) * hw, share);
  }
  return grad;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  if (input.rank() < 2) throw DimensionError("dense: input must have a batch axis and a feature axis");
  require_rank(weights, 2, "dense weights");
  const int n = input.dim(0);
  const std::size_t f = input.size() / static_cast<std::size_t>(n);
  if (static_cast<std::size_t>(weights.dim(0)) != f) {
    throw DimensionError("dense: axis 1 (features) of input is " + std::to_string(f) + " but weights expect " +
                         std::to_string(weights.dim(0)));
  }
  const int o = weights.dim(1);
  check_bias("dense", bias, o);
  BasicTensor<T> out({n, o});
  for (int b = 0; b < n; ++b) {
    T* orow = out.data() + static_cast<std::size_t>(b) * o;
    for (int j = 0; j < o; ++j) orow[j] = bias.empty() ? T{0} : bias[static_cast<std::size_t>(j)];
    const T* x = input.data() + static_cast<std::size_t>(b) * f;
    for (std::size_t i = 0; i < f; ++i) {
      const T xv = x[i];
      const T* wrow = weights.data() + i * o;
      for (int j = 0; j < o; ++j) orow[j] += xv * wrow[j];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, bool has_bias,
                            const BasicTensor<T>& grad_output) {
  const int n = input.dim(0);
  const std::size_t f = input.size() / static_cast<std::size_t>(n);
  const int o = weights.dim(1);
  if (grad_output.shape() != Shape{n, o}) {
    throw DimensionError("dense_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
  }
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), {}};
  if (has_bias) grads.bias = BasicTensor<T>({o});
  for (int b = 0; b < n; ++b) {
    const T* x = input.data() + static_cast<std::size_t>(b) * f;
    T* dx = grads.input.data() + static_cast<std::size_t>(b) * f;
    const T* g = grad_output.data() + static_cast<std::size_t>(b) * o;
    if (has_bias) {
      for (int j = 0; j < o; ++j) grads.bias[static_cast<std::size_t>(j)] += g[j];
    }
    for (std::size_t i = 0; i < f; ++i) {
      const T* wrow = weights.data() + i * o;
      T* dwrow = grads.weights.data() + i * o;
      T s{0};
      for (int j = 0; j < o; ++j) {
        s += wrow[j] * g[j];
        dwrow[j] += x[i] * g[j];
      }
      dx[i] = s;
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, ActivationMode mode) {
  BasicTensor<T> out(input.shape());
  const std::size_t n = input.size();
  switch (mode) {
    case ActivationMode::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = input[i] < T{0} ? T{0} : input[i];  // NaN passes through
      break;
    case ActivationMode::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        const T x = input[i];
        if (x >= T{0}) {
          out[i] = T{1} / (T{1} + std::exp(-x));
        } else {
          const T e = std::exp(x);
          out[i] = e / (T{1} + e);
        }
      }
      break;
    case ActivationMode::softmax: {
      if (input.rank() < 1) throw DimensionError("softmax: input must have at least one axis");
      const std::size_t k = static_cast<std::size_t>(input.dim(input.rank() - 1));
      for (std::size_t row = 0; row < n / k; ++row) {
        const T* x = input.data() + row * k;
        T* y = out.data() + row * k;
        const T mx = *std::max_element(x, x + k);
        T s{0};
        for (std::size_t j = 0; j < k; ++j) {
          y[j] = std::exp(x[j] - mx);
          s += y[j];
        }
        for (std::size_t j = 0; j < k; ++j) y[j] /= s;
      }
      break;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& output, ActivationMode mode,
                                   const BasicTensor<T>& grad_output) {
  if (output.shape() != grad_output.shape()) {
    throw DimensionError("activation_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match output " + shape_string(output.shape()));
  }
  BasicTensor<T> grad(output.shape());
  const std::size_t n = output.size();
  switch (mode) {
    case ActivationMode::relu:
      for (std::size_t i = 0; i < n; ++i) grad[i] = output[i] > T{0} ? grad_output[i] : T{0};
      break;
    case ActivationMode::sigmoid:
      for (std::size_t i = 0; i < n; ++i) grad[i] = grad_output[i] * output[i] * (T{1} - output[i]);
      break;
    case ActivationMode::softmax: {
      const std::size_t k = static_cast<std::size_t>(output.dim(output.rank() - 1));
      for (std::size_t row = 0; row < n / k; ++row) {
        const T* y = output.data() + row * k;
        const T* g = grad_output.data() + row * k;
        T dot{0};
        for (std::size_t j = 0; j < k; ++j) dot += y[j] * g[j];
        for (std::size_t j = 0; j < k; ++j) grad[row * k + j] = y[j] * (g[j] - dot);
      }
      break;
    }
  }
  return grad;
}

namespace {

template <typename T>
void check_bn_params(const BasicTensor<T>& input, std::initializer_list<const BasicTensor<T>*> params) {
  if (input.rank() < 2) throw DimensionError("batch_norm: input needs a channel axis");
  const int c = input.dim(1);
  for (const BasicTensor<T>* p : params) {
    if (p->rank() != 1 || p->dim(0) != c) {
      throw DimensionError("batch_norm: axis 1 (channels) of input is " + std::to_string(c) +
                           " but a per-channel parameter has shape " + shape_string(p->shape()));
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> batch_norm_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                  const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                  BatchNormMode mode, double epsilon, BatchNormState<T>& state) {
  check_bn_params(input, {&gamma, &beta, &running_mean, &running_var});
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t inner = input.size() / (static_cast<std::size_t>(n) * c);
  const T count = static_cast<T>(static_cast<std::size_t>(n) * inner);

  state.mean = BasicTensor<T>({c});
  state.var = BasicTensor<T>({c});
  state.inv_std = BasicTensor<T>({c});
  if (mode == BatchNormMode::train) {
    for (int ch = 0; ch < c; ++ch) {
      T s{0};
      for (int b = 0; b < n; ++b) {
        const T* x = input.data() + (static_cast<std::size_t>(b) * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += x[i];
      }
      const T mean = s / count;
      T v{0};
      for (int b = 0; b < n; ++b) {
        const T* x = input.data() + (static_cast<std::size_t>(b) * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) v += (x[i] - mean) * (x[i] - mean);
      }
      state.mean[static_cast<std::size_t>(ch)] = mean;
      state.var[static_cast<std::size_t>(ch)] = v / count;
    }
  } else {
    state.mean = running_mean;
    state.var = running_var;
  }
  for (int ch = 0; ch < c; ++ch) {
    const auto i = static_cast<std::size_t>(ch);
    state.inv_std[i] = T{1} / std::sqrt(state.var[i] + static_cast<T>(epsilon));
  }

  state.xhat = BasicTensor<T>(input.shape());
  BasicTensor<T> out(input.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const auto ci = static_cast<std::size_t>(ch);
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * inner;
      const T mean = state.mean[ci], inv = state.inv_std[ci], gm = gamma[ci], bt = beta[ci];
      for (std::size_t i = 0; i < inner; ++i) {
        const T xh = (input[off + i] - mean) * inv;
        state.xhat[off + i] = xh;
        out[off + i] = gm * xh + bt;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BatchNormMode mode,
                          double epsilon, double momentum) {
  BatchNormState<T> state;
  BasicTensor<T> out = batch_norm_forward(input, gamma, beta, running_mean, running_var, mode, epsilon, state);
  if (mode == BatchNormMode::train) {
    const T m = static_cast<T>(momentum);
    for (std::size_t i = 0; i < running_mean.size(); ++i) {
      running_mean[i] = m * running_mean[i] + (T{1} - m) * state.mean[i];
      running_var[i] = m * running_var[i] + (T{1} - m) * state.var[i];
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormState<T>& state, const BasicTensor<T>& gamma, BatchNormMode mode,
                                      const BasicTensor<T>& grad_output) {
  const Shape& shape = state.xhat.shape();
  if (grad_output.shape() != shape) {
    throw DimensionError("batch_norm_backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
  }
  const int n = shape[0], c = shape[1];
  const std::size_t inner = state.xhat.size() / (static_cast<std::size_t>(n) * c);
  const T count = static_cast<T>(static_cast<std::size_t>(n) * inner);
  BatchNormGrads<T> grads{BasicTensor<T>(shape), BasicTensor<T>({c}), BasicTensor<T>({c})};
  for (int ch = 0; ch < c; ++ch) {
    const auto ci = static_cast<std::size_t>(ch);
    T sum_g{0}, sum_gx{0};
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_g += grad_output[off + i];
        sum_gx += grad_output[off + i] * state.xhat[off + i];
      }
    }
    grads.beta[ci] = sum_g;
    grads.gamma[ci] = sum_gx;
    const T scale = gamma[ci] * state.inv_std[ci];
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (mode == BatchNormMode::train) {
          grads.input[off + i] =
              scale / count * (count * grad_output[off + i] - sum_g - state.xhat[off + i] * sum_gx);
        } else {
          grads.input[off + i] = scale * grad_output[off + i];
        }
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> merge(const std::vector<const BasicTensor<T>*>& inputs, MergeMode mode) {
  if (inputs.empty()) throw ParameterError("merge: at least one input required");
  const Shape& first = inputs.front()->shape();
  if (mode == MergeMode::add) {
    for (const BasicTensor<T>* t : inputs) {
      if (t->shape() != first) {
        for (std::size_t axis = 0; axis < std::max(first.size(), t->shape().size()); ++axis) {
          if (axis >= first.size() || axis >= t->shape().size() || first[axis] != t->shape()[axis]) {
            throw DimensionError("merge(add): axis " + std::to_string(axis) + " differs between " +
                                 shape_string(first) + " and " + shape_string(t->shape()));
          }
        }
      }
    }
    BasicTensor<T> out = *inputs.front();
    for (std::size_t k = 1; k < inputs.size(); ++k) {
      const BasicTensor<T>& t = *inputs[k];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
    }
    return out;
  }

  if (first.size() != 4) throw DimensionError("merge(concat): inputs must be rank 4");
  int channels = 0;
  for (const BasicTensor<T>* t : inputs) {
    require_rank(*t, 4, "merge(concat)");
    for (int axis : {0, 2, 3}) {
      if (t->dim(axis) != first[static_cast<std::size_t>(axis)]) {
        throw DimensionError("merge(concat): axis " + std::to_string(axis) + " (" + axis_name(axis) +
                             ") differs between " + shape_string(first) + " and " + shape_string(t->shape()));
      }
    }
    channels += t->dim(1);
  }
  const int n = first[0];
  const std::size_t hw = static_cast<std::size_t>(first[2]) * first[3];
  BasicTensor<T> out({n, channels, first[2], first[3]});
  for (int b = 0; b < n; ++b) {
    T* dst = out.data() + static_cast<std::size_t>(b) * channels * hw;
    for (const BasicTensor<T>* t : inputs) {
      const std::size_t len = static_cast<std::size_t>(t->dim(1)) * hw;
      const T* src = t->data() + static_cast<std::size_t>(b) * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> merge_backward(const std::vector<Shape>& input_shapes, MergeMode mode,
                                           const BasicTensor<T>& grad_output) {
  std::vector<BasicTensor<T>> grads;
  grads.reserve(input_shapes.size());
  if (mode == MergeMode::add) {
    for (std::size_t i = 0; i < input_shapes.size(); ++i) grads.push_back(grad_output);
    return grads;
  }
  const int n = grad_output.dim(0);
  const int channels = grad_output.dim(1);
  const std::size_t hw = static_cast<std::size_t>(grad_output.dim(2)) * grad_output.dim(3);
  int offset = 0;
  for (const Shape& s : input_shapes) {
    BasicTensor<T> g(s);
    const std::size_t len = static_cast<std::size_t>(s[1]) * hw;
    for (int b = 0; b < n; ++b) {
      const T* src = grad_output.data() + (static_cast<std::size_t>(b) * channels + offset) * hw;
      std::copy(src, src + len, g.data() + static_cast<std::size_t>(b) * len);
    }
    offset += s[1];
    grads.push_back(std::move(g));
  }
  return grads;
}

#define PLASMO_INSTANTIATE_OPS(T)                                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, int);    \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, bool, int, int,               \
                                        const BasicTensor<T>&);                                                     \
  template BasicTensor<T> depthwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, \
                                           int);                                                                    \
  template ConvGrads<T> depthwise_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, bool, int, int,     \
                                                  const BasicTensor<T>&);                                           \
  template BasicTensor<T> pool2d(const BasicTensor<T>&, PoolMode, int, int, int);                                   \
  template BasicTensor<T> pool2d_backward(const BasicTensor<T>&, PoolMode, int, int, int, const BasicTensor<T>&);   \
  template std::vector<long> max_pool_argmax(const BasicTensor<T>&, int, int, int);                                 \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> global_avg_pool_backward(const Shape&, const BasicTensor<T>&);                            \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);               \
  template ConvGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, bool, const BasicTensor<T>&);  \
  template BasicTensor<T> activation(const BasicTensor<T>&, ActivationMode);                                        \
  template BasicTensor<T> activation_backward(const BasicTensor<T>&, ActivationMode, const BasicTensor<T>&);        \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,           \
                                     BasicTensor<T>&, BasicTensor<T>&, BatchNormMode, double, double);              \
  template BasicTensor<T> batch_norm_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                             const BasicTensor<T>&, const BasicTensor<T>&, BatchNormMode, double,   \
                                             BatchNormState<T>&);                                                   \
  template BatchNormGrads<T> batch_norm_backward(const BatchNormState<T>&, const BasicTensor<T>&, BatchNormMode,    \
                                                 const BasicTensor<T>&);                                            \
  template BasicTensor<T> merge(const std::vector<const BasicTensor<T>*>&, MergeMode);                              \
  template std::vector<BasicTensor<T>> merge_backward(const std::vector<Shape>&, MergeMode, const BasicTensor<T>&);

PLASMO_INSTANTIATE_OPS(float)
PLASMO_INSTANTIATE_OPS(double)

#undef PLASMO_INSTANTIATE_OPS

}  // namespace plasmo
