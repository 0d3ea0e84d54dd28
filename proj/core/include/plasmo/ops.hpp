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

#include <vector>

#include "plasmo/tensor.hpp"

namespace plasmo {

enum class PoolMode { max, avg };
enum class ActivationMode { relu, sigmoid, softmax };
enum class MergeMode { concat_channels, add };

// Layer primitives. All image tensors are (N, C, H, W). An empty bias tensor
// means "no bias". Each forward has a matching *_backward that takes the
// forward inputs plus the gradient of the forward output.

/// Output extent of a sliding window along one axis.
int window_extent(int size, int kernel, int stride, int padding);

/// Cross-correlation (no kernel flip). weights: (O, C, kH, kW); bias: (O) or empty.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                      int stride, int padding);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;  // empty when the layer has no bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, bool has_bias, int stride,
                             int padding, const BasicTensor<T>& grad_output);

/// One kH x kW filter per channel. kernels: (C, 1, kH, kW); bias: (C) or empty.
template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                                int stride, int padding);

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels, bool has_bias,
                                       int stride, int padding, const BasicTensor<T>& grad_output);

/// Max or average pooling. Padded cells never win a max and are excluded from
/// the average.
template <typename T>
BasicTensor<T> pool2d(const BasicTensor<T>& input, PoolMode mode, int window, int stride, int padding = 0);

template <typename T>
BasicTensor<T> pool2d_backward(const BasicTensor<T>& input, PoolMode mode, int window, int stride, int padding,
                               const BasicTensor<T>& grad_output);

/// Flat index of the winning cell of every max-pool output, -1 for windows
/// that only cover padding.
template <typename T>
std::vector<long> max_pool_argmax(const BasicTensor<T>& input, int window, int stride, int padding);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_output);

/// input (N, F) or any (N, ...) that flattens to F features; weights (F, O).
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

template <typename T>
ConvGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, bool has_bias,
                            const BasicTensor<T>& grad_output);

/// Softmax runs over the last axis.
template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, ActivationMode mode);

/// Uses the forward *output*, which is sufficient for all three modes.
template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& output, ActivationMode mode, const BasicTensor<T>& grad_output);

enum class BatchNormMode { train, infer };

template <typename T>
struct BatchNormState {
  BasicTensor<T> mean;     // (C) statistics actually used for normalization
  BasicTensor<T> var;      // (C)
  BasicTensor<T> inv_std;  // (C)
  BasicTensor<T> xhat;     // normalized input, same shape as input
};

/// Per-channel normalization. In train mode the batch statistics are used and
/// the running statistics are updated in place:
///   running = momentum * running + (1 - momentum) * batch.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BatchNormMode mode,
                          double epsilon = 1e-5, double momentum = 0.9);

/// Same as batch_norm but leaves running statistics untouched and exposes the
/// state needed for the backward pass.
template <typename T>
BasicTensor<T> batch_norm_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                  const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                  BatchNormMode mode, double epsilon, BatchNormState<T>& state);

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormState<T>& state, const BasicTensor<T>& gamma, BatchNormMode mode,
                                      const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> merge(const std::vector<const BasicTensor<T>*>& inputs, MergeMode mode);

template <typename T>
std::vector<BasicTensor<T>> merge_backward(const std::vector<Shape>& input_shapes, MergeMode mode,
                                           const BasicTensor<T>& grad_output);

}  // namespace plasmo
