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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/trainer.hpp"

namespace plasmo {

/// Affine parameters mapping [min(t), max(t)] (widened to include 0) onto
/// [0, 255]. A constant tensor gets scale 1. Throws ValueError on NaN/Inf.
QParams compute_qparams(std::span<const float> values);
inline QParams compute_qparams(const Tensor& t) { return compute_qparams(t.values()); }

/// clamp(round(x / scale) + zero_point, 0, 255), rounding half away from zero.
std::uint8_t quantize_value(float x, const QParams& q);
float dequantize_value(std::uint8_t q, const QParams& p);

QuantizedTensor quantize_tensor(const Tensor& t, const QParams& q);
QuantizedTensor quantize_tensor(const Tensor& t);
Tensor dequantize_tensor(const QuantizedTensor& q);

/// Weight-only: conv, depthwise and dense weights become 8-bit; biases and
/// batch-norm tensors stay float32.
LayerGraph quantize_model(const LayerGraph& model);

inline constexpr std::uint16_t kModelFileVersion = 1;

enum class DType : std::uint8_t { f32 = 0, i8 = 1 };

/// Binary container:
///   "MLRM" | u16 version | u16 section count |
///   per section: 4-byte tag, u64 offset, u64 length |
///   section payloads.
/// "TOPO" holds the graph as JSON. "TENS" holds u32 count followed by
/// records: u16 name length, name, u8 dtype, u8 rank, u32 dims,
/// [f32 scale, u8 zero point when i8], payload. Integers and floats are
/// little-endian.
std::vector<std::uint8_t> serialize_model(const LayerGraph& model);
void serialize_model(const LayerGraph& model, const std::filesystem::path& path);

/// Throws FormatError on bad magic or truncation, VersionError on an
/// unknown version.
LayerGraph deserialize_model(std::span<const std::uint8_t> bytes);
LayerGraph load_model(const std::filesystem::path& path);

struct BenchmarkReport {
  std::string label;
  std::size_t size_bytes = 0;
  int repetitions = 0;
  double mean_latency_ms = 0.0;  // per image
  double stddev_latency_ms = 0.0;
  Metrics metrics;
};

/// Times single-image forward passes over `samples` (or one synthetic input
/// when empty) after one warmup pass; repetitions must be >= 3.
BenchmarkReport benchmark_model(const LayerGraph& model, const SampleSet& samples, int repetitions,
                                std::string label = {});

/// model,size_bytes,mean_latency_ms,stddev_latency_ms,accuracy,precision,recall
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkReport>& reports);

}  // namespace plasmo
