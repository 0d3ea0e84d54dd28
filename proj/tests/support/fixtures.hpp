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
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/image.hpp"

namespace plasmo::testkit {

struct SingleLayer {
  LayerGraph graph;
  Tensor input;
};

/// A graph of one kind of layer on a (2,3,7,7) input, preceded by a conv
/// where the layer needs a learnable producer.
SingleLayer single_layer(LayerKind kind, std::uint64_t seed, ActivationMode act = ActivationMode::relu,
                         PoolMode pool = PoolMode::max, MergeMode mm = MergeMode::add);

struct KindCase {
  const char* label;
  LayerKind kind;
  ActivationMode act;
  PoolMode pool;
  MergeMode merge;
  Phase phase;
};

/// Every layer kind and mode the graph supports.
std::vector<KindCase> layer_kind_cases();

/// 40x30 gray image, black left of x = 17 and white from there on.
Image step_edge_image();

/// Horizontal step whose lower side fades from 255 to 30, so one straight
/// edge runs from strong into weak magnitude, plus a separate weak rectangle.
Image two_segment_image();

/// conv (3x3, pad 1) -> relu -> global average pool -> dense(1) -> sigmoid
/// on a {2,6,6} input.
LayerGraph gap_head_model(std::uint64_t seed, int channels = 3);

}  // namespace plasmo::testkit
