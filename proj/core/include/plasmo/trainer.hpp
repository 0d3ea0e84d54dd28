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
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "plasmo/graph.hpp"
#include "plasmo/imgproc.hpp"

namespace plasmo {

inline constexpr int kParasitized = 1;
inline constexpr int kUninfected = 0;

struct DatasetItem {
  std::filesystem::path path;
  int label = kUninfected;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::size_t skipped = 0;            // unreadable files left out by load_dataset
  std::vector<std::string> warnings;  // one per skipped file

  std::size_t count(int label) const;
  std::size_t size() const noexcept { return items.size(); }
};

/// Enumerates root/Parasitized and root/Uninfected in sorted path order.
/// Files that fail to decode are skipped and tallied.
Dataset load_dataset(const std::filesystem::path& root);

/// Stratified, seeded split. Each class contributes round(ratio * n_class)
/// items to the training side; a split that leaves a class empty on either
/// side throws DatasetError.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double ratio, std::uint64_t seed);

/// Seeded sample of `n` items that keeps the class proportions of `data`.
Dataset stratified_subset(const Dataset& data, std::size_t n, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  long step = 0;
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config);

enum class PlateauMonitor { training_accuracy, validation_accuracy };

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-4;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double early_stop_val_acc = 0.98;  // stop after the first epoch whose val accuracy exceeds this
  PlateauMonitor plateau_monitor = PlateauMonitor::training_accuracy;
  int plateau_patience = 3;
  double plateau_factor = 0.5;
  double plateau_min_delta = 1e-4;
  double min_lr = 1e-6;
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
  bool augment_flips = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double learning_rate = 0.0;  // rate in effect during this epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// A preprocessed example: input is (1, C, H, W).
struct Sample {
  Tensor input;
  int label = kUninfected;
};
using SampleSet = std::vector<Sample>;

SampleSet prepare_samples(const Dataset& data, const PreprocessConfig& config);

struct TrainResult {
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

/// Minimizes binary cross-entropy on the pre-sigmoid logit with Adam.
/// Throws TrainingError on a non-finite loss, naming the epoch and batch.
TrainResult train(LayerGraph& model, const SampleSet& train_set, const SampleSet& val_set, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_undefined = false;  // TP + FP == 0; precision reported as 0
  bool recall_undefined = false;     // TP + FN == 0; recall reported as 0
};

Metrics metrics_from_counts(long tp, long fp, long tn, long fn);

/// Parasitized is the positive class; a probability >= threshold predicts it.
Metrics evaluate_metrics(const LayerGraph& model, const SampleSet& data, double threshold = 0.5);
Metrics metrics_from_scores(const std::vector<float>& probabilities, const std::vector<int>& labels,
                            double threshold = 0.5);

/// Sigmoid outputs for every sample, evaluated in batches.
std::vector<float> predict(const LayerGraph& model, const SampleSet& data, int batch_size = 32);

/// Stacks (1, C, H, W) tensors into one (N, C, H, W) batch.
Tensor stack_batch(const std::vector<const Tensor*>& items);

/// epoch,loss,acc,val_acc,val_prec,val_rec,lr
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace plasmo
