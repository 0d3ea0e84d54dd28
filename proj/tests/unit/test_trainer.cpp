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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "plasmo/netzoo.hpp"
#include "plasmo/trainer.hpp"
#include "testkit.hpp"

using namespace plasmo;
namespace fs = std::filesystem;

namespace {

Dataset fake_dataset(int positives, int negatives) {
  Dataset d;
  for (int i = 0; i < positives; ++i) d.items.push_back({"p" + std::to_string(i) + ".png", kParasitized});
  for (int i = 0; i < negatives; ++i) d.items.push_back({"u" + std::to_string(i) + ".png", kUninfected});
  return d;
}

std::size_t count_label(const Dataset& d, int label) { return d.count(label); }

struct BlackWhite {
  LayerGraph model;
  SampleSet samples;
};

BlackWhite black_white(const std::string& arch = "tiny_vgg") {
  BlackWhite bw{assemble_model(preset_spec(arch), 1), {}};
  bw.samples = testkit::to_samples(testkit::black_white_set(4), model_preprocess_config(bw.model));
  return bw;
}

}  // namespace

TEST(LoadDataset, EnumeratesBothClassesSorted) {
  const fs::path root = testkit::temp_dir("ds_ok");
  testkit::write_dataset(root, testkit::patch_set(2, 2, 3));
  const Dataset d = load_dataset(root);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.count(kParasitized), 2u);
  EXPECT_EQ(d.count(kUninfected), 2u);
  EXPECT_EQ(d.skipped, 0u);
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d.items[i].label == d.items[i - 1].label) EXPECT_LT(d.items[i - 1].path, d.items[i].path);
  }
  fs::remove_all(root);
}

TEST(LoadDataset, MissingOrEmptyClassFolder) {
  const fs::path root = testkit::temp_dir("ds_missing");
  testkit::write_dataset(root, testkit::patch_set(2, 2, 3));
  fs::remove_all(root / "Uninfected");
  EXPECT_THROW(load_dataset(root), DatasetError);
  fs::create_directories(root / "Uninfected");
  EXPECT_THROW(load_dataset(root), DatasetError);
  fs::remove_all(root);
}

TEST(LoadDataset, UnreadableFileIsSkipped) {
  const fs::path root = testkit::temp_dir("ds_bad");
  testkit::write_dataset(root, testkit::patch_set(2, 2, 3));
  std::ofstream(root / "Parasitized" / "zz_broken.png") << "not a png";
  std::ofstream(root / "Uninfected" / "notes.txt") << "ignored";
  const Dataset d = load_dataset(root);
  EXPECT_EQ(d.size(), 4u);
  EXPECT_EQ(d.skipped, 1u);
  ASSERT_EQ(d.warnings.size(), 1u);
  EXPECT_NE(d.warnings[0].find("zz_broken.png"), std::string::npos);
  fs::remove_all(root);
}

TEST(SplitDataset, StratifiedCounts) {
  const auto [train, val] = split_dataset(fake_dataset(50, 50), 0.8, 7);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(val.size(), 20u);
  EXPECT_EQ(count_label(train, kParasitized), 40u);
  EXPECT_EQ(count_label(train, kUninfected), 40u);
  EXPECT_EQ(count_label(val, kParasitized), 10u);
  EXPECT_EQ(count_label(val, kUninfected), 10u);
}

TEST(SplitDataset, UnevenClassesStayWithinOne) {
  const Dataset d = fake_dataset(37, 61);
  const auto [train, val] = split_dataset(d, 0.7, 2);
  EXPECT_NEAR(static_cast<double>(train.size()), std::round(0.7 * 98), 1.0);
  const double frac = static_cast<double>(count_label(train, kParasitized)) / static_cast<double>(train.size());
  EXPECT_NEAR(frac * static_cast<double>(train.size()), 37.0 / 98.0 * static_cast<double>(train.size()), 1.0);
  EXPECT_EQ(train.size() + val.size(), d.size());
}

TEST(SplitDataset, SeedDeterminesOrder) {
  const Dataset d = fake_dataset(30, 30);
  const auto a = split_dataset(d, 0.8, 11);
  const auto b = split_dataset(d, 0.8, 11);
  const auto c = split_dataset(d, 0.8, 12);
  auto paths = [](const Dataset& x) {
    std::vector<fs::path> p;
    for (const auto& i : x.items) p.push_back(i.path);
    return p;
  };
  EXPECT_EQ(paths(a.first), paths(b.first));
  EXPECT_EQ(paths(a.second), paths(b.second));
  EXPECT_NE(paths(a.first), paths(c.first));
}

TEST(SplitDataset, EmptyingAClassThrows) {
  EXPECT_THROW(split_dataset(fake_dataset(2, 2), 0.999, 1), DatasetError);
  EXPECT_THROW(split_dataset(fake_dataset(2, 2), 0.0, 1), Error);
}

TEST(StratifiedSubset, KeepsProportions) {
  const Dataset s = stratified_subset(fake_dataset(50, 50), 20, 4);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(s.count(kParasitized), 10u);
}

TEST(Adam, ZeroGradientZeroStateLeavesParams) {
  Tensor p({3}, std::vector<float>{0.5f, -2.0f, 7.0f});
  const Tensor before = p;
  AdamState st;
  adam_step(p, Tensor({3}), st, AdamConfig{});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (float g : {0.3f, -4.0f, 1e-3f}) {
    Tensor p({1}, 0.0f);
    AdamState st;
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    adam_step(p, Tensor({1}, g), st, cfg);
    const double closed = 1e-3 * std::abs(g) / (std::abs(g) + 1e-8);
    EXPECT_NEAR(std::abs(p[0]), closed, closed * 1e-6) << g;
    if (std::abs(g) >= 0.1f) EXPECT_NEAR(std::abs(p[0]), 1e-3, 1e-3 * 1e-6) << g;
    EXPECT_EQ(std::signbit(p[0]), g > 0);
    EXPECT_EQ(st.step, 1);
  }
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  Tensor p({1}, 1.0f);
  AdamState st;
  double ref = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    adam_step(p, Tensor({1}, 1.0f), st, cfg);
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p[0], ref, 1e-6) << t;
  }
}

TEST(Adam, ZeroLearningRateIsBitIdentical) {
  std::mt19937_64 rng(3);
  Tensor p = testkit::random_tensor({5, 4}, rng);
  const Tensor before = p;
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step(p, testkit::random_tensor({5, 4}, rng), st, cfg);
  EXPECT_EQ(p, before);
}

TEST(Adam, ShapeMismatchIsDimensionError) {
  Tensor p({3});
  AdamState st;
  EXPECT_THROW(adam_step(p, Tensor({4}), st, AdamConfig{}), DimensionError);
}

TEST(Metrics, HandCounts) {
  const Metrics m = metrics_from_counts(3, 1, 4, 2);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_FALSE(m.precision_undefined);
}

TEST(Metrics, PerfectAndAllNegative) {
  const std::vector<int> labels{1, 0, 1, 1, 0};
  const Metrics perfect = metrics_from_scores({0.9f, 0.1f, 0.8f, 0.51f, 0.49f}, labels);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  const Metrics neg = metrics_from_scores({0.1f, 0.1f, 0.1f, 0.1f, 0.1f}, labels);
  EXPECT_EQ(neg.recall, 0.0);
  EXPECT_EQ(neg.precision, 0.0);
  EXPECT_TRUE(neg.precision_undefined);
  EXPECT_EQ(neg.tn, 2);
  EXPECT_EQ(neg.fn, 3);
}

TEST(Metrics, RaisingThresholdNeverRaisesRecall) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> scores(300);
  std::vector<int> labels(300);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    labels[i] = static_cast<int>(rng() % 2);
    scores[i] = std::clamp(u(rng) * 0.7f + (labels[i] ? 0.3f : 0.0f), 0.0f, 1.0f);
  }
  double previous = 2.0;
  for (double t = 0.0; t <= 1.0001; t += 0.02) {
    const double r = metrics_from_scores(scores, labels, t).recall;
    EXPECT_LE(r, previous) << t;
    previous = r;
  }
}

TEST(Train, SeparableToyEarlyStops) {
  BlackWhite bw = black_white();
  const TrainResult r = train(bw.model, bw.samples, bw.samples, TrainConfig{});
  ASSERT_FALSE(r.history.empty());
  EXPECT_TRUE(r.early_stopped);
  EXPECT_LT(r.history.size(), 30u);
  EXPECT_EQ(r.history.back().val_accuracy, 1.0);
  for (std::size_t i = 0; i + 1 < r.history.size(); ++i) EXPECT_LE(r.history[i].val_accuracy, 0.98);
  EXPECT_EQ(evaluate_metrics(bw.model, bw.samples).accuracy, 1.0);
}

TEST(Train, LossFallsOnToySet) {
  BlackWhite bw = black_white();
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.early_stop_val_acc = 1.0;
  const TrainResult r = train(bw.model, bw.samples, bw.samples, cfg);
  ASSERT_EQ(r.history.size(), 6u);
  int falling = 0;
  for (std::size_t i = 0; i + 1 < r.history.size(); ++i) falling += r.history[i + 1].train_loss < r.history[i].train_loss;
  EXPECT_GE(falling, 4);
  for (const EpochRecord& e : r.history) {
    EXPECT_GE(e.train_loss, 0.0);
    for (double v : {e.train_accuracy, e.val_accuracy, e.val_precision, e.val_recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Train, LearningRateNeverIncreases) {
  BlackWhite bw = black_white();
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.early_stop_val_acc = 1.0;
  cfg.min_lr = 3e-5;
  const TrainResult r = train(bw.model, bw.samples, bw.samples, cfg);
  int changes = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    const double a = r.history[i - 1].learning_rate, b = r.history[i].learning_rate;
    EXPECT_LE(b, a);
    if (b < a) {
      ++changes;
      EXPECT_TRUE(b == a * 0.5 || b == cfg.min_lr) << a << " -> " << b;
    }
    EXPECT_GE(b, cfg.min_lr);
  }
  EXPECT_GE(changes, 1);
}

TEST(Train, ValidationMonitorIsSelectable) {
  BlackWhite bw = black_white();
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.early_stop_val_acc = 1.0;
  cfg.plateau_monitor = PlateauMonitor::validation_accuracy;
  cfg.plateau_patience = 1;
  const TrainResult r = train(bw.model, bw.samples, bw.samples, cfg);
  EXPECT_LT(r.history.back().learning_rate, cfg.learning_rate);
}

TEST(Train, ReproducibleForSeed) {
  const auto patches = testkit::patch_set(12, 12, 5);
  auto run = [&] {
    LayerGraph m = assemble_model(preset_spec("tiny_mobile"), 9);
    const SampleSet s = testkit::to_samples(patches, model_preprocess_config(m));
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 21;
    cfg.augment_flips = true;
    return std::pair{train(m, s, s, cfg).history, m};
  };
  const auto [h1, m1] = run();
  const auto [h2, m2] = run();
  EXPECT_EQ(h1, h2);
  for (const std::string& name : m1.parameter_names()) EXPECT_EQ(m1.parameter(name).value, m2.parameter(name).value);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
  BlackWhite bw = black_white();
  bw.samples[5].input[0] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.seed = 3;
  try {
    train(bw.model, bw.samples, bw.samples, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.split_ratio = 1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Predict, BatchingDoesNotChangeScores) {
  BlackWhite bw = black_white("tiny_residual");
  const auto a = predict(bw.model, bw.samples, 3);
  const auto b = predict(bw.model, bw.samples, 8);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6f);
}

TEST(HistoryCsv, HeaderAndRows) {
  std::ostringstream os;
  write_history_csv(os, {EpochRecord{1, 0.5, 0.75, 0.8, 0.9, 0.7, 1e-4}, EpochRecord{2, 0.25, 1, 1, 1, 1, 5e-5}});
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,loss,acc,val_acc,val_prec,val_rec,lr");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0.5,0.75,0.8,0.9,0.7,0.0001");
  std::getline(in, line);
  EXPECT_EQ(line, "2,0.25,1,1,1,1,5e-05");
  EXPECT_FALSE(std::getline(in, line));
}
