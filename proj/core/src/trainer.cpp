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

#include "plasmo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "plasmo/netzoo.hpp"

namespace plasmo {

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [label](const DatasetItem& it) { return it.label == label; }));
}

Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  Dataset data;
  for (const auto& [folder, label] : {std::pair{"Parasitized", kParasitized}, std::pair{"Uninfected", kUninfected}}) {
    const fs::path dir = root / folder;
    if (!fs::is_directory(dir)) throw DatasetError("missing class folder " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t kept = 0;
    for (const fs::path& f : files) {
      try {
        load_image(f);
      } catch (const Error& e) {
        ++data.skipped;
        data.warnings.push_back("skipping " + f.string() + ": " + e.what());
        continue;
      }
      data.items.push_back({f, label});
      ++kept;
    }
    if (kept == 0) throw DatasetError("class folder " + dir.string() + " has no readable images");
  }
  return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DatasetError("split ratio must be in (0, 1)");
  std::mt19937_64 rng(seed);
  Dataset train_part, val_part;
  for (int label : {kParasitized, kUninfected}) {
    std::vector<DatasetItem> cls;
    for (const auto& it : data.items) {
      if (it.label == label) cls.push_back(it);
    }
    std::shuffle(cls.begin(), cls.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(cls.size())));
    if (n_train == 0 || n_train >= cls.size()) {
      throw DatasetError("split ratio " + std::to_string(ratio) + " leaves class " + std::to_string(label) +
                         " empty on one side (" + std::to_string(cls.size()) + " items)");
    }
    train_part.items.insert(train_part.items.end(), cls.begin(), cls.begin() + static_cast<long>(n_train));
    val_part.items.insert(val_part.items.end(), cls.begin() + static_cast<long>(n_train), cls.end());
  }
  std::shuffle(train_part.items.begin(), train_part.items.end(), rng);
  std::shuffle(val_part.items.begin(), val_part.items.end(), rng);
  return {std::move(train_part), std::move(val_part)};
}

Dataset stratified_subset(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n >= data.size()) return data;
  std::mt19937_64 rng(seed);
  Dataset out;
  const std::size_t n_pos = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) * static_cast<double>(data.count(kParasitized)) / static_cast<double>(data.size())));
  for (int label : {kParasitized, kUninfected}) {
    std::vector<DatasetItem> cls;
    for (const auto& it : data.items) {
      if (it.label == label) cls.push_back(it);
    }
    std::shuffle(cls.begin(), cls.end(), rng);
    const std::size_t take = std::min(cls.size(), label == kParasitized ? n_pos : n - n_pos);
    out.items.insert(out.items.end(), cls.begin(), cls.begin() + static_cast<long>(take));
  }
  std::sort(out.items.begin(), out.items.end(), [](const DatasetItem& a, const DatasetItem& b) { return a.path < b.path; });
  return out;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("adam_step: gradient shape " + shape_string(grad.shape()) + " does not match parameter " +
                         shape_string(param.shape()));
  }
  if (state.m.empty()) {
    state.m = Tensor(param.shape());
    state.v = Tensor(param.shape());
  }
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double update = config.learning_rate * (m / c1) / (std::sqrt(v / c2) + config.epsilon);
    param[i] = static_cast<float>(param[i] - update);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ParameterError("split ratio must be in (0, 1)");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (plateau_patience < 1) throw ParameterError("plateau patience must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ParameterError("plateau factor must be in (0, 1]");
}

SampleSet prepare_samples(const Dataset& data, const PreprocessConfig& config) {
  SampleSet out;
  out.reserve(data.size());
  for (const auto& item : data.items) out.push_back({build_input_tensor(load_image(item.path), config), item.label});
  return out;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
  if (items.empty()) throw ParameterError("stack_batch: empty batch");
  Shape shape = items.front()->shape();
  require_rank(*items.front(), 4, "stack_batch");
  const std::size_t per = items.front()->size();
  shape[0] = static_cast<int>(items.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->size() != per || items[i]->dim(0) != 1) {
      throw DimensionError("stack_batch: item " + std::to_string(i) + " has shape " +
                           shape_string(items[i]->shape()));
    }
    std::copy(items[i]->data(), items[i]->data() + per, out.data() + i * per);
  }
  return out;
}

namespace {

void flip_in_place(Tensor& t, bool horizontal, bool vertical) {
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  Tensor src = t;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        t.at(0, ch, y, x) = src.at(0, ch, vertical ? h - 1 - y : y, horizontal ? w - 1 - x : x);
      }
    }
  }
}

double bce_from_logit(double z, int y) {
  // log(1 + e^z) - y z, evaluated without overflow.
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

TrainResult train(LayerGraph& model, const SampleSet& train_set, const SampleSet& val_set, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw DatasetError("empty training set");
  const int logit = logit_node(model);
  std::mt19937_64 rng(config.seed);
  std::map<std::string, AdamState> adam;
  const std::vector<std::string> names = model.parameter_names(true);
  for (const auto& name : names) {
    if (model.parameter(name).quantized) throw StateError("cannot train a quantized model");
  }

  TrainResult result;
  double lr = config.learning_rate;
  double best_monitored = -1.0;
  int wait = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::bernoulli_distribution coin(0.5);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long correct = 0;
    const AdamConfig adam_cfg{lr, config.beta1, config.beta2, config.adam_epsilon};
    for (std::size_t start = 0, batch = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size), ++batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor> augmented;
      std::vector<const Tensor*> inputs;
      std::vector<int> labels;
      augmented.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        if (config.augment_flips) {
          augmented.push_back(s.input);
          flip_in_place(augmented.back(), coin(rng), coin(rng));
          inputs.push_back(&augmented.back());
        } else {
          inputs.push_back(&s.input);
        }
        labels.push_back(s.label);
      }
      const Tensor x = stack_batch(inputs);
      ForwardContext<float> ctx;
      forward(model, x, Phase::train, &ctx);
      const Tensor& z = ctx.output(logit);
      const auto n = static_cast<double>(labels.size());
      Tensor seed(z.shape());
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double zi = z[i];
        batch_loss += bce_from_logit(zi, labels[i]);
        const double p = sigmoid(zi);
        seed[i] = static_cast<float>((p - labels[i]) / n);
        if ((p >= 0.5 ? 1 : 0) == labels[i]) ++correct;
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
      }
      loss_sum += batch_loss;
      const Gradients<float> grads = backprop(model, ctx, seed, logit);
      for (const auto& name : names) adam_step(model.parameter(name).value, grads.params.at(name), adam[name], adam_cfg);
      apply_batch_statistics(model, ctx);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const Metrics m = evaluate_metrics(model, val_set);
      rec.val_accuracy = m.accuracy;
      rec.val_precision = m.precision;
      rec.val_recall = m.recall;
    }
    rec.learning_rate = lr;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!val_set.empty() && rec.val_accuracy > config.early_stop_val_acc) {
      result.early_stopped = true;
      break;
    }
    const double monitored =
        config.plateau_monitor == PlateauMonitor::training_accuracy ? rec.train_accuracy : rec.val_accuracy;
    if (monitored >= best_monitored + config.plateau_min_delta) {
      best_monitored = monitored;
      wait = 0;
    } else if (++wait >= config.plateau_patience) {
      lr = std::max(config.min_lr, lr * config.plateau_factor);
      wait = 0;
    }
  }
  return result;
}

Metrics metrics_from_counts(long tp, long fp, long tn, long fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const long n = tp + fp + tn + fn;
  m.accuracy = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  m.precision_undefined = tp + fp == 0;
  m.precision = m.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall_undefined = tp + fn == 0;
  m.recall = m.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

Metrics metrics_from_scores(const std::vector<float>& probabilities, const std::vector<int>& labels,
                            double threshold) {
  if (probabilities.size() != labels.size()) throw DimensionError("metrics: score and label counts differ");
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = probabilities[i] >= threshold;
    if (pos && labels[i] == kParasitized) ++tp;
    else if (pos) ++fp;
    else if (labels[i] == kParasitized) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::vector<float> predict(const LayerGraph& model, const SampleSet& data, int batch_size) {
  std::vector<float> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Tensor*> inputs;
    for (std::size_t k = start; k < end; ++k) inputs.push_back(&data[k].input);
    const Tensor y = forward(model, stack_batch(inputs));
    for (std::size_t i = 0; i < y.size(); ++i) out.push_back(y[i]);
  }
  return out;
}

Metrics evaluate_metrics(const LayerGraph& model, const SampleSet& data, double threshold) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);
  return metrics_from_scores(predict(model, data), labels, threshold);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,loss,acc,val_acc,val_prec,val_rec,lr\n";
  const auto flags = out.flags();
  out << std::setprecision(8);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ',' << r.val_accuracy << ','
        << r.val_precision << ',' << r.val_recall << ',' << r.learning_rate << '\n';
  }
  out.flags(flags);
}

}  // namespace plasmo
