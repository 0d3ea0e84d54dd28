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

#include "plasmo_tools/cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "plasmo/explainer.hpp"
#include "plasmo/imgproc.hpp"
#include "plasmo/localizer.hpp"
#include "plasmo/netzoo.hpp"
#include "plasmo/quantizer.hpp"
#include "plasmo/service.hpp"
#include "plasmo/trainer.hpp"

namespace plasmo::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string model = "model.mlrm";
  std::string data;
  std::string image;
  std::string out;
  std::string arch = "tiny_dense";
  std::string input_mode = "rgb_plus_edge";
  std::string dump_dir;
  std::string layer;
  std::string history;
  std::string csv;
  std::string host = "0.0.0.0";
  std::string store = "cases";
  std::string ui;
  std::string plateau = "train";
  std::string quant_in, quant_out;
  int epochs = 30;
  int batch_size = 32;
  int port = kDefaultPort;
  int reps = 5;
  std::size_t subset = 0;
  std::uint64_t seed = 0;
  double learning_rate = 1e-4;
  double alpha = 0.5;
  double split = 0.8;
  bool flips = false;
};

LayerGraph build_model(const Options& o) {
  const InputMode mode = parse_input_mode(o.input_mode);
  if (is_preset(o.arch)) return assemble_model(preset_spec(o.arch, mode), o.seed);
  if (fs::is_regular_file(o.arch)) {
    std::ifstream in(o.arch);
    std::stringstream text;
    text << in.rdbuf();
    ModelSpec spec = parse_model_spec(text.str());
    spec.input_mode = mode;
    return assemble_model(spec, o.seed);
  }
  std::string names;
  for (const auto& n : preset_names()) names += " " + n;
  throw ParameterError("unknown architecture '" + o.arch + "' (presets:" + names + ", or a spec file)");
}

void dump_views(const Image& image, const PreprocessConfig& config, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  const PreprocessedViews v = preprocess_views(image, config);
  save_png(v.resized, dir / (stem + "_resized.png"));
  save_png(v.blurred, dir / (stem + "_blurred.png"));
  save_png(v.edges, dir / (stem + "_edges.png"));
}

json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"tp", m.tp},             {"fp", m.fp},               {"tn", m.tn},
          {"fn", m.fn}};
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  LayerGraph model = build_model(o);
  Dataset data = load_dataset(o.data);
  for (const auto& w : data.warnings) err << "warning: " << w << '\n';
  if (o.subset > 0) data = stratified_subset(data, o.subset, o.seed);
  const auto [train_part, val_part] = split_dataset(data, o.split, o.seed);
  const PreprocessConfig pre = model_preprocess_config(model);
  if (!o.dump_dir.empty()) {
    for (std::size_t i = 0; i < std::min<std::size_t>(8, train_part.size()); ++i) {
      dump_views(load_image(train_part.items[i].path), pre, o.dump_dir, "train" + std::to_string(i));
    }
  }
  err << "preprocessing " << train_part.size() << " training and " << val_part.size() << " validation images\n";
  const SampleSet train_set = prepare_samples(train_part, pre);
  const SampleSet val_set = prepare_samples(val_part, pre);

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.learning_rate;
  cfg.seed = o.seed;
  cfg.split_ratio = o.split;
  cfg.augment_flips = o.flips;
  cfg.plateau_monitor = o.plateau == "val" ? PlateauMonitor::validation_accuracy : PlateauMonitor::training_accuracy;
  err << "training " << o.arch << " (" << count_params(model) << " parameters)\n";
  const TrainResult result = train(model, train_set, val_set, cfg, [&err](const EpochRecord& r) {
    err << "epoch " << r.epoch << " loss " << std::fixed << std::setprecision(4) << r.train_loss << " acc "
        << r.train_accuracy << " val_acc " << r.val_accuracy << " val_prec " << r.val_precision << " val_rec "
        << r.val_recall << " lr " << std::defaultfloat << r.learning_rate << '\n';
  });

  const fs::path model_path = o.out.empty() ? fs::path(o.model) : fs::path(o.out);
  serialize_model(model, model_path);
  const fs::path history_path = o.history.empty() ? fs::path(model_path.string() + ".history.csv") : fs::path(o.history);
  std::ofstream hist(history_path);
  write_history_csv(hist, result.history);
  const EpochRecord& last = result.history.back();
  out << json{{"model", model_path.string()},
              {"history", history_path.string()},
              {"epochs", result.history.size()},
              {"early_stopped", result.early_stopped},
              {"val_accuracy", last.val_accuracy},
              {"val_precision", last.val_precision},
              {"val_recall", last.val_recall}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const LayerGraph model = load_model(o.model);
  Dataset data = load_dataset(o.data);
  for (const auto& w : data.warnings) err << "warning: " << w << '\n';
  const SampleSet samples = prepare_samples(data, model_preprocess_config(model));
  json j = metrics_json(evaluate_metrics(model, samples));
  j["images"] = samples.size();
  j["skipped"] = data.skipped;
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out, std::ostream&) {
  const LayerGraph model = load_model(o.model);
  const Image image = load_image(o.image);
  const PreprocessConfig pre = model_preprocess_config(model);
  if (!o.dump_dir.empty()) dump_views(image, pre, o.dump_dir, fs::path(o.image).stem().string());
  const double p = forward(model, build_input_tensor(image, pre))[0];
  out << json{{"label", p >= 0.5 ? "parasitized" : "uninfected"}, {"probability", p}}.dump() << '\n';
  return kExitOk;
}

int cmd_localize(const Options& o, std::ostream& out, std::ostream&) {
  const LayerGraph model = load_model(o.model);
  const Image image = load_image(o.image);
  const LocalizeResult r = detect_cells(image, model);
  json dets = json::array();
  for (const auto& d : r.detections) {
    dets.push_back({{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}, {"score", d.score},
                    {"level", d.level}});
  }
  const fs::path annotated = o.out.empty() ? fs::path(fs::path(o.image).stem().string() + "_boxes.png") : fs::path(o.out);
  save_png(draw_boxes(image, r.detections), annotated);
  out << json{{"image", o.image}, {"count", r.count}, {"detections", dets}, {"annotated", annotated.string()}}.dump()
      << '\n';
  return kExitOk;
}

int cmd_explain(const Options& o, std::ostream& out, std::ostream&) {
  const LayerGraph model = load_model(o.model);
  const Image image = load_image(o.image);
  const std::string layer = o.layer.empty() ? last_conv_layer(model) : o.layer;
  const Tensor x = build_input_tensor(image, model_preprocess_config(model));
  const Heatmap hm = grad_cam(model, x, layer, ClassSign::positive, image.width, image.height);
  const std::string stem = fs::path(o.image).stem().string();
  const fs::path overlay = o.out.empty() ? fs::path(stem + "_gradcam.png") : fs::path(o.out);
  save_png(render_overlay(hm, image, std::clamp(o.alpha, 0.0, 1.0)), overlay);
  const fs::path csv = o.csv.empty() ? fs::path(overlay.string() + ".csv") : fs::path(o.csv);
  std::ofstream c(csv);
  c << std::setprecision(6);
  for (int y = 0; y < hm.height; ++y) {
    for (int x2 = 0; x2 < hm.width; ++x2) c << (x2 ? "," : "") << hm.at(x2, y);
    c << '\n';
  }
  out << json{{"layer", layer}, {"overlay", overlay.string()}, {"heatmap_csv", csv.string()}}.dump() << '\n';
  return kExitOk;
}

int cmd_quantize(const Options& o, std::ostream& out, std::ostream&) {
  const LayerGraph model = load_model(o.quant_in);
  const LayerGraph q = quantize_model(model);
  serialize_model(q, o.quant_out);
  const auto in_size = fs::file_size(o.quant_in);
  const auto out_size = fs::file_size(o.quant_out);
  out << json{{"input", o.quant_in},
              {"output", o.quant_out},
              {"input_bytes", in_size},
              {"output_bytes", out_size},
              {"ratio", static_cast<double>(out_size) / static_cast<double>(in_size)}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  const LayerGraph model = load_model(o.quant_in);
  SampleSet samples;
  if (!o.quant_out.empty()) {
    Dataset data = load_dataset(o.quant_out);
    for (const auto& w : data.warnings) err << "warning: " << w << '\n';
    if (o.subset > 0) data = stratified_subset(data, o.subset, o.seed);
    samples = prepare_samples(data, model_preprocess_config(model));
  }
  std::vector<BenchmarkReport> reports;
  if (model.quantized()) {
    reports.push_back(benchmark_model(model, samples, o.reps, "int8"));
  } else {
    reports.push_back(benchmark_model(model, samples, o.reps, "float32"));
    reports.push_back(benchmark_model(quantize_model(model), samples, o.reps, "int8"));
  }
  if (!o.csv.empty()) {
    std::ofstream c(o.csv);
    write_benchmark_csv(c, reports);
  }
  write_benchmark_csv(out, reports);
  return kExitOk;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream&) {
  ServiceConfig cfg;
  cfg.host = o.host;
  cfg.port = o.port;
  cfg.store_dir = resolve_store_dir(o.store);
  cfg.ui_dir = o.ui;
  InferenceService service(load_model(o.model), cfg);
  HttpServer server(service);
  const int port = server.bind(cfg.host, cfg.port);
  out << "listening on " << cfg.host << ':' << port << " (cases in " << service.store().file().string() << ")"
      << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Malaria blood-smear cell classifier, localizer and explainer", "plasmo"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  const std::vector<std::string> modes{"rgb", "edges", "rgb_plus_edge"};

  auto* train = app.add_subcommand("train", "Train a classifier on a Parasitized/Uninfected folder");
  train->add_option("--arch", o.arch, "Preset name or model spec file")->capture_default_str();
  train->add_option("--data", o.data, "Dataset root with Parasitized/ and Uninfected/")->required();
  train->add_option("--out,--model", o.out, "Output model file")->capture_default_str();
  train->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seed", o.seed, "Seed for init, split and shuffling")->capture_default_str();
  train->add_option("--input-mode", o.input_mode, "Input channels")->capture_default_str()->check(CLI::IsMember(modes));
  train->add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", o.learning_rate, "Initial Adam learning rate")->capture_default_str();
  train->add_option("--split", o.split, "Training fraction of the stratified split")->capture_default_str();
  train->add_option("--subset", o.subset, "Use a stratified subset of this many images (0 = all)");
  train->add_option("--history", o.history, "History CSV path (default <out>.history.csv)");
  train->add_option("--plateau-monitor", o.plateau, "Metric watched by the LR schedule")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "val"}));
  train->add_flag("--flips", o.flips, "Random horizontal/vertical flips");
  train->add_option("--dump-preprocessed", o.dump_dir, "Write preprocessing stages of a few images here");

  auto* eval = app.add_subcommand("eval", "Accuracy, precision and recall on a dataset folder");
  eval->add_option("--model", o.model, "Model file")->required();
  eval->add_option("--data", o.data, "Dataset root")->required();

  auto* infer = app.add_subcommand("infer", "Classify one cell image");
  infer->add_option("--model", o.model, "Model file")->required();
  infer->add_option("--image", o.image, "PNG or JPEG image")->required();
  infer->add_option("--dump-preprocessed", o.dump_dir, "Write resized, blurred and edge images here");

  auto* localize = app.add_subcommand("localize", "Find and count parasitized cells in a smear image");
  localize->add_option("--model", o.model, "Model file")->required();
  localize->add_option("--image", o.image, "PNG or JPEG image")->required();
  localize->add_option("--out", o.out, "Annotated PNG path");

  auto* explain = app.add_subcommand("explain", "Grad-CAM overlay for one image");
  explain->add_option("--model", o.model, "Model file")->required();
  explain->add_option("--image", o.image, "PNG or JPEG image")->required();
  explain->add_option("--layer", o.layer, "Conv layer (default: last conv layer)");
  explain->add_option("--alpha", o.alpha, "Overlay opacity in [0, 1]")->capture_default_str();
  explain->add_option("--out", o.out, "Overlay PNG path");
  explain->add_option("--csv", o.csv, "Raw heatmap CSV path");

  auto* quantize = app.add_subcommand("quantize", "Convert float weights to 8-bit");
  quantize->add_option("input", o.quant_in, "Float model file")->required();
  quantize->add_option("output", o.quant_out, "Quantized model file")->required();

  auto* bench = app.add_subcommand("bench", "Size, latency and accuracy report");
  bench->add_option("model", o.quant_in, "Model file")->required();
  bench->add_option("data", o.quant_out, "Dataset root (optional)");
  bench->add_option("--reps", o.reps, "Timed repetitions")->capture_default_str()->check(CLI::Range(3, 1000));
  bench->add_option("--subset", o.subset, "Stratified subset size (0 = all)");
  bench->add_option("--seed", o.seed, "Subset seed");
  bench->add_option("--csv", o.csv, "Also write the report here");

  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  serve->add_option("--model", o.model, "Model file")->required();
  serve->add_option("--port", o.port, "TCP port")->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--store", o.store, "Case store directory (PLASMO_STORE_DIR overrides)")->capture_default_str();
  serve->add_option("--ui", o.ui, "Static UI directory served under /ui/");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*infer) return cmd_infer(o, out, err);
    if (*localize) return cmd_localize(o, out, err);
    if (*explain) return cmd_explain(o, out, err);
    if (*quantize) return cmd_quantize(o, out, err);
    if (*bench) return cmd_bench(o, out, err);
    if (*serve) return cmd_serve(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUser;
}

}  // namespace plasmo::cli
