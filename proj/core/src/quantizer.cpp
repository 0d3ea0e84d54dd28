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

#include "plasmo/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>

namespace plasmo {

QParams compute_qparams(std::span<const float> values) {
  if (values.empty()) throw ValueError("cannot quantize an empty tensor");
  double lo = values[0], hi = values[0];
  for (float v : values) {
    if (!std::isfinite(v)) throw ValueError("tensor contains NaN or Inf");
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  if (lo == hi) {
    return {1.0f, static_cast<int>(std::clamp(std::round(-lo), 0.0, 255.0))};
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  const double zp = std::round(-lo * 255.0 / (hi - lo));
  const double s = (hi - lo) / 255.0;
  float sf = static_cast<float>(s);
  // A scale a hair too large would pull the range endpoints one code inward.
  if (static_cast<double>(sf) > s) sf = std::nextafter(sf, 0.0f);
  return {sf, static_cast<int>(std::clamp(zp, 0.0, 255.0))};
}

std::uint8_t quantize_value(float x, const QParams& q) {
  const double v = std::round(static_cast<double>(x) / static_cast<double>(q.scale)) + q.zero_point;
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

float dequantize_value(std::uint8_t q, const QParams& p) {
  return p.scale * static_cast<float>(static_cast<int>(q) - p.zero_point);
}

QuantizedTensor quantize_tensor(const Tensor& t, const QParams& q) {
  if (!(q.scale > 0.0f) || q.zero_point < 0 || q.zero_point > 255) throw ParameterError("invalid quantization parameters");
  QuantizedTensor out{t.shape(), std::vector<std::uint8_t>(t.size()), q};
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = quantize_value(t[i], q);
  return out;
}

QuantizedTensor quantize_tensor(const Tensor& t) { return quantize_tensor(t, compute_qparams(t)); }

Tensor dequantize_tensor(const QuantizedTensor& q) { return q.dequantize<float>(); }

namespace {

bool quantizable(LayerKind kind, const std::string& key) {
  return key == "weight" &&
         (kind == LayerKind::conv2d || kind == LayerKind::depthwise_conv2d || kind == LayerKind::dense);
}

}  // namespace

LayerGraph quantize_model(const LayerGraph& model) {
  LayerGraph out = model;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& node = out.node(static_cast<int>(i));
    for (auto& [key, p] : node.params) {
      if (!quantizable(node.layer.kind, key) || p.quantized) continue;
      p.quantized = quantize_tensor(p.value);
      p.value = Tensor();
    }
  }
  return out;
}

// ---- binary format -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'L', 'R', 'M'};
constexpr std::size_t kSectionEntryBytes = 4 + 8 + 8;

class Writer {
 public:
  std::vector<std::uint8_t> bytes;

  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  template <typename T>
  void patch(std::size_t at, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[at + i] = static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw FormatError(what_ + " truncated at byte " + std::to_string(pos_) + " (needed " + std::to_string(n) + ")");
    }
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

// Only the attributes a layer kind reads, and only when they differ from the
// defaults; the loader fills in the rest.
nlohmann::json attrs_json(const LayerNode& layer) {
  const LayerAttrs& a = layer.attrs;
  const LayerAttrs d;
  nlohmann::json j = nlohmann::json::object();
  const auto put = [&j](const char* key, const auto& value, const auto& fallback) {
    if (value != fallback) j[key] = value;
  };
  switch (layer.kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d:
      put("stride", a.stride, d.stride);
      put("padding", a.padding, d.padding);
      break;
    case LayerKind::pool2d:
      put("pool_mode", std::string(to_string(a.pool_mode)), std::string(to_string(d.pool_mode)));
      put("window", a.window, d.window);
      put("stride", a.stride, d.stride);
      put("padding", a.padding, d.padding);
      break;
    case LayerKind::batch_norm:
      put("epsilon", a.epsilon, d.epsilon);
      put("momentum", a.momentum, d.momentum);
      break;
    case LayerKind::activation:
      put("activation", std::string(to_string(a.activation)), std::string(to_string(d.activation)));
      break;
    case LayerKind::merge:
      put("merge", std::string(to_string(a.merge)), std::string(to_string(d.merge)));
      break;
    case LayerKind::global_avg_pool:
    case LayerKind::dense:
      break;
  }
  return j;
}

nlohmann::json topology_json(const LayerGraph& model) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& node : model.nodes()) {
    json n = {{"name", node.layer.name}, {"kind", to_string(node.layer.kind)}};
    // A single input from the previous node is implied.
    const int previous = static_cast<int>(nodes.size()) - 1;
    if (node.layer.inputs != std::vector<int>{previous}) n["inputs"] = node.layer.inputs;
    json attrs = attrs_json(node.layer);
    if (!attrs.empty()) n["attrs"] = std::move(attrs);
    // Parameter keys come from the tensor names; only the frozen ones are listed.
    json frozen = json::array();
    for (const auto& [key, p] : node.params)
      if (!p.trainable) frozen.push_back(key);
    if (!frozen.empty()) n["frozen"] = std::move(frozen);
    nodes.push_back(std::move(n));
  }
  return {{"input_shape", model.input_shape()},
          {"output", model.output()},
          {"metadata", model.metadata()},
          {"nodes", nodes}};
}

void write_tensor_record(Writer& w, const std::string& name, const Parameter<float>& p) {
  if (name.size() > 0xFFFF) throw ParameterError("tensor name too long: " + name);
  const Shape& shape = p.shape();
  if (shape.size() > 0xFF) throw ParameterError("tensor rank too large: " + name);
  w.put(static_cast<std::uint16_t>(name.size()));
  w.put_raw(name.data(), name.size());
  w.put(static_cast<std::uint8_t>(p.quantized ? DType::i8 : DType::f32));
  w.put(static_cast<std::uint8_t>(shape.size()));
  for (int d : shape) w.put(static_cast<std::uint32_t>(d));
  if (p.quantized) {
    w.put_f32(p.quantized->qparams.scale);
    w.put(static_cast<std::uint8_t>(p.quantized->qparams.zero_point));
    w.put_raw(p.quantized->data.data(), p.quantized->data.size());
  } else {
    for (float f : p.value.values()) w.put_f32(f);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const LayerGraph& model) {
  const std::string topo = topology_json(model).dump();
  Writer w;
  w.put_raw(kMagic, 4);
  w.put(kModelFileVersion);
  const std::uint16_t sections = 2;
  w.put(sections);
  const std::size_t table = w.bytes.size();
  w.bytes.resize(table + sections * kSectionEntryBytes, 0);

  const std::size_t topo_offset = w.bytes.size();
  w.put_raw(topo.data(), topo.size());
  const std::size_t tens_offset = w.bytes.size();
  const auto names = model.parameter_names(false);
  w.put(static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) write_tensor_record(w, name, model.parameter(name));
  const std::size_t end = w.bytes.size();

  std::size_t at = table;
  for (const auto& [tag, off, len] : {std::tuple{"TOPO", topo_offset, tens_offset - topo_offset},
                                      std::tuple{"TENS", tens_offset, end - tens_offset}}) {
    std::memcpy(w.bytes.data() + at, tag, 4);
    w.patch(at + 4, static_cast<std::uint64_t>(off));
    w.patch(at + 12, static_cast<std::uint64_t>(len));
    at += kSectionEntryBytes;
  }
  return std::move(w.bytes);
}

void serialize_model(const LayerGraph& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

LayerGraph deserialize_model(std::span<const std::uint8_t> bytes) {
  using nlohmann::json;
  Reader header(bytes, "model file");
  const auto magic = header.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
  const auto version = header.get<std::uint16_t>();
  if (version != kModelFileVersion) {
    throw VersionError("unsupported model file version " + std::to_string(version) + " (expected " +
                       std::to_string(kModelFileVersion) + ")");
  }
  const auto count = header.get<std::uint16_t>();
  std::map<std::string, std::span<const std::uint8_t>> sections;
  std::uint64_t end = 8 + 20ull * count;
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto tag = header.take(4);
    const auto off = header.get<std::uint64_t>();
    const auto len = header.get<std::uint64_t>();
    if (off > bytes.size() || len > bytes.size() - off) {
      throw FormatError("section " + std::string(tag.begin(), tag.end()) + " extends past the end of the file");
    }
    sections[std::string(tag.begin(), tag.end())] = bytes.subspan(off, len);
    end = std::max<std::uint64_t>(end, off + len);
  }
  if (end != bytes.size()) throw FormatError("trailing bytes after the last section");
  for (const char* required : {"TOPO", "TENS"}) {
    if (!sections.count(required)) throw FormatError(std::string("model file has no ") + required + " section");
  }

  // Tensors first, so the topology pass can attach them.
  std::map<std::string, Parameter<float>> tensors;
  Reader tr(sections["TENS"], "tensor section");
  const auto n_tensors = tr.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = tr.get<std::uint16_t>();
    const auto name_bytes = tr.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto dtype = tr.get<std::uint8_t>();
    const auto rank = tr.get<std::uint8_t>();
    Shape shape;
    for (int r = 0; r < rank; ++r) {
      const auto d = tr.get<std::uint32_t>();
      if (d == 0 || d > (1u << 28)) throw FormatError("tensor " + name + " has invalid extent " + std::to_string(d));
      shape.push_back(static_cast<int>(d));
    }
    const std::size_t numel = shape_numel(shape);
    Parameter<float> p;
    if (dtype == static_cast<std::uint8_t>(DType::i8)) {
      QParams q;
      q.scale = tr.get_f32();
      q.zero_point = tr.get<std::uint8_t>();
      if (!(q.scale > 0.0f) || !std::isfinite(q.scale)) throw FormatError("tensor " + name + " has an invalid scale");
      const auto payload = tr.take(numel);
      p.quantized = QuantizedTensor{shape, std::vector<std::uint8_t>(payload.begin(), payload.end()), q};
    } else if (dtype == static_cast<std::uint8_t>(DType::f32)) {
      const auto payload = tr.take(numel * 4);
      std::vector<float> values(numel);
      for (std::size_t k = 0; k < numel; ++k) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(payload[k * 4 + b]) << (8 * b);
        values[k] = std::bit_cast<float>(u);
      }
      p.value = Tensor(shape, std::move(values));
    } else {
      throw FormatError("tensor " + name + " has unknown dtype tag " + std::to_string(dtype));
    }
    if (!tensors.emplace(name, std::move(p)).second) throw FormatError("duplicate tensor " + name);
  }
  if (!tr.done()) throw FormatError("trailing bytes in tensor section");

  const auto topo_bytes = sections["TOPO"];
  json topo;
  try {
    topo = json::parse(topo_bytes.begin(), topo_bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed topology: ") + e.what());
  }
  try {
    LayerGraph graph(topo.at("input_shape").get<Shape>());
    for (const auto& jn : topo.at("nodes")) {
      LayerNode layer;
      layer.name = jn.at("name").get<std::string>();
      layer.kind = parse_layer_kind(jn.at("kind").get<std::string>());
      layer.inputs = jn.value("inputs", std::vector<int>{static_cast<int>(graph.size()) - 1});
      const LayerAttrs defaults;
      const json ja = jn.value("attrs", json::object());
      layer.attrs.stride = ja.value("stride", defaults.stride);
      layer.attrs.padding = ja.value("padding", defaults.padding);
      layer.attrs.window = ja.value("window", defaults.window);
      layer.attrs.pool_mode = parse_pool_mode(ja.value("pool_mode", std::string(to_string(defaults.pool_mode))));
      layer.attrs.activation =
          parse_activation_mode(ja.value("activation", std::string(to_string(defaults.activation))));
      layer.attrs.merge = parse_merge_mode(ja.value("merge", std::string(to_string(defaults.merge))));
      layer.attrs.epsilon = ja.value("epsilon", defaults.epsilon);
      layer.attrs.momentum = ja.value("momentum", defaults.momentum);
      std::map<std::string, Tensor> values;
      std::vector<std::pair<std::string, bool>> keys;
      const std::string prefix = layer.name + ".";
      for (auto it = tensors.lower_bound(prefix); it != tensors.end() && it->first.starts_with(prefix); ++it) {
        const std::string key = it->first.substr(prefix.size());
        if (key.find('.') != std::string::npos) continue;
        values[key] = it->second.quantized ? it->second.quantized->dequantize<float>() : it->second.value;
        keys.emplace_back(key, true);
      }
      for (const auto& jk : jn.value("frozen", json::array())) {
        const std::string key = jk.get<std::string>();
        const auto k = std::find_if(keys.begin(), keys.end(), [&](const auto& e) { return e.first == key; });
        if (k == keys.end()) throw FormatError("missing tensor " + prefix + key);
        k->second = false;
      }
      int idx = 0;
      try {
        idx = graph.add(layer, std::move(values));
      } catch (const DimensionError& e) {
        throw FormatError(std::string("inconsistent topology: ") + e.what());
      } catch (const ParameterError& e) {
        throw FormatError(std::string("inconsistent topology: ") + e.what());
      }
      for (const auto& [key, trainable] : keys) {
        Parameter<float>& p = graph.node(idx).params.at(key);
        Parameter<float>& src = tensors.at(layer.name + "." + key);
        p.trainable = trainable;
        if (src.quantized) {
          p.quantized = std::move(src.quantized);
          p.value = Tensor();
        }
      }
    }
    graph.set_output(topo.at("output").get<int>());
    graph.metadata() = topo.at("metadata").get<std::map<std::string, std::string>>();
    if (graph.parameter_names(false).size() != tensors.size()) throw FormatError("unreferenced tensors in model file");
    return graph;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed topology: ") + e.what());
  }
}

LayerGraph load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize_model(bytes);
}

BenchmarkReport benchmark_model(const LayerGraph& model, const SampleSet& samples, int repetitions,
                                std::string label) {
  if (repetitions < 3) throw ParameterError("benchmark needs at least 3 repetitions");
  BenchmarkReport rep;
  rep.label = std::move(label);
  rep.repetitions = repetitions;
  rep.size_bytes = serialize_model(model).size();

  std::vector<const Tensor*> inputs;
  Tensor synthetic;
  if (samples.empty()) {
    Shape s = model.input_shape();
    s.insert(s.begin(), 1);
    synthetic = Tensor(s, 0.5f);
    inputs.push_back(&synthetic);
  } else {
    for (const auto& smp : samples) inputs.push_back(&smp.input);
  }
  forward(model, *inputs.front());  // warmup
  std::vector<double> per_rep;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const Tensor* in : inputs) forward(model, *in);
    const auto t1 = std::chrono::steady_clock::now();
    per_rep.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(inputs.size()));
  }
  double mean = 0.0;
  for (double v : per_rep) mean += v;
  mean /= static_cast<double>(per_rep.size());
  double var = 0.0;
  for (double v : per_rep) var += (v - mean) * (v - mean);
  rep.mean_latency_ms = mean;
  rep.stddev_latency_ms = std::sqrt(var / static_cast<double>(per_rep.size() - 1));
  if (!samples.empty()) rep.metrics = evaluate_metrics(model, samples);
  return rep;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkReport>& reports) {
  out << "model,size_bytes,mean_latency_ms,stddev_latency_ms,accuracy,precision,recall\n";
  const auto flags = out.flags();
  out << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.label << ',' << r.size_bytes << ',' << r.mean_latency_ms << ',' << r.stddev_latency_ms << ','
        << r.metrics.accuracy << ',' << r.metrics.precision << ',' << r.metrics.recall << '\n';
  }
  out.flags(flags);
}

}  // namespace plasmo
