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

#include "plasmo/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include <httplib.h>

#include <nlohmann/json.hpp>
#include <span>

#include "plasmo/explainer.hpp"
#include "plasmo/imgproc.hpp"
#include "plasmo/netzoo.hpp"

namespace plasmo {

using nlohmann::json;

std::filesystem::path resolve_store_dir(const std::filesystem::path& fallback) {
  const char* env = std::getenv("PLASMO_STORE_DIR");
  return env && *env ? std::filesystem::path(env) : fallback;
}

namespace {

HttpReply json_reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpReply error_reply(int status, const std::string& code, const std::string& message, json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  return json_reply(status, extra);
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::vector<std::string> conv_layers(const LayerGraph& model) {
  std::vector<std::string> out;
  for (const auto& n : model.nodes()) {
    if (is_conv_family(n.layer.kind)) out.push_back(n.layer.name);
  }
  return out;
}

Prediction predict_image(const LayerGraph& model, const Image& image) {
  const Tensor x = build_input_tensor(image, model_preprocess_config(model));
  const double p = std::clamp(static_cast<double>(forward(model, x)[0]), 0.0, 1.0);
  return {p >= 0.5 ? "parasitized" : "uninfected", p};
}

json case_json(const CaseRecord& r) { return json::parse(case_to_json(r)); }

}  // namespace

InferenceService::InferenceService(LayerGraph model, ServiceConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.localize.validate();
  model_preprocess_config(model_);
  store_ = std::make_unique<CaseStore>(config_.store_dir);
}

InferenceService::~InferenceService() = default;

HttpReply InferenceService::classify(const std::string& image_bytes) {
  if (image_bytes.empty()) return error_reply(400, "missing_image", "no image in request");
  if (image_bytes.size() > config_.max_upload_bytes) return error_reply(413, "payload_too_large", "upload exceeds limit");
  Image image;
  try {
    image = decode_image(as_bytes(image_bytes));
  } catch (const FormatError& e) {
    return error_reply(400, "invalid_image", e.what());
  }
  CaseRecord rec;
  rec.image_hash = sha256_hex(as_bytes(image_bytes));
  rec.prediction = predict_image(model_, image);
  rec = store_->append(std::move(rec));
  return json_reply(200, {{"case_id", rec.id},
                          {"label", rec.prediction.label},
                          {"probability", rec.prediction.probability},
                          {"image_hash", rec.image_hash}});
}

HttpReply InferenceService::localize(const std::string& image_bytes, const std::string& case_id) {
  if (image_bytes.empty()) return error_reply(400, "missing_image", "no image in request");
  if (image_bytes.size() > config_.max_upload_bytes) return error_reply(413, "payload_too_large", "upload exceeds limit");
  if (!case_id.empty() && !store_->get(case_id)) return error_reply(404, "unknown_case", "no case " + case_id);
  Image image;
  try {
    image = decode_image(as_bytes(image_bytes));
  } catch (const FormatError& e) {
    return error_reply(400, "invalid_image", e.what());
  }
  LocalizeResult found;
  try {
    found = detect_cells(image, model_, config_.localize);
  } catch (const DimensionError& e) {
    return error_reply(400, "image_too_small", e.what());
  }
  std::vector<CaseDetection> dets;
  json jd = json::array();
  for (const auto& d : found.detections) {
    dets.push_back({d.box, d.score});
    jd.push_back({{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}, {"score", d.score},
                  {"level", d.level}});
  }
  CaseRecord rec;
  if (case_id.empty()) {
    rec.image_hash = sha256_hex(as_bytes(image_bytes));
    rec.prediction = predict_image(model_, image);
    rec.count = found.count;
    rec.detections = dets;
    rec = store_->append(std::move(rec));
  } else {
    try {
      rec = store_->set_detections(case_id, dets);
    } catch (const NotFoundError& e) {
      return error_reply(404, "unknown_case", e.what());
    }
  }
  return json_reply(200, {{"case_id", rec.id},
                          {"count", found.count},
                          {"detections", jd},
                          {"width", image.width},
                          {"height", image.height}});
}

HttpReply InferenceService::explain(const std::string& image_bytes, const std::string& layer,
                                    const std::string& alpha_text) {
  if (image_bytes.empty()) return error_reply(400, "missing_image", "no image in request");
  if (image_bytes.size() > config_.max_upload_bytes) return error_reply(413, "payload_too_large", "upload exceeds limit");
  const std::vector<std::string> layers = conv_layers(model_);
  const std::string target = layer.empty() ? last_conv_layer(model_) : layer;
  if (std::find(layers.begin(), layers.end(), target) == layers.end()) {
    return error_reply(404, "unknown_layer", "no conv layer named '" + target + "'", {{"available_layers", layers}});
  }
  double alpha = config_.default_alpha;
  if (!alpha_text.empty()) {
    char* end = nullptr;
    alpha = std::strtod(alpha_text.c_str(), &end);
    if (end == alpha_text.c_str() || *end != '\0' || std::isnan(alpha)) {
      return error_reply(400, "invalid_alpha", "alpha must be a number");
    }
    alpha = std::clamp(alpha, 0.0, 1.0);
  }
  Image image;
  try {
    image = decode_image(as_bytes(image_bytes));
  } catch (const FormatError& e) {
    return error_reply(400, "invalid_image", e.what());
  }
  const Tensor x = build_input_tensor(image, model_preprocess_config(model_));
  const Heatmap hm = grad_cam(model_, x, target, ClassSign::positive, image.width, image.height);
  const auto png = encode_png(render_overlay(hm, image, alpha));
  return {200, "image/png", std::string(png.begin(), png.end())};
}

HttpReply InferenceService::review(const std::string& case_id, const std::string& json_body) {
  json body;
  try {
    body = json::parse(json_body);
  } catch (const json::exception&) {
    return error_reply(400, "invalid_json", "review body must be JSON");
  }
  if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string()) {
    return error_reply(400, "invalid_review", "verdict is required");
  }
  const std::string note = body.contains("note") && body["note"].is_string() ? body["note"].get<std::string>() : "";
  try {
    return json_reply(200, case_json(store_->review(case_id, body["verdict"].get<std::string>(), note)));
  } catch (const NotFoundError& e) {
    return error_reply(404, "unknown_case", e.what());
  } catch (const ConflictError& e) {
    json existing = json::object();
    if (auto r = store_->get(case_id)) existing = case_json(*r);
    return error_reply(409, "already_reviewed", e.what(), {{"case", existing}});
  } catch (const ParameterError& e) {
    return error_reply(400, "invalid_verdict", e.what());
  }
}

HttpReply InferenceService::list_cases(const std::string& limit_text) {
  std::size_t limit = 50;
  if (!limit_text.empty()) {
    char* end = nullptr;
    const long v = std::strtol(limit_text.c_str(), &end, 10);
    if (end == limit_text.c_str() || *end != '\0' || v < 0) return error_reply(400, "invalid_limit", "limit must be >= 0");
    limit = static_cast<std::size_t>(v);
  }
  json cases = json::array();
  for (const auto& r : store_->list(limit)) cases.push_back(case_json(r));
  return json_reply(200, {{"cases", cases}});
}

HttpReply InferenceService::get_case(const std::string& case_id) {
  const auto r = store_->get(case_id);
  if (!r) return error_reply(404, "unknown_case", "no case " + case_id);
  return json_reply(200, case_json(*r));
}

HttpReply InferenceService::health() const {
  const auto& meta = model_.metadata();
  const auto arch = meta.find("arch");
  return json_reply(200, {{"status", "ok"},
                          {"arch", arch == meta.end() ? "" : arch->second},
                          {"quantized", model_.quantized()},
                          {"layers", conv_layers(model_)}});
}

// ---- HTTP transport ------------------------------------------------------

struct HttpServer::Impl {
  InferenceService& service;
  httplib::Server server;

  explicit Impl(InferenceService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const HttpReply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::string upload_of(const httplib::Request& req) {
  if (req.is_multipart_form_data()) return req.has_file("image") ? req.get_file_value("image").content : "";
  return req.body;
}

std::string field_of(const httplib::Request& req, const std::string& key) {
  if (req.has_param(key)) return req.get_param_value(key);
  if (req.is_multipart_form_data() && req.has_file(key)) return req.get_file_value(key).content;
  return {};
}

}  // namespace

HttpServer::HttpServer(InferenceService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  srv.set_payload_max_length(svc.config().max_upload_bytes);
  srv.set_read_timeout(60, 0);
  srv.set_write_timeout(60, 0);
  srv.Post("/api/classify", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.classify(upload_of(req)));
  });
  srv.Post("/api/localize", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.localize(upload_of(req), field_of(req, "case_id")));
  });
  srv.Post("/api/explain", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.explain(upload_of(req), field_of(req, "layer"), field_of(req, "alpha")));
  });
  srv.Post(R"(/api/cases/([0-9A-Za-z]+)/review)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.review(req.matches[1], req.body));
  });
  srv.Get("/api/cases", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.list_cases(req.has_param("limit") ? req.get_param_value("limit") : ""));
  });
  srv.Get(R"(/api/cases/([0-9A-Za-z]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_case(req.matches[1]));
  });
  srv.Get("/api/health", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, "internal_error", what));
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 413 ? "payload_too_large" : res.status == 404 ? "not_found" : "http_error";
    send(res, error_reply(res.status, code, httplib::status_message(res.status)));
  });
  if (!svc.config().ui_dir.empty() && std::filesystem::is_directory(svc.config().ui_dir)) {
    srv.set_mount_point("/ui", svc.config().ui_dir.string());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host + " to a free port");
    return bound;
  }
  if (!srv.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace plasmo
