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

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "plasmo/case_store.hpp"
#include "plasmo/graph.hpp"
#include "plasmo/localizer.hpp"

namespace plasmo {

inline constexpr int kDefaultPort = 8750;
inline constexpr std::size_t kDefaultUploadLimit = 10u * 1024u * 1024u;

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = kDefaultPort;
  std::size_t max_upload_bytes = kDefaultUploadLimit;
  std::filesystem::path store_dir = "cases";
  std::filesystem::path ui_dir;  // served under /ui/ when it exists
  LocalizeConfig localize;
  double default_alpha = 0.5;
};

/// Store directory: $PLASMO_STORE_DIR when set, else `fallback`.
std::filesystem::path resolve_store_dir(const std::filesystem::path& fallback);

/// A transport-free reply, so handlers can be exercised without sockets.
struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Request handlers over one read-only model and one case store.
class InferenceService {
 public:
  InferenceService(LayerGraph model, ServiceConfig config);
  ~InferenceService();

  HttpReply classify(const std::string& image_bytes);
  HttpReply localize(const std::string& image_bytes, const std::string& case_id = {});
  /// Empty layer selects the last conv layer; alpha is clamped to [0, 1].
  HttpReply explain(const std::string& image_bytes, const std::string& layer, const std::string& alpha);
  HttpReply review(const std::string& case_id, const std::string& json_body);
  HttpReply list_cases(const std::string& limit);
  HttpReply get_case(const std::string& case_id);
  HttpReply health() const;

  const LayerGraph& model() const noexcept { return model_; }
  CaseStore& store() noexcept { return *store_; }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  LayerGraph model_;
  ServiceConfig config_;
  std::unique_ptr<CaseStore> store_;
};

/// HTTP/1.1 front end. Routes:
///   POST /api/classify, /api/localize, /api/explain  (multipart field "image")
///   GET  /api/cases?limit=N, /api/cases/{id}, /api/health
///   POST /api/cases/{id}/review                      (JSON {verdict, note})
class HttpServer {
 public:
  explicit HttpServer(InferenceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace plasmo
