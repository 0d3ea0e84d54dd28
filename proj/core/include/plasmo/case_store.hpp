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
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plasmo/localizer.hpp"

namespace plasmo {

struct Prediction {
  std::string label;  // "parasitized" or "uninfected"
  double probability = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Review {
  std::string verdict;  // "confirmed" or "overridden"
  std::string note;
  std::string timestamp;

  friend bool operator==(const Review&, const Review&) = default;
};

struct CaseDetection {
  Box box;
  double score = 0.0;

  friend bool operator==(const CaseDetection&, const CaseDetection&) = default;
};

struct CaseRecord {
  std::string id;
  std::string created_at;  // UTC, ISO 8601 with milliseconds
  std::string image_hash;  // SHA-256 hex of the uploaded bytes
  Prediction prediction;
  std::optional<std::vector<CaseDetection>> detections;
  std::optional<int> count;
  std::optional<Review> review;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

std::string case_to_json(const CaseRecord& record);
/// Throws FormatError on malformed input.
CaseRecord case_from_json(std::string_view line);

/// 26-character Crockford base32 id: 48-bit millisecond time then 80 random
/// bits. Ids from one process are strictly increasing.
std::string new_ulid();
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string utc_timestamp();

/// Append-only JSON-lines case log. Every change appends the full record;
/// on open the file is replayed and the last line per id wins. All writes
/// go through one mutex so lines never interleave.
class CaseStore {
 public:
  explicit CaseStore(const std::filesystem::path& directory);

  /// Assigns id and created_at when empty, then persists.
  CaseRecord append(CaseRecord record);
  CaseRecord set_detections(const std::string& id, std::vector<CaseDetection> detections);
  /// Throws NotFoundError for an unknown id, ConflictError if already reviewed,
  /// ParameterError for a verdict other than confirmed/overridden.
  CaseRecord review(const std::string& id, const std::string& verdict, const std::string& note);

  std::optional<CaseRecord> get(const std::string& id) const;
  /// Newest first.
  std::vector<CaseRecord> list(std::size_t limit) const;
  std::size_t size() const;

  const std::filesystem::path& file() const noexcept { return file_; }
  /// Lines skipped during replay because they did not parse.
  std::size_t damaged_lines() const noexcept { return damaged_; }

 private:
  void write_line(const CaseRecord& record);

  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::map<std::string, CaseRecord> cases_;  // ids sort by creation time
  std::size_t damaged_ = 0;
};

}  // namespace plasmo
