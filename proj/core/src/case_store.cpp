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

#include "plasmo/case_store.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <nlohmann/json.hpp>
#include <random>

namespace plasmo {

using nlohmann::json;

std::string case_to_json(const CaseRecord& r) {
  json j{{"id", r.id},
         {"created_at", r.created_at},
         {"image_hash", r.image_hash},
         {"prediction", {{"label", r.prediction.label}, {"probability", r.prediction.probability}}}};
  if (r.detections) {
    json dets = json::array();
    for (const auto& d : *r.detections) {
      dets.push_back({{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}, {"score", d.score}});
    }
    j["detections"] = std::move(dets);
  }
  if (r.count) j["count"] = *r.count;
  if (r.review) {
    j["review"] = {{"verdict", r.review->verdict}, {"note", r.review->note}, {"timestamp", r.review->timestamp}};
  }
  return j.dump();
}

CaseRecord case_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    CaseRecord r;
    r.id = j.at("id").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.image_hash = j.at("image_hash").get<std::string>();
    r.prediction.label = j.at("prediction").at("label").get<std::string>();
    r.prediction.probability = j.at("prediction").at("probability").get<double>();
    if (j.contains("detections")) {
      std::vector<CaseDetection> dets;
      for (const auto& d : j["detections"]) {
        dets.push_back({{d.at("x").get<int>(), d.at("y").get<int>(), d.at("w").get<int>(), d.at("h").get<int>()},
                        d.at("score").get<double>()});
      }
      r.detections = std::move(dets);
    }
    if (j.contains("count")) r.count = j["count"].get<int>();
    if (j.contains("review")) {
      const auto& v = j["review"];
      r.review = Review{v.at("verdict").get<std::string>(), v.value("note", std::string{}),
                        v.value("timestamp", std::string{})};
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed case record: ") + e.what());
  }
}

std::string new_ulid() {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  static std::uint64_t last_ms = 0;
  static std::uint16_t rand_hi = 0;  // top 16 of the 80 random bits
  static std::uint64_t rand_lo = 0;  // low 64

  std::lock_guard lock(mutex);
  auto ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
  if (ms <= last_ms) {
    ms = last_ms;
    if (++rand_lo == 0) ++rand_hi;
  } else {
    last_ms = ms;
    rand_hi = static_cast<std::uint16_t>(rng() & 0x7FFF);  // headroom for increments
    rand_lo = rng();
  }
  // 128 bits: 48 time | 80 random, emitted as 26 five-bit digits (2 pad bits up front).
  std::array<std::uint8_t, 16> bits{};
  for (int i = 0; i < 6; ++i) bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(ms >> (8 * (5 - i)));
  bits[6] = static_cast<std::uint8_t>(rand_hi >> 8);
  bits[7] = static_cast<std::uint8_t>(rand_hi);
  for (int i = 0; i < 8; ++i) bits[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(rand_lo >> (8 * (7 - i)));
  std::string out(26, '0');
  for (int d = 0; d < 26; ++d) {
    const int bit = d * 5 - 2;  // position of this digit's top bit in the 128-bit string
    int v = 0;
    for (int b = 0; b < 5; ++b) {
      const int pos = bit + b;
      v <<= 1;
      if (pos >= 0) v |= (bits[static_cast<std::size_t>(pos / 8)] >> (7 - pos % 8)) & 1;
    }
    out[static_cast<std::size_t>(d)] = kAlphabet[v];
  }
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

CaseStore::CaseStore(const std::filesystem::path& directory) : file_(directory / "cases.jsonl") {
  std::filesystem::create_directories(directory);
  {
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        CaseRecord r = case_from_json(line);
        cases_[r.id] = std::move(r);
      } catch (const FormatError&) {
        ++damaged_;
      }
    }
  }
  out_.open(file_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open case store " + file_.string() + " for appending");
}

void CaseStore::write_line(const CaseRecord& record) {
  out_ << case_to_json(record) << '\n';
  out_.flush();
  if (!out_) throw Error("write to case store " + file_.string() + " failed");
}

CaseRecord CaseStore::append(CaseRecord record) {
  if (record.id.empty()) record.id = new_ulid();
  if (record.created_at.empty()) record.created_at = utc_timestamp();
  if (!(record.prediction.probability >= 0.0 && record.prediction.probability <= 1.0)) {
    throw ParameterError("case probability must be in [0, 1]");
  }
  std::lock_guard lock(mutex_);
  if (cases_.count(record.id)) throw ConflictError("case " + record.id + " already exists");
  write_line(record);
  cases_[record.id] = record;
  return record;
}

CaseRecord CaseStore::set_detections(const std::string& id, std::vector<CaseDetection> detections) {
  std::lock_guard lock(mutex_);
  const auto it = cases_.find(id);
  if (it == cases_.end()) throw NotFoundError("unknown case " + id);
  CaseRecord updated = it->second;
  updated.count = static_cast<int>(detections.size());
  updated.detections = std::move(detections);
  write_line(updated);
  it->second = updated;
  return updated;
}

CaseRecord CaseStore::review(const std::string& id, const std::string& verdict, const std::string& note) {
  if (verdict != "confirmed" && verdict != "overridden") {
    throw ParameterError("verdict must be 'confirmed' or 'overridden'");
  }
  std::lock_guard lock(mutex_);
  const auto it = cases_.find(id);
  if (it == cases_.end()) throw NotFoundError("unknown case " + id);
  if (it->second.review) throw ConflictError("case " + id + " was already reviewed");
  CaseRecord updated = it->second;
  updated.review = Review{verdict, note, utc_timestamp()};
  write_line(updated);
  it->second = updated;
  return updated;
}

std::optional<CaseRecord> CaseStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = cases_.find(id);
  if (it == cases_.end()) return std::nullopt;
  return it->second;
}

std::vector<CaseRecord> CaseStore::list(std::size_t limit) const {
  std::lock_guard lock(mutex_);
  std::vector<CaseRecord> out;
  for (auto it = cases_.rbegin(); it != cases_.rend() && out.size() < limit; ++it) out.push_back(it->second);
  return out;
}

std::size_t CaseStore::size() const {
  std::lock_guard lock(mutex_);
  return cases_.size();
}

}  // namespace plasmo
