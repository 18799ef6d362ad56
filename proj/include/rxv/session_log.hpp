// Copyright 2026 The rxv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
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
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace rxv {

/// Append-only JSONL record of validations and corrections. Entries carry
/// "request_id", "timestamp" and, for corrections, "correction_of". Appends
/// are serialized; an existing file is reloaded on open so ids continue
/// across restarts.
class SessionLog {
 public:
  using WarningSink = std::function<void(const std::string&)>;

  // An empty path keeps the log in memory only.
  explicit SessionLog(std::filesystem::path path = {}, WarningSink warn = {});

  std::string next_request_id();
  // Stamps and stores `entry`; returns false (after emitting a warning) when
  // the file write failed. The entry stays readable in memory either way.
  bool append(nlohmann::json entry);
  bool contains(const std::string& request_id) const;
  std::optional<nlohmann::json> find(const std::string& request_id) const;
  // The newest `limit` entries in chronological order.
  std::vector<nlohmann::json> recent(std::size_t limit) const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  WarningSink warn_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> entries_;
  std::size_t counter_ = 0;
};

std::string utc_timestamp();

}  // namespace rxv
