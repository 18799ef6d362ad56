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

#include "rxv/session_log.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "rxv/util.hpp"

namespace rxv {

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t t = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

SessionLog::SessionLog(std::filesystem::path path, WarningSink warn)
    : path_(std::move(path)), warn_(std::move(warn)) {
  if (!warn_) warn_ = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  if (!path_.empty() && std::filesystem::exists(path_)) {
    entries_ = read_jsonl(path_);
    counter_ = entries_.size();
  }
}

std::string SessionLog::next_request_id() {
  std::lock_guard lock(mu_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "req-%06zu", ++counter_);
  return buf;
}

bool SessionLog::append(nlohmann::json entry) {
  std::lock_guard lock(mu_);
  if (!entry.contains("timestamp")) entry["timestamp"] = utc_timestamp();
  bool ok = true;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (out) out << entry.dump() << "\n" << std::flush;
    if (!out) {
      ok = false;
      warn_("session log write to " + path_.string() + " failed");
    }
  }
  entries_.push_back(std::move(entry));
  return ok;
}

bool SessionLog::contains(const std::string& request_id) const { return find(request_id).has_value(); }

std::optional<nlohmann::json> SessionLog::find(const std::string& request_id) const {
  std::lock_guard lock(mu_);
  for (const auto& e : entries_) {
    if (e.value("request_id", std::string()) == request_id) return e;
  }
  return std::nullopt;
}

std::vector<nlohmann::json> SessionLog::recent(std::size_t limit) const {
  std::lock_guard lock(mu_);
  const std::size_t n = std::min(limit, entries_.size());
  return {entries_.end() - static_cast<std::ptrdiff_t>(n), entries_.end()};
}

std::size_t SessionLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace rxv
