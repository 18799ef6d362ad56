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

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "json.hpp"
#include "rxv/corpus.hpp"
#include "rxv/model_state.hpp"
#include "rxv/session_log.hpp"
#include "rxv/subword.hpp"

namespace httplib {
class Server;
}

namespace rxv {

struct ServiceOptions {
  double threshold = 0.5;
  std::filesystem::path session_log;  // empty: in-memory history only
  const AbbreviationTable* abbreviations = nullptr;  // defaults when null
  const DrugLexicon* drugs = nullptr;                // defaults when null
  SessionLog::WarningSink warn;
};

struct ServiceReply {
  int status = 200;
  nlohmann::json body;
};

struct ValidationRequest {
  std::string diagnosis;
  std::string prescription;
  std::optional<double> threshold;
  static ValidationRequest from_json(const nlohmann::json& j);
};

/// Scores (diagnosis, prescription) pairs with one frozen checkpoint. All
/// handlers are safe to call concurrently once load() has returned.
class ValidationService {
 public:
  explicit ValidationService(ServiceOptions options = {});
  ~ValidationService();

  // Throws on unreadable files or a vocabulary from another lineage.
  void load(const std::filesystem::path& checkpoint, const std::filesystem::path& vocab);
  void load(ModelState state, Vocabulary vocab, std::string checkpoint_id = "in-memory",
            std::string checkpoint_path = "");
  bool ready() const { return ready_.load(); }

  ServiceReply health() const;
  ServiceReply validate(const nlohmann::json& request);
  ServiceReply correction(const nlohmann::json& request);
  ServiceReply history(std::optional<std::string> limit) const;

  SessionLog& log() { return log_; }

 private:
  ServiceReply score(const nlohmann::json& request, const std::string& correction_of);

  ServiceOptions options_;
  SessionLog log_;
  std::atomic<bool> ready_{false};
  std::unique_ptr<ModelState> state_;
  std::unique_ptr<Vocabulary> vocab_;
  std::string checkpoint_id_;
  std::string checkpoint_path_;
};

/// HTTP front end: POST /v1/validate, GET /v1/health, POST /v1/correction,
/// GET /v1/history?limit=N.
class HttpServer {
 public:
  explicit HttpServer(ValidationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port, or -1 on failure.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  ValidationService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace rxv
