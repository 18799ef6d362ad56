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

#include "rxv/service.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "httplib.h"
#include "rxv/channel.hpp"
#include "rxv/training.hpp"
#include "rxv/util.hpp"

namespace rxv {
namespace {

ServiceReply error_reply(int status, const std::string& message, const std::string& field = "") {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

nlohmann::json entities_json(const EntityRecord& rec) {
  return {{"medications", rec.medications}, {"dosages", rec.dosages}, {"usages", rec.usages}};
}

}  // namespace

ValidationRequest ValidationRequest::from_json(const nlohmann::json& j) {
  ValidationRequest r;
  if (j.contains("diagnosis") && j["diagnosis"].is_string()) r.diagnosis = j["diagnosis"];
  if (j.contains("prescription") && j["prescription"].is_string()) r.prescription = j["prescription"];
  if (j.contains("threshold") && !j["threshold"].is_null()) r.threshold = j["threshold"].get<double>();
  return r;
}

ValidationService::ValidationService(ServiceOptions options)
    : options_(std::move(options)), log_(options_.session_log, options_.warn) {
  if (!(options_.threshold >= 0.0 && options_.threshold <= 1.0))
    throw std::invalid_argument("ValidationService: threshold must lie in [0, 1]");
}

ValidationService::~ValidationService() = default;

void ValidationService::load(const std::filesystem::path& checkpoint,
                             const std::filesystem::path& vocab) {
  ModelState state = load_checkpoint(checkpoint);
  Vocabulary v = Vocabulary::load(vocab);
  const std::string bytes = read_file(checkpoint);
  load(std::move(state), std::move(v), hex64(fnv1a64(bytes)), checkpoint.string());
}

void ValidationService::load(ModelState state, Vocabulary vocab, std::string checkpoint_id,
                             std::string checkpoint_path) {
  if (state.metadata.vocab_hash != vocab.hash())
    throw std::invalid_argument("ValidationService: vocabulary " + vocab.hash() +
                                " does not match checkpoint lineage '" +
                                state.metadata.vocab_hash + "'");
  if (ready_.load()) throw std::logic_error("ValidationService: model already loaded");
  state_ = std::make_unique<ModelState>(std::move(state));
  vocab_ = std::make_unique<Vocabulary>(std::move(vocab));
  checkpoint_id_ = std::move(checkpoint_id);
  checkpoint_path_ = std::move(checkpoint_path);
  ready_.store(true);
}

ServiceReply ValidationService::health() const {
  nlohmann::json body = {{"ready", ready()}};
  if (ready()) {
    body["checkpoint_id"] = checkpoint_id_;
    body["checkpoint_path"] = checkpoint_path_;
    body["vocab_hash"] = vocab_->hash();
    body["variant"] = state_->metadata.variant_name;
    body["domain_pretrained"] = state_->metadata.domain_pretrained;
  }
  body["threshold"] = options_.threshold;
  body["log_entries"] = log_.size();
  return {200, body};
}

ServiceReply ValidationService::score(const nlohmann::json& request,
                                      const std::string& correction_of) {
  if (!request.is_object()) return error_reply(400, "request body must be a JSON object");
  ValidationRequest req;
  try {
    req = ValidationRequest::from_json(request);
  } catch (const std::exception&) {
    return error_reply(400, "threshold must be a number", "threshold");
  }
  const AbbreviationTable& abbreviations =
      options_.abbreviations ? *options_.abbreviations : AbbreviationTable::defaults();
  const DrugLexicon& drugs = options_.drugs ? *options_.drugs : DrugLexicon::defaults();
  const std::string diagnosis = normalize_prescription(req.diagnosis, abbreviations, true);
  const std::string prescription = normalize_prescription(req.prescription, abbreviations, true);
  if (diagnosis.empty()) return error_reply(400, "diagnosis is empty", "diagnosis");
  if (prescription.empty()) return error_reply(400, "prescription is empty", "prescription");
  const double threshold = req.threshold.value_or(options_.threshold);
  if (!(threshold >= 0.0 && threshold <= 1.0) || std::isnan(threshold))
    return error_reply(400, "threshold must lie in [0, 1]", "threshold");
  if (!ready()) return error_reply(503, "model not loaded");

  LabeledPair pair;
  pair.prescription = prescription;
  pair.context = diagnosis;
  const auto pred = predict(std::span(&pair, 1), *state_, *vocab_, threshold, 1).front();

  nlohmann::json body;
  body["request_id"] = log_.next_request_id();
  body["score"] = pred.score;
  body["valid"] = pred.decision == 1;
  body["threshold"] = threshold;
  body["entities"] = entities_json(extract_entities(prescription, drugs));
  body["model"] = {{"variant", state_->metadata.variant_name},
                   {"checkpoint_id", checkpoint_id_},
                   {"vocab_hash", vocab_->hash()},
                   {"domain_pretrained", state_->metadata.domain_pretrained}};
  body["request"] = {{"diagnosis", diagnosis}, {"prescription", prescription}};
  body["correction_of"] = correction_of.empty() ? nlohmann::json() : nlohmann::json(correction_of);

  nlohmann::json entry = {{"request_id", body["request_id"]},
                          {"kind", correction_of.empty() ? "validation" : "correction"},
                          {"raw", {{"diagnosis", req.diagnosis}, {"prescription", req.prescription}}},
                          {"request", body["request"]},
                          {"score", pred.score},
                          {"valid", body["valid"]},
                          {"threshold", threshold},
                          {"correction_of", body["correction_of"]}};
  if (!log_.append(std::move(entry))) {
    body["warnings"] = {"session log write failed"};
  }
  return {200, body};
}

ServiceReply ValidationService::validate(const nlohmann::json& request) {
  return score(request, "");
}

ServiceReply ValidationService::correction(const nlohmann::json& request) {
  if (!request.is_object()) return error_reply(400, "request body must be a JSON object");
  const auto it = request.find("correction_of");
  if (it == request.end() || !it->is_string() || it->get<std::string>().empty())
    return error_reply(400, "correction_of is empty", "correction_of");
  const std::string original = *it;
  if (!log_.contains(original))
    return error_reply(404, "unknown request id " + original, "correction_of");
  return score(request, original);
}

ServiceReply ValidationService::history(std::optional<std::string> limit) const {
  std::size_t n = 20;
  if (limit) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(*limit, &used);
      if (used != limit->size() || v < 0) throw std::invalid_argument("limit");
      n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      return error_reply(400, "limit must be a non-negative integer", "limit");
    }
  }
  return {200, {{"items", log_.recent(n)}}};
}

HttpServer::HttpServer(ValidationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  const auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  const auto parse = [](const httplib::Request& req, nlohmann::json& out) {
    out = nlohmann::json::parse(req.body, nullptr, false);
    return !out.is_discarded();
  };
  server_->Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, service_.health());
  });
  server_->Post("/v1/validate",
                [this, send, parse](const httplib::Request& req, httplib::Response& res) {
                  nlohmann::json body;
                  if (!parse(req, body)) return send(res, error_reply(400, "malformed JSON body"));
                  send(res, service_.validate(body));
                });
  server_->Post("/v1/correction",
                [this, send, parse](const httplib::Request& req, httplib::Response& res) {
                  nlohmann::json body;
                  if (!parse(req, body)) return send(res, error_reply(400, "malformed JSON body"));
                  send(res, service_.correction(body));
                });
  server_->Get("/v1/history", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> limit;
    if (req.has_param("limit")) limit = req.get_param_value("limit");
    send(res, service_.history(limit));
  });
  server_->set_exception_handler(
      [send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          msg = e.what();
        }
        send(res, error_reply(500, msg));
      });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) return -1;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace rxv
