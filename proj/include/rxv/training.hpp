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
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rxv/corpus.hpp"
#include "rxv/encoder.hpp"
#include "rxv/model_state.hpp"
#include "rxv/pairgen.hpp"
#include "rxv/subword.hpp"

namespace rxv {

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;  // epochs without validation improvement before stopping
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch completed
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::string checkpoint;
  bool diverged = false;
  std::string diagnostic;
  TrainConfig config;
  AdamConfig optimizer;

  nlohmann::json to_json() const;
  std::string render_table() const;
};

/// Tracks the best validation loss and decides when to stop.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when `loss` is a new best.
  bool observe(double loss);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

std::vector<TokenizedPair> encode_pairs(std::span<const LabeledPair> pairs, const Vocabulary& vocab,
                                        std::size_t max_len);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate_loss(std::span<const TokenizedPair> data, const ModelState& state,
                         double threshold);

// One Adam update on the mean BCE of `batch`; returns the pre-update loss.
double train_step(std::span<const TokenizedPair> batch, ModelState& state,
                  AdamOptimizer& optimizer, std::uint64_t seed);

struct TrainResult {
  ModelState state;
  TrainReport report;
};

/// Fine-tunes a classifier on split.train with early stopping on
/// split.validation, restoring the best-validation state before returning.
/// When `init` is provided its encoder weights seed the run and its config
/// must agree with `mcfg` on shapes. A non-finite loss stops training and
/// returns the last finite state with report.diverged set.
/// Throws std::invalid_argument when train or validation lacks a label.
TrainResult train(const DatasetSplit& split, const TrainConfig& cfg, const ModelConfig& mcfg,
                  const Vocabulary& vocab, const std::optional<ModelState>& init = std::nullopt);

struct Prediction {
  double score = 0.0;
  int decision = 0;
};

/// decision = 1 iff score >= threshold. Results do not depend on batch_size.
/// Throws std::invalid_argument when the vocabulary hash differs from the one
/// recorded in the state.
std::vector<Prediction> predict(std::span<const LabeledPair> pairs, const ModelState& state,
                                const Vocabulary& vocab, double threshold,
                                std::size_t batch_size = 32);

}  // namespace rxv
