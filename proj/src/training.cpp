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

#include "rxv/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (max_epochs == 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  if (patience == 0) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("TrainConfig: threshold must lie in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"max_epochs", max_epochs}, {"patience", patience},
          {"threshold", threshold},   {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.threshold = j.value("threshold", c.threshold);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"train_accuracy", e.train_accuracy},
                           {"validation_loss", e.validation_loss},
                           {"validation_accuracy", e.validation_accuracy}});
  }
  nlohmann::json j = {{"epochs", epochs_json},
                      {"best_epoch", best_epoch},
                      {"checkpoint", checkpoint},
                      {"diverged", diverged},
                      {"diagnostic", diagnostic},
                      {"config", config.to_json()},
                      {"optimizer",
                       {{"name", "adam"},
                        {"learning_rate", optimizer.learning_rate},
                        {"beta1", optimizer.beta1},
                        {"beta2", optimizer.beta2},
                        {"epsilon", optimizer.epsilon}}}};
  j["best_validation_loss"] =
      std::isfinite(best_validation_loss) ? nlohmann::json(best_validation_loss) : nlohmann::json();
  return j;
}

std::string TrainReport::render_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-11s %-10s %-11s %-10s\n", "epoch", "train_loss",
                "train_acc", "valid_loss", "valid_acc");
  out << line;
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%-6zu %-11.5f %-10.4f %-11.5f %-10.4f%s\n", e.epoch,
                  e.train_loss, e.train_accuracy, e.validation_loss, e.validation_accuracy,
                  e.epoch == best_epoch ? " *" : "");
    out << line;
  }
  if (diverged) out << "diverged: " << diagnostic << "\n";
  return out.str();
}

bool EarlyStopping::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::vector<TokenizedPair> encode_pairs(std::span<const LabeledPair> pairs, const Vocabulary& vocab,
                                        std::size_t max_len) {
  std::vector<TokenizedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    TokenizedPair t = trim_padding(encode_pair(p.prescription, p.context, vocab, max_len));
    t.label = p.label;
    out.push_back(std::move(t));
  }
  return out;
}

EvalResult evaluate_loss(std::span<const TokenizedPair> data, const ModelState& state,
                         double threshold) {
  EvalResult r;
  if (data.empty()) return r;
  const LossResult lr = bce_loss(data, state, Mode::kInfer, 0, nullptr);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int decision = lr.scores[i] >= threshold ? 1 : 0;
    if (decision == data[i].label) ++correct;
  }
  r.loss = lr.loss;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

double train_step(std::span<const TokenizedPair> batch, ModelState& state,
                  AdamOptimizer& optimizer, std::uint64_t seed) {
  Gradients grads = state.zero_gradients();
  const LossResult lr = bce_loss(batch, state, Mode::kTrain, seed, &grads);
  if (!std::isfinite(lr.loss)) throw NonFiniteError("training loss is not finite");
  for (const auto& g : grads) {
    if (!g.allFinite()) throw NonFiniteError("gradient is not finite");
  }
  optimizer.step(state, grads);
  return lr.loss;
}

namespace {

void require_both_labels(std::span<const LabeledPair> pairs, const char* name) {
  bool pos = false, neg = false;
  for (const auto& p : pairs) (p.label == 1 ? pos : neg) = true;
  if (!pos || !neg)
    throw std::invalid_argument(std::string("train: ") + name + " split must contain both labels");
}

}  // namespace

TrainResult train(const DatasetSplit& split, const TrainConfig& cfg, const ModelConfig& mcfg,
                  const Vocabulary& vocab, const std::optional<ModelState>& init) {
  cfg.validate();
  mcfg.validate();
  require_both_labels(split.train, "train");
  require_both_labels(split.validation, "validation");
  if (mcfg.vocab_size != vocab.size())
    throw std::invalid_argument("train: model vocab_size does not match the vocabulary");

  ModelState state = init ? *init : ModelState::initialize(mcfg);
  if (init && !(init->config() == mcfg))
    throw std::invalid_argument("train: initial state config does not match the model config");
  if (init && !init->metadata.vocab_hash.empty() && init->metadata.vocab_hash != vocab.hash())
    throw std::invalid_argument("train: initial state was built with a different vocabulary");
  state.metadata.vocab_hash = vocab.hash();

  const auto train_data = encode_pairs(split.train, vocab, mcfg.max_len);
  const auto valid_data = encode_pairs(split.validation, vocab, mcfg.max_len);

  TrainResult result{state, {}};
  TrainReport& report = result.report;
  report.config = cfg;
  report.optimizer = AdamConfig{cfg.learning_rate};

  AdamOptimizer optimizer(state, report.optimizer);
  EarlyStopping stopper(cfg.patience);
  Rng rng(mix_seed(cfg.seed, 0x747261696e));
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TokenizedPair> batch;
  std::uint64_t step_seed = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    ModelState last_finite = state;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        batch.clear();
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        for (std::size_t k = start; k < end; ++k) batch.push_back(train_data[order[k]]);
        last_finite = state;
        train_step(batch, state, optimizer, mix_seed(cfg.seed, ++step_seed));
        if (!state.all_finite()) throw NonFiniteError("parameters became non-finite");
      }
    } catch (const NonFiniteError& e) {
      report.diverged = true;
      report.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      if (report.best_epoch == 0) {
        // Nothing validated yet: fall back to the last finite parameters.
        result.state = last_finite;
      }
      return result;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    try {
      const EvalResult tr = evaluate_loss(train_data, state, cfg.threshold);
      const EvalResult va = evaluate_loss(valid_data, state, cfg.threshold);
      rec.train_loss = tr.loss;
      rec.train_accuracy = tr.accuracy;
      rec.validation_loss = va.loss;
      rec.validation_accuracy = va.accuracy;
    } catch (const NonFiniteError& e) {
      report.diverged = true;
      report.diagnostic = "epoch " + std::to_string(epoch) + " evaluation: " + e.what();
      if (report.best_epoch == 0) result.state = last_finite;
      return result;
    }
    if (!std::isfinite(rec.validation_loss) || !std::isfinite(rec.train_loss)) {
      report.diverged = true;
      report.diagnostic = "epoch " + std::to_string(epoch) + ": loss is not finite";
      if (report.best_epoch == 0) result.state = last_finite;
      return result;
    }
    report.epochs.push_back(rec);
    if (stopper.observe(rec.validation_loss)) {
      report.best_epoch = epoch;
      report.best_validation_loss = rec.validation_loss;
      result.state = state;
    }
    if (stopper.should_stop()) break;
  }
  return result;
}

std::vector<Prediction> predict(std::span<const LabeledPair> pairs, const ModelState& state,
                                const Vocabulary& vocab, double threshold,
                                std::size_t batch_size) {
  if (state.metadata.vocab_hash != vocab.hash())
    throw std::invalid_argument("predict: vocabulary hash " + vocab.hash() +
                                " does not match checkpoint lineage '" +
                                state.metadata.vocab_hash + "'");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("predict: threshold must lie in [0, 1]");
  if (batch_size == 0) throw std::invalid_argument("predict: batch_size must be >= 1");
  const auto data = encode_pairs(pairs, vocab, state.config().max_len);
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    const auto fo = forward(std::span(data).subspan(start, end - start), state, Mode::kInfer);
    for (double s : fo.scores) out.push_back({s, s >= threshold ? 1 : 0});
  }
  return out;
}

}  // namespace rxv
