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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rxv/model_state.hpp"
#include "rxv/subword.hpp"

namespace rxv {

enum class Mode { kTrain, kInfer };  // dropout is active only in kTrain

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForwardOutput {
  std::vector<double> logits;
  std::vector<double> scores;                  // logistic(logit), one per item
  std::vector<Eigen::MatrixXd> token_states;   // per item: seq x hidden_dim
};

/// Runs the encoder stack and the configured head over each sequence.
/// Padding (mask 0) is excluded from attention as keys. Throws
/// std::out_of_range for an id >= vocab_size or an over-long sequence and
/// NonFiniteError naming the layer when an activation stops being finite.
ForwardOutput forward(std::span<const TokenizedPair> batch, const ModelState& state, Mode mode,
                      std::uint64_t seed = 0);

struct LossResult {
  double loss = 0.0;  // mean binary cross-entropy
  std::vector<double> scores;
};

// Mean BCE over the batch; when grads is non-null the mean gradient is added
// into it.
LossResult bce_loss(std::span<const TokenizedPair> batch, const ModelState& state, Mode mode,
                    std::uint64_t seed, Gradients* grads);

// Positions the pooling heads read: real tokens other than [CLS] and [SEP].
std::vector<int> pooled_positions(const TokenizedPair& pair);

struct MlmResult {
  double loss = 0.0;  // mean cross-entropy over masked positions, 0 if none
  std::size_t masked = 0;
};

// Masks each real non-special position with probability mask_rate (seeded)
// and scores recovery of the original ids through the tied token embedding.
MlmResult mlm_loss(std::span<const TokenizedPair> batch, const ModelState& state,
                   double mask_rate, std::uint64_t seed, Mode mode, Gradients* grads);

struct MlmStepResult {
  double loss = 0.0;
  std::size_t masked = 0;
  bool updated = false;
};

/// One masked-language-model update. A batch with nothing masked returns loss
/// 0 and leaves the state untouched. Throws std::invalid_argument unless
/// 0 < mask_rate < 1.
MlmStepResult mlm_pretrain_step(std::span<const TokenizedPair> batch, ModelState& state,
                                AdamOptimizer& optimizer, double mask_rate, std::uint64_t seed);

struct DomainOptions {
  std::size_t batch_size = 16;
  double mask_rate = 0.15;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// A text holding a tab is encoded as a (first, second) pair; otherwise it is a
// single span followed by an empty second span.
std::vector<TokenizedPair> encode_domain_corpus(std::span<const std::string> texts,
                                                const Vocabulary& vocab, std::size_t max_len);

/// Continues masked-language-model training of `base` on in-domain text for
/// `steps` updates and tags the result as domain-pretrained. steps == 0
/// returns base unchanged. Throws std::invalid_argument for an empty corpus
/// with steps > 0.
ModelState domain_variant(const ModelState& base, std::span<const std::string> domain_corpus,
                          std::size_t steps, const Vocabulary& vocab,
                          const DomainOptions& options = {});

// Introspection of one inference pass, for invariant checks.
struct EncoderTrace {
  std::vector<std::vector<Eigen::MatrixXd>> attention;  // [layer][head]: seq x seq
  std::vector<Eigen::MatrixXd> normalized;              // every layer norm, before affine
  Eigen::MatrixXd head_features;                        // 1 x head_input_dim
};
EncoderTrace trace_encoder(const TokenizedPair& pair, const ModelState& state);

}  // namespace rxv
