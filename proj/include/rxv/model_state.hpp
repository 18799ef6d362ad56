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
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace rxv {

enum class HeadVariant { kBaselineLinear, kMlp, kClm, kClmLstm };

std::string_view to_string(HeadVariant variant);
HeadVariant parse_head_variant(std::string_view name);

// Report names: BERT, BERT_mlp, CLM, CLM_lstm and the *_bio forms for
// domain-pretrained encoders.
std::string variant_display_name(HeadVariant variant, bool domain_pretrained);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t lstm_hidden = 64;
  double dropout = 0.1;
  HeadVariant head_variant = HeadVariant::kClm;
  std::uint64_t seed = 0;

  void validate() const;
  // Width of the feature vector entering the classification head.
  std::size_t head_input_dim() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelMetadata {
  std::string variant_name;
  bool domain_pretrained = false;
  std::size_t domain_steps = 0;
  std::string vocab_hash;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

// Positions of each parameter inside ModelState::tensors(); -1 when the
// configured head does not use it.
struct ParamLayout {
  struct Layer {
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int ln1_gamma, ln1_beta;
    int w1, b1, w2, b2;
    int ln2_gamma, ln2_beta;
  };
  struct Lstm {
    int wx = -1, wh = -1, b = -1;
  };
  int token = -1, position = -1, segment = -1, emb_gamma = -1, emb_beta = -1;
  std::vector<Layer> layers;
  int mlm_bias = -1;
  int head_hidden_w = -1, head_hidden_b = -1;
  int head_out_w = -1, head_out_b = -1;
  Lstm lstm_fwd, lstm_bwd;
};

using Gradients = std::vector<Eigen::MatrixXd>;

class ModelState {
 public:
  // Random initialization from cfg.seed.
  static ModelState initialize(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  Eigen::MatrixXd& param(int index) { return tensors_[static_cast<std::size_t>(index)].value; }
  const Eigen::MatrixXd& param(int index) const {
    return tensors_[static_cast<std::size_t>(index)].value;
  }
  int index_of(std::string_view name) const;  // -1 when absent

  std::size_t parameter_count() const;
  bool all_finite() const;
  Gradients zero_gradients() const;

  std::uint64_t step = 0;
  ModelMetadata metadata;

 private:
  ModelState(ModelConfig cfg, std::vector<NamedTensor> tensors);
  friend ModelState load_checkpoint(const std::filesystem::path& path);

  ModelConfig config_;
  ParamLayout layout_;
  std::vector<NamedTensor> tensors_;
};

bool identical_parameters(const ModelState& a, const ModelState& b);

// A state with `head` and freshly initialized head and LSTM parameters (from
// `seed`) around the embeddings and encoder layers of `base`. Metadata carries
// over with the variant name updated for the new head.
ModelState with_head(const ModelState& base, HeadVariant head, std::uint64_t seed);

/// Binary checkpoint: magic, JSON header (config, metadata, tensor names and
/// shapes), raw little-endian doubles. Loading throws std::runtime_error on any
/// name or shape mismatch against the declared config.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelState& state, AdamConfig cfg);

  // Applies one bias-corrected update and increments state.step.
  void step(ModelState& state, const Gradients& grads);
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  AdamConfig cfg_;
  std::vector<Eigen::MatrixXd> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace rxv
