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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rxv/encoder.hpp"
#include "rxv/model_state.hpp"
#include "rxv/subword.hpp"

namespace rxv::testing {

inline ModelConfig tiny_config(HeadVariant head, double dropout = 0.0, std::uint64_t seed = 1) {
  ModelConfig c;
  c.vocab_size = 20;
  c.max_len = 12;
  c.hidden_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.lstm_hidden = 4;
  c.dropout = dropout;
  c.head_variant = head;
  c.seed = seed;
  return c;
}

// Random well-formed sequences: [CLS] a.. [SEP] b.. [SEP] then padding.
inline std::vector<TokenizedPair> random_batch(const ModelConfig& cfg, std::size_t n,
                                               std::uint64_t seed, bool pad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(SpecialIds::kCount, static_cast<int>(cfg.vocab_size) - 1);
  std::uniform_int_distribution<int> len(1, static_cast<int>((cfg.max_len - 3) / 2));
  std::vector<TokenizedPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenizedPair t;
    const int a = len(rng), b = len(rng);
    t.ids.push_back(SpecialIds::kCls);
    for (int k = 0; k < a; ++k) t.ids.push_back(tok(rng));
    t.ids.push_back(SpecialIds::kSep);
    t.segments.assign(t.ids.size(), 0);
    for (int k = 0; k < b; ++k) t.ids.push_back(tok(rng));
    t.ids.push_back(SpecialIds::kSep);
    t.segments.resize(t.ids.size(), 1);
    t.mask.assign(t.ids.size(), 1);
    if (pad) {
      while (t.ids.size() < cfg.max_len) {
        t.ids.push_back(SpecialIds::kPad);
        t.segments.push_back(0);
        t.mask.push_back(0);
      }
    }
    t.label = static_cast<int>(rng() & 1u);
    out.push_back(std::move(t));
  }
  return out;
}

struct GradientSample {
  int tensor = 0;
  Eigen::Index row = 0, col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Central differences of `loss` against the analytic gradient at `count`
// uniformly drawn scalar parameters.
template <typename LossFn>
std::vector<GradientSample> check_gradients(ModelState& state, const Gradients& analytic,
                                            LossFn loss, std::size_t count, std::uint64_t seed,
                                            double h = 1e-5) {
  std::vector<std::pair<int, Eigen::Index>> all;
  for (int t = 0; t < static_cast<int>(state.tensors().size()); ++t) {
    for (Eigen::Index k = 0; k < state.param(t).size(); ++k) all.emplace_back(t, k);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<GradientSample> out;
  for (std::size_t s = 0; s < std::min(count, all.size()); ++s) {
    const auto [t, k] = all[s];
    double& w = state.param(t).data()[k];
    const double saved = w;
    w = saved + h;
    const double up = loss();
    w = saved - h;
    const double down = loss();
    w = saved;
    GradientSample g;
    g.tensor = t;
    g.row = k % state.param(t).rows();
    g.col = k / state.param(t).rows();
    g.analytic = analytic[static_cast<std::size_t>(t)].data()[k];
    g.numeric = (up - down) / (2.0 * h);
    g.relative_error = relative_error(g.analytic, g.numeric);
    out.push_back(g);
  }
  return out;
}

}  // namespace rxv::testing
