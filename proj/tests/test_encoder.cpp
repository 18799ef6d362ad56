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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <cstring>
#include <unistd.h>

#include "rxv/encoder.hpp"
#include "rxv/model_state.hpp"
#include "rxv/util.hpp"
#include "support.hpp"

namespace rxv {
namespace {

using testing::random_batch;
using testing::tiny_config;

const HeadVariant kHeads[] = {HeadVariant::kBaselineLinear, HeadVariant::kMlp, HeadVariant::kClm,
                              HeadVariant::kClmLstm};

class PerHead : public ::testing::TestWithParam<HeadVariant> {};

TEST_P(PerHead, BceGradientsMatchFiniteDifferences) {
  for (double dropout : {0.0, 0.2}) {
    ModelState state = ModelState::initialize(tiny_config(GetParam(), dropout, 3));
    // Move the head away from its symmetric start so every path carries signal.
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (auto& t : state.tensors()) {
      for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] += noise(rng) * 0.3;
    }
    const auto batch = random_batch(state.config(), 3, 5);
    const Mode mode = dropout > 0 ? Mode::kTrain : Mode::kInfer;
    Gradients grads = state.zero_gradients();
    bce_loss(batch, state, mode, 99, &grads);
    const auto loss = [&] { return bce_loss(batch, state, mode, 99, nullptr).loss; };

    auto samples = testing::check_gradients(state, grads, loss, 80, 7);
    std::size_t nonzero = 0;
    for (const auto& s : samples) {
      EXPECT_LE(s.relative_error, 1e-3) << state.tensors()[s.tensor].name << "(" << s.row << ","
                                        << s.col << ") analytic " << s.analytic << " numeric " << s.numeric;
      nonzero += std::abs(s.analytic) > 1e-7;
    }
    EXPECT_GE(nonzero, 20u);

    // Also every tensor at one coordinate with a non-zero analytic gradient.
    for (int t = 0; t < static_cast<int>(state.tensors().size()); ++t) {
      const auto& g = grads[static_cast<std::size_t>(t)];
      Eigen::Index best = 0;
      g.reshaped().cwiseAbs().maxCoeff(&best);
      double& w = state.param(t).data()[best];
      const double saved = w;
      w = saved + 1e-5;
      const double up = loss();
      w = saved - 1e-5;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / 2e-5;
      EXPECT_LE(testing::relative_error(g.data()[best], numeric), 1e-3) << state.tensors()[t].name;
    }
  }
}

TEST_P(PerHead, MlmGradientsMatchFiniteDifferences) {
  ModelState state = ModelState::initialize(tiny_config(GetParam(), 0.0, 4));
  const auto batch = random_batch(state.config(), 3, 8);
  Gradients grads = state.zero_gradients();
  const auto r = mlm_loss(batch, state, 0.4, 5, Mode::kInfer, &grads);
  ASSERT_GT(r.masked, 0u);
  const auto loss = [&] { return mlm_loss(batch, state, 0.4, 5, Mode::kInfer, nullptr).loss; };
  for (const auto& s : testing::check_gradients(state, grads, loss, 60, 9)) {
    EXPECT_LE(s.relative_error, 1e-3) << state.tensors()[s.tensor].name;
  }
}

TEST_P(PerHead, ScoresInOpenIntervalAndShapes) {
  const ModelState state = ModelState::initialize(tiny_config(GetParam()));
  const auto batch = random_batch(state.config(), 5, 2);
  const auto out = forward(batch, state, Mode::kInfer);
  ASSERT_EQ(out.scores.size(), 5u);
  ASSERT_EQ(out.token_states.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_GT(out.scores[i], 0.0);
    EXPECT_LT(out.scores[i], 1.0);
    EXPECT_EQ(out.token_states[i].rows(), static_cast<Eigen::Index>(batch[i].ids.size()));
    EXPECT_EQ(out.token_states[i].cols(), 8);
  }
}

TEST_P(PerHead, ZeroHeadGivesOneHalf) {
  ModelState state = ModelState::initialize(tiny_config(GetParam()));
  state.param(state.layout().head_out_w).setZero();
  state.param(state.layout().head_out_b).setZero();
  for (double s : forward(random_batch(state.config(), 6, 4), state, Mode::kInfer).scores) {
    EXPECT_EQ(s, 0.5);
  }
}

TEST_P(PerHead, PaddingInvariance) {
  const ModelState state = ModelState::initialize(tiny_config(GetParam()));
  const auto padded = random_batch(state.config(), 8, 6, true);
  std::vector<TokenizedPair> trimmed;
  for (const auto& p : padded) trimmed.push_back(trim_padding(p));
  const auto a = forward(padded, state, Mode::kInfer).scores;
  const auto b = forward(trimmed, state, Mode::kInfer).scores;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST_P(PerHead, HeadArity) {
  const auto cfg = tiny_config(GetParam());
  const ModelState state = ModelState::initialize(cfg);
  const auto trace = trace_encoder(random_batch(cfg, 1, 3).front(), state);
  const Eigen::Index d = 8, h = 4;
  Eigen::Index expected = d;
  if (GetParam() == HeadVariant::kClm) expected = 3 * d;
  if (GetParam() == HeadVariant::kClmLstm) expected = d + 4 * h;
  EXPECT_EQ(trace.head_features.cols(), expected);
  EXPECT_EQ(static_cast<Eigen::Index>(cfg.head_input_dim()), expected);
}

INSTANTIATE_TEST_SUITE_P(AllHeads, PerHead, ::testing::ValuesIn(kHeads),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Encoder, AttentionRowsAndMaskedKeys) {
  auto cfg = tiny_config(HeadVariant::kClm);
  cfg.num_layers = 2;
  const ModelState state = ModelState::initialize(cfg);
  for (const auto& pair : random_batch(cfg, 6, 11)) {
    const auto trace = trace_encoder(pair, state);
    ASSERT_EQ(trace.attention.size(), 2u);
    for (const auto& layer : trace.attention) {
      ASSERT_EQ(layer.size(), 2u);
      for (const auto& p : layer) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
          for (Eigen::Index c = 0; c < p.cols(); ++c) {
            if (pair.mask[static_cast<std::size_t>(c)] == 0) EXPECT_EQ(p(r, c), 0.0);
          }
        }
      }
    }
  }
}

TEST(Encoder, LayerNormStatistics) {
  const ModelState state = ModelState::initialize(tiny_config(HeadVariant::kClm));
  const auto trace = trace_encoder(random_batch(state.config(), 1, 12).front(), state);
  ASSERT_EQ(trace.normalized.size(), 3u);  // embedding + two per layer
  for (const auto& x : trace.normalized) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mean = x.row(r).mean();
      const double var = (x.row(r).array() - mean).square().mean();
      EXPECT_LE(std::abs(mean), 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
  }
}

TEST(Encoder, InputValidation) {
  const ModelState state = ModelState::initialize(tiny_config(HeadVariant::kClm));
  auto batch = random_batch(state.config(), 1, 1);
  batch[0].ids[1] = 20;
  EXPECT_THROW(forward(batch, state, Mode::kInfer), std::out_of_range);
  batch = random_batch(state.config(), 1, 1);
  batch[0].ids.push_back(SpecialIds::kPad);
  batch[0].segments.push_back(0);
  batch[0].mask.push_back(0);
  EXPECT_THROW(forward(batch, state, Mode::kInfer), std::out_of_range);
}

TEST(Encoder, NonFiniteActivationNamesLayer) {
  ModelState state = ModelState::initialize(tiny_config(HeadVariant::kClm));
  state.param(state.layout().layers[0].w1)(0, 0) = std::numeric_limits<double>::infinity();
  try {
    forward(random_batch(state.config(), 1, 1), state, Mode::kInfer);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder layer 0"), std::string::npos) << e.what();
  }
}

TEST(Encoder, DropoutOnlyInTraining) {
  const ModelState state = ModelState::initialize(tiny_config(HeadVariant::kClm, 0.3));
  const auto batch = random_batch(state.config(), 4, 2);
  EXPECT_EQ(forward(batch, state, Mode::kInfer, 1).scores, forward(batch, state, Mode::kInfer, 2).scores);
  EXPECT_NE(forward(batch, state, Mode::kTrain, 1).scores, forward(batch, state, Mode::kTrain, 2).scores);
  EXPECT_EQ(forward(batch, state, Mode::kTrain, 1).scores, forward(batch, state, Mode::kTrain, 1).scores);
}

TEST(ModelConfig, ValidationAndJson) {
  auto c = tiny_config(HeadVariant::kClmLstm);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config(HeadVariant::kClm);
  c.num_layers = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_head_variant("baseline"), HeadVariant::kBaselineLinear);
  EXPECT_THROW(parse_head_variant("transformer"), std::invalid_argument);
}

TEST(ModelState, InitializationIsDeterministicAndFinite) {
  const auto a = ModelState::initialize(tiny_config(HeadVariant::kClmLstm, 0.1, 5));
  const auto b = ModelState::initialize(tiny_config(HeadVariant::kClmLstm, 0.1, 5));
  const auto c = ModelState::initialize(tiny_config(HeadVariant::kClmLstm, 0.1, 6));
  EXPECT_TRUE(identical_parameters(a, b));
  EXPECT_FALSE(identical_parameters(a, c));
  EXPECT_TRUE(a.all_finite());
  EXPECT_EQ(a.index_of("embed.token"), a.layout().token);
  EXPECT_EQ(a.index_of("missing"), -1);
  EXPECT_EQ(ModelState::initialize(tiny_config(HeadVariant::kBaselineLinear)).layout().head_hidden_w, -1);
}

TEST(ModelState, TrainingStepsAreDeterministic) {
  const auto cfg = tiny_config(HeadVariant::kClm, 0.1, 2);
  const auto batch = random_batch(cfg, 4, 3);
  auto run = [&] {
    ModelState s = ModelState::initialize(cfg);
    AdamOptimizer opt(s, AdamConfig{});
    for (int step = 0; step < 5; ++step) {
      Gradients g = s.zero_gradients();
      bce_loss(batch, s, Mode::kTrain, static_cast<std::uint64_t>(step), &g);
      opt.step(s, g);
    }
    return s;
  };
  const auto a = run(), b = run();
  EXPECT_TRUE(identical_parameters(a, b));
  EXPECT_EQ(a.step, 5u);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("rxv_ckpt_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  for (auto head : kHeads) {
    ModelState s = ModelState::initialize(tiny_config(head));
    s.metadata.variant_name = "CLM_bio";
    s.metadata.domain_pretrained = true;
    s.metadata.domain_steps = 12;
    s.metadata.vocab_hash = "abc";
    s.step = 41;
    const auto path = dir_ / "m.ckpt";
    save_checkpoint(path, s);
    const auto back = load_checkpoint(path);
    EXPECT_TRUE(identical_parameters(s, back));
    EXPECT_EQ(back.config(), s.config());
    EXPECT_EQ(back.step, 41u);
    EXPECT_EQ(back.metadata.variant_name, "CLM_bio");
    EXPECT_TRUE(back.metadata.domain_pretrained);
    EXPECT_EQ(back.metadata.domain_steps, 12u);
    const auto batch = random_batch(s.config(), 4, 1);
    EXPECT_EQ(forward(batch, s, Mode::kInfer).scores, forward(batch, back, Mode::kInfer).scores);
  }
}

TEST_F(CheckpointTest, ShapeMismatchAndCorruptionFailLoudly) {
  const ModelState s = ModelState::initialize(tiny_config(HeadVariant::kClm));
  const auto path = dir_ / "m.ckpt";
  save_checkpoint(path, s);
  const std::string bytes = read_file(path);
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  header["config"]["ffn_dim"] = 17;
  const std::string text = header.dump();
  std::string rebuilt = bytes.substr(0, 8);
  const std::uint64_t n = text.size();
  rebuilt.append(reinterpret_cast<const char*>(&n), 8);
  rebuilt += text;
  rebuilt += bytes.substr(16 + header_len);
  write_file(dir_ / "shape.ckpt", rebuilt);
  EXPECT_THROW(load_checkpoint(dir_ / "shape.ckpt"), std::runtime_error);

  write_file(dir_ / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_checkpoint(dir_ / "short.ckpt"), std::runtime_error);
  write_file(dir_ / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir_ / "long.ckpt"), std::runtime_error);
  write_file(dir_ / "junk.ckpt", "hello");
  EXPECT_THROW(load_checkpoint(dir_ / "junk.ckpt"), std::runtime_error);
}

TEST(Mlm, NothingMaskedMeansNoUpdate) {
  ModelState s = ModelState::initialize(tiny_config(HeadVariant::kClm));
  const ModelState before = s;
  AdamOptimizer opt(s, AdamConfig{});
  const auto batch = random_batch(s.config(), 1, 2);
  // Find a seed that masks nothing at a tiny rate.
  std::uint64_t seed = 0;
  while (mlm_loss(batch, s, 1e-4, seed, Mode::kInfer, nullptr).masked > 0) ++seed;
  const auto r = mlm_pretrain_step(batch, s, opt, 1e-4, seed);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.masked, 0u);
  EXPECT_FALSE(r.updated);
  EXPECT_TRUE(identical_parameters(s, before));
  EXPECT_THROW(mlm_pretrain_step(batch, s, opt, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(mlm_pretrain_step(batch, s, opt, 1.0, 1), std::invalid_argument);
}

TEST(Mlm, InitialLossNearUniform) {
  auto cfg = tiny_config(HeadVariant::kClm);
  cfg.vocab_size = 2000;
  cfg.hidden_dim = 32;
  cfg.num_heads = 4;
  cfg.max_len = 32;
  const ModelState s = ModelState::initialize(cfg);
  const auto batch = random_batch(cfg, 16, 4);
  const auto r = mlm_loss(batch, s, 0.3, 1, Mode::kInfer, nullptr);
  ASSERT_GT(r.masked, 10u);
  EXPECT_NEAR(r.loss, std::log(2000.0), 0.1 * std::log(2000.0));
}

TEST(Mlm, LossDecreasesAcrossWindows) {
  const auto cfg = tiny_config(HeadVariant::kClm, 0.0, 2);
  ModelState s = ModelState::initialize(cfg);
  AdamOptimizer opt(s, AdamConfig{});
  const auto corpus = random_batch(cfg, 50, 21);
  std::vector<double> losses;
  std::size_t cursor = 0;
  for (std::uint64_t step = 0; step < 200; ++step) {
    std::vector<TokenizedPair> batch;
    for (int k = 0; k < 10; ++k) batch.push_back(corpus[cursor++ % corpus.size()]);
    losses.push_back(mlm_pretrain_step(batch, s, opt, 0.25, step).loss);
  }
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < 4; ++w) {
    double mean = 0;
    for (std::size_t k = 0; k < 50; ++k) mean += losses[w * 50 + k] / 50.0;
    EXPECT_LT(mean, previous) << "window " << w;
    previous = mean;
  }
}

TEST(DomainVariant, IdentityTagAndImprovement) {
  std::vector<std::string> corpus;
  for (int i = 0; i < 120; ++i) {
    corpus.push_back(i % 2 ? "lisinopril five milligrams oral administration once a day\thypertension"
                           : "aspirin eighty one milligrams daily\tcholecystitis");
  }
  const auto vocab = train_vocabulary(
      std::vector<std::string>{"lisinopril five milligrams oral administration once a day hypertension",
                               "aspirin eighty one milligrams daily cholecystitis"},
      60, 0);
  ModelConfig cfg = tiny_config(HeadVariant::kClm);
  cfg.vocab_size = vocab.size();
  cfg.max_len = 24;
  const ModelState base = ModelState::initialize(cfg);

  EXPECT_TRUE(identical_parameters(domain_variant(base, corpus, 0, vocab), base));
  EXPECT_THROW(domain_variant(base, std::vector<std::string>{}, 5, vocab), std::invalid_argument);

  DomainOptions opts;
  opts.batch_size = 8;
  const ModelState tuned = domain_variant(base, corpus, 60, vocab, opts);
  EXPECT_TRUE(tuned.metadata.domain_pretrained);
  EXPECT_EQ(tuned.metadata.domain_steps, 60u);
  EXPECT_EQ(tuned.metadata.variant_name, "CLM_bio");
  EXPECT_EQ(tuned.metadata.vocab_hash, vocab.hash());

  const std::vector<std::string> held_out = {"aspirin eighty one milligrams daily\tcholecystitis",
                                             "lisinopril five milligrams oral administration once a day\thypertension"};
  const auto encoded = encode_domain_corpus(held_out, vocab, cfg.max_len);
  double base_loss = 0, tuned_loss = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    base_loss += mlm_loss(encoded, base, 0.3, 1000 + seed, Mode::kInfer, nullptr).loss;
    tuned_loss += mlm_loss(encoded, tuned, 0.3, 1000 + seed, Mode::kInfer, nullptr).loss;
  }
  EXPECT_LT(tuned_loss, base_loss);
}

TEST(WithHead, KeepsEncoderAndReplacesHead) {
  ModelState base = ModelState::initialize(tiny_config(HeadVariant::kClm, 0.0, 3));
  base.metadata.variant_name = "CLM_bio";
  base.metadata.domain_pretrained = true;
  const ModelState swapped = with_head(base, HeadVariant::kClmLstm, 9);
  EXPECT_EQ(swapped.config().head_variant, HeadVariant::kClmLstm);
  EXPECT_EQ(swapped.metadata.variant_name, "CLM_biolstm");
  EXPECT_TRUE(swapped.metadata.domain_pretrained);
  EXPECT_EQ(swapped.param(swapped.index_of("embed.token")), base.param(base.index_of("embed.token")));
  EXPECT_GE(swapped.index_of("lstm.fwd.wx"), 0);
  const auto back = with_head(swapped, HeadVariant::kClm, 3);
  EXPECT_TRUE(identical_parameters(back, base));
  EXPECT_EQ(back.metadata.variant_name, "CLM_bio");
}

}  // namespace
}  // namespace rxv
