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

#include <filesystem>
#include <set>

#include "rxv/corpus.hpp"
#include "rxv/pairgen.hpp"
#include "rxv/synthetic.hpp"

namespace rxv {
namespace {

std::vector<LabeledPair> synthetic_naturals(std::size_t count, std::uint64_t seed) {
  std::vector<LabeledPair> out;
  std::int64_t n = static_cast<std::int64_t>(count / 2 + 10);
  while (out.size() < count) {
    out = extract_correlated_pairs(generate_synthetic_records(n, CompatibilityTable::defaults(), seed)).pairs;
    n *= 2;
  }
  out.resize(count);
  return out;
}

std::vector<LabeledPair> fixture(std::size_t pos, std::size_t neg) {
  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < pos; ++i)
    out.push_back({"p" + std::to_string(i), "rx " + std::to_string(i), "ctx", 1, PairOrigin::kNatural});
  for (std::size_t i = 0; i < neg; ++i)
    out.push_back({"n" + std::to_string(i), "rx " + std::to_string(i), "other", 0, PairOrigin::kSampledNegative});
  return out;
}

TEST(Distance, HandComputedValues) {
  EXPECT_DOUBLE_EQ(diagnosis_distance("cholecystitis", "cholecystitis"), 0.0);
  EXPECT_DOUBLE_EQ(diagnosis_distance("bacteremia endocarditis", "peripheral vascular disease"), 1.0);
  EXPECT_DOUBLE_EQ(diagnosis_distance("peripheral vascular disease", "peripheral artery disease"), 0.5);
  EXPECT_DOUBLE_EQ(diagnosis_distance("", ""), 0.0);
  EXPECT_DOUBLE_EQ(diagnosis_distance("", "copd"), 1.0);
  EXPECT_DOUBLE_EQ(diagnosis_distance("a b b", "b a"), 0.0);
}

TEST(Distance, SymmetricAndBounded) {
  const std::vector<std::string> texts = {"a", "a b", "b c d", "", "a b c d e", "c"};
  for (const auto& x : texts) {
    for (const auto& y : texts) {
      const double d = diagnosis_distance(x, y);
      EXPECT_EQ(d, diagnosis_distance(y, x));
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
  }
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.duplication_factor = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.split_ratios = {0.5, 0.3, 0.3};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.split_ratios = {0.8, 0.2, 0.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.distance_threshold = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  SamplerConfig d;
  d.seed = 99;
  d.discard_polarity = DiscardPolarity::kDiscardIfDistant;
  const auto back = SamplerConfig::from_json(d.to_json());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.discard_polarity, DiscardPolarity::kDiscardIfDistant);
}

TEST(SampleNegatives, ZeroTarget) {
  SamplerConfig c;
  c.target_negatives = 0;
  const auto out = sample_negatives(synthetic_naturals(50, 1), c);
  EXPECT_TRUE(out.pairs.empty());
  EXPECT_EQ(out.shortfall, 0u);
}

TEST(SampleNegatives, FullScaleCount) {
  const auto naturals = synthetic_naturals(6901, 3);
  SamplerConfig c;
  c.target_negatives = 70000;
  c.seed = 3;
  const auto out = sample_negatives(naturals, c);
  EXPECT_EQ(out.pairs.size(), 70000u);
  EXPECT_EQ(out.shortfall, 0u);
}

TEST(SampleNegatives, PredicateHoldsForEveryOutput) {
  const auto naturals = synthetic_naturals(600, 4);
  for (auto polarity : {DiscardPolarity::kDiscardIfSimilar, DiscardPolarity::kDiscardIfDistant}) {
    SamplerConfig c;
    c.target_negatives = 2000;
    c.discard_polarity = polarity;
    const auto out = sample_negatives(naturals, c);
    ASSERT_EQ(out.pairs.size(), out.sources.size());
    std::set<std::pair<std::string, std::string>> natural_text;
    for (const auto& p : naturals) natural_text.insert({p.prescription, p.context});
    for (std::size_t i = 0; i < out.pairs.size(); ++i) {
      const auto& p = out.pairs[i];
      const auto [src, ctx] = out.sources[i];
      EXPECT_EQ(p.label, 0);
      EXPECT_EQ(p.origin, PairOrigin::kSampledNegative);
      EXPECT_EQ(p.prescription, naturals[src].prescription);
      EXPECT_EQ(p.context, naturals[ctx].context);
      const double d = diagnosis_distance(naturals[src].context, p.context);
      if (polarity == DiscardPolarity::kDiscardIfSimilar) {
        EXPECT_GE(d, 0.5);
      } else {
        EXPECT_LE(d, 0.5);
      }
      EXPECT_FALSE(natural_text.contains({p.prescription, p.context}));
    }
  }
}

TEST(SampleNegatives, ShortfallIsReportedNotThrown) {
  // A single diagnosis: nothing is ever distant enough.
  std::vector<LabeledPair> same = {{"a", "aspirin", "copd", 1, PairOrigin::kNatural},
                                   {"b", "prednisone", "copd", 1, PairOrigin::kNatural}};
  SamplerConfig c;
  c.target_negatives = 10;
  const auto out = sample_negatives(same, c);
  EXPECT_TRUE(out.pairs.empty());
  EXPECT_EQ(out.shortfall, 10u);
  EXPECT_EQ(out.attempts, 500u);
}

TEST(SampleNegatives, Deterministic) {
  const auto naturals = synthetic_naturals(300, 5);
  SamplerConfig c;
  c.target_negatives = 500;
  c.seed = 11;
  EXPECT_EQ(sample_negatives(naturals, c).pairs, sample_negatives(naturals, c).pairs);
}

TEST(SampleNegatives, ThresholdMonotonicity) {
  // Acceptance over a fixed stream of candidate distances never rises with the threshold.
  std::vector<double> stream;
  const auto naturals = synthetic_naturals(200, 6);
  for (std::size_t i = 0; i < naturals.size(); ++i) {
    for (std::size_t j = 0; j < naturals.size(); j += 7) {
      stream.push_back(diagnosis_distance(naturals[i].context, naturals[j].context));
    }
  }
  double previous = 2.0;
  for (double t = 0.0; t <= 1.0 + 1e-12; t += 0.05) {
    SamplerConfig c;
    c.distance_threshold = std::min(t, 1.0);
    std::size_t accepted = 0;
    for (double d : stream) accepted += accepts_candidate(d, c);
    const double rate = static_cast<double>(accepted) / static_cast<double>(stream.size());
    EXPECT_LE(rate, previous);
    previous = rate;
  }
}

TEST(BalanceAndSplit, FullScaleArithmetic) {
  auto pairs = fixture(6901, 70000);
  SamplerConfig c;
  const auto split = balance_and_split(pairs, c);
  std::size_t positives = 0;
  for (auto name : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
    for (const auto& p : split.part(name)) positives += p.label;
  }
  EXPECT_EQ(positives, 69010u);
  EXPECT_EQ(split.total(), 139010u);
}

TEST(BalanceAndSplit, FactorOneKeepsPositives) {
  SamplerConfig c;
  c.duplication_factor = 1;
  const auto split = balance_and_split(fixture(40, 60), c);
  EXPECT_EQ(split.total(), 100u);
}

TEST(BalanceAndSplit, FixtureSplitSizes) {
  SamplerConfig c;
  const auto split = balance_and_split(fixture(100, 100), c);
  EXPECT_NEAR(static_cast<double>(split.train.size()), 660.0, 1.0);
  EXPECT_NEAR(static_cast<double>(split.validation.size()), 220.0, 1.0);
  EXPECT_NEAR(static_cast<double>(split.test.size()), 220.0, 1.0);
}

TEST(BalanceAndSplit, SplitSizesWithinOneOfIdeal) {
  for (std::size_t n : {0u, 1u, 2u, 7u, 99u, 1001u, 139010u}) {
    for (auto ratios : {std::array<double, 3>{0.6, 0.2, 0.2}, std::array<double, 3>{0.7, 0.15, 0.15},
                        std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3}}) {
      const auto s = split_sizes(n, ratios);
      EXPECT_EQ(s[0] + s[1] + s[2], n);
      for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(static_cast<double>(s[k]) - ratios[k] * n), 1.0);
    }
  }
}

TEST(BalanceAndSplit, ConservationManifestAndOrigins) {
  for (auto order : {SplitOrder::kDuplicateThenSplit, SplitOrder::kSplitThenDuplicate}) {
    SamplerConfig c;
    c.split_order = order;
    c.duplication_factor = 4;
    const auto split = balance_and_split(fixture(50, 170), c);
    EXPECT_EQ(split.total(), 50u * 4 + 170);
    std::set<std::string> ids;
    std::size_t manifest_total = 0;
    for (const auto& [key, count] : split.manifest) manifest_total += count;
    EXPECT_EQ(manifest_total, split.total());
    for (auto name : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
      for (const auto& p : split.part(name)) {
        EXPECT_TRUE(ids.insert(p.pair_id).second) << p.pair_id;
        if (p.origin == PairOrigin::kNatural) EXPECT_EQ(p.label, 1);
        if (p.origin == PairOrigin::kDuplicated) EXPECT_EQ(p.label, 1);
        if (p.origin == PairOrigin::kSampledNegative) EXPECT_EQ(p.label, 0);
      }
    }
  }
}

TEST(BalanceAndSplit, SplitThenDuplicateKeepsReplicasTogether) {
  SamplerConfig c;
  c.split_order = SplitOrder::kSplitThenDuplicate;
  const auto split = balance_and_split(fixture(30, 30), c);
  const auto base = [](const std::string& id) { return id.substr(0, id.find('#')); };
  std::map<std::string, std::set<int>> where;
  int k = 0;
  for (auto name : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
    for (const auto& p : split.part(name)) where[base(p.pair_id)].insert(k);
    ++k;
  }
  for (const auto& [id, splits] : where) EXPECT_EQ(splits.size(), 1u) << id;
}

TEST(BalanceAndSplit, RequiresBothLabels) {
  EXPECT_THROW(balance_and_split(fixture(10, 0), SamplerConfig{}), std::invalid_argument);
  EXPECT_THROW(balance_and_split(fixture(0, 10), SamplerConfig{}), std::invalid_argument);
}

TEST(BalanceAndSplit, DeterministicAndPersisted) {
  SamplerConfig c;
  c.seed = 8;
  const auto a = balance_and_split(fixture(20, 50), c);
  const auto b = balance_and_split(fixture(20, 50), c);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);

  const auto dir = std::filesystem::temp_directory_path() / "rxv_split_test";
  std::filesystem::remove_all(dir);
  save_split(dir, a, c);
  const auto back = load_split(dir);
  EXPECT_EQ(back.train, a.train);
  EXPECT_EQ(back.validation, a.validation);
  EXPECT_EQ(back.test, a.test);
  EXPECT_EQ(back.manifest, a.manifest);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace rxv
