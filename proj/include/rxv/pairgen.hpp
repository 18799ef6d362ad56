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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rxv/corpus.hpp"

namespace rxv {

enum class DiscardPolarity {
  kDiscardIfSimilar,  // keep a candidate only when distance >= threshold
  kDiscardIfDistant,  // keep a candidate only when distance <= threshold
};

enum class SplitOrder { kDuplicateThenSplit, kSplitThenDuplicate };

struct SamplerConfig {
  std::size_t target_negatives = 0;
  double distance_threshold = 0.5;
  DiscardPolarity discard_polarity = DiscardPolarity::kDiscardIfSimilar;
  int duplication_factor = 10;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  SplitOrder split_order = SplitOrder::kDuplicateThenSplit;
  std::uint64_t seed = 0;
  std::size_t attempts_per_target = 50;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

using DistanceFn = std::function<double(std::string_view, std::string_view)>;

// 1 - |A ∩ B| / |A ∪ B| over whitespace token sets. Empty vs empty is 0; empty
// vs non-empty is 1.
double diagnosis_distance(std::string_view a, std::string_view b);

bool accepts_candidate(double distance, const SamplerConfig& cfg);

struct NegativeSample {
  std::vector<LabeledPair> pairs;
  std::size_t attempts = 0;
  std::size_t shortfall = 0;  // target_negatives - pairs.size()
  // Index of the natural pair each negative took its prescription / context from.
  std::vector<std::pair<std::size_t, std::size_t>> sources;
};

/// Recombines prescriptions and contexts of different natural pairs. A
/// candidate survives the distance test against the prescription's own
/// diagnosis and must not reproduce any natural (prescription, context) text.
/// Stops after attempts_per_target * target_negatives draws and reports any
/// shortfall instead of throwing.
NegativeSample sample_negatives(const std::vector<LabeledPair>& pairs, const SamplerConfig& cfg,
                                const DistanceFn& distance = diagnosis_distance);

enum class SplitName { kTrain, kValidation, kTest };
std::string_view to_string(SplitName name);

struct DatasetSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> validation;
  std::vector<LabeledPair> test;
  // (split, label, origin) -> count
  std::map<std::tuple<std::string, int, std::string>, std::size_t> manifest;

  const std::vector<LabeledPair>& part(SplitName name) const;
  std::size_t total() const { return train.size() + validation.size() + test.size(); }
};

// Sizes for n items under the given ratios; the last split absorbs rounding.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

/// Replicates label-1 pairs duplication_factor times (copies carry origin
/// duplicated), shuffles with the seed and splits in the configured order.
/// Throws std::invalid_argument when either label is absent.
DatasetSplit balance_and_split(const std::vector<LabeledPair>& pairs, const SamplerConfig& cfg);

nlohmann::json manifest_json(const DatasetSplit& split, const SamplerConfig& cfg);

// Writes train.jsonl, validation.jsonl, test.jsonl and manifest.json.
void save_split(const std::filesystem::path& dir, const DatasetSplit& split,
                const SamplerConfig& cfg);
DatasetSplit load_split(const std::filesystem::path& dir);

}  // namespace rxv
