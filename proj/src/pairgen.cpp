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

#include "rxv/pairgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "rxv/util.hpp"

namespace rxv {
namespace {

std::string polarity_name(DiscardPolarity p) {
  return p == DiscardPolarity::kDiscardIfSimilar ? "discard_if_similar" : "discard_if_distant";
}

std::string order_name(SplitOrder o) {
  return o == SplitOrder::kDuplicateThenSplit ? "duplicate_then_split" : "split_then_duplicate";
}

std::string text_key(const std::string& prescription, const std::string& context) {
  std::string key = prescription;
  key.push_back('\x1f');
  key += context;
  return key;
}

std::vector<LabeledPair> replicate_positives(const std::vector<LabeledPair>& pairs, int factor) {
  std::vector<LabeledPair> out;
  out.reserve(pairs.size() * static_cast<std::size_t>(factor));
  for (const auto& p : pairs) {
    out.push_back(p);
    if (p.label != 1) continue;
    for (int r = 1; r < factor; ++r) {
      LabeledPair copy = p;
      copy.pair_id = p.pair_id + "#dup" + std::to_string(r);
      copy.origin = PairOrigin::kDuplicated;
      out.push_back(std::move(copy));
    }
  }
  return out;
}

std::array<std::vector<LabeledPair>, 3> cut(std::vector<LabeledPair> items,
                                            const std::array<double, 3>& ratios) {
  const auto sizes = split_sizes(items.size(), ratios);
  std::array<std::vector<LabeledPair>, 3> parts;
  auto it = items.begin();
  for (std::size_t s = 0; s < 3; ++s) {
    auto end = it + static_cast<std::ptrdiff_t>(sizes[s]);
    parts[s].assign(std::make_move_iterator(it), std::make_move_iterator(end));
    it = end;
  }
  return parts;
}

}  // namespace

void SamplerConfig::validate() const {
  if (!(distance_threshold >= 0.0 && distance_threshold <= 1.0)) {
    throw std::invalid_argument("distance_threshold must lie in [0, 1]");
  }
  if (duplication_factor < 1) throw std::invalid_argument("duplication_factor must be >= 1");
  double sum = 0.0;
  for (double r : split_ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("split ratios must be > 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  if (attempts_per_target == 0) throw std::invalid_argument("attempts_per_target must be >= 1");
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"target_negatives", target_negatives},
          {"distance_threshold", distance_threshold},
          {"discard_polarity", polarity_name(discard_polarity)},
          {"duplication_factor", duplication_factor},
          {"split_ratios", split_ratios},
          {"split_order", order_name(split_order)},
          {"seed", seed},
          {"attempts_per_target", attempts_per_target}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.target_negatives = j.value("target_negatives", c.target_negatives);
  c.distance_threshold = j.value("distance_threshold", c.distance_threshold);
  const auto pol = j.value("discard_polarity", polarity_name(c.discard_polarity));
  if (pol == "discard_if_similar") {
    c.discard_polarity = DiscardPolarity::kDiscardIfSimilar;
  } else if (pol == "discard_if_distant") {
    c.discard_polarity = DiscardPolarity::kDiscardIfDistant;
  } else {
    throw std::invalid_argument("unknown discard_polarity: " + pol);
  }
  c.duplication_factor = j.value("duplication_factor", c.duplication_factor);
  if (j.contains("split_ratios")) c.split_ratios = j["split_ratios"].get<std::array<double, 3>>();
  const auto order = j.value("split_order", order_name(c.split_order));
  if (order == "duplicate_then_split") {
    c.split_order = SplitOrder::kDuplicateThenSplit;
  } else if (order == "split_then_duplicate") {
    c.split_order = SplitOrder::kSplitThenDuplicate;
  } else {
    throw std::invalid_argument("unknown split_order: " + order);
  }
  c.seed = j.value("seed", c.seed);
  c.attempts_per_target = j.value("attempts_per_target", c.attempts_per_target);
  c.validate();
  return c;
}

double diagnosis_distance(std::string_view a, std::string_view b) {
  const auto wa = split_words(a);
  const auto wb = split_words(b);
  const std::set<std::string> sa(wa.begin(), wa.end());
  const std::set<std::string> sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& w : sa) common += sb.count(w);
  const std::size_t uni = sa.size() + sb.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

bool accepts_candidate(double distance, const SamplerConfig& cfg) {
  return cfg.discard_polarity == DiscardPolarity::kDiscardIfSimilar
             ? distance >= cfg.distance_threshold
             : distance <= cfg.distance_threshold;
}

NegativeSample sample_negatives(const std::vector<LabeledPair>& pairs, const SamplerConfig& cfg,
                                const DistanceFn& distance) {
  cfg.validate();
  NegativeSample result;
  if (cfg.target_negatives == 0) return result;
  if (pairs.size() < 2) {
    result.shortfall = cfg.target_negatives;
    return result;
  }

  std::unordered_set<std::string> natural;
  natural.reserve(pairs.size() * 2);
  for (const auto& p : pairs) natural.insert(text_key(p.prescription, p.context));

  // Distances are cached per (context, context) since contexts repeat heavily.
  std::unordered_map<std::string, double> cache;
  auto cached_distance = [&](const std::string& a, const std::string& b) {
    const std::string key = a < b ? text_key(a, b) : text_key(b, a);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double d = distance(a, b);
    cache.emplace(key, d);
    return d;
  };

  Rng rng(mix_seed(cfg.seed, 0x6e6567));
  const std::size_t budget = cfg.attempts_per_target * cfg.target_negatives;
  result.pairs.reserve(cfg.target_negatives);
  while (result.pairs.size() < cfg.target_negatives && result.attempts < budget) {
    ++result.attempts;
    const std::size_t src = uniform_index(rng, pairs.size());
    const std::size_t ctx = uniform_index(rng, pairs.size());
    if (src == ctx) continue;
    const auto& med_pair = pairs[src];
    const auto& ctx_pair = pairs[ctx];
    if (!accepts_candidate(cached_distance(med_pair.context, ctx_pair.context), cfg)) continue;
    if (natural.count(text_key(med_pair.prescription, ctx_pair.context))) continue;

    LabeledPair neg;
    char id[32];
    std::snprintf(id, sizeof(id), "neg-%07zu", result.pairs.size());
    neg.pair_id = id;
    neg.prescription = med_pair.prescription;
    neg.context = ctx_pair.context;
    neg.label = 0;
    neg.origin = PairOrigin::kSampledNegative;
    result.pairs.push_back(std::move(neg));
    result.sources.emplace_back(src, ctx);
  }
  result.shortfall = cfg.target_negatives - result.pairs.size();
  return result;
}

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kValidation: return "validation";
    case SplitName::kTest: return "test";
  }
  return "train";
}

const std::vector<LabeledPair>& DatasetSplit::part(SplitName name) const {
  switch (name) {
    case SplitName::kTrain: return train;
    case SplitName::kValidation: return validation;
    case SplitName::kTest: return test;
  }
  return train;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  const auto a = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
  const auto b = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  const std::size_t first = std::min(a, n);
  const std::size_t second = std::min(b, n - first);
  return {first, second, n - first - second};
}

DatasetSplit balance_and_split(const std::vector<LabeledPair>& pairs, const SamplerConfig& cfg) {
  cfg.validate();
  const bool has_pos = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == 1; });
  const bool has_neg = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == 0; });
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("balance_and_split: both labels must be present");
  }

  Rng rng(mix_seed(cfg.seed, 0x73706c));
  std::array<std::vector<LabeledPair>, 3> parts;
  if (cfg.split_order == SplitOrder::kDuplicateThenSplit) {
    auto all = replicate_positives(pairs, cfg.duplication_factor);
    std::shuffle(all.begin(), all.end(), rng);
    parts = cut(std::move(all), cfg.split_ratios);
  } else {
    auto all = pairs;
    std::shuffle(all.begin(), all.end(), rng);
    parts = cut(std::move(all), cfg.split_ratios);
    for (auto& part : parts) {
      part = replicate_positives(part, cfg.duplication_factor);
      std::shuffle(part.begin(), part.end(), rng);
    }
  }

  DatasetSplit split;
  split.train = std::move(parts[0]);
  split.validation = std::move(parts[1]);
  split.test = std::move(parts[2]);
  for (auto name : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
    for (const auto& p : split.part(name)) {
      ++split.manifest[{std::string(to_string(name)), p.label, std::string(to_string(p.origin))}];
    }
  }
  return split;
}

nlohmann::json manifest_json(const DatasetSplit& split, const SamplerConfig& cfg) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [key, n] : split.manifest) {
    counts.push_back({{"split", std::get<0>(key)},
                      {"label", std::get<1>(key)},
                      {"origin", std::get<2>(key)},
                      {"count", n}});
  }
  return {{"sizes",
           {{"train", split.train.size()},
            {"validation", split.validation.size()},
            {"test", split.test.size()}}},
          {"counts", counts},
          {"config", cfg.to_json()}};
}

void save_split(const std::filesystem::path& dir, const DatasetSplit& split,
                const SamplerConfig& cfg) {
  std::filesystem::create_directories(dir);
  write_pairs(dir / "train.jsonl", split.train);
  write_pairs(dir / "validation.jsonl", split.validation);
  write_pairs(dir / "test.jsonl", split.test);
  write_file(dir / "manifest.json", manifest_json(split, cfg).dump(2) + "\n");
}

DatasetSplit load_split(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.train = read_pairs(dir / "train.jsonl");
  split.validation = read_pairs(dir / "validation.jsonl");
  split.test = read_pairs(dir / "test.jsonl");
  for (auto name : {SplitName::kTrain, SplitName::kValidation, SplitName::kTest}) {
    for (const auto& p : split.part(name)) {
      ++split.manifest[{std::string(to_string(name)), p.label, std::string(to_string(p.origin))}];
    }
  }
  return split;
}

}  // namespace rxv
