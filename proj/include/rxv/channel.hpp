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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rxv/corpus.hpp"

namespace rxv {

struct Confusion {
  std::vector<std::string> words;  // the mis-transcription
  double weight = 1.0;
};

/// Phrase -> weighted mis-transcriptions. Keys and alternatives are
/// normalized word sequences.
class ConfusionLexicon {
 public:
  ConfusionLexicon() = default;
  // Throws std::invalid_argument for a self-mapping, a non-positive weight or
  // an empty phrase.
  void add(std::string_view phrase, std::string_view alternative, double weight);

  static const ConfusionLexicon& defaults();
  // "phrase<TAB>alternative[<TAB>weight]" lines; '#' starts a comment.
  static ConfusionLexicon parse(std::string_view text);
  static ConfusionLexicon load(const std::filesystem::path& path);

  // Word length of the longest key starting at words[pos], or 0.
  std::size_t match_at(const std::vector<std::string>& words, std::size_t pos) const;
  const std::vector<Confusion>* find(const std::vector<std::string>& phrase) const;
  std::size_t size() const;
  std::vector<std::pair<std::string, Confusion>> entries() const;

 private:
  std::vector<std::pair<std::vector<std::string>, std::vector<Confusion>>> entries_;
  std::size_t max_words_ = 0;
};

struct ErrorMix {
  double substitution = 0.60;
  double deletion = 0.25;
  double insertion = 0.15;
  void validate() const;  // non-negative, sums to 1
};

struct ChannelConfig {
  double target_wer = 0.2869;
  ErrorMix mix;
  std::uint64_t seed = 0;
  void validate() const;  // target_wer in [0, 1)
  nlohmann::json to_json() const;
  static ChannelConfig from_json(const nlohmann::json& j);
};

enum class EditKind { kSubstitution, kDeletion, kInsertion };
std::string to_string(EditKind kind);

// One channel event in reference word coordinates. Substitutions and
// deletions cover [ref_begin, ref_end); insertions have
// ref_begin == ref_end == the reference position the filler precedes.
struct CorruptionEdit {
  EditKind kind = EditKind::kSubstitution;
  std::size_t ref_begin = 0;
  std::size_t ref_end = 0;
  std::string replacement;
};

struct Corruption {
  std::string transcript;
  std::vector<CorruptionEdit> edits;
};

/// Walks the text in units (longest confusion-lexicon key, else one word).
/// Each unit suffers an event with probability chosen so the expected number
/// of word errors per reference word equals target_wer; the event kind follows
/// the error mix. Substitutions use the lexicon when the unit has an entry and
/// a distractor word otherwise; insertions add a filler after the unit.
/// target_wer 0 returns the input unchanged. Throws std::invalid_argument for a
/// target outside [0, 1).
Corruption corrupt_logged(std::string_view text, const ConfusionLexicon& lexicon,
                          double target_wer, std::uint64_t seed, const ErrorMix& mix = {});
std::string corrupt(std::string_view text, const ConfusionLexicon& lexicon, double target_wer,
                    std::uint64_t seed, const ErrorMix& mix = {});

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t total() const { return substitutions + deletions + insertions; }
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

// Minimum word-level edit alignment of hypothesis against reference.
EditCounts word_edit_counts(std::string_view reference, std::string_view hypothesis);
/// Edits divided by reference word count; may exceed 1. Throws
/// std::invalid_argument when the reference has no words.
double word_error_rate(std::string_view reference, std::string_view hypothesis);
// Sum of edits over sum of reference words.
double corpus_word_error_rate(std::span<const std::string> references,
                              std::span<const std::string> hypotheses);

enum class EntityKind { kMedication, kDosage, kUsage };
std::string to_string(EntityKind kind);

struct EntitySpan {
  EntityKind kind = EntityKind::kMedication;
  std::size_t begin = 0;  // word offsets, half-open
  std::size_t end = 0;
  std::string text;
};

struct EntityRecord {
  std::set<std::string> medications;
  std::set<std::string> dosages;
  std::set<std::string> usages;
  bool empty() const { return medications.empty() && dosages.empty() && usages.empty(); }
  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

const std::vector<std::string>& unit_words();
const std::vector<std::string>& usage_phrases();
bool is_number_word(std::string_view word);

// Left-to-right scan: drug phrase, then usage phrase, then a run of number
// words directly followed by a unit word.
std::vector<EntitySpan> extract_entity_spans(const std::vector<std::string>& words,
                                             const DrugLexicon& drugs);
EntityRecord extract_entities(std::string_view text, const DrugLexicon& drugs);
// Categories whose entity sets differ.
std::vector<EntityKind> entity_diff(const EntityRecord& a, const EntityRecord& b);

struct ChannelReport {
  std::string pair_id;
  std::string original;
  std::string transcript;
  EditCounts edits;
  std::vector<EntityKind> changed;
  int original_label = 0;
  bool relabeled = false;
  nlohmann::json to_json() const;
};

struct RelabelResult {
  std::vector<LabeledPair> pairs;  // prescription replaced by the transcript
  std::vector<ChannelReport> reports;
  std::size_t flips = 0;
};

/// Label-1 pairs whose entity records differ between original and transcript
/// become label 0; label-0 pairs keep their label. Throws
/// std::invalid_argument when the lengths differ.
RelabelResult relabel(std::span<const LabeledPair> pairs, std::span<const std::string> transcripts,
                      const DrugLexicon& drugs);

// Corrupts every prescription with a per-pair seed derived from cfg.seed.
std::vector<Corruption> corrupt_pairs(std::span<const LabeledPair> pairs,
                                      const ConfusionLexicon& lexicon, const ChannelConfig& cfg);

}  // namespace rxv
