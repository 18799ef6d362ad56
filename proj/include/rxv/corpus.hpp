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
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rxv {

enum class Provenance { kIngested, kSynthetic };

struct ClinicalRecord {
  std::string record_id;
  std::string diagnosis;
  std::vector<std::string> medications;
  Provenance provenance = Provenance::kIngested;
};

enum class PairOrigin { kNatural, kSampledNegative, kDuplicated };

std::string_view to_string(PairOrigin origin);
PairOrigin parse_origin(std::string_view name);

// A (prescription, context) unit. label 1 = correlated, 0 = uncorrelated.
struct LabeledPair {
  std::string pair_id;
  std::string prescription;
  std::string context;
  int label = 1;
  PairOrigin origin = PairOrigin::kNatural;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

nlohmann::json to_json(const LabeledPair& pair);
LabeledPair pair_from_json(const nlohmann::json& row);
nlohmann::json to_json(const ClinicalRecord& record);

void write_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> read_pairs(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   const std::vector<ClinicalRecord>& records);

/// Case-insensitive token → full-name phrase table used during normalization.
///
/// Expansions must be lowercase words that are not themselves keys, which is
/// what makes normalization idempotent. The constructor enforces both.
class AbbreviationTable {
 public:
  AbbreviationTable() = default;
  explicit AbbreviationTable(std::map<std::string, std::string> entries);

  static const AbbreviationTable& defaults();
  // Tab-separated "abbreviation<TAB>expansion" lines; '#' starts a comment.
  static AbbreviationTable load(const std::filesystem::path& path);
  static AbbreviationTable parse(std::string_view text);

  const std::string* find(std::string_view lowercase_token) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Drug names (possibly multi-word), used for out-of-domain filtering and
/// entity extraction.
class DrugLexicon {
 public:
  DrugLexicon() = default;
  explicit DrugLexicon(std::vector<std::string> phrases);

  static const DrugLexicon& defaults();
  // One drug per line; '#' starts a comment. Entries are normalized.
  static DrugLexicon load(const std::filesystem::path& path);
  static DrugLexicon parse(std::string_view text);

  const std::vector<std::vector<std::string>>& phrases() const { return phrases_; }
  bool contains_word(std::string_view word) const;
  std::size_t max_phrase_words() const { return max_words_; }
  // Length (in words) of the longest drug phrase starting at words[pos], or 0.
  std::size_t match_at(const std::vector<std::string>& words, std::size_t pos) const;

 private:
  std::vector<std::vector<std::string>> phrases_;
  std::set<std::vector<std::string>> phrase_set_;
  std::set<std::string, std::less<>> words_;
  std::size_t max_words_ = 0;
};

// "81" -> "eighty one"; "2.5" -> "two point five". Input must be digits with
// at most one interior '.'.
std::string verbalize_number(std::string_view digits);

/// Lowercases, drops a leading item number ("1.", "2)"), strips punctuation,
/// expands abbreviations and (optionally) spells out numerals.
/// Total and idempotent; all-punctuation input yields "".
std::string normalize_prescription(std::string_view raw, const AbbreviationTable& abbreviations,
                                   bool verbalize_numbers = true);

inline std::string normalize_prescription(std::string_view raw) {
  return normalize_prescription(raw, AbbreviationTable::defaults(), true);
}

enum class RecordFormat { kJsonl };

struct IngestResult {
  std::vector<ClinicalRecord> records;
  std::vector<std::string> warnings;
};

/// Reads one record object per line. A malformed line throws
/// std::runtime_error naming the line; a record without a usable diagnosis is
/// skipped with a warning.
IngestResult ingest_records(const std::filesystem::path& path,
                            RecordFormat format = RecordFormat::kJsonl);
IngestResult ingest_records_from_string(std::string_view contents);

struct ExtractOptions {
  const AbbreviationTable* abbreviations = &AbbreviationTable::defaults();
  bool verbalize_numbers = true;
  // When set, items with no word from the lexicon are dropped as out of domain.
  const DrugLexicon* domain_lexicon = nullptr;
};

struct ExtractResult {
  std::vector<LabeledPair> pairs;
  std::size_t dropped_empty = 0;
  std::size_t dropped_out_of_domain = 0;
};

ExtractResult extract_correlated_pairs(const std::vector<ClinicalRecord>& records,
                                       const ExtractOptions& options = {});

}  // namespace rxv
