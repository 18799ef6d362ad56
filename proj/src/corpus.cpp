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

#include "rxv/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {
namespace {

bool is_lower_words(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(c == ' ' || (c >= 'a' && c <= 'z'))) return false;
  }
  return true;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits data-file text into non-comment, non-blank lines.
std::vector<std::string> data_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(std::move(t));
  }
  return out;
}

const char* const kOnes[] = {"zero",    "one",     "two",       "three",    "four",
                             "five",    "six",     "seven",     "eight",    "nine",
                             "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                             "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
const char* const kTens[] = {"",      "",      "twenty",  "thirty", "forty",
                             "fifty", "sixty", "seventy", "eighty", "ninety"};

void below_thousand(unsigned n, std::vector<std::string>& out) {
  if (n >= 100) {
    out.emplace_back(kOnes[n / 100]);
    out.emplace_back("hundred");
    n %= 100;
    if (n == 0) return;
  }
  if (n < 20) {
    out.emplace_back(kOnes[n]);
    return;
  }
  out.emplace_back(kTens[n / 10]);
  if (n % 10) out.emplace_back(kOnes[n % 10]);
}

std::string verbalize_integer(std::string_view digits) {
  std::vector<std::string> words;
  std::size_t first = digits.find_first_not_of('0');
  if (first == std::string_view::npos) return "zero";
  std::string_view significant = digits.substr(first);
  if (significant.size() > 9) {
    for (char c : digits) words.emplace_back(kOnes[c - '0']);
    return join_words(words);
  }
  unsigned long long n = std::stoull(std::string(significant));
  const unsigned millions = static_cast<unsigned>(n / 1000000);
  const unsigned thousands = static_cast<unsigned>((n / 1000) % 1000);
  const unsigned rest = static_cast<unsigned>(n % 1000);
  if (millions) {
    below_thousand(millions, words);
    words.emplace_back("million");
  }
  if (thousands) {
    below_thousand(thousands, words);
    words.emplace_back("thousand");
  }
  if (rest) below_thousand(rest, words);
  return join_words(words);
}

bool is_numeric_token(std::string_view s) {
  if (s.empty()) return false;
  int dots = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '.') {
      if (i == 0 || i + 1 == s.size()) return false;
      ++dots;
    } else if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      return false;
    }
  }
  return dots <= 1;
}

// Splits at digit/letter boundaries; '.' between digits stays with the digits.
std::vector<std::string> split_alnum(const std::string& token) {
  std::vector<std::string> parts;
  std::string cur;
  int cur_kind = -1;  // 0 letter, 1 digit
  for (char c : token) {
    const int kind = (std::isdigit(static_cast<unsigned char>(c)) || c == '.') ? 1 : 0;
    if (!cur.empty() && kind != cur_kind) {
      parts.push_back(cur);
      cur.clear();
    }
    cur.push_back(c);
    cur_kind = kind;
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

void emit_piece(const std::string& piece, const AbbreviationTable& abbreviations,
                bool verbalize, std::vector<std::string>& out) {
  if (const std::string* full = abbreviations.find(piece)) {
    out.push_back(*full);
  } else if (is_numeric_token(piece)) {
    out.push_back(verbalize ? verbalize_number(piece) : piece);
  } else if (piece.find('.') != std::string::npos) {
    // stray dots that were not part of a decimal number
    for (auto& w : split_words(std::regex_replace(piece, std::regex("\\."), " "))) {
      emit_piece(w, abbreviations, verbalize, out);
    }
  } else {
    out.push_back(piece);
  }
}

}  // namespace

std::string_view to_string(PairOrigin origin) {
  switch (origin) {
    case PairOrigin::kNatural: return "natural";
    case PairOrigin::kSampledNegative: return "sampled_negative";
    case PairOrigin::kDuplicated: return "duplicated";
  }
  return "natural";
}

PairOrigin parse_origin(std::string_view name) {
  if (name == "natural") return PairOrigin::kNatural;
  if (name == "sampled_negative") return PairOrigin::kSampledNegative;
  if (name == "duplicated") return PairOrigin::kDuplicated;
  throw std::invalid_argument("unknown pair origin: " + std::string(name));
}

nlohmann::json to_json(const LabeledPair& pair) {
  return {{"pair_id", pair.pair_id},
          {"prescription", pair.prescription},
          {"context", pair.context},
          {"label", pair.label},
          {"origin", std::string(to_string(pair.origin))}};
}

LabeledPair pair_from_json(const nlohmann::json& row) {
  LabeledPair p;
  p.pair_id = row.at("pair_id").get<std::string>();
  p.prescription = row.at("prescription").get<std::string>();
  p.context = row.at("context").get<std::string>();
  p.label = row.at("label").get<int>();
  p.origin = parse_origin(row.value("origin", std::string("natural")));
  if (p.label != 0 && p.label != 1) throw std::invalid_argument("label must be 0 or 1");
  return p;
}

nlohmann::json to_json(const ClinicalRecord& record) {
  return {{"record_id", record.record_id},
          {"diagnosis", record.diagnosis},
          {"medications", record.medications},
          {"provenance", record.provenance == Provenance::kSynthetic ? "synthetic" : "ingested"}};
}

void write_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(to_json(p));
  write_jsonl(path, rows);
}

std::vector<LabeledPair> read_pairs(const std::filesystem::path& path) {
  std::vector<LabeledPair> pairs;
  for (const auto& row : read_jsonl(path)) pairs.push_back(pair_from_json(row));
  return pairs;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<ClinicalRecord>& records) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------

AbbreviationTable::AbbreviationTable(std::map<std::string, std::string> entries) {
  for (auto& [key, value] : entries) {
    std::string k = lowercase(trim(key));
    std::string v = join_words(split_words(lowercase(value)));
    if (k.empty() || k.find(' ') != std::string::npos) {
      throw std::invalid_argument("abbreviation key must be a single token: '" + key + "'");
    }
    if (!is_lower_words(v)) {
      throw std::invalid_argument("abbreviation expansion must be letters only: '" + value + "'");
    }
    entries_[k] = v;
  }
  for (const auto& [k, v] : entries_) {
    for (const auto& w : split_words(v)) {
      if (entries_.count(w)) {
        throw std::invalid_argument("expansion of '" + k + "' contains abbreviation '" + w + "'");
      }
    }
  }
}

const AbbreviationTable& AbbreviationTable::defaults() {
  static const AbbreviationTable table(std::map<std::string, std::string>{
      {"po", "oral administration"},
      {"iv", "intravenous"},
      {"sc", "subcutaneous"},
      {"subq", "subcutaneous"},
      {"im", "intramuscular"},
      {"inh", "inhaled"},
      {"sl", "sublingual"},
      {"qd", "once a day"},
      {"od", "once a day"},
      {"bid", "twice a day"},
      {"tid", "three times a day"},
      {"qid", "four times a day"},
      {"q4h", "every four hours"},
      {"q6h", "every six hours"},
      {"q8h", "every eight hours"},
      {"q12h", "every twelve hours"},
      {"q24h", "every twenty four hours"},
      {"qhs", "at bedtime"},
      {"hs", "at bedtime"},
      {"prn", "as needed"},
      {"qam", "every morning"},
      {"qpm", "every evening"},
      {"qwk", "weekly"},
      {"mg", "milligrams"},
      {"mcg", "micrograms"},
      {"g", "grams"},
      {"gm", "grams"},
      {"ml", "milliliters"},
      {"meq", "milliequivalents"},
      {"u", "units"},
      {"tab", "tablet"},
      {"tabs", "tablets"},
      {"cap", "capsule"},
      {"caps", "capsules"},
      {"chf", "congestive heart failure"},
      {"copd", "chronic obstructive pulmonary disease"},
      {"htn", "hypertension"},
      {"uti", "urinary tract infection"},
      {"gerd", "gastroesophageal reflux disease"},
      {"afib", "atrial fibrillation"},
      {"dm", "diabetes mellitus"},
      {"cad", "coronary artery disease"},
      {"pvd", "peripheral vascular disease"},
  });
  return table;
}

AbbreviationTable AbbreviationTable::parse(std::string_view text) {
  std::map<std::string, std::string> entries;
  for (const auto& line : data_lines(text)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::invalid_argument("abbreviation line without tab: '" + line + "'");
    }
    entries[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
  }
  return AbbreviationTable(std::move(entries));
}

AbbreviationTable AbbreviationTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

const std::string* AbbreviationTable::find(std::string_view lowercase_token) const {
  auto it = entries_.find(lowercase_token);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

DrugLexicon::DrugLexicon(std::vector<std::string> phrases) {
  for (const auto& p : phrases) {
    auto words = split_words(lowercase(p));
    if (words.empty()) continue;
    if (!phrase_set_.insert(words).second) continue;
    max_words_ = std::max(max_words_, words.size());
    for (const auto& w : words) words_.insert(w);
    phrases_.push_back(std::move(words));
  }
}

const DrugLexicon& DrugLexicon::defaults() {
  static const DrugLexicon lexicon(std::vector<std::string>{
      "lisinopril",    "amlodipine",    "hydrochlorothiazide", "losartan",
      "lopressor",     "cilostazol",    "clopidogrel",         "atorvastatin",
      "aspirin",       "piperacillin",  "metronidazole",       "ondansetron",
      "vancomycin",    "gentamicin",    "nafcillin",           "rifampin",
      "metformin",     "glipizide",     "insulin",             "sitagliptin",
      "furosemide",    "carvedilol",    "spironolactone",      "digoxin",
      "warfarin",      "diltiazem",     "apixaban",            "amiodarone",
      "levofloxacin",  "azithromycin",  "ceftriaxone",         "doxycycline",
      "albuterol",     "tiotropium",    "prednisone",          "ipratropium",
      "sertraline",    "fluoxetine",    "citalopram",          "bupropion",
      "levothyroxine", "liothyronine",  "synthroid",           "cytomel",
      "nitrofurantoin", "ciprofloxacin", "cephalexin",         "phenazopyridine",
      "omeprazole",    "pantoprazole",  "famotidine",          "sucralfate",
      "levetiracetam", "phenytoin",     "lamotrigine",         "valproate",
      "metoprolol",    "heparin",       "potassium chloride",  "simvastatin",
      "acetaminophen", "oxycodone",     "gabapentin",          "tramadol",
      "enoxaparin",    "magnesium oxide", "docusate",          "senna",
      "multivitamin",  "folic acid",    "tamsulosin",
  });
  return lexicon;
}

DrugLexicon DrugLexicon::parse(std::string_view text) {
  std::vector<std::string> phrases;
  for (const auto& line : data_lines(text)) {
    phrases.push_back(normalize_prescription(line, AbbreviationTable(), true));
  }
  return DrugLexicon(std::move(phrases));
}

DrugLexicon DrugLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

bool DrugLexicon::contains_word(std::string_view word) const {
  return words_.find(word) != words_.end();
}

std::size_t DrugLexicon::match_at(const std::vector<std::string>& words,
                                  std::size_t pos) const {
  const std::size_t limit = std::min(max_words_, words.size() - std::min(pos, words.size()));
  for (std::size_t len = limit; len >= 1; --len) {
    std::vector<std::string> candidate(words.begin() + static_cast<std::ptrdiff_t>(pos),
                                       words.begin() + static_cast<std::ptrdiff_t>(pos + len));
    if (phrase_set_.count(candidate)) return len;
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::string verbalize_number(std::string_view digits) {
  if (!is_numeric_token(digits)) {
    throw std::invalid_argument("not a number: '" + std::string(digits) + "'");
  }
  const auto dot = digits.find('.');
  if (dot == std::string_view::npos) return verbalize_integer(digits);
  std::vector<std::string> words{verbalize_integer(digits.substr(0, dot)), "point"};
  for (char c : digits.substr(dot + 1)) words.emplace_back(kOnes[c - '0']);
  return join_words(words);
}

std::string normalize_prescription(std::string_view raw, const AbbreviationTable& abbreviations,
                                   bool verbalize_numbers) {
  // Lowercase; non-ASCII bytes become separators.
  std::string s;
  s.reserve(raw.size());
  for (unsigned char c : raw) {
    s.push_back(c >= 0x80 ? ' ' : static_cast<char>(std::tolower(c)));
  }

  static const std::regex kItemNumber(R"(^\s*#?\d+\s*(\.(?!\d)|\))\s*|^\s*#\d+\s+)");
  s = std::regex_replace(s, kItemNumber, "", std::regex_constants::format_first_only);

  std::string cleaned;
  cleaned.reserve(s.size() + 16);
  auto at = [&](std::ptrdiff_t i) -> char {
    return (i < 0 || i >= static_cast<std::ptrdiff_t>(s.size())) ? '\0' : s[static_cast<std::size_t>(i)];
  };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) { return c >= 'a' && c <= 'z'; };
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.size()); ++i) {
    const char c = at(i);
    if (is_alpha(c) || is_digit(c)) {
      cleaned.push_back(c);
    } else if (c == '.' || c == ',') {
      if (is_digit(at(i - 1)) && is_digit(at(i + 1))) {
        if (c == '.') cleaned.push_back('.');  // decimal point; thousands comma dropped
      } else if (c == '.' && is_alpha(at(i - 1)) && !is_alpha(at(i - 2))) {
        // dotted abbreviation such as "p.o." or "q.d.": join the letters
      } else {
        cleaned.push_back(' ');
      }
    } else if (c == '%') {
      cleaned += " percent ";
    } else if (c == '&') {
      cleaned += " and ";
    } else if (c == '+') {
      cleaned += " plus ";
    } else if (c == '@') {
      cleaned += " at ";
    } else {
      cleaned.push_back(' ');
    }
  }

  std::vector<std::string> out;
  for (const auto& token : split_words(cleaned)) {
    if (const std::string* full = abbreviations.find(token)) {
      out.push_back(*full);
      continue;
    }
    for (const auto& piece : split_alnum(token)) {
      emit_piece(piece, abbreviations, verbalize_numbers, out);
    }
  }
  return join_words(split_words(join_words(out)));
}

// ---------------------------------------------------------------------------

IngestResult ingest_records_from_string(std::string_view contents) {
  IngestResult result;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": malformed record: " +
                               e.what());
    }
    if (!row.is_object()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": record is not an object");
    }
    const auto meds_it = row.find("medications");
    if (meds_it != row.end() && !meds_it->is_array()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": medications must be an array");
    }
    const auto dx_it = row.find("diagnosis");
    if (dx_it == row.end() || !dx_it->is_string() ||
        normalize_prescription(dx_it->get<std::string>()).empty()) {
      result.warnings.push_back("line " + std::to_string(line_no) +
                                ": record rejected, missing or empty diagnosis");
      continue;
    }
    ClinicalRecord record;
    record.record_id = row.contains("record_id") && row["record_id"].is_string()
                           ? row["record_id"].get<std::string>()
                           : "rec-" + std::to_string(line_no);
    record.diagnosis = dx_it->get<std::string>();
    if (meds_it != row.end()) {
      for (const auto& m : *meds_it) {
        if (!m.is_string()) {
          throw std::runtime_error("line " + std::to_string(line_no) +
                                   ": medication items must be strings");
        }
        record.medications.push_back(m.get<std::string>());
      }
    }
    if (row.value("provenance", std::string("ingested")) == "synthetic") {
      record.provenance = Provenance::kSynthetic;
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

IngestResult ingest_records(const std::filesystem::path& path, RecordFormat format) {
  if (format != RecordFormat::kJsonl) throw std::invalid_argument("unsupported record format");
  return ingest_records_from_string(read_file(path));
}

ExtractResult extract_correlated_pairs(const std::vector<ClinicalRecord>& records,
                                       const ExtractOptions& options) {
  const AbbreviationTable& abbreviations =
      options.abbreviations ? *options.abbreviations : AbbreviationTable::defaults();
  ExtractResult result;
  for (const auto& record : records) {
    const std::string context =
        normalize_prescription(record.diagnosis, abbreviations, options.verbalize_numbers);
    if (context.empty()) {
      result.dropped_empty += record.medications.size();
      continue;
    }
    for (std::size_t k = 0; k < record.medications.size(); ++k) {
      std::string item =
          normalize_prescription(record.medications[k], abbreviations, options.verbalize_numbers);
      if (item.empty()) {
        ++result.dropped_empty;
        continue;
      }
      if (options.domain_lexicon) {
        const auto words = split_words(item);
        const bool in_domain = std::any_of(words.begin(), words.end(), [&](const auto& w) {
          return options.domain_lexicon->contains_word(w);
        });
        if (!in_domain) {
          ++result.dropped_out_of_domain;
          continue;
        }
      }
      LabeledPair pair;
      pair.pair_id = record.record_id + ":" + std::to_string(k);
      pair.prescription = std::move(item);
      pair.context = context;
      pair.label = 1;
      pair.origin = PairOrigin::kNatural;
      result.pairs.push_back(std::move(pair));
    }
  }
  return result;
}

}  // namespace rxv
