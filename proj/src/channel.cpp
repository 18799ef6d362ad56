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

#include "rxv/channel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {
namespace {

constexpr const char* kDefaultConfusions = R"TSV(
# Mis-transcriptions a speech recognizer plausibly produces for prescription
# vocabulary. Columns: phrase, mis-transcription, weight (default 1).
lopressor	blood pressure	4
lopressor	low pressure	1
lisinopril	listen april	2
lisinopril	lisa no pill	1
amlodipine	am low dipping	1
losartan	lose art an	1
hydrochlorothiazide	hydro chloro thigh aside	1
cilostazol	silo stays all	1
clopidogrel	clop a dog rel	1
atorvastatin	a tore vast a tin	1
aspirin	ask for in	1
aspirin	as per in	1
metronidazole	metro nida zole	1
ondansetron	on dance a tron	1
piperacillin	piper a sillin	1
vancomycin	vanco my sin	1
gentamicin	gent a my sin	1
nafcillin	naf sillin	1
rifampin	rif am pin	1
metformin	met for men	2
glipizide	glip a side	1
insulin	in sue lin	1
sitagliptin	sit a glip tin	1
furosemide	fur rose a mide	1
carvedilol	carve a dill all	1
spironolactone	spiral no lactone	1
digoxin	dig ox in	1
warfarin	war far in	2
diltiazem	dilt i a zem	1
apixaban	a pix a ban	1
amiodarone	am i oh da rone	1
levofloxacin	leave oh flox a sin	1
azithromycin	a zith row my sin	1
ceftriaxone	ceft try axe own	1
doxycycline	docs e cycling	1
albuterol	all beuter all	1
tiotropium	tio trope e um	1
prednisone	pred knees own	1
ipratropium	ip ra trope e um	1
sertraline	sir tra leen	1
fluoxetine	flu ox a teen	1
citalopram	sit al o pram	1
bupropion	bu pro p on	1
levothyroxine	levo thigh rocks een	1
liothyronine	lio thigh ro neen	1
synthroid	sin throid	1
cytomel	site o mel	1
nitrofurantoin	nitro fur an toin	1
ciprofloxacin	sip row flox a sin	1
cephalexin	sef a lex in	1
phenazopyridine	fen az o pyridine	1
omeprazole	oh mep ra zole	1
pantoprazole	panto pra zole	1
famotidine	fa mo ti deen	1
sucralfate	sue kral fate	1
levetiracetam	lev e tear a set am	1
phenytoin	fen i toin	1
lamotrigine	lamo tri jean	1
valproate	val pro ate	1
fifteen	fifty	1
fifty	fifteen	1
thirteen	thirty	1
thirty	thirteen	1
fourteen	forty	1
forty	fourteen	1
sixteen	sixty	1
sixty	sixteen	1
seventeen	seventy	1
seventy	seventeen	1
eighteen	eighty	1
eighty	eighteen	1
nineteen	ninety	1
ninety	nineteen	1
two	to	1
four	for	1
eight	ate	1
one	won	1
milligrams	micrograms	2
milligrams	milli grams	1
micrograms	milligrams	2
grams	grans	1
units	unit	1
oral administration	orally administration	3
oral administration	oral ministration	1
intravenous	intra venous	1
subcutaneous	sub cute tenius	1
inhaled	in hailed	1
once a day	once today	2
twice a day	twice today	2
three times a day	three times today	1
four times a day	for times a day	1
at bedtime	at bad time	1
as needed	has needed	1
daily	daly	1
every	very	1
hours	ours	1
)TSV";

const std::vector<std::string> kDistractors = {"the",  "and",  "for", "with", "in",
                                               "on",   "but",  "so",  "then", "that",
                                               "this", "it",   "is",  "was",  "if"};
const std::vector<std::string> kFillers = {"uh", "um", "ah", "er", "the", "and", "so"};

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t phrase_match(const std::vector<std::vector<std::string>>& phrases,
                         const std::vector<std::string>& words, std::size_t pos) {
  std::size_t best = 0;
  for (const auto& p : phrases) {
    if (p.size() <= best || pos + p.size() > words.size()) continue;
    if (std::equal(p.begin(), p.end(), words.begin() + static_cast<std::ptrdiff_t>(pos))) {
      best = p.size();
    }
  }
  return best;
}

const std::vector<std::vector<std::string>>& usage_phrase_words() {
  static const std::vector<std::vector<std::string>> words = [] {
    std::vector<std::vector<std::string>> out;
    for (const auto& p : usage_phrases()) out.push_back(split_words(p));
    return out;
  }();
  return words;
}

}  // namespace

void ConfusionLexicon::add(std::string_view phrase, std::string_view alternative, double weight) {
  auto key = split_words(phrase);
  auto alt = split_words(alternative);
  if (key.empty()) throw std::invalid_argument("ConfusionLexicon: empty phrase");
  if (alt.empty()) throw std::invalid_argument("ConfusionLexicon: empty alternative for '" +
                                               std::string(phrase) + "'");
  if (key == alt)
    throw std::invalid_argument("ConfusionLexicon: '" + std::string(phrase) + "' maps to itself");
  if (!(weight > 0.0) || !std::isfinite(weight))
    throw std::invalid_argument("ConfusionLexicon: weight must be positive for '" +
                                std::string(phrase) + "'");
  max_words_ = std::max(max_words_, key.size());
  for (auto& [k, alts] : entries_) {
    if (k == key) {
      alts.push_back({std::move(alt), weight});
      return;
    }
  }
  entries_.push_back({std::move(key), {{std::move(alt), weight}}});
}

ConfusionLexicon ConfusionLexicon::parse(std::string_view text) {
  ConfusionLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    std::string col;
    while (std::getline(fields, col, '\t')) cols.push_back(col);
    if (cols.size() < 2 || cols.size() > 3)
      throw std::invalid_argument("confusion lexicon line " + std::to_string(line_no) +
                                  ": expected 2 or 3 tab-separated columns");
    double weight = 1.0;
    if (cols.size() == 3) {
      try {
        weight = std::stod(cols[2]);
      } catch (const std::exception&) {
        throw std::invalid_argument("confusion lexicon line " + std::to_string(line_no) +
                                    ": bad weight '" + cols[2] + "'");
      }
    }
    lex.add(cols[0], cols[1], weight);
  }
  return lex;
}

ConfusionLexicon ConfusionLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

const ConfusionLexicon& ConfusionLexicon::defaults() {
  static const ConfusionLexicon lex = parse(kDefaultConfusions);
  return lex;
}

std::size_t ConfusionLexicon::match_at(const std::vector<std::string>& words,
                                       std::size_t pos) const {
  std::size_t best = 0;
  for (const auto& [key, alts] : entries_) {
    if (key.size() <= best || pos + key.size() > words.size()) continue;
    if (std::equal(key.begin(), key.end(), words.begin() + static_cast<std::ptrdiff_t>(pos))) {
      best = key.size();
    }
  }
  return best;
}

const std::vector<Confusion>* ConfusionLexicon::find(const std::vector<std::string>& phrase) const {
  for (const auto& [key, alts] : entries_) {
    if (key == phrase) return &alts;
  }
  return nullptr;
}

std::size_t ConfusionLexicon::size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

std::vector<std::pair<std::string, Confusion>> ConfusionLexicon::entries() const {
  std::vector<std::pair<std::string, Confusion>> out;
  for (const auto& [key, alts] : entries_) {
    for (const auto& a : alts) out.emplace_back(join_words(key), a);
  }
  return out;
}

void ErrorMix::validate() const {
  if (substitution < 0 || deletion < 0 || insertion < 0)
    throw std::invalid_argument("ErrorMix: fractions must be non-negative");
  if (std::abs(substitution + deletion + insertion - 1.0) > 1e-9)
    throw std::invalid_argument("ErrorMix: fractions must sum to 1");
}

void ChannelConfig::validate() const {
  if (!(target_wer >= 0.0 && target_wer < 1.0))
    throw std::invalid_argument("ChannelConfig: target_wer must lie in [0, 1)");
  mix.validate();
}

nlohmann::json ChannelConfig::to_json() const {
  return {{"target_wer", target_wer},
          {"mix",
           {{"substitution", mix.substitution},
            {"deletion", mix.deletion},
            {"insertion", mix.insertion}}},
          {"seed", seed}};
}

ChannelConfig ChannelConfig::from_json(const nlohmann::json& j) {
  ChannelConfig c;
  c.target_wer = j.value("target_wer", c.target_wer);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    c.mix.substitution = m.value("substitution", c.mix.substitution);
    c.mix.deletion = m.value("deletion", c.mix.deletion);
    c.mix.insertion = m.value("insertion", c.mix.insertion);
  }
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string to_string(EditKind kind) {
  switch (kind) {
    case EditKind::kSubstitution: return "substitution";
    case EditKind::kDeletion: return "deletion";
    case EditKind::kInsertion: return "insertion";
  }
  return "unknown";
}

Corruption corrupt_logged(std::string_view text, const ConfusionLexicon& lexicon,
                          double target_wer, std::uint64_t seed, const ErrorMix& mix) {
  if (!(target_wer >= 0.0 && target_wer < 1.0))
    throw std::invalid_argument("corrupt: target_wer must lie in [0, 1)");
  mix.validate();
  Corruption out;
  if (target_wer == 0.0) {
    out.transcript = std::string(text);
    return out;
  }
  const auto words = split_words(text);
  Rng rng(mix_seed(seed, 0x636872));
  std::vector<std::string> hyp;
  std::size_t pos = 0;
  while (pos < words.size()) {
    std::size_t m = lexicon.match_at(words, pos);
    const std::vector<Confusion>* alts = nullptr;
    std::vector<std::string> unit;
    if (m > 0) {
      unit.assign(words.begin() + static_cast<std::ptrdiff_t>(pos),
                  words.begin() + static_cast<std::ptrdiff_t>(pos + m));
      alts = lexicon.find(unit);
    } else {
      m = 1;
      unit = {words[pos]};
    }

    // The substitution is drawn first so the event rate can account for its cost.
    std::vector<std::string> replacement;
    if (alts) {
      double total = 0.0;
      for (const auto& a : *alts) total += a.weight;
      double r = uniform01(rng) * total;
      std::size_t k = 0;
      while (k + 1 < alts->size() && r >= (*alts)[k].weight) r -= (*alts)[k++].weight;
      replacement = (*alts)[k].words;
    } else {
      std::string pick;
      do {
        pick = kDistractors[uniform_index(rng, kDistractors.size())];
      } while (pick == unit[0]);
      replacement = {pick};
    }
    const double sub_cost = static_cast<double>(levenshtein(unit, replacement));
    const double expected_cost =
        mix.substitution * sub_cost + mix.deletion * static_cast<double>(m) + mix.insertion;
    const double rate = std::min(1.0, target_wer * static_cast<double>(m) / expected_cost);

    const double u_event = uniform01(rng);
    const double u_kind = uniform01(rng);
    const std::size_t filler = uniform_index(rng, kFillers.size());
    if (u_event < rate) {
      if (u_kind < mix.substitution) {
        hyp.insert(hyp.end(), replacement.begin(), replacement.end());
        out.edits.push_back({EditKind::kSubstitution, pos, pos + m, join_words(replacement)});
      } else if (u_kind < mix.substitution + mix.deletion) {
        out.edits.push_back({EditKind::kDeletion, pos, pos + m, ""});
      } else {
        hyp.insert(hyp.end(), unit.begin(), unit.end());
        hyp.push_back(kFillers[filler]);
        out.edits.push_back({EditKind::kInsertion, pos + m, pos + m, kFillers[filler]});
      }
    } else {
      hyp.insert(hyp.end(), unit.begin(), unit.end());
    }
    pos += m;
  }
  out.transcript = join_words(hyp);
  return out;
}

std::string corrupt(std::string_view text, const ConfusionLexicon& lexicon, double target_wer,
                    std::uint64_t seed, const ErrorMix& mix) {
  return corrupt_logged(text, lexicon, target_wer, seed, mix).transcript;
}

EditCounts word_edit_counts(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(reference);
  const auto hyp = split_words(hypothesis);
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
    }
  }
  EditCounts c;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

double word_error_rate(std::string_view reference, std::string_view hypothesis) {
  const auto n = split_words(reference).size();
  if (n == 0) throw std::invalid_argument("word_error_rate: empty reference");
  return static_cast<double>(word_edit_counts(reference, hypothesis).total()) /
         static_cast<double>(n);
}

double corpus_word_error_rate(std::span<const std::string> references,
                              std::span<const std::string> hypotheses) {
  if (references.size() != hypotheses.size())
    throw std::invalid_argument("corpus_word_error_rate: length mismatch");
  std::size_t edits = 0, words = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    words += split_words(references[i]).size();
    edits += word_edit_counts(references[i], hypotheses[i]).total();
  }
  if (words == 0) throw std::invalid_argument("corpus_word_error_rate: empty reference corpus");
  return static_cast<double>(edits) / static_cast<double>(words);
}

std::string to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::kMedication: return "medication";
    case EntityKind::kDosage: return "dosage";
    case EntityKind::kUsage: return "usage";
  }
  return "unknown";
}

const std::vector<std::string>& unit_words() {
  static const std::vector<std::string> units = {
      "milligrams", "milligram",   "micrograms", "microgram",       "grams",
      "gram",       "units",       "unit",       "milliliters",     "milliliter",
      "milliequivalents", "milliequivalent"};
  return units;
}

const std::vector<std::string>& usage_phrases() {
  static const std::vector<std::string> phrases = {
      "oral administration", "intravenous",         "subcutaneous",
      "intramuscular",       "inhaled",             "sublingual",
      "once a day",          "twice a day",         "three times a day",
      "four times a day",    "every four hours",    "every six hours",
      "every eight hours",   "every twelve hours",  "every twenty four hours",
      "at bedtime",          "as needed",           "daily",
      "every morning",       "every evening",       "weekly"};
  return phrases;
}

bool is_number_word(std::string_view word) {
  static const std::set<std::string, std::less<>> numbers = {
      "zero",     "one",      "two",       "three",    "four",     "five",    "six",
      "seven",    "eight",    "nine",      "ten",      "eleven",   "twelve",  "thirteen",
      "fourteen", "fifteen",  "sixteen",   "seventeen", "eighteen", "nineteen", "twenty",
      "thirty",   "forty",    "fifty",     "sixty",    "seventy",  "eighty",  "ninety",
      "hundred",  "thousand", "million",   "point"};
  return numbers.contains(word);
}

std::vector<EntitySpan> extract_entity_spans(const std::vector<std::string>& words,
                                             const DrugLexicon& drugs) {
  static const std::set<std::string, std::less<>> units(unit_words().begin(), unit_words().end());
  std::vector<EntitySpan> spans;
  std::size_t i = 0;
  while (i < words.size()) {
    if (const auto n = drugs.match_at(words, i); n > 0) {
      spans.push_back({EntityKind::kMedication, i, i + n, join_words(words, i, i + n)});
      i += n;
      continue;
    }
    if (const auto n = phrase_match(usage_phrase_words(), words, i); n > 0) {
      spans.push_back({EntityKind::kUsage, i, i + n, join_words(words, i, i + n)});
      i += n;
      continue;
    }
    if (is_number_word(words[i])) {
      std::size_t j = i;
      while (j < words.size() && is_number_word(words[j])) ++j;
      if (j < words.size() && units.contains(words[j])) {
        spans.push_back({EntityKind::kDosage, i, j + 1, join_words(words, i, j + 1)});
        i = j + 1;
      } else {
        i = j;
      }
      continue;
    }
    ++i;
  }
  return spans;
}

EntityRecord extract_entities(std::string_view text, const DrugLexicon& drugs) {
  EntityRecord rec;
  for (auto& span : extract_entity_spans(split_words(text), drugs)) {
    switch (span.kind) {
      case EntityKind::kMedication: rec.medications.insert(std::move(span.text)); break;
      case EntityKind::kDosage: rec.dosages.insert(std::move(span.text)); break;
      case EntityKind::kUsage: rec.usages.insert(std::move(span.text)); break;
    }
  }
  return rec;
}

std::vector<EntityKind> entity_diff(const EntityRecord& a, const EntityRecord& b) {
  std::vector<EntityKind> out;
  if (a.medications != b.medications) out.push_back(EntityKind::kMedication);
  if (a.dosages != b.dosages) out.push_back(EntityKind::kDosage);
  if (a.usages != b.usages) out.push_back(EntityKind::kUsage);
  return out;
}

nlohmann::json ChannelReport::to_json() const {
  nlohmann::json changed_json = nlohmann::json::array();
  for (auto k : changed) changed_json.push_back(to_string(k));
  return {{"pair_id", pair_id},
          {"original", original},
          {"transcript", transcript},
          {"edits",
           {{"substitutions", edits.substitutions},
            {"deletions", edits.deletions},
            {"insertions", edits.insertions}}},
          {"entity_diff", changed_json},
          {"original_label", original_label},
          {"relabeled", relabeled}};
}

RelabelResult relabel(std::span<const LabeledPair> pairs, std::span<const std::string> transcripts,
                      const DrugLexicon& drugs) {
  if (pairs.size() != transcripts.size())
    throw std::invalid_argument("relabel: " + std::to_string(pairs.size()) + " pairs but " +
                                std::to_string(transcripts.size()) + " transcripts");
  RelabelResult out;
  out.pairs.reserve(pairs.size());
  out.reports.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    ChannelReport rep;
    rep.pair_id = p.pair_id;
    rep.original = p.prescription;
    rep.transcript = transcripts[i];
    rep.edits = word_edit_counts(p.prescription, transcripts[i]);
    rep.changed = entity_diff(extract_entities(p.prescription, drugs),
                              extract_entities(transcripts[i], drugs));
    rep.original_label = p.label;
    rep.relabeled = p.label == 1 && !rep.changed.empty();
    LabeledPair q = p;
    q.prescription = transcripts[i];
    if (rep.relabeled) {
      q.label = 0;
      ++out.flips;
    }
    out.pairs.push_back(std::move(q));
    out.reports.push_back(std::move(rep));
  }
  return out;
}

std::vector<Corruption> corrupt_pairs(std::span<const LabeledPair> pairs,
                                      const ConfusionLexicon& lexicon, const ChannelConfig& cfg) {
  cfg.validate();
  std::vector<Corruption> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back(corrupt_logged(pairs[i].prescription, lexicon, cfg.target_wer,
                                 mix_seed(cfg.seed, i), cfg.mix));
  }
  return out;
}

}  // namespace rxv
