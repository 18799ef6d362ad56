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

#include "rxv/subword.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {
namespace {

bool is_continuation(std::string_view piece) {
  return piece.substr(0, Vocabulary::kContinuation.size()) == Vocabulary::kContinuation;
}

std::string strip_continuation(std::string_view piece) {
  return std::string(is_continuation(piece) ? piece.substr(Vocabulary::kContinuation.size())
                                            : piece);
}

std::vector<int> span_pieces(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> out;
  for (const auto& word : split_words(text)) {
    auto pieces = vocab.segment_word(word);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (auto name : kSpecialNames) add(std::string(name));
}

Vocabulary::Vocabulary(std::vector<std::string> non_special_tokens) : Vocabulary() {
  for (auto& t : non_special_tokens) {
    if (index_.count(t)) throw std::invalid_argument("duplicate vocabulary token: " + t);
    add(std::move(t));
  }
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::segment_word(std::string_view word) const {
  std::vector<int> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    int found = -1;
    std::size_t end = word.size();
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate += kContinuation;
      candidate += word.substr(start, end - start);
      found = id(candidate);
      if (found >= 0) break;
    }
    if (found < 0) return {SpecialIds::kUnk};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  out << "#vocab v1\n#specials";
  for (auto name : kSpecialNames) out << ' ' << name;
  out << "\n#continuation " << kContinuation << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  return out.str();
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> tokens;
  bool in_header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_header && !line.empty() && line[0] == '#') continue;
    in_header = false;
    tokens.push_back(line);
  }
  if (tokens.size() < static_cast<std::size_t>(SpecialIds::kCount)) {
    throw std::runtime_error("vocabulary file is missing special tokens");
  }
  for (int i = 0; i < SpecialIds::kCount; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kSpecialNames[i]) {
      throw std::runtime_error("vocabulary special token " + std::to_string(i) + " must be " +
                               std::string(kSpecialNames[i]));
    }
  }
  return Vocabulary(std::vector<std::string>(tokens.begin() + SpecialIds::kCount, tokens.end()));
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return hex64(fnv1a64(joined));
}

std::size_t alphabet_size(std::span<const std::string> corpus) {
  std::set<char> chars;
  for (const auto& text : corpus) {
    for (const auto& w : split_words(text)) chars.insert(w.begin(), w.end());
  }
  return 2 * chars.size();
}

Vocabulary train_vocabulary(std::span<const std::string> corpus, std::size_t size,
                            std::uint64_t /*seed*/) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) ++word_freq[std::move(w)];
  }
  if (word_freq.empty()) throw std::invalid_argument("train_vocabulary: empty corpus");

  std::set<char> chars;
  for (const auto& [w, n] : word_freq) chars.insert(w.begin(), w.end());
  const std::size_t minimum = SpecialIds::kCount + 2 * chars.size();
  if (size < minimum) {
    throw std::invalid_argument("train_vocabulary: size " + std::to_string(size) +
                                " is below the alphabet minimum " + std::to_string(minimum));
  }

  std::vector<std::string> tokens;
  std::set<std::string> known;
  for (char c : chars) {
    tokens.emplace_back(1, c);
    known.insert(tokens.back());
  }
  for (char c : chars) {
    tokens.push_back(std::string(Vocabulary::kContinuation) + c);
    known.insert(tokens.back());
  }

  struct Word {
    std::vector<std::string> symbols;
    std::size_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [w, n] : word_freq) {
    Word word{{}, n};
    for (std::size_t i = 0; i < w.size(); ++i) {
      word.symbols.push_back(i == 0 ? std::string(1, w[i])
                                    : std::string(Vocabulary::kContinuation) + w[i]);
    }
    words.push_back(std::move(word));
  }

  while (SpecialIds::kCount + tokens.size() < size) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& word : words) {
      for (std::size_t i = 0; i + 1 < word.symbols.size(); ++i) {
        counts[{word.symbols[i], word.symbols[i + 1]}] += word.freq;
      }
    }
    if (counts.empty()) break;
    // std::map iterates in key order, so the first maximum is the smallest pair.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + strip_continuation(right);
    if (known.insert(merged).second) tokens.push_back(merged);
    for (auto& word : words) {
      std::vector<std::string> next;
      next.reserve(word.symbols.size());
      for (std::size_t i = 0; i < word.symbols.size(); ++i) {
        if (i + 1 < word.symbols.size() && word.symbols[i] == left && word.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(word.symbols[i]);
        }
      }
      word.symbols = std::move(next);
    }
  }
  return Vocabulary(std::move(tokens));
}

std::size_t TokenizedPair::real_length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

TokenizedPair encode_pair(std::string_view prescription, std::string_view context,
                          const Vocabulary& vocab, std::size_t max_len, int label) {
  if (max_len < 5) throw std::invalid_argument("encode_pair: max_len must be >= 5");
  auto first = span_pieces(prescription, vocab);
  auto second = span_pieces(context, vocab);
  while (first.size() + second.size() + 3 > max_len) {
    if (first.size() > second.size()) {
      first.pop_back();
    } else {
      second.pop_back();
    }
  }

  TokenizedPair out;
  out.label = label;
  out.ids.reserve(max_len);
  out.ids.push_back(SpecialIds::kCls);
  out.segments.push_back(0);
  for (int id : first) {
    out.ids.push_back(id);
    out.segments.push_back(0);
  }
  out.ids.push_back(SpecialIds::kSep);
  out.segments.push_back(0);
  for (int id : second) {
    out.ids.push_back(id);
    out.segments.push_back(1);
  }
  out.ids.push_back(SpecialIds::kSep);
  out.segments.push_back(1);
  out.mask.assign(out.ids.size(), 1);
  while (out.ids.size() < max_len) {
    out.ids.push_back(SpecialIds::kPad);
    out.segments.push_back(0);
    out.mask.push_back(0);
  }
  return out;
}

TokenizedPair trim_padding(const TokenizedPair& pair) {
  TokenizedPair out = pair;
  const std::size_t n = pair.real_length();
  out.ids.resize(n);
  out.segments.resize(n);
  out.mask.resize(n);
  return out;
}

std::string decode_pieces(std::span<const int> ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (Vocabulary::is_special(id) && id != SpecialIds::kUnk) continue;
    const std::string& piece = vocab.token(id);
    if (is_continuation(piece) && !words.empty()) {
      words.back() += strip_continuation(piece);
    } else {
      words.push_back(strip_continuation(piece));
    }
  }
  return join_words(words);
}

std::pair<std::string, std::string> decode_pair(const TokenizedPair& pair, const Vocabulary& vocab) {
  std::vector<int> first, second;
  int seps = 0;
  for (std::size_t i = 0; i < pair.ids.size(); ++i) {
    if (pair.mask[i] == 0) break;
    const int id = pair.ids[i];
    if (id == SpecialIds::kCls) continue;
    if (id == SpecialIds::kSep) {
      ++seps;
      continue;
    }
    (seps == 0 ? first : second).push_back(id);
  }
  return {decode_pieces(first, vocab), decode_pieces(second, vocab)};
}

}  // namespace rxv
