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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rxv {

struct SpecialIds {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kCount = 5;
};

/// WordPiece-style vocabulary. Ids are dense from 0; the five special tokens
/// occupy ids 0..4 and word-internal pieces carry the "##" prefix.
class Vocabulary {
 public:
  static constexpr std::string_view kContinuation = "##";
  static constexpr std::string_view kSpecialNames[SpecialIds::kCount] = {
      "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

  Vocabulary();  // specials only
  explicit Vocabulary(std::vector<std::string> non_special_tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;  // -1 when absent
  bool contains(std::string_view token) const { return id(token) >= 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(int id) { return id >= 0 && id < SpecialIds::kCount; }

  // Greedy longest-match segmentation of one word. A word containing a
  // character outside the vocabulary maps to a single [UNK].
  std::vector<int> segment_word(std::string_view word) const;

  // File form: "#"-prefixed header lines, then one token per line; the id of
  // a token is its index among the token lines.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  // Stable content hash used to tie checkpoints to the vocabulary they were
  // trained with.
  std::string hash() const;

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Frequency-greedy pair merging over whitespace-split words. Every character
/// in the corpus gets both a word-initial and a "##" form, so any text over the
/// training alphabet encodes without [UNK]. Ties break on the lexicographically
/// smallest pair, which makes the result independent of hash ordering.
/// Throws std::invalid_argument on an empty corpus or when size cannot hold the
/// specials plus the character alphabet.
Vocabulary train_vocabulary(std::span<const std::string> corpus, std::size_t size,
                            std::uint64_t seed = 0);

// Character alphabet size (both forms) for a corpus; the minimum vocabulary
// size is this plus SpecialIds::kCount.
std::size_t alphabet_size(std::span<const std::string> corpus);

struct TokenizedPair {
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<int> mask;
  int label = 0;

  std::size_t real_length() const;
};

/// Layout: [CLS] prescription [SEP] context [SEP] [PAD]... Truncation removes
/// trailing pieces from the longer span first (the context on ties).
/// Throws std::invalid_argument when max_len < 5.
TokenizedPair encode_pair(std::string_view prescription, std::string_view context,
                          const Vocabulary& vocab, std::size_t max_len, int label = 0);

// Copy without trailing padding.
TokenizedPair trim_padding(const TokenizedPair& pair);

// Rejoins pieces of each span into words.
std::pair<std::string, std::string> decode_pair(const TokenizedPair& pair, const Vocabulary& vocab);
std::string decode_pieces(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace rxv
