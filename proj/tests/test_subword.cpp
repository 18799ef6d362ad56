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

#include <algorithm>
#include <filesystem>
#include <random>

#include "rxv/corpus.hpp"
#include "rxv/subword.hpp"
#include "rxv/synthetic.hpp"
#include "rxv/util.hpp"

namespace rxv {
namespace {

std::vector<std::string> split_lines_for_test(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string::npos ? text.size() : nl;
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> clinical_corpus() {
  std::vector<std::string> out;
  for (const auto& p : extract_correlated_pairs(
           generate_synthetic_records(300, CompatibilityTable::defaults(), 21)).pairs) {
    out.push_back(p.prescription);
    out.push_back(p.context);
  }
  return out;
}

TEST(TrainVocabulary, HandTracedMerge) {
  const std::vector<std::string> corpus = {"aa aa"};
  const auto v = train_vocabulary(corpus, 10, 0);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("##a"));
  EXPECT_TRUE(v.contains("aa"));
  EXPECT_EQ(v.size(), 8u);  // 5 specials + a, ##a, aa; no further pair exists
  EXPECT_EQ(v.segment_word("aa"), std::vector<int>{v.id("aa")});
}

TEST(TrainVocabulary, ZeroMergeBudget) {
  const std::vector<std::string> corpus = {"abc cab"};
  const std::size_t minimum = alphabet_size(corpus) + SpecialIds::kCount;
  EXPECT_EQ(alphabet_size(corpus), 6u);
  const auto v = train_vocabulary(corpus, minimum, 0);
  EXPECT_EQ(v.size(), minimum);
  for (std::size_t i = SpecialIds::kCount; i < v.size(); ++i) {
    const auto& t = v.token(static_cast<int>(i));
    EXPECT_EQ(t.size() - (t.starts_with("##") ? 2 : 0), 1u) << t;
  }
  EXPECT_THROW(train_vocabulary(corpus, minimum - 1, 0), std::invalid_argument);
}

TEST(TrainVocabulary, EmptyCorpusAndDeterminism) {
  EXPECT_THROW(train_vocabulary(std::vector<std::string>{}, 100, 0), std::invalid_argument);
  EXPECT_THROW(train_vocabulary(std::vector<std::string>{"   "}, 100, 0), std::invalid_argument);
  const auto corpus = clinical_corpus();
  const auto a = train_vocabulary(corpus, 300, 1);
  const auto b = train_vocabulary(corpus, 300, 1);
  EXPECT_EQ(a.tokens(), b.tokens());
  EXPECT_LE(a.size(), 300u);
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(Vocabulary, SpecialsAndDenseIds) {
  const auto v = train_vocabulary(clinical_corpus(), 200, 0);
  for (int i = 0; i < SpecialIds::kCount; ++i) {
    EXPECT_EQ(v.token(i), Vocabulary::kSpecialNames[i]);
    EXPECT_TRUE(Vocabulary::is_special(i));
  }
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(static_cast<int>(i))), static_cast<int>(i));
}

TEST(Vocabulary, FileRoundTrip) {
  const auto v = train_vocabulary(clinical_corpus(), 250, 0);
  const auto text = v.serialize();
  EXPECT_TRUE(text.starts_with("#"));
  const auto back = Vocabulary::parse(text);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.hash(), v.hash());

  // After the header, line k holds the token with id k.
  auto lines = split_lines_for_test(text);
  std::size_t header = 0;
  while (header < lines.size() && lines[header].starts_with("#") &&
         !lines[header].starts_with("##"))
    ++header;
  EXPECT_EQ(header, 3u);
  lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(header));
  ASSERT_EQ(lines.size(), v.size());
  for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(lines[i], v.token(static_cast<int>(i)));

  EXPECT_THROW(Vocabulary::parse("a\nb\n"), std::runtime_error);
}

TEST(EncodePair, MinimalLayout) {
  const Vocabulary v({"a", "b"});
  const auto t = encode_pair("a", "b", v, 8);
  const int a = v.id("a"), b = v.id("b");
  using S = SpecialIds;
  EXPECT_EQ(t.ids, (std::vector<int>{S::kCls, a, S::kSep, b, S::kSep, S::kPad, S::kPad, S::kPad}));
  EXPECT_EQ(t.segments, (std::vector<int>{0, 0, 0, 1, 1, 0, 0, 0}));
  EXPECT_EQ(t.mask, (std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(t.real_length(), 5u);
  EXPECT_THROW(encode_pair("a", "b", v, 4), std::invalid_argument);
  EXPECT_EQ(trim_padding(t).ids.size(), 5u);
}

TEST(EncodePair, CharacterFallbackWithoutUnk) {
  const auto v = train_vocabulary(std::vector<std::string>{"lisinopril aspirin"}, 30, 0);
  const auto t = encode_pair("pail", "sirs", v, 32);
  for (int id : t.ids) EXPECT_NE(id, SpecialIds::kUnk);
  EXPECT_EQ(decode_pair(t, v), (std::pair<std::string, std::string>{"pail", "sirs"}));
  // A character never seen in training becomes [UNK].
  const auto u = encode_pair("zebra", "a", v, 32);
  EXPECT_EQ(u.ids[1], SpecialIds::kUnk);
}

TEST(EncodePair, TruncatesLongerSpanFirst) {
  const Vocabulary v({"a", "b"});
  const auto t = encode_pair("a a a a a a", "b b", v, 8);
  // 8 = CLS + 4 + SEP + 2... the longer prescription gives up tokens until balanced.
  EXPECT_EQ(t.real_length(), 8u);
  const auto [rx, ctx] = decode_pair(t, v);
  EXPECT_EQ(rx, "a a a");
  EXPECT_EQ(ctx, "b b");
  const auto tie = encode_pair("a a a", "b b b", v, 7);
  const auto [rx2, ctx2] = decode_pair(tie, v);
  EXPECT_EQ(rx2, "a a");
  EXPECT_EQ(ctx2, "b b");
}

TEST(EncodePair, StructuralInvariantsAndRoundTrip) {
  const auto corpus = clinical_corpus();
  const auto v = train_vocabulary(corpus, 400, 0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  for (int trial = 0; trial < 500; ++trial) {
    // Shuffled words from the corpus make new word sequences over the same alphabet.
    auto w1 = split_words(corpus[pick(rng)]);
    auto w2 = split_words(corpus[pick(rng)]);
    std::shuffle(w1.begin(), w1.end(), rng);
    const std::string rx = join_words(w1), ctx = join_words(w2);
    const auto t = encode_pair(rx, ctx, v, 96);
    ASSERT_EQ(t.ids.size(), 96u);
    EXPECT_EQ(t.ids[0], SpecialIds::kCls);
    EXPECT_EQ(std::count(t.ids.begin(), t.ids.end(), SpecialIds::kCls), 1);
    EXPECT_EQ(std::count(t.ids.begin(), t.ids.end(), SpecialIds::kSep), 2);
    const auto n = t.real_length();
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
      EXPECT_EQ(t.mask[i], i < n ? 1 : 0);
      EXPECT_EQ(t.ids[i] == SpecialIds::kPad, i >= n);
    }
    const auto first_sep = std::find(t.ids.begin(), t.ids.end(), SpecialIds::kSep) - t.ids.begin();
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(t.segments[i], static_cast<std::ptrdiff_t>(i) <= first_sep ? 0 : 1);
    }
    EXPECT_EQ(decode_pair(t, v), (std::pair<std::string, std::string>{rx, ctx}));
  }
}

TEST(Segmentation, GreedyLongestMatch) {
  const auto corpus = clinical_corpus();
  const auto v = train_vocabulary(corpus, 300, 0);
  for (const auto& text : corpus) {
    for (const auto& word : split_words(text)) {
      const auto pieces = v.segment_word(word);
      std::size_t pos = 0;
      for (int id : pieces) {
        std::string piece = v.token(id);
        if (piece.starts_with("##")) piece = piece.substr(2);
        const std::size_t end = pos + piece.size();
        ASSERT_EQ(word.substr(pos, piece.size()), piece);
        // No longer in-vocabulary piece starts at this position.
        for (std::size_t longer = end + 1; longer <= word.size(); ++longer) {
          const std::string candidate = (pos > 0 ? "##" : "") + word.substr(pos, longer - pos);
          EXPECT_FALSE(v.contains(candidate)) << word << " at " << pos << ": " << candidate;
        }
        pos = end;
      }
      EXPECT_EQ(pos, word.size());
    }
  }
}

}  // namespace
}  // namespace rxv
