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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rxv/corpus.hpp"
#include "rxv/model_state.hpp"
#include "rxv/subword.hpp"

namespace rxv {

struct Decision {
  int predicted = 0;
  int actual = 0;
};

struct MetricsRow {
  std::string variant;
  std::string channel;  // "text" or "speech"
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool degenerate = false;  // some ratio had a zero denominator and was set to 0

  std::size_t total() const { return tp + fp + fn + tn; }
  nlohmann::json to_json() const;
};

/// Confusion counts and derived metrics. Precision, recall and F1 are 0 (and
/// the row flagged degenerate) when their denominators vanish. Throws
/// std::invalid_argument for an empty list.
MetricsRow score_metrics(std::span<const Decision> decisions, std::string variant = "",
                         std::string channel = "");
MetricsRow metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn,
                               std::string variant = "", std::string channel = "");

struct TableRow {
  std::string model;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

TableRow to_table_row(const MetricsRow& row);

// Aligned plain text with columns Model, Accuracy, Precision, Recall, F1 and
// four decimals; the maximum of each metric column carries a trailing '*'.
std::string render_table(std::span<const TableRow> rows, const std::string& title = "");
nlohmann::json table_json(std::span<const TableRow> rows, const std::string& title = "");

struct BenchmarkVariant {
  std::string name;
  std::filesystem::path checkpoint;
};

struct BenchmarkResult {
  std::vector<MetricsRow> rows;  // (variant, text) then (variant, speech) per variant
  std::vector<std::string> notices;
  std::string text_table;
  std::string speech_table;
  nlohmann::json to_json() const;
};

// Scores one in-memory variant on either channel; an empty test list is skipped.
std::vector<MetricsRow> evaluate_variant(const std::string& name, const ModelState& state,
                                         std::span<const LabeledPair> text_test,
                                         std::span<const LabeledPair> speech_test,
                                         const Vocabulary& vocab, double threshold);

/// A missing checkpoint skips its rows with a notice. Throws
/// std::invalid_argument when a checkpoint belongs to another vocabulary.
BenchmarkResult run_benchmark(std::span<const BenchmarkVariant> variants,
                              std::span<const LabeledPair> text_test,
                              std::span<const LabeledPair> speech_test, const Vocabulary& vocab,
                              double threshold);
void finish_tables(BenchmarkResult& result);

}  // namespace rxv
