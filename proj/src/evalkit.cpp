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

#include "rxv/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "rxv/training.hpp"

namespace rxv {

nlohmann::json MetricsRow::to_json() const {
  return {{"variant", variant}, {"channel", channel},   {"accuracy", accuracy},
          {"precision", precision}, {"recall", recall}, {"f1", f1},
          {"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}, {"degenerate", degenerate}};
}

MetricsRow metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn,
                               std::string variant, std::string channel) {
  MetricsRow r;
  r.variant = std::move(variant);
  r.channel = std::move(channel);
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  const auto total = r.total();
  if (total == 0) throw std::invalid_argument("score_metrics: no decisions");
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  if (tp + fp > 0) {
    r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    r.degenerate = true;
  }
  if (tp + fn > 0) {
    r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    r.degenerate = true;
  }
  if (r.precision + r.recall > 0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.degenerate = true;
  }
  return r;
}

MetricsRow score_metrics(std::span<const Decision> decisions, std::string variant,
                         std::string channel) {
  if (decisions.empty()) throw std::invalid_argument("score_metrics: empty decision list");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& d : decisions) {
    if (d.predicted == 1) {
      (d.actual == 1 ? tp : fp)++;
    } else {
      (d.actual == 1 ? fn : tn)++;
    }
  }
  return metrics_from_counts(tp, fp, fn, tn, std::move(variant), std::move(channel));
}

TableRow to_table_row(const MetricsRow& row) {
  return {row.variant, row.accuracy, row.precision, row.recall, row.f1};
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double column(const TableRow& r, int c) {
  switch (c) {
    case 0: return r.accuracy;
    case 1: return r.precision;
    case 2: return r.recall;
    default: return r.f1;
  }
}

}  // namespace

std::string render_table(std::span<const TableRow> rows, const std::string& title) {
  static const char* const kHeaders[] = {"Model", "Accuracy", "Precision", "Recall", "F1"};
  double best[4] = {-1, -1, -1, -1};
  for (const auto& r : rows) {
    for (int c = 0; c < 4; ++c) best[c] = std::max(best[c], std::stod(fixed4(column(r, c))));
  }
  std::vector<std::vector<std::string>> cells;
  cells.push_back({kHeaders, kHeaders + 5});
  for (const auto& r : rows) {
    std::vector<std::string> line{r.model};
    for (int c = 0; c < 4; ++c) {
      const std::string v = fixed4(column(r, c));
      line.push_back(std::stod(v) == best[c] ? v + "*" : v + " ");
    }
    cells.push_back(std::move(line));
  }
  std::size_t width[5] = {};
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < 5; ++c) {
      const auto& s = cells[i][c];
      if (c == 0) {
        out << s << std::string(width[c] - s.size(), ' ');
      } else {
        out << "  " << std::string(width[c] - s.size(), ' ') << s;
      }
    }
    out << "\n";
    if (i == 0) {
      std::size_t total = width[0];
      for (std::size_t c = 1; c < 5; ++c) total += 2 + width[c];
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

nlohmann::json table_json(std::span<const TableRow> rows, const std::string& title) {
  nlohmann::json j;
  j["title"] = title;
  j["columns"] = {"Model", "Accuracy", "Precision", "Recall", "F1"};
  nlohmann::json body = nlohmann::json::array();
  for (const auto& r : rows) {
    body.push_back({{"Model", r.model},
                    {"Accuracy", r.accuracy},
                    {"Precision", r.precision},
                    {"Recall", r.recall},
                    {"F1", r.f1}});
  }
  j["rows"] = body;
  return j;
}

nlohmann::json BenchmarkResult::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back(r.to_json());
  return {{"rows", rows_json}, {"notices", notices}};
}

std::vector<MetricsRow> evaluate_variant(const std::string& name, const ModelState& state,
                                         std::span<const LabeledPair> text_test,
                                         std::span<const LabeledPair> speech_test,
                                         const Vocabulary& vocab, double threshold) {
  std::vector<MetricsRow> rows;
  const auto score = [&](std::span<const LabeledPair> pairs, const char* channel) {
    if (pairs.empty()) return;
    const auto preds = predict(pairs, state, vocab, threshold);
    std::vector<Decision> decisions(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) decisions[i] = {preds[i].decision, pairs[i].label};
    rows.push_back(score_metrics(decisions, name, channel));
  };
  score(text_test, "text");
  score(speech_test, "speech");
  return rows;
}

void finish_tables(BenchmarkResult& result) {
  std::vector<TableRow> text, speech;
  for (const auto& r : result.rows) (r.channel == "speech" ? speech : text).push_back(to_table_row(r));
  result.text_table = render_table(text, "Performance for text input");
  result.speech_table = render_table(speech, "Performance for speech input");
}

BenchmarkResult run_benchmark(std::span<const BenchmarkVariant> variants,
                              std::span<const LabeledPair> text_test,
                              std::span<const LabeledPair> speech_test, const Vocabulary& vocab,
                              double threshold) {
  BenchmarkResult result;
  for (const auto& v : variants) {
    if (!std::filesystem::exists(v.checkpoint)) {
      result.notices.push_back("skipped " + v.name + ": checkpoint " + v.checkpoint.string() +
                               " not found");
      continue;
    }
    const ModelState state = load_checkpoint(v.checkpoint);
    if (state.metadata.vocab_hash != vocab.hash())
      throw std::invalid_argument("run_benchmark: checkpoint " + v.checkpoint.string() +
                                  " was trained with a different vocabulary");
    const std::string name = v.name.empty() ? state.metadata.variant_name : v.name;
    for (auto& row : evaluate_variant(name, state, text_test, speech_test, vocab, threshold))
      result.rows.push_back(std::move(row));
  }
  finish_tables(result);
  return result;
}

}  // namespace rxv
