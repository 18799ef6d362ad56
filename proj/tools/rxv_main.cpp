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

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rxv/channel.hpp"
#include "rxv/corpus.hpp"
#include "rxv/encoder.hpp"
#include "rxv/evalkit.hpp"
#include "rxv/model_state.hpp"
#include "rxv/pairgen.hpp"
#include "rxv/service.hpp"
#include "rxv/subword.hpp"
#include "rxv/synthetic.hpp"
#include "rxv/training.hpp"
#include "rxv/util.hpp"

namespace fs = std::filesystem;
using namespace rxv;

namespace {

struct ModelFlags {
  std::string variant = "clm";
  std::size_t max_len = 64, hidden = 64, layers = 2, heads = 4, ffn = 128, lstm = 64;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--variant", variant, "baseline_linear | mlp | clm | clm_lstm")->capture_default_str();
    app->add_option("--max-len", max_len)->capture_default_str();
    app->add_option("--hidden-dim", hidden)->capture_default_str();
    app->add_option("--layers", layers)->capture_default_str();
    app->add_option("--heads", heads)->capture_default_str();
    app->add_option("--ffn-dim", ffn)->capture_default_str();
    app->add_option("--lstm-hidden", lstm)->capture_default_str();
    app->add_option("--dropout", dropout)->capture_default_str();
  }

  ModelConfig build(std::size_t vocab_size) const {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.max_len = max_len;
    c.hidden_dim = hidden;
    c.num_layers = layers;
    c.num_heads = heads;
    c.ffn_dim = ffn;
    c.lstm_hidden = lstm;
    c.dropout = dropout;
    c.head_variant = parse_head_variant(variant);
    c.seed = seed;
    c.validate();
    return c;
  }
};

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

const DrugLexicon& drugs_from(const std::string& path, std::optional<DrugLexicon>& storage) {
  if (path.empty()) return DrugLexicon::defaults();
  storage = DrugLexicon::load(path);
  return *storage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rxv: prescription validity checking with a contextual language model"};
  app.set_config("--config", "", "TOML/INI configuration file")->envname("RXV_CONFIG");
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic clinical records");
  std::int64_t gen_records = 2000;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "records.jsonl", gen_domain;
  std::int64_t gen_domain_records = 2000;
  gen->add_option("--records", gen_records)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();
  gen->add_option("--domain-corpus", gen_domain,
                  "Also write an unlabeled 'prescription<TAB>diagnosis' corpus here");
  gen->add_option("--domain-records", gen_domain_records)->capture_default_str();

  // make-pairs
  auto* mk = app.add_subcommand("make-pairs", "Extract pairs, sample negatives, balance and split");
  std::string mk_records = "records.jsonl", mk_out = "split", mk_abbrev, mk_drugs, mk_polarity = "discard_if_similar",
              mk_order = "duplicate_then_split";
  SamplerConfig sampler;
  bool mk_filter = false;
  mk->add_option("--records", mk_records)->capture_default_str();
  mk->add_option("--out", mk_out)->capture_default_str();
  mk->add_option("--abbreviations", mk_abbrev, "Abbreviation table (TSV)");
  mk->add_option("--drugs", mk_drugs, "Drug lexicon for out-of-domain filtering");
  mk->add_flag("--filter-out-of-domain", mk_filter);
  mk->add_option("--negatives", sampler.target_negatives, "Target negatives (0: match positives)");
  mk->add_option("--threshold", sampler.distance_threshold)->capture_default_str();
  mk->add_option("--polarity", mk_polarity)->capture_default_str();
  mk->add_option("--duplication", sampler.duplication_factor)->capture_default_str();
  mk->add_option("--split-order", mk_order)->capture_default_str();
  mk->add_option("--seed", sampler.seed)->capture_default_str();

  // train-vocab
  auto* tv = app.add_subcommand("train-vocab", "Train a subword vocabulary on the training split");
  std::string tv_split = "split", tv_out = "vocab.txt";
  std::vector<std::string> tv_extra;
  std::size_t tv_size = 2000;
  tv->add_option("--split", tv_split)->capture_default_str();
  tv->add_option("--extra-corpus", tv_extra, "Additional text files to include");
  tv->add_option("--size", tv_size)->capture_default_str();
  tv->add_option("--out", tv_out)->capture_default_str();

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "Masked-language-model pretraining on in-domain text");
  ModelFlags pt_model;
  pt_model.attach(pt);
  std::string pt_vocab = "vocab.txt", pt_corpus, pt_init, pt_out = "pretrained.ckpt";
  std::size_t pt_steps = 500;
  DomainOptions pt_opts;
  pt->add_option("--vocab", pt_vocab)->capture_default_str();
  pt->add_option("--corpus", pt_corpus, "One text per line; a TAB separates two segments")->required();
  pt->add_option("--init", pt_init, "Continue from this checkpoint");
  pt->add_option("--steps", pt_steps)->capture_default_str();
  pt->add_option("--batch-size", pt_opts.batch_size)->capture_default_str();
  pt->add_option("--mask-rate", pt_opts.mask_rate)->capture_default_str();
  pt->add_option("--lr", pt_opts.learning_rate)->capture_default_str();
  pt->add_option("--seed", pt_opts.seed)->capture_default_str();
  pt->add_option("--out", pt_out)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Fine-tune a classifier");
  ModelFlags tr_model;
  tr_model.attach(tr);
  TrainConfig tcfg;
  std::string tr_split = "split", tr_vocab = "vocab.txt", tr_init, tr_out = "model.ckpt", tr_report;
  tr->add_option("--split", tr_split)->capture_default_str();
  tr->add_option("--vocab", tr_vocab)->capture_default_str();
  tr->add_option("--init", tr_init, "Start from a pretrained checkpoint");
  tr->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
  tr->add_option("--lr", tcfg.learning_rate)->capture_default_str();
  tr->add_option("--epochs", tcfg.max_epochs)->capture_default_str();
  tr->add_option("--patience", tcfg.patience)->capture_default_str();
  tr->add_option("--threshold", tcfg.threshold)->capture_default_str();
  tr->add_option("--seed", tcfg.seed)->capture_default_str();
  tr->add_option("--out", tr_out)->capture_default_str();
  tr->add_option("--report", tr_report, "TrainReport JSON (default: <out>.report.json)");

  // corrupt
  auto* cr = app.add_subcommand("corrupt", "Pass the test split through the simulated speech channel");
  ChannelConfig ccfg;
  std::string cr_split = "split", cr_out = "speech", cr_confusions, cr_drugs;
  cr->add_option("--split", cr_split)->capture_default_str();
  cr->add_option("--out", cr_out)->capture_default_str();
  cr->add_option("--confusions", cr_confusions, "Confusion lexicon (TSV)");
  cr->add_option("--drugs", cr_drugs, "Drug lexicon for entity extraction");
  cr->add_option("--target-wer", ccfg.target_wer)->capture_default_str();
  cr->add_option("--substitution", ccfg.mix.substitution)->capture_default_str();
  cr->add_option("--deletion", ccfg.mix.deletion)->capture_default_str();
  cr->add_option("--insertion", ccfg.mix.insertion)->capture_default_str();
  cr->add_option("--seed", ccfg.seed)->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score checkpoints on the text and speech test sets");
  std::string ev_vocab = "vocab.txt", ev_text, ev_speech, ev_out;
  std::vector<std::string> ev_ckpts;
  double ev_threshold = 0.5;
  ev->add_option("--vocab", ev_vocab)->capture_default_str();
  ev->add_option("--text-test", ev_text, "Text-channel pairs (JSONL)");
  ev->add_option("--speech-test", ev_speech, "Relabeled speech-channel pairs (JSONL)");
  ev->add_option("--checkpoint", ev_ckpts, "NAME=PATH or PATH; repeatable")->required();
  ev->add_option("--threshold", ev_threshold)->capture_default_str();
  ev->add_option("--out", ev_out, "Directory for results.json and tables");

  // serve
  auto* sv = app.add_subcommand("serve", "Serve the HTTP validation API");
  std::string sv_ckpt, sv_vocab = "vocab.txt", sv_host = "127.0.0.1", sv_log;
  int sv_port = 8080;
  double sv_threshold = 0.5;
  sv->add_option("--checkpoint", sv_ckpt)->required();
  sv->add_option("--vocab", sv_vocab)->capture_default_str();
  sv->add_option("--host", sv_host)->capture_default_str();
  sv->add_option("--port", sv_port)->capture_default_str();
  sv->add_option("--threshold", sv_threshold)->capture_default_str();
  sv->add_option("--session-log", sv_log, "Append-only JSONL session log");

  // validate
  auto* va = app.add_subcommand("validate", "Score one diagnosis/prescription pair");
  std::string va_ckpt, va_vocab = "vocab.txt", va_diag, va_rx;
  std::optional<double> va_threshold;
  va->add_option("--checkpoint", va_ckpt)->required();
  va->add_option("--vocab", va_vocab)->capture_default_str();
  va->add_option("--diagnosis", va_diag)->required();
  va->add_option("--prescription", va_rx)->required();
  va->add_option("--threshold", va_threshold);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto& table = CompatibilityTable::defaults();
      const auto records = generate_synthetic_records(gen_records, table, gen_seed);
      write_records(gen_out, records);
      std::cout << "wrote " << records.size() << " records to " << gen_out << "\n";
      if (!gen_domain.empty()) {
        const auto extra = generate_synthetic_records(gen_domain_records, table, mix_seed(gen_seed, 0x646f6d));
        const auto pairs = extract_correlated_pairs(extra).pairs;
        std::ostringstream out;
        for (const auto& p : pairs) out << p.prescription << "\t" << p.context << "\n";
        write_file(gen_domain, out.str());
        std::cout << "wrote " << pairs.size() << " domain texts to " << gen_domain << "\n";
      }
    } else if (*mk) {
      std::optional<AbbreviationTable> abbrev;
      if (!mk_abbrev.empty()) abbrev = AbbreviationTable::load(mk_abbrev);
      std::optional<DrugLexicon> drugs_storage;
      const DrugLexicon& drugs = drugs_from(mk_drugs, drugs_storage);
      const auto ingest = ingest_records(mk_records);
      for (const auto& w : ingest.warnings) std::cerr << "warning: " << w << "\n";
      ExtractOptions eo;
      if (abbrev) eo.abbreviations = &*abbrev;
      if (mk_filter) eo.domain_lexicon = &drugs;
      const auto extracted = extract_correlated_pairs(ingest.records, eo);
      if (mk_polarity == "discard_if_similar") {
        sampler.discard_polarity = DiscardPolarity::kDiscardIfSimilar;
      } else if (mk_polarity == "discard_if_distant") {
        sampler.discard_polarity = DiscardPolarity::kDiscardIfDistant;
      } else {
        throw std::invalid_argument("unknown polarity " + mk_polarity);
      }
      if (mk_order == "duplicate_then_split") {
        sampler.split_order = SplitOrder::kDuplicateThenSplit;
      } else if (mk_order == "split_then_duplicate") {
        sampler.split_order = SplitOrder::kSplitThenDuplicate;
      } else {
        throw std::invalid_argument("unknown split order " + mk_order);
      }
      if (sampler.target_negatives == 0)
        sampler.target_negatives = extracted.pairs.size() * static_cast<std::size_t>(sampler.duplication_factor);
      const auto neg = sample_negatives(extracted.pairs, sampler);
      if (neg.shortfall > 0) std::cerr << "warning: negative sampling fell short by " << neg.shortfall << "\n";
      auto all = extracted.pairs;
      all.insert(all.end(), neg.pairs.begin(), neg.pairs.end());
      const auto split = balance_and_split(all, sampler);
      save_split(mk_out, split, sampler);
      std::cout << "pairs: " << extracted.pairs.size() << " correlated (" << extracted.dropped_empty
                << " empty, " << extracted.dropped_out_of_domain << " out of domain dropped), "
                << neg.pairs.size() << " negatives\n"
                << "split: train " << split.train.size() << ", validation " << split.validation.size()
                << ", test " << split.test.size() << " -> " << mk_out << "\n";
    } else if (*tv) {
      const auto split = load_split(tv_split);
      std::vector<std::string> corpus;
      for (const auto& p : split.train) {
        corpus.push_back(p.prescription);
        corpus.push_back(p.context);
      }
      for (const auto& f : tv_extra) {
        for (auto& line : read_lines(f)) {
          for (auto& part : split_words(line)) corpus.push_back(std::move(part));
        }
      }
      const auto vocab = train_vocabulary(corpus, tv_size, 0);
      vocab.save(tv_out);
      std::cout << "vocabulary of " << vocab.size() << " tokens (hash " << vocab.hash() << ") -> " << tv_out << "\n";
    } else if (*pt) {
      const auto vocab = Vocabulary::load(pt_vocab);
      ModelState base = pt_init.empty() ? ModelState::initialize(pt_model.build(vocab.size()))
                                        : load_checkpoint(pt_init);
      base.metadata.vocab_hash = vocab.hash();
      const auto corpus = read_lines(pt_corpus);
      const auto state = domain_variant(base, corpus, pt_steps, vocab, pt_opts);
      save_checkpoint(pt_out, state);
      std::cout << "pretrained " << state.metadata.variant_name << " for " << pt_steps << " steps -> " << pt_out << "\n";
    } else if (*tr) {
      const auto split = load_split(tr_split);
      const auto vocab = Vocabulary::load(tr_vocab);
      std::optional<ModelState> init;
      ModelConfig mcfg;
      if (!tr_init.empty()) {
        init = load_checkpoint(tr_init);
        const auto head = parse_head_variant(tr_model.variant);
        if (tr->get_option("--variant")->count() > 0 && head != init->config().head_variant)
          init = with_head(*init, head, tcfg.seed);
        mcfg = init->config();
      } else {
        tr_model.seed = tcfg.seed;
        mcfg = tr_model.build(vocab.size());
      }
      auto result = train(split, tcfg, mcfg, vocab, init);
      save_checkpoint(tr_out, result.state);
      result.report.checkpoint = tr_out;
      const std::string report_path = tr_report.empty() ? tr_out + ".report.json" : tr_report;
      write_file(report_path, result.report.to_json().dump(2) + "\n");
      std::cout << result.report.render_table() << "best epoch " << result.report.best_epoch << " -> "
                << tr_out << " (report " << report_path << ")\n";
      if (result.report.diverged) return 2;
    } else if (*cr) {
      const auto split = load_split(cr_split);
      const ConfusionLexicon lexicon =
          cr_confusions.empty() ? ConfusionLexicon::defaults() : ConfusionLexicon::load(cr_confusions);
      std::optional<DrugLexicon> drugs_storage;
      const DrugLexicon& drugs = drugs_from(cr_drugs, drugs_storage);
      const auto corruptions = corrupt_pairs(split.test, lexicon, ccfg);
      std::vector<std::string> transcripts, refs;
      for (std::size_t i = 0; i < corruptions.size(); ++i) {
        transcripts.push_back(corruptions[i].transcript);
        refs.push_back(split.test[i].prescription);
      }
      const auto result = relabel(split.test, transcripts, drugs);
      write_pairs(fs::path(cr_out) / "speech_test.jsonl", result.pairs);
      std::vector<nlohmann::json> reports;
      for (const auto& r : result.reports) reports.push_back(r.to_json());
      write_jsonl(fs::path(cr_out) / "channel_reports.jsonl", reports);
      const double wer = corpus_word_error_rate(refs, transcripts);
      nlohmann::json meta = {{"channel", ccfg.to_json()},
                             {"measured_wer", wer},
                             {"pairs", result.pairs.size()},
                             {"flips", result.flips},
                             {"source_split", cr_split}};
      write_file(fs::path(cr_out) / "channel.json", meta.dump(2) + "\n");
      std::cout << "corpus WER " << wer << ", " << result.flips << " of " << result.pairs.size()
                << " labels flipped -> " << cr_out << "\n";
    } else if (*ev) {
      const auto vocab = Vocabulary::load(ev_vocab);
      std::vector<LabeledPair> text, speech;
      if (!ev_text.empty()) text = read_pairs(ev_text);
      if (!ev_speech.empty()) speech = read_pairs(ev_speech);
      std::vector<BenchmarkVariant> variants;
      for (const auto& c : ev_ckpts) {
        const auto eq = c.find('=');
        if (eq == std::string::npos) {
          variants.push_back({"", c});
        } else {
          variants.push_back({c.substr(0, eq), c.substr(eq + 1)});
        }
      }
      const auto result = run_benchmark(variants, text, speech, vocab, ev_threshold);
      for (const auto& n : result.notices) std::cerr << "notice: " << n << "\n";
      std::cout << result.text_table << "\n" << result.speech_table;
      if (!ev_out.empty()) {
        write_file(fs::path(ev_out) / "results.json", result.to_json().dump(2) + "\n");
        write_file(fs::path(ev_out) / "text_table.txt", result.text_table);
        write_file(fs::path(ev_out) / "speech_table.txt", result.speech_table);
      }
    } else if (*sv) {
      ServiceOptions opts;
      opts.threshold = sv_threshold;
      opts.session_log = sv_log;
      ValidationService service(opts);
      HttpServer server(service);
      service.load(sv_ckpt, sv_vocab);
      std::cout << "serving " << sv_ckpt << " on " << sv_host << ":" << sv_port << std::endl;
      if (!server.listen(sv_host, sv_port)) {
        std::cerr << "error: could not listen on " << sv_host << ":" << sv_port << "\n";
        return 1;
      }
    } else if (*va) {
      ValidationService service;
      service.load(va_ckpt, va_vocab);
      nlohmann::json req = {{"diagnosis", va_diag}, {"prescription", va_rx}};
      if (va_threshold) req["threshold"] = *va_threshold;
      const auto reply = service.validate(req);
      std::cout << reply.body.dump(2) << "\n";
      return reply.status == 200 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
