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

#include "rxv/model_state.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {
namespace {

constexpr char kMagic[8] = {'R', 'X', 'V', 'C', 'K', 'P', 'T', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

enum class Init { kEmbedding, kXavier, kOnes, kZeros, kLstm, kLstmBias };

struct Spec {
  std::string name;
  Eigen::Index rows, cols;
  Init init;
};

// Names, shapes and init rules for every tensor a config requires, in a
// stable order; also fills the layout indices.
std::vector<Spec> tensor_specs(const ModelConfig& cfg, ParamLayout& layout) {
  const auto d = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto f = static_cast<Eigen::Index>(cfg.ffn_dim);
  const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto h = static_cast<Eigen::Index>(cfg.lstm_hidden);
  std::vector<Spec> specs;
  auto add = [&](std::string name, Eigen::Index r, Eigen::Index c, Init init) {
    specs.push_back({std::move(name), r, c, init});
    return static_cast<int>(specs.size() - 1);
  };
  layout = ParamLayout{};
  layout.token = add("embed.token", v, d, Init::kEmbedding);
  layout.position = add("embed.position", static_cast<Eigen::Index>(cfg.max_len), d, Init::kEmbedding);
  layout.segment = add("embed.segment", 2, d, Init::kEmbedding);
  layout.emb_gamma = add("embed.ln.gamma", 1, d, Init::kOnes);
  layout.emb_beta = add("embed.ln.beta", 1, d, Init::kZeros);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    ParamLayout::Layer L{};
    L.wq = add(p + "attn.wq", d, d, Init::kXavier);
    L.bq = add(p + "attn.bq", 1, d, Init::kZeros);
    L.wk = add(p + "attn.wk", d, d, Init::kXavier);
    L.bk = add(p + "attn.bk", 1, d, Init::kZeros);
    L.wv = add(p + "attn.wv", d, d, Init::kXavier);
    L.bv = add(p + "attn.bv", 1, d, Init::kZeros);
    L.wo = add(p + "attn.wo", d, d, Init::kXavier);
    L.bo = add(p + "attn.bo", 1, d, Init::kZeros);
    L.ln1_gamma = add(p + "ln1.gamma", 1, d, Init::kOnes);
    L.ln1_beta = add(p + "ln1.beta", 1, d, Init::kZeros);
    L.w1 = add(p + "ffn.w1", d, f, Init::kXavier);
    L.b1 = add(p + "ffn.b1", 1, f, Init::kZeros);
    L.w2 = add(p + "ffn.w2", f, d, Init::kXavier);
    L.b2 = add(p + "ffn.b2", 1, d, Init::kZeros);
    L.ln2_gamma = add(p + "ln2.gamma", 1, d, Init::kOnes);
    L.ln2_beta = add(p + "ln2.beta", 1, d, Init::kZeros);
    layout.layers.push_back(L);
  }
  layout.mlm_bias = add("mlm.bias", 1, v, Init::kZeros);
  if (cfg.head_variant == HeadVariant::kClmLstm) {
    for (auto* dir : {&layout.lstm_fwd, &layout.lstm_bwd}) {
      const std::string p = dir == &layout.lstm_fwd ? "lstm.fwd." : "lstm.bwd.";
      dir->wx = add(p + "wx", d, 4 * h, Init::kLstm);
      dir->wh = add(p + "wh", h, 4 * h, Init::kLstm);
      dir->b = add(p + "b", 1, 4 * h, Init::kLstmBias);
    }
  }
  const auto in = static_cast<Eigen::Index>(cfg.head_input_dim());
  if (cfg.head_variant == HeadVariant::kBaselineLinear) {
    layout.head_out_w = add("head.out.w", in, 1, Init::kXavier);
    layout.head_out_b = add("head.out.b", 1, 1, Init::kZeros);
  } else {
    layout.head_hidden_w = add("head.hidden.w", in, d, Init::kXavier);
    layout.head_hidden_b = add("head.hidden.b", 1, d, Init::kZeros);
    layout.head_out_w = add("head.out.w", d, 1, Init::kXavier);
    layout.head_out_b = add("head.out.b", 1, 1, Init::kZeros);
  }
  return specs;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

}  // namespace

std::string_view to_string(HeadVariant variant) {
  switch (variant) {
    case HeadVariant::kBaselineLinear: return "baseline_linear";
    case HeadVariant::kMlp: return "mlp";
    case HeadVariant::kClm: return "clm";
    case HeadVariant::kClmLstm: return "clm_lstm";
  }
  return "clm";
}

HeadVariant parse_head_variant(std::string_view name) {
  if (name == "baseline_linear" || name == "baseline") return HeadVariant::kBaselineLinear;
  if (name == "mlp") return HeadVariant::kMlp;
  if (name == "clm") return HeadVariant::kClm;
  if (name == "clm_lstm") return HeadVariant::kClmLstm;
  throw std::invalid_argument("unknown head variant: " + std::string(name));
}

std::string variant_display_name(HeadVariant variant, bool domain_pretrained) {
  switch (variant) {
    case HeadVariant::kBaselineLinear: return domain_pretrained ? "BERT_bio" : "BERT";
    case HeadVariant::kMlp: return domain_pretrained ? "BERT_biomlp" : "BERT_mlp";
    case HeadVariant::kClm: return domain_pretrained ? "CLM_bio" : "CLM";
    case HeadVariant::kClmLstm: return domain_pretrained ? "CLM_biolstm" : "CLM_lstm";
  }
  return "CLM";
}

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(4)) throw std::invalid_argument("vocab_size too small");
  if (max_len < 5) throw std::invalid_argument("max_len must be >= 5");
  if (hidden_dim == 0 || num_heads == 0 || hidden_dim % num_heads != 0) {
    throw std::invalid_argument("hidden_dim must be divisible by num_heads");
  }
  if (num_layers < 1) throw std::invalid_argument("num_layers must be >= 1");
  if (ffn_dim == 0) throw std::invalid_argument("ffn_dim must be >= 1");
  if (head_variant == HeadVariant::kClmLstm && lstm_hidden == 0) {
    throw std::invalid_argument("lstm_hidden must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
}

std::size_t ModelConfig::head_input_dim() const {
  switch (head_variant) {
    case HeadVariant::kBaselineLinear:
    case HeadVariant::kMlp: return hidden_dim;
    case HeadVariant::kClm: return 3 * hidden_dim;
    case HeadVariant::kClmLstm: return hidden_dim + 4 * lstm_hidden;
  }
  return hidden_dim;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},   {"max_len", max_len},     {"hidden_dim", hidden_dim},
          {"num_layers", num_layers},   {"num_heads", num_heads}, {"ffn_dim", ffn_dim},
          {"lstm_hidden", lstm_hidden}, {"dropout", dropout},
          {"head_variant", std::string(to_string(head_variant))}, {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_len = j.value("max_len", c.max_len);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.head_variant = parse_head_variant(j.value("head_variant", std::string("clm")));
  c.seed = j.value("seed", c.seed);
  return c;
}

ModelState::ModelState(ModelConfig cfg, std::vector<NamedTensor> tensors)
    : config_(std::move(cfg)), tensors_(std::move(tensors)) {
  tensor_specs(config_, layout_);
}

ModelState ModelState::initialize(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  const auto specs = tensor_specs(cfg, layout);
  Rng rng(mix_seed(cfg.seed, 0x696e6974));
  std::vector<NamedTensor> tensors;
  tensors.reserve(specs.size());
  const double lstm_scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg.lstm_hidden)));
  for (const auto& s : specs) {
    Eigen::MatrixXd m(s.rows, s.cols);
    switch (s.init) {
      case Init::kEmbedding: {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
        break;
      }
      case Init::kXavier: {
        std::normal_distribution<double> dist(
            0.0, std::sqrt(2.0 / static_cast<double>(s.rows + s.cols)));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
        break;
      }
      case Init::kLstm: {
        std::uniform_real_distribution<double> dist(-lstm_scale, lstm_scale);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
        break;
      }
      case Init::kLstmBias: {
        m.setZero();
        const auto h = static_cast<Eigen::Index>(cfg.lstm_hidden);
        m.block(0, h, 1, h).setOnes();  // forget gate
        break;
      }
      case Init::kOnes: m.setOnes(); break;
      case Init::kZeros: m.setZero(); break;
    }
    tensors.push_back({s.name, std::move(m)});
  }
  ModelState state(cfg, std::move(tensors));
  state.metadata.variant_name = variant_display_name(cfg.head_variant, false);
  return state;
}

ModelState with_head(const ModelState& base, HeadVariant head, std::uint64_t seed) {
  ModelConfig cfg = base.config();
  cfg.head_variant = head;
  cfg.seed = seed;
  ModelState out = ModelState::initialize(cfg);
  for (auto& t : out.tensors()) {
    if (t.name.starts_with("head.") || t.name.starts_with("lstm.")) continue;
    const int src = base.index_of(t.name);
    if (src >= 0) t.value = base.param(src);
  }
  out.metadata = base.metadata;
  out.metadata.variant_name = variant_display_name(head, base.metadata.domain_pretrained);
  return out;
}

int ModelState::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ModelState::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

Gradients ModelState::zero_gradients() const {
  Gradients g;
  g.reserve(tensors_.size());
  for (const auto& t : tensors_) g.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
  return g;
}

bool identical_parameters(const ModelState& a, const ModelState& b) {
  if (a.tensors().size() != b.tensors().size()) return false;
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    const auto& x = a.tensors()[i];
    const auto& y = b.tensors()[i];
    if (x.name != y.name || x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols()) {
      return false;
    }
    if (std::memcmp(x.value.data(), y.value.data(),
                    static_cast<std::size_t>(x.value.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  nlohmann::json header;
  header["config"] = state.config().to_json();
  header["metadata"] = {{"variant_name", state.metadata.variant_name},
                        {"domain_pretrained", state.metadata.domain_pretrained},
                        {"domain_steps", state.metadata.domain_steps},
                        {"vocab_hash", state.metadata.vocab_hash}};
  header["step"] = state.step;
  auto& list = header["tensors"] = nlohmann::json::array();
  for (const auto& t : state.tensors()) {
    list.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : state.tensors()) {
    // Eigen storage is column-major; the layout is part of the format.
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * static_cast<Eigen::Index>(sizeof(double))));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint64_t header_len = read_u64(in);
  if (header_len > (1u << 26)) throw std::runtime_error("checkpoint header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("checkpoint truncated");
  const auto header = nlohmann::json::parse(text);

  const ModelConfig cfg = ModelConfig::from_json(header.at("config"));
  cfg.validate();
  ParamLayout layout;
  const auto specs = tensor_specs(cfg, layout);
  const auto& list = header.at("tensors");
  if (list.size() != specs.size()) {
    throw std::runtime_error("checkpoint declares " + std::to_string(list.size()) +
                             " tensors, config requires " + std::to_string(specs.size()));
  }
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& entry = list[i];
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (name != specs[i].name || rows != specs[i].rows || cols != specs[i].cols) {
      throw std::runtime_error("checkpoint tensor mismatch at " + std::to_string(i) + ": got " +
                               name + " " + std::to_string(rows) + "x" + std::to_string(cols) +
                               ", expected " + specs[i].name + " " + std::to_string(specs[i].rows) +
                               "x" + std::to_string(specs[i].cols));
    }
    Eigen::MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(double))));
    if (!in) throw std::runtime_error("checkpoint truncated in tensor " + name);
    tensors.push_back({name, std::move(m)});
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint has trailing bytes: " + path.string());
  }
  ModelState state(cfg, std::move(tensors));
  state.step = header.value("step", std::uint64_t{0});
  const auto& meta = header.at("metadata");
  state.metadata.variant_name = meta.value("variant_name", std::string());
  state.metadata.domain_pretrained = meta.value("domain_pretrained", false);
  state.metadata.domain_steps = meta.value("domain_steps", std::size_t{0});
  state.metadata.vocab_hash = meta.value("vocab_hash", std::string());
  return state;
}

AdamOptimizer::AdamOptimizer(const ModelState& state, AdamConfig cfg) : cfg_(cfg) {
  m_ = state.zero_gradients();
  v_ = state.zero_gradients();
}

void AdamOptimizer::step(ModelState& state, const Gradients& grads) {
  if (grads.size() != m_.size()) throw std::invalid_argument("gradient layout mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].cwiseProduct(grads[i]);
    auto& p = state.param(static_cast<int>(i));
    p.array() -= cfg_.learning_rate * (m_[i].array() / bc1) /
                 ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
  ++state.step;
}

}  // namespace rxv
