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

#include "rxv/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rxv/util.hpp"

namespace rxv {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kLayerNormEps = 1e-12;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct LnCache {
  Mat xhat;
  Vec inv_std;
};

Mat ln_forward(const Mat& x, const Mat& gamma, const Mat& beta, LnCache& c) {
  const double d = static_cast<double>(x.cols());
  const Vec mean = x.rowwise().mean();
  const Mat centered = x.colwise() - mean;
  const Vec var = centered.array().square().rowwise().sum() / d;
  c.inv_std = (var.array() + kLayerNormEps).rsqrt().matrix();
  c.xhat = centered.array().colwise() * c.inv_std.array();
  return (c.xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
}

Mat ln_backward(const Mat& dout, const LnCache& c, const Mat& gamma, Mat& dgamma, Mat& dbeta) {
  dgamma.row(0) += (dout.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dout.colwise().sum();
  const Mat dxhat = dout.array().rowwise() * gamma.row(0).array();
  const Vec m1 = dxhat.rowwise().mean();
  const Vec m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  Mat dx = dxhat.colwise() - m1;
  dx.array() -= c.xhat.array().colwise() * m2.array();
  dx.array().colwise() *= c.inv_std.array();
  return dx;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(*rng) < p ? 0.0 : keep;
  return m;
}

void apply_mask(Mat& x, const Mat& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void check_finite(const Mat& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError("non-finite activation in " + where);
}

struct LayerCache {
  Mat x, q, k, v, a;
  std::vector<Mat> probs;
  Mat attn_drop;
  LnCache ln1;
  Mat y, h1, g;
  Mat ffn_drop;
  LnCache ln2;
};

struct LstmCache {
  Mat x;      // steps x d, in processing order
  Mat gates;  // steps x 4H: i, f, g, o after their nonlinearities
  Mat c, tanh_c, h;
};

struct HeadCache {
  Mat cls;
  std::vector<int> word_pos;
  Mat pool_src;  // rows = pooled positions
  Eigen::VectorXi argmax;
  Mat feat, feat_drop, u, a;
  LstmCache fwd, bwd;
};

struct SequenceCache {
  std::vector<int> ids, segments, key_mask;
  LnCache emb_ln;
  Mat emb_drop;
  std::vector<LayerCache> layers;
  Mat z;
  HeadCache head;
};

class Network {
 public:
  explicit Network(const ModelState& state)
      : s_(state), cfg_(state.config()), L_(state.layout()) {}

  Mat encode(const TokenizedPair& pair, Rng* rng, SequenceCache& c) const {
    const std::size_t n = pair.ids.size();
    if (n > cfg_.max_len) throw std::out_of_range("sequence longer than max_len");
    if (pair.segments.size() != n || pair.mask.size() != n) {
      throw std::invalid_argument("ids, segments and mask lengths differ");
    }
    c.ids = pair.ids;
    c.segments = pair.segments;
    c.key_mask = pair.mask;
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const Mat& tok = s_.param(L_.token);
    const Mat& pos = s_.param(L_.position);
    const Mat& seg = s_.param(L_.segment);
    Mat e(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i) {
      const int id = pair.ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(cfg_.vocab_size));
      }
      const int sg = pair.segments[i];
      if (sg != 0 && sg != 1) throw std::out_of_range("segment id must be 0 or 1");
      const auto r = static_cast<Eigen::Index>(i);
      e.row(r) = tok.row(id) + pos.row(r) + seg.row(sg);
    }
    Mat x = ln_forward(e, s_.param(L_.emb_gamma), s_.param(L_.emb_beta), c.emb_ln);
    c.emb_drop = dropout_mask(x.rows(), x.cols(), cfg_.dropout, rng);
    apply_mask(x, c.emb_drop);
    check_finite(x, "embedding");

    c.layers.resize(cfg_.num_layers);
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      x = layer_forward(x, L_.layers[l], c.key_mask, rng, c.layers[l]);
      check_finite(x, "encoder layer " + std::to_string(l));
    }
    c.z = x;
    return x;
  }

  void encode_backward(Mat dz, const SequenceCache& c, Gradients& g) const {
    for (std::size_t l = cfg_.num_layers; l-- > 0;) {
      dz = layer_backward(dz, L_.layers[l], c.layers[l], g);
    }
    apply_mask(dz, c.emb_drop);
    const Mat de = ln_backward(dz, c.emb_ln, s_.param(L_.emb_gamma), g[L_.emb_gamma], g[L_.emb_beta]);
    Mat& gtok = g[static_cast<std::size_t>(L_.token)];
    Mat& gpos = g[static_cast<std::size_t>(L_.position)];
    Mat& gseg = g[static_cast<std::size_t>(L_.segment)];
    for (std::size_t i = 0; i < c.ids.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      gtok.row(c.ids[i]) += de.row(r);
      gpos.row(r) += de.row(r);
      gseg.row(c.segments[i]) += de.row(r);
    }
  }

  double head_forward(const TokenizedPair& pair, const Mat& z, Rng* rng, HeadCache& h) const {
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    h.cls = z.row(0);
    h.word_pos = pooled_positions(pair);
    switch (cfg_.head_variant) {
      case HeadVariant::kBaselineLinear:
      case HeadVariant::kMlp:
        h.feat = h.cls;
        break;
      case HeadVariant::kClm:
      case HeadVariant::kClmLstm: {
        Mat words(static_cast<Eigen::Index>(h.word_pos.size()), d);
        for (std::size_t i = 0; i < h.word_pos.size(); ++i) {
          words.row(static_cast<Eigen::Index>(i)) = z.row(h.word_pos[i]);
        }
        if (cfg_.head_variant == HeadVariant::kClm) {
          h.pool_src = std::move(words);
        } else {
          h.pool_src = bilstm_forward(words, h);
        }
        const Eigen::Index w = h.pool_src.cols();
        h.feat.resize(1, d + 2 * w);
        h.feat.leftCols(d) = h.cls;
        h.argmax.setZero(w);
        if (h.pool_src.rows() == 0) {
          h.feat.rightCols(2 * w).setZero();
        } else {
          for (Eigen::Index col = 0; col < w; ++col) {
            Eigen::Index arg = 0;
            h.feat(0, d + col) = h.pool_src.col(col).maxCoeff(&arg);
            h.argmax(col) = static_cast<int>(arg);
          }
          h.feat.block(0, d + w, 1, w) = h.pool_src.colwise().mean();
        }
        break;
      }
    }
    Mat f = h.feat;
    h.feat_drop = dropout_mask(f.rows(), f.cols(), cfg_.dropout, rng);
    apply_mask(f, h.feat_drop);
    const Mat& wout = s_.param(L_.head_out_w);
    const double bout = s_.param(L_.head_out_b)(0, 0);
    if (cfg_.head_variant == HeadVariant::kBaselineLinear) {
      h.a = f;  // input of the output layer
      return (f * wout)(0, 0) + bout;
    }
    h.u = (f * s_.param(L_.head_hidden_w)).rowwise() + s_.param(L_.head_hidden_b).row(0);
    h.a = h.u.array().tanh();
    return (h.a * wout)(0, 0) + bout;
  }

  // Returns d(loss)/d(z) for the encoder output.
  Mat head_backward(double dlogit, const HeadCache& h, Eigen::Index n, Gradients& g) const {
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const Mat& wout = s_.param(L_.head_out_w);
    g[static_cast<std::size_t>(L_.head_out_w)] += h.a.transpose() * dlogit;
    g[static_cast<std::size_t>(L_.head_out_b)](0, 0) += dlogit;
    Mat dfeat;
    if (cfg_.head_variant == HeadVariant::kBaselineLinear) {
      dfeat = dlogit * wout.transpose();
    } else {
      const Mat da = dlogit * wout.transpose();
      const Mat du = da.array() * (1.0 - h.a.array().square());
      Mat f = h.feat;
      apply_mask(f, h.feat_drop);
      g[static_cast<std::size_t>(L_.head_hidden_w)] += f.transpose() * du;
      g[static_cast<std::size_t>(L_.head_hidden_b)] += du;
      dfeat = du * s_.param(L_.head_hidden_w).transpose();
    }
    apply_mask(dfeat, h.feat_drop);

    Mat dz = Mat::Zero(n, d);
    dz.row(0) += dfeat.leftCols(d);
    if (cfg_.head_variant == HeadVariant::kClm || cfg_.head_variant == HeadVariant::kClmLstm) {
      const Eigen::Index rows = h.pool_src.rows();
      const Eigen::Index w = h.pool_src.cols();
      if (rows > 0) {
        Mat dsrc = Mat::Zero(rows, w);
        for (Eigen::Index col = 0; col < w; ++col) dsrc(h.argmax(col), col) += dfeat(0, d + col);
        dsrc.rowwise() += dfeat.block(0, d + w, 1, w).row(0) / static_cast<double>(rows);
        Mat dwords = cfg_.head_variant == HeadVariant::kClm ? dsrc : bilstm_backward(dsrc, h, g);
        for (std::size_t i = 0; i < h.word_pos.size(); ++i) {
          dz.row(h.word_pos[i]) += dwords.row(static_cast<Eigen::Index>(i));
        }
      }
    }
    return dz;
  }

  // Masked-LM loss over `targets` (position, original id); adds d(loss)/dz
  // scaled by `scale` into dz and parameter gradients when g is non-null.
  double mlm_head(const Mat& z, const std::vector<std::pair<int, int>>& targets, double scale,
                  Mat* dz, Gradients* g) const {
    const Mat& tok = s_.param(L_.token);
    const Mat& bias = s_.param(L_.mlm_bias);
    double loss = 0.0;
    for (const auto& [position, original] : targets) {
      Eigen::RowVectorXd logits = z.row(position) * tok.transpose() + bias.row(0);
      const double mx = logits.maxCoeff();
      Eigen::RowVectorXd p = (logits.array() - mx).exp();
      const double sum = p.sum();
      loss += -(logits(original) - mx - std::log(sum));
      if (g) {
        p /= sum;
        p(original) -= 1.0;
        p *= scale;
        dz->row(position) += p * tok;
        (*g)[static_cast<std::size_t>(L_.token)] += p.transpose() * z.row(position);
        (*g)[static_cast<std::size_t>(L_.mlm_bias)].row(0) += p;
      }
    }
    return loss;
  }

 private:
  Mat layer_forward(const Mat& x, const ParamLayout::Layer& P, const std::vector<int>& key_mask,
                    Rng* rng, LayerCache& c) const {
    const auto n = x.rows();
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    c.x = x;
    c.q = (x * s_.param(P.wq)).rowwise() + s_.param(P.bq).row(0);
    c.k = (x * s_.param(P.wk)).rowwise() + s_.param(P.bk).row(0);
    c.v = (x * s_.param(P.wv)).rowwise() + s_.param(P.bv).row(0);
    c.a.resize(n, d);
    c.probs.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Mat s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (key_mask[static_cast<std::size_t>(j)] == 0) {
          s.col(j).setConstant(-std::numeric_limits<double>::infinity());
        }
      }
      const Vec mx = s.rowwise().maxCoeff();
      Mat p = (s.colwise() - mx).array().exp();
      const Vec sums = p.rowwise().sum();
      p.array().colwise() /= sums.array();
      c.a.middleCols(h * dh, dh) = p * c.v.middleCols(h * dh, dh);
      c.probs[static_cast<std::size_t>(h)] = std::move(p);
    }
    Mat o = (c.a * s_.param(P.wo)).rowwise() + s_.param(P.bo).row(0);
    c.attn_drop = dropout_mask(o.rows(), o.cols(), cfg_.dropout, rng);
    apply_mask(o, c.attn_drop);
    c.y = ln_forward(x + o, s_.param(P.ln1_gamma), s_.param(P.ln1_beta), c.ln1);

    c.h1 = (c.y * s_.param(P.w1)).rowwise() + s_.param(P.b1).row(0);
    c.g = c.h1.unaryExpr(&gelu);
    Mat f = (c.g * s_.param(P.w2)).rowwise() + s_.param(P.b2).row(0);
    c.ffn_drop = dropout_mask(f.rows(), f.cols(), cfg_.dropout, rng);
    apply_mask(f, c.ffn_drop);
    return ln_forward(c.y + f, s_.param(P.ln2_gamma), s_.param(P.ln2_beta), c.ln2);
  }

  Mat layer_backward(const Mat& dz, const ParamLayout::Layer& P, const LayerCache& c,
                     Gradients& g) const {
    auto G = [&](int idx) -> Mat& { return g[static_cast<std::size_t>(idx)]; };
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Mat dr2 = ln_backward(dz, c.ln2, s_.param(P.ln2_gamma), G(P.ln2_gamma), G(P.ln2_beta));
    Mat df = dr2;
    apply_mask(df, c.ffn_drop);
    G(P.w2) += c.g.transpose() * df;
    G(P.b2).row(0) += df.colwise().sum();
    Mat dh1 = df * s_.param(P.w2).transpose();
    dh1.array() *= c.h1.unaryExpr(&gelu_grad).array();
    G(P.w1) += c.y.transpose() * dh1;
    G(P.b1).row(0) += dh1.colwise().sum();
    const Mat dy = dr2 + dh1 * s_.param(P.w1).transpose();

    const Mat dr1 = ln_backward(dy, c.ln1, s_.param(P.ln1_gamma), G(P.ln1_gamma), G(P.ln1_beta));
    Mat dout = dr1;
    apply_mask(dout, c.attn_drop);
    G(P.wo) += c.a.transpose() * dout;
    G(P.bo).row(0) += dout.colwise().sum();
    const Mat da = dout * s_.param(P.wo).transpose();

    Mat dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Mat& p = c.probs[static_cast<std::size_t>(h)];
      const auto dah = da.middleCols(h * dh, dh);
      const Mat dp = dah * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * dah;
      const Vec rowdot = (dp.array() * p.array()).rowwise().sum();
      Mat ds = p.array() * (dp.colwise() - rowdot).array();
      ds *= scale;
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    G(P.wq) += c.x.transpose() * dq;
    G(P.bq).row(0) += dq.colwise().sum();
    G(P.wk) += c.x.transpose() * dk;
    G(P.bk).row(0) += dk.colwise().sum();
    G(P.wv) += c.x.transpose() * dv;
    G(P.bv).row(0) += dv.colwise().sum();
    return dr1 + dq * s_.param(P.wq).transpose() + dk * s_.param(P.wk).transpose() +
           dv * s_.param(P.wv).transpose();
  }

  void lstm_forward(const Mat& x, const ParamLayout::Lstm& P, LstmCache& c) const {
    const auto H = static_cast<Eigen::Index>(cfg_.lstm_hidden);
    const Eigen::Index steps = x.rows();
    c.x = x;
    c.gates.resize(steps, 4 * H);
    c.c.resize(steps, H);
    c.tanh_c.resize(steps, H);
    c.h.resize(steps, H);
    Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(H);
    Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(H);
    const Mat& wx = s_.param(P.wx);
    const Mat& wh = s_.param(P.wh);
    const Mat& b = s_.param(P.b);
    for (Eigen::Index t = 0; t < steps; ++t) {
      Eigen::RowVectorXd z = x.row(t) * wx + h_prev * wh + b.row(0);
      for (Eigen::Index j = 0; j < H; ++j) {
        z(j) = sigmoid(z(j));
        z(H + j) = sigmoid(z(H + j));
        z(2 * H + j) = std::tanh(z(2 * H + j));
        z(3 * H + j) = sigmoid(z(3 * H + j));
      }
      c.gates.row(t) = z;
      const Eigen::RowVectorXd cell = z.segment(H, H).cwiseProduct(c_prev) +
                                      z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
      c.c.row(t) = cell;
      c.tanh_c.row(t) = cell.array().tanh();
      h_prev = z.segment(3 * H, H).cwiseProduct(c.tanh_c.row(t));
      c.h.row(t) = h_prev;
      c_prev = cell;
    }
  }

  Mat lstm_backward(const Mat& dh_out, const ParamLayout::Lstm& P, const LstmCache& c,
                    Gradients& g) const {
    const auto H = static_cast<Eigen::Index>(cfg_.lstm_hidden);
    const Eigen::Index steps = c.x.rows();
    const Mat& wx = s_.param(P.wx);
    const Mat& wh = s_.param(P.wh);
    Mat& gwx = g[static_cast<std::size_t>(P.wx)];
    Mat& gwh = g[static_cast<std::size_t>(P.wh)];
    Mat& gb = g[static_cast<std::size_t>(P.b)];
    Mat dx(steps, c.x.cols());
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(H);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(H);
    for (Eigen::Index t = steps; t-- > 0;) {
      const auto gates = c.gates.row(t);
      const auto i = gates.segment(0, H).array();
      const auto f = gates.segment(H, H).array();
      const auto gg = gates.segment(2 * H, H).array();
      const auto o = gates.segment(3 * H, H).array();
      const auto tc = c.tanh_c.row(t).array();
      const Eigen::RowVectorXd dh = dh_out.row(t) + dh_next;
      const Eigen::ArrayXXd dha = dh.array();
      const Eigen::RowVectorXd dc = (dha * o * (1.0 - tc.square())).matrix() + dc_next;
      Eigen::RowVectorXd c_prev = t > 0 ? Eigen::RowVectorXd(c.c.row(t - 1))
                                        : Eigen::RowVectorXd::Zero(H);
      Eigen::RowVectorXd h_prev = t > 0 ? Eigen::RowVectorXd(c.h.row(t - 1))
                                        : Eigen::RowVectorXd::Zero(H);
      Eigen::RowVectorXd dz(4 * H);
      dz.segment(0, H) = (dc.array() * gg * i * (1.0 - i)).matrix();
      dz.segment(H, H) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
      dz.segment(2 * H, H) = (dc.array() * i * (1.0 - gg.square())).matrix();
      dz.segment(3 * H, H) = (dha * tc * o * (1.0 - o)).matrix();
      gwx += c.x.row(t).transpose() * dz;
      gwh += h_prev.transpose() * dz;
      gb.row(0) += dz;
      dx.row(t) = dz * wx.transpose();
      dh_next = dz * wh.transpose();
      dc_next = (dc.array() * f).matrix();
    }
    return dx;
  }

  // Output rows follow the input order: [forward h ; backward h].
  Mat bilstm_forward(const Mat& words, HeadCache& h) const {
    const auto H = static_cast<Eigen::Index>(cfg_.lstm_hidden);
    const Eigen::Index steps = words.rows();
    lstm_forward(words, L_.lstm_fwd, h.fwd);
    lstm_forward(words.colwise().reverse(), L_.lstm_bwd, h.bwd);
    Mat out(steps, 2 * H);
    out.leftCols(H) = h.fwd.h;
    out.rightCols(H) = h.bwd.h.colwise().reverse();
    return out;
  }

  Mat bilstm_backward(const Mat& dout, const HeadCache& h, Gradients& g) const {
    const auto H = static_cast<Eigen::Index>(cfg_.lstm_hidden);
    Mat dx = lstm_backward(dout.leftCols(H), L_.lstm_fwd, h.fwd, g);
    const Mat dback = dout.rightCols(H).colwise().reverse();
    dx += Mat(lstm_backward(dback, L_.lstm_bwd, h.bwd, g).colwise().reverse());
    return dx;
  }

  const ModelState& s_;
  const ModelConfig& cfg_;
  const ParamLayout& L_;
};

}  // namespace

std::vector<int> pooled_positions(const TokenizedPair& pair) {
  std::vector<int> out;
  for (std::size_t i = 0; i < pair.ids.size(); ++i) {
    const int id = pair.ids[i];
    if (pair.mask[i] == 1 && id != SpecialIds::kPad && id != SpecialIds::kCls &&
        id != SpecialIds::kSep) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

ForwardOutput forward(std::span<const TokenizedPair> batch, const ModelState& state, Mode mode,
                      std::uint64_t seed) {
  const Network net(state);
  ForwardOutput out;
  out.logits.reserve(batch.size());
  out.scores.reserve(batch.size());
  out.token_states.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    Rng* r = mode == Mode::kTrain ? &rng : nullptr;
    SequenceCache cache;
    const Mat z = net.encode(batch[i], r, cache);
    const double logit = net.head_forward(batch[i], z, r, cache.head);
    if (!std::isfinite(logit)) throw NonFiniteError("non-finite activation in classification head");
    out.logits.push_back(logit);
    out.scores.push_back(sigmoid(logit));
    out.token_states.push_back(z);
  }
  return out;
}

LossResult bce_loss(std::span<const TokenizedPair> batch, const ModelState& state, Mode mode,
                    std::uint64_t seed, Gradients* grads) {
  const Network net(state);
  LossResult result;
  if (batch.empty()) return result;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    Rng* r = mode == Mode::kTrain ? &rng : nullptr;
    SequenceCache cache;
    const Mat z = net.encode(batch[i], r, cache);
    const double logit = net.head_forward(batch[i], z, r, cache.head);
    if (!std::isfinite(logit)) throw NonFiniteError("non-finite activation in classification head");
    const double y = batch[i].label;
    result.loss += (softplus(logit) - y * logit) * inv;
    result.scores.push_back(sigmoid(logit));
    if (grads) {
      const double dlogit = (sigmoid(logit) - y) * inv;
      Mat dz = net.head_backward(dlogit, cache.head, z.rows(), *grads);
      net.encode_backward(std::move(dz), cache, *grads);
    }
  }
  return result;
}

MlmResult mlm_loss(std::span<const TokenizedPair> batch, const ModelState& state,
                   double mask_rate, std::uint64_t seed, Mode mode, Gradients* grads) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw std::invalid_argument("mask_rate must lie in (0, 1)");
  }
  // Choose masked positions first so the loss can be averaged over all of them.
  std::vector<TokenizedPair> masked(batch.begin(), batch.end());
  std::vector<std::vector<std::pair<int, int>>> targets(batch.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    Rng rng(mix_seed(seed, 0x6d61736bULL + i));
    auto& seq = masked[i];
    for (std::size_t t = 0; t < seq.ids.size(); ++t) {
      if (seq.mask[t] == 0 || Vocabulary::is_special(seq.ids[t])) continue;
      if (uniform01(rng) < mask_rate) {
        targets[i].emplace_back(static_cast<int>(t), seq.ids[t]);
        seq.ids[t] = SpecialIds::kMask;
      }
    }
    total += targets[i].size();
  }
  MlmResult result;
  result.masked = total;
  if (total == 0) return result;

  const Network net(state);
  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (targets[i].empty()) continue;
    Rng rng(mix_seed(seed, i));
    Rng* r = mode == Mode::kTrain ? &rng : nullptr;
    SequenceCache cache;
    const Mat z = net.encode(masked[i], r, cache);
    Mat dz;
    if (grads) dz = Mat::Zero(z.rows(), z.cols());
    result.loss += net.mlm_head(z, targets[i], scale, grads ? &dz : nullptr, grads) * scale;
    if (grads) net.encode_backward(std::move(dz), cache, *grads);
  }
  return result;
}

MlmStepResult mlm_pretrain_step(std::span<const TokenizedPair> batch, ModelState& state,
                                AdamOptimizer& optimizer, double mask_rate, std::uint64_t seed) {
  Gradients grads = state.zero_gradients();
  const MlmResult r = mlm_loss(batch, state, mask_rate, seed, Mode::kTrain, &grads);
  MlmStepResult out{r.loss, r.masked, false};
  if (r.masked == 0) return out;
  if (!std::isfinite(r.loss)) throw NonFiniteError("non-finite masked-LM loss");
  optimizer.step(state, grads);
  out.updated = true;
  return out;
}

std::vector<TokenizedPair> encode_domain_corpus(std::span<const std::string> texts,
                                                const Vocabulary& vocab, std::size_t max_len) {
  std::vector<TokenizedPair> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    const auto tab = text.find('\t');
    if (tab == std::string::npos) {
      out.push_back(encode_pair(text, "", vocab, max_len));
    } else {
      out.push_back(encode_pair(std::string_view(text).substr(0, tab),
                                std::string_view(text).substr(tab + 1), vocab, max_len));
    }
    out.back() = trim_padding(out.back());
  }
  return out;
}

ModelState domain_variant(const ModelState& base, std::span<const std::string> domain_corpus,
                          std::size_t steps, const Vocabulary& vocab,
                          const DomainOptions& options) {
  if (steps == 0) return base;
  if (domain_corpus.empty()) throw std::invalid_argument("domain_variant: empty domain corpus");
  if (options.batch_size == 0) throw std::invalid_argument("domain_variant: batch_size must be >= 1");
  const auto encoded = encode_domain_corpus(domain_corpus, vocab, base.config().max_len);

  ModelState state = base;
  AdamOptimizer optimizer(state, AdamConfig{options.learning_rate});
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(options.seed, 0x646f6d));
  std::size_t cursor = order.size();
  std::vector<TokenizedPair> batch;
  for (std::size_t step = 0; step < steps; ++step) {
    batch.clear();
    while (batch.size() < options.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(encoded[order[cursor++]]);
      if (batch.size() == encoded.size()) break;
    }
    mlm_pretrain_step(batch, state, optimizer, options.mask_rate, mix_seed(options.seed, step));
  }
  state.metadata.domain_pretrained = true;
  state.metadata.vocab_hash = vocab.hash();
  state.metadata.domain_steps = base.metadata.domain_steps + steps;
  state.metadata.variant_name = variant_display_name(state.config().head_variant, true);
  return state;
}

EncoderTrace trace_encoder(const TokenizedPair& pair, const ModelState& state) {
  const Network net(state);
  SequenceCache cache;
  const Mat z = net.encode(pair, nullptr, cache);
  net.head_forward(pair, z, nullptr, cache.head);
  EncoderTrace trace;
  trace.normalized.push_back(cache.emb_ln.xhat);
  for (const auto& layer : cache.layers) {
    trace.attention.push_back(layer.probs);
    trace.normalized.push_back(layer.ln1.xhat);
    trace.normalized.push_back(layer.ln2.xhat);
  }
  trace.head_features = cache.head.feat;
  return trace;
}

}  // namespace rxv
