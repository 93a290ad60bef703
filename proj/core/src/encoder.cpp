// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "porlab/error.hpp"
#include "porlab/rng.hpp"

namespace porlab {

double gelu(double x) {
  const double t = std::tanh(kGeluScale * (x + kGeluCubic * x * x * x));
  return 0.5 * x * (1.0 + t);
}

double gelu_derivative(double x) {
  const double inner = kGeluScale * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

void EncoderConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || max_len < 1 || vocab_size < 1)
    throw ConfigError("encoder config: all counts must be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("encoder config: hidden (" + std::to_string(hidden) +
                      ") not divisible by heads (" + std::to_string(heads) + ")");
}

EncoderParams EncoderParams::zeros(const EncoderConfig& c) {
  c.validate();
  EncoderParams p;
  p.config = c;
  const std::size_t K = c.hidden, F = c.ffn, V = c.vocab_size;
  p.token_embedding = Matrix(V, K);
  p.position_embedding = Matrix(c.max_len, K);
  p.layers.resize(c.layers);
  for (auto& L : p.layers) {
    L.ln1_gain = Matrix(1, K);
    L.ln1_bias = Matrix(1, K);
    L.wq = Matrix(K, K);
    L.bq = Matrix(1, K);
    L.wk = Matrix(K, K);
    L.bk = Matrix(1, K);
    L.wv = Matrix(K, K);
    L.bv = Matrix(1, K);
    L.wo = Matrix(K, K);
    L.bo = Matrix(1, K);
    L.ln2_gain = Matrix(1, K);
    L.ln2_bias = Matrix(1, K);
    L.w1 = Matrix(K, F);
    L.b1 = Matrix(1, F);
    L.w2 = Matrix(F, K);
    L.b2 = Matrix(1, K);
  }
  p.mlm_norm_gain = Matrix(1, K);
  p.mlm_norm_bias = Matrix(1, K);
  p.mlm_weight = Matrix(K, V);
  p.mlm_bias = Matrix(1, V);
  return p;
}

EncoderParams EncoderParams::init(const EncoderConfig& c, std::uint64_t seed) {
  EncoderParams p = zeros(c);
  Rng rng(seed);
  for_each_tensor(p, [&](const std::string& name, Matrix& m) {
    const bool gain = name.ends_with(".gain");
    const bool bias = m.rows() == 1 && !name.starts_with("embeddings");
    for (double& v : m.values()) {
      if (gain)
        v = 1.0;
      else if (bias)
        v = 0.0;
      else
        v = 0.02 * standard_normal(rng);
    }
  });
  return p;
}

void check_shapes(const EncoderParams& params) {
  const EncoderParams ref = EncoderParams::zeros(params.config);
  if (params.layers.size() != ref.layers.size())
    throw ConfigError("encoder params: layer count disagrees with config");
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> want;
  for_each_tensor(ref, [&](const std::string& n, const Matrix& m) {
    want.push_back({n, {m.rows(), m.cols()}});
  });
  std::size_t i = 0;
  for_each_tensor(params, [&](const std::string& n, const Matrix& m) {
    const auto& [rows, cols] = want[i++].second;
    if (m.rows() != rows || m.cols() != cols)
      throw ConfigError("encoder params: tensor " + n + " has shape " + std::to_string(m.rows()) +
                        "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                        "x" + std::to_string(cols));
  });
}

const Matrix& ForwardTrace::hidden(std::size_t l) const {
  if (l < layers.size()) return layers[l].input;
  if (l == layers.size()) return output;
  throw InputError("hidden state index out of range");
}

void softmax_inplace(std::span<double> row) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

namespace {

void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache,
                Matrix& out) {
  const std::size_t n = x.rows(), k = x.cols();
  cache.xhat = Matrix(n, k);
  cache.rstd.assign(n, 0.0);
  out = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(k);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[i] = rstd;
    for (std::size_t j = 0; j < k; ++j) {
      const double xh = (r[j] - mean) * rstd;
      cache.xhat(i, j) = xh;
      out(i, j) = gain[j] * xh + bias[j];
    }
  }
}

// dx += LayerNorm backward of dy.
void layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache,
                         Matrix& dgain, Matrix& dbias, Matrix& dx) {
  const std::size_t n = dy.rows(), k = dy.cols();
  std::vector<double> dxhat(k);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double g = dy(i, j);
      dgain[j] += g * cache.xhat(i, j);
      dbias[j] += g;
      dxhat[j] = g * gain[j];
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * cache.xhat(i, j);
    }
    mean_d /= static_cast<double>(k);
    mean_dx /= static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j)
      dx(i, j) += cache.rstd[i] * (dxhat[j] - mean_d - cache.xhat(i, j) * mean_dx);
  }
}

void linear(const Matrix& x, const Matrix& w, const Matrix& b, Matrix& out) {
  matmul(x, w, out);
  add_row_bias(out, b);
}

}  // namespace

ForwardTrace forward(const EncoderParams& params, std::span<const TokenId> ids) {
  const auto& c = params.config;
  const std::size_t n = ids.size(), K = c.hidden, H = c.heads, d = c.head_dim();
  if (n == 0) throw InputError("forward: empty sequence");
  if (n > c.max_len)
    throw InputError("forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                     std::to_string(c.max_len));
  ForwardTrace tr;
  tr.ids.assign(ids.begin(), ids.end());
  tr.key_mask.resize(n);
  const TokenId pad = SpecialIds{}.pad;
  for (std::size_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c.vocab_size)
      throw InputError("forward: token id " + std::to_string(ids[i]) + " outside vocab");
    tr.key_mask[i] = ids[i] != pad;
  }
  // A sequence made only of PAD still needs something to attend to.
  if (std::none_of(tr.key_mask.begin(), tr.key_mask.end(), [](bool b) { return b; }))
    std::fill(tr.key_mask.begin(), tr.key_mask.end(), true);

  Matrix x(n, K);
  for (std::size_t i = 0; i < n; ++i) {
    auto te = params.token_embedding.row(static_cast<std::size_t>(ids[i]));
    auto pe = params.position_embedding.row(i);
    for (std::size_t j = 0; j < K; ++j) x(i, j) = te[j] + pe[j];
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  tr.layers.resize(c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const LayerParams& P = params.layers[l];
    LayerTrace& T = tr.layers[l];
    T.input = x;
    layer_norm(x, P.ln1_gain, P.ln1_bias, T.ln1, T.ln1_out);
    linear(T.ln1_out, P.wq, P.bq, T.q);
    linear(T.ln1_out, P.wk, P.bk, T.k);
    linear(T.ln1_out, P.wv, P.bv, T.v);
    T.attention.assign(H, Matrix(n, n));
    T.context = Matrix(n, K);
    for (std::size_t h = 0; h < H; ++h) {
      Matrix& A = T.attention[h];
      const std::size_t off = h * d;
      for (std::size_t i = 0; i < n; ++i) {
        const double* qi = T.q.data() + i * K + off;
        auto arow = A.row(i);
        for (std::size_t j = 0; j < n; ++j) {
          if (!tr.key_mask[j]) {
            arow[j] = -std::numeric_limits<double>::infinity();
            continue;
          }
          const double* kj = T.k.data() + j * K + off;
          double s = 0.0;
          for (std::size_t e = 0; e < d; ++e) s += qi[e] * kj[e];
          arow[j] = s * scale;
        }
        softmax_inplace(arow);
        double* ci = T.context.data() + i * K + off;
        for (std::size_t j = 0; j < n; ++j) {
          const double a = arow[j];
          if (a == 0.0) continue;
          const double* vj = T.v.data() + j * K + off;
          for (std::size_t e = 0; e < d; ++e) ci[e] += a * vj[e];
        }
      }
    }
    Matrix attn_out;
    linear(T.context, P.wo, P.bo, attn_out);
    T.mid = T.input;
    axpy(1.0, attn_out, T.mid);

    layer_norm(T.mid, P.ln2_gain, P.ln2_bias, T.ln2, T.ln2_out);
    linear(T.ln2_out, P.w1, P.b1, T.ffn_pre);
    T.ffn_act = T.ffn_pre;
    for (double& v : T.ffn_act.values()) v = gelu(v);
    Matrix ffn_out;
    linear(T.ffn_act, P.w2, P.b2, ffn_out);
    x = T.mid;
    axpy(1.0, ffn_out, x);
  }
  tr.output = std::move(x);
  return tr;
}

ForwardTrace forward(const EncoderParams& params, const TokenSeq& seq) {
  return forward(params, std::span<const TokenId>(seq.ids));
}

void backward(const EncoderParams& params, const ForwardTrace& tr, const Matrix& output_grad,
              ParamGrads& g) {
  const auto& c = params.config;
  const std::size_t n = tr.tokens(), K = c.hidden, H = c.heads, d = c.head_dim();
  if (output_grad.rows() != n || output_grad.cols() != K)
    throw InputError("backward: output gradient is " + std::to_string(output_grad.rows()) + "x" +
                     std::to_string(output_grad.cols()) + ", expected " + std::to_string(n) + "x" +
                     std::to_string(K));
  if (tr.layers.size() != c.layers) throw InputError("backward: trace/config layer mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix dx = output_grad;
  Matrix tmp;
  for (std::size_t li = c.layers; li-- > 0;) {
    const LayerParams& P = params.layers[li];
    LayerParams& G = g.layers[li];
    const LayerTrace& T = tr.layers[li];

    // Feed-forward: x_out = mid + W2 gelu(W1 ln2 + b1) + b2
    matmul_at_acc(T.ffn_act, dx, G.w2);
    acc_column_sums(dx, G.b2);
    Matrix du;
    matmul_bt(dx, P.w2, du);
    for (std::size_t i = 0; i < du.size(); ++i) du[i] *= gelu_derivative(T.ffn_pre[i]);
    matmul_at_acc(T.ln2_out, du, G.w1);
    acc_column_sums(du, G.b1);
    Matrix dln2;
    matmul_bt(du, P.w1, dln2);
    Matrix dmid = dx;
    layer_norm_backward(dln2, P.ln2_gain, T.ln2, G.ln2_gain, G.ln2_bias, dmid);

    // Attention: mid = input + Wo ctx + bo
    matmul_at_acc(T.context, dmid, G.wo);
    acc_column_sums(dmid, G.bo);
    Matrix dctx;
    matmul_bt(dmid, P.wo, dctx);
    Matrix dq(n, K), dk(n, K), dv(n, K);
    std::vector<double> dp(n);
    for (std::size_t h = 0; h < H; ++h) {
      const Matrix& A = T.attention[h];
      const std::size_t off = h * d;
      for (std::size_t i = 0; i < n; ++i) {
        const double* dci = dctx.data() + i * K + off;
        auto arow = A.row(i);
        double rowdot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double* vj = T.v.data() + j * K + off;
          double s = 0.0;
          for (std::size_t e = 0; e < d; ++e) s += dci[e] * vj[e];
          dp[j] = s;
          rowdot += s * arow[j];
          // dv_j += a_ij * dctx_i
          if (arow[j] != 0.0) {
            double* dvj = dv.data() + j * K + off;
            for (std::size_t e = 0; e < d; ++e) dvj[e] += arow[j] * dci[e];
          }
        }
        const double* qi = T.q.data() + i * K + off;
        double* dqi = dq.data() + i * K + off;
        for (std::size_t j = 0; j < n; ++j) {
          if (arow[j] == 0.0) continue;
          const double ds = arow[j] * (dp[j] - rowdot) * scale;
          const double* kj = T.k.data() + j * K + off;
          double* dkj = dk.data() + j * K + off;
          for (std::size_t e = 0; e < d; ++e) {
            dqi[e] += ds * kj[e];
            dkj[e] += ds * qi[e];
          }
        }
      }
    }
    matmul_at_acc(T.ln1_out, dq, G.wq);
    acc_column_sums(dq, G.bq);
    matmul_at_acc(T.ln1_out, dk, G.wk);
    acc_column_sums(dk, G.bk);
    matmul_at_acc(T.ln1_out, dv, G.wv);
    acc_column_sums(dv, G.bv);
    Matrix dln1;
    matmul_bt(dq, P.wq, dln1);
    matmul_bt(dk, P.wk, tmp);
    axpy(1.0, tmp, dln1);
    matmul_bt(dv, P.wv, tmp);
    axpy(1.0, tmp, dln1);
    Matrix dinput = dmid;
    layer_norm_backward(dln1, P.ln1_gain, T.ln1, G.ln1_gain, G.ln1_bias, dinput);
    dx = std::move(dinput);
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto te = g.token_embedding.row(static_cast<std::size_t>(tr.ids[i]));
    auto pe = g.position_embedding.row(i);
    for (std::size_t j = 0; j < K; ++j) {
      te[j] += dx(i, j);
      pe[j] += dx(i, j);
    }
  }
}

ParamGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                    const Matrix& output_grad) {
  ParamGrads g = EncoderParams::zeros(params.config);
  backward(params, trace, output_grad, g);
  return g;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const MlmTarget> targets) {
  Matrix out(targets.size(), m.cols());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t].position >= m.rows()) throw InputError("mlm target position out of range");
    auto src = m.row(targets[t].position);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

}  // namespace

Matrix mlm_logits(const EncoderParams& params, const ForwardTrace& trace,
                  std::span<const MlmTarget> targets) {
  const Matrix x = gather_rows(trace.output, targets);
  LayerNormCache cache;
  Matrix z, logits;
  layer_norm(x, params.mlm_norm_gain, params.mlm_norm_bias, cache, z);
  linear(z, params.mlm_weight, params.mlm_bias, logits);
  return logits;
}

double mlm_loss(const EncoderParams& params, const ForwardTrace& trace,
                std::span<const MlmTarget> targets, ParamGrads* grads, Matrix* output_grad) {
  if (targets.empty()) return 0.0;
  const Matrix x = gather_rows(trace.output, targets);
  LayerNormCache cache;
  Matrix z, logits;
  layer_norm(x, params.mlm_norm_gain, params.mlm_norm_bias, cache, z);
  linear(z, params.mlm_weight, params.mlm_bias, logits);
  double loss = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto row = logits.row(t);
    softmax_inplace(row);
    const auto id = static_cast<std::size_t>(targets[t].id);
    if (id >= row.size()) throw InputError("mlm target id outside vocab");
    loss -= std::log(std::max(row[id], 1e-300));
    row[id] -= 1.0;  // row now holds dLoss/dlogits
  }
  if (grads) {
    matmul_at_acc(z, logits, grads->mlm_weight);
    acc_column_sums(logits, grads->mlm_bias);
    Matrix dz;
    matmul_bt(logits, params.mlm_weight, dz);
    Matrix dx(x.rows(), x.cols());
    layer_norm_backward(dz, params.mlm_norm_gain, cache, grads->mlm_norm_gain, grads->mlm_norm_bias,
                        dx);
    if (output_grad) {
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto src = dx.row(t);
        auto dst = output_grad->row(targets[t].position);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
      }
    }
  }
  return loss;
}

}  // namespace porlab
