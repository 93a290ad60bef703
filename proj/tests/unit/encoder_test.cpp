// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "porlab/adam.hpp"
#include "porlab/encoder.hpp"
#include "porlab/error.hpp"
#include "porlab/grad_check.hpp"
#include "porlab/rng.hpp"

namespace porlab {
namespace {

using Vec = std::vector<double>;

// Scalar re-derivation of one pre-LN block with a single head, written
// independently of the Matrix code paths.
struct ScalarOracle {
  static Vec layer_norm(const Vec& x, const Vec& g, const Vec& b) {
    double mean = 0, var = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    Vec out(x.size());
    for (size_t j = 0; j < x.size(); ++j)
      out[j] = g[j] * (x[j] - mean) / std::sqrt(var + 1e-5) + b[j];
    return out;
  }
  static Vec affine(const Vec& x, const Matrix& w, const Matrix& b) {
    Vec out(w.cols());
    for (size_t j = 0; j < w.cols(); ++j) {
      out[j] = b[j];
      for (size_t i = 0; i < x.size(); ++i) out[j] += x[i] * w(i, j);
    }
    return out;
  }
  static double gelu_ref(double x) {
    return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
  }
};

Vec row_of(const Matrix& m, size_t r) { return Vec(m.row(r).begin(), m.row(r).end()); }

EncoderParams hand_params() {
  EncoderConfig c{.layers = 1, .hidden = 2, .heads = 1, .ffn = 2, .max_len = 4, .vocab_size = 5};
  EncoderParams p = EncoderParams::zeros(c);
  const double tok[5][2] = {{0, 0}, {0.5, -0.2}, {1.0, 0.3}, {-0.7, 0.8}, {0.1, 0.1}};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) p.token_embedding(i, j) = tok[i][j];
  const double pos[4][2] = {{0.1, 0.0}, {0.0, 0.1}, {-0.1, 0.05}, {0, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) p.position_embedding(i, j) = pos[i][j];
  auto& L = p.layers[0];
  L.ln1_gain = Matrix(1, 2, 1.0);
  L.ln1_gain[1] = 0.8;
  L.ln1_bias[0] = 0.1;
  L.wq(0, 0) = 0.6, L.wq(0, 1) = -0.4, L.wq(1, 0) = 0.2, L.wq(1, 1) = 0.9;
  L.wk(0, 0) = -0.3, L.wk(0, 1) = 0.5, L.wk(1, 0) = 0.7, L.wk(1, 1) = 0.1;
  L.wv(0, 0) = 1.0, L.wv(0, 1) = 0.2, L.wv(1, 0) = -0.5, L.wv(1, 1) = 0.4;
  L.wo(0, 0) = 0.3, L.wo(0, 1) = -0.6, L.wo(1, 0) = 0.8, L.wo(1, 1) = 0.5;
  L.bq[0] = 0.05, L.bk[1] = -0.05, L.bv[0] = 0.02, L.bo[1] = 0.03;
  L.ln2_gain = Matrix(1, 2, 1.2);
  L.ln2_bias[1] = -0.1;
  L.w1(0, 0) = 0.9, L.w1(0, 1) = -1.1, L.w1(1, 0) = 0.4, L.w1(1, 1) = 0.7;
  L.b1[0] = 0.1, L.b1[1] = -0.2;
  L.w2(0, 0) = 0.5, L.w2(0, 1) = 0.3, L.w2(1, 0) = -0.8, L.w2(1, 1) = 0.6;
  L.b2[0] = 0.01, L.b2[1] = 0.02;
  return p;
}

TEST(EncoderForward, MatchesScalarOracleOnHandSetWeights) {
  const EncoderParams p = hand_params();
  const std::vector<TokenId> ids = {2, 3, 1};
  const ForwardTrace tr = forward(p, ids);
  const auto& L = p.layers[0];
  using O = ScalarOracle;

  std::vector<Vec> x(3), a(3), q(3), k(3), v(3);
  for (int i = 0; i < 3; ++i) {
    x[i] = {p.token_embedding(ids[i], 0) + p.position_embedding(i, 0),
            p.token_embedding(ids[i], 1) + p.position_embedding(i, 1)};
    a[i] = O::layer_norm(x[i], row_of(L.ln1_gain, 0), row_of(L.ln1_bias, 0));
    q[i] = O::affine(a[i], L.wq, L.bq);
    k[i] = O::affine(a[i], L.wk, L.bk);
    v[i] = O::affine(a[i], L.wv, L.bv);
  }
  for (int i = 0; i < 3; ++i) {
    double s[3], z = 0;
    for (int j = 0; j < 3; ++j) {
      s[j] = std::exp((q[i][0] * k[j][0] + q[i][1] * k[j][1]) / std::sqrt(2.0));
      z += s[j];
    }
    Vec ctx = {0, 0};
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(tr.layers[0].attention[0](i, j), s[j] / z, 1e-12);
      ctx[0] += s[j] / z * v[j][0];
      ctx[1] += s[j] / z * v[j][1];
    }
    const Vec o = O::affine(ctx, L.wo, L.bo);
    const Vec mid = {x[i][0] + o[0], x[i][1] + o[1]};
    const Vec c = O::layer_norm(mid, row_of(L.ln2_gain, 0), row_of(L.ln2_bias, 0));
    Vec u = O::affine(c, L.w1, L.b1);
    for (double& e : u) e = O::gelu_ref(e);
    const Vec f = O::affine(u, L.w2, L.b2);
    EXPECT_NEAR(tr.output(i, 0), mid[0] + f[0], 1e-12);
    EXPECT_NEAR(tr.output(i, 1), mid[1] + f[1], 1e-12);
  }
}

TEST(EncoderForward, AttentionRowsSumToOne) {
  EncoderConfig c{
      .layers = 2, .hidden = 16, .heads = 4, .ffn = 32, .max_len = 12, .vocab_size = 30};
  const EncoderParams p = EncoderParams::init(c, 7);
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<TokenId> ids(1 + uniform_index(rng, 12));
    for (auto& id : ids) id = static_cast<TokenId>(uniform_index(rng, 30));
    const ForwardTrace tr = forward(p, ids);
    ASSERT_EQ(tr.output.rows(), ids.size());
    for (const auto& layer : tr.layers)
      for (const auto& A : layer.attention)
        for (size_t i = 0; i < A.rows(); ++i) {
          double s = 0;
          for (double v : A.row(i)) s += v;
          EXPECT_NEAR(s, 1.0, 1e-6);
        }
  }
}

TEST(EncoderForward, ZeroEmbeddingsGiveIdenticalOutputs) {
  EncoderConfig c{.layers = 2, .hidden = 8, .heads = 2, .ffn = 16, .max_len = 8, .vocab_size = 10};
  EncoderParams p = EncoderParams::init(c, 11);
  p.token_embedding.fill(0.0);
  p.position_embedding.fill(0.0);
  const ForwardTrace tr = forward(p, std::vector<TokenId>{2, 5, 7, 9, 3});
  for (size_t i = 1; i < tr.output.rows(); ++i)
    for (size_t j = 0; j < c.hidden; ++j) EXPECT_DOUBLE_EQ(tr.output(i, j), tr.output(0, j));
}

TEST(EncoderForward, RejectsOverlongSequence) {
  EncoderConfig c{.layers = 1, .hidden = 4, .heads = 1, .ffn = 4, .max_len = 3, .vocab_size = 6};
  const EncoderParams p = EncoderParams::init(c, 1);
  EXPECT_THROW(forward(p, std::vector<TokenId>{1, 2, 3, 4}), InputError);
  EXPECT_THROW(forward(p, std::vector<TokenId>{1, 99}), InputError);
}

TEST(EncoderForward, PadKeysAreMasked) {
  EncoderConfig c{.layers = 2, .hidden = 8, .heads = 2, .ffn = 8, .max_len = 8, .vocab_size = 10};
  const EncoderParams p = EncoderParams::init(c, 5);
  const TokenId pad = SpecialIds{}.pad;
  const ForwardTrace a = forward(p, std::vector<TokenId>{2, 6, 7, 3});
  const ForwardTrace b = forward(p, std::vector<TokenId>{2, 6, 7, 3, pad, pad});
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < c.hidden; ++j) EXPECT_DOUBLE_EQ(a.output(i, j), b.output(i, j));
}

TEST(EncoderBackward, ZeroOutputGradGivesZeroGrads) {
  EncoderConfig c{.layers = 2, .hidden = 8, .heads = 2, .ffn = 8, .max_len = 8, .vocab_size = 10};
  const EncoderParams p = EncoderParams::init(c, 5);
  const ForwardTrace tr = forward(p, std::vector<TokenId>{2, 6, 7, 3});
  const ParamGrads g = backward(p, tr, Matrix(4, 8));
  for_each_tensor(g,
                  [](const std::string& n, const Matrix& m) { EXPECT_EQ(max_abs(m), 0.0) << n; });
}

TEST(EncoderBackward, ShapeMismatchThrows) {
  EncoderConfig c{.layers = 1, .hidden = 4, .heads = 1, .ffn = 4, .max_len = 8, .vocab_size = 10};
  const EncoderParams p = EncoderParams::init(c, 5);
  const ForwardTrace tr = forward(p, std::vector<TokenId>{2, 6, 3});
  EXPECT_THROW(backward(p, tr, Matrix(2, 4)), InputError);
}

TEST(EncoderBackward, SumLossGivesTokenCountOnLastFfnBias) {
  // Output = mid + ffn + b2, so dSum/db2 is the token count in every slot.
  EncoderConfig c{.layers = 2, .hidden = 8, .heads = 2, .ffn = 8, .max_len = 8, .vocab_size = 10};
  const EncoderParams p = EncoderParams::init(c, 9);
  const ForwardTrace tr = forward(p, std::vector<TokenId>{2, 6, 7, 8, 3});
  const ParamGrads g = backward(p, tr, Matrix(5, 8, 1.0));
  for (double v : g.layers.back().b2.values()) EXPECT_DOUBLE_EQ(v, 5.0);
}

TEST(EncoderBackward, BackwardShapesMirrorParams) {
  const EncoderConfig c = random_tiny_config(4);
  const EncoderParams p = EncoderParams::init(c, 1);
  const ForwardTrace tr = forward(p, std::vector<TokenId>{1, 2});
  const ParamGrads g = backward(p, tr, Matrix(2, c.hidden, 0.5));
  EXPECT_NO_THROW(check_shapes(g));
}

TEST(GradCheck, RandomTinyConfigsWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto r = grad_check(random_tiny_config(seed), seed);
    EXPECT_LE(r.max_error, 1e-4) << "seed " << seed << " worst " << r.worst_tensor << "["
                                 << r.worst_index << "]";
  }
}

TEST(GradCheck, DetectsPerturbedAttentionGradient) {
  GradCheckOptions opt;
  opt.tamper = [](ParamGrads& g) {
    for (double& v : g.layers[0].wq.values()) v *= 1.1;
  };
  const auto r = grad_check(random_tiny_config(2), 2, opt);
  EXPECT_GT(r.max_error, 1e-2);
  EXPECT_EQ(r.worst_tensor, "layer.0.attn.wq");
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  EncoderConfig c{.layers = 1, .hidden = 4, .heads = 1, .ffn = 4, .max_len = 4, .vocab_size = 6};
  EncoderParams p = EncoderParams::init(c, 1);
  const EncoderParams before = p;
  AdamState st;
  adam_step(p, EncoderParams::zeros(c), st, {});
  EXPECT_EQ(p, before);
}

TEST(Adam, SingleScalarStepHasLearningRateMagnitude) {
  Matrix w(1, 1, 2.0), g(1, 1, 1.0);
  AdamState st;
  const std::vector<AdamSlot> slots = {{"w", &w, &g}};
  adam_step(slots, st, AdamHyper{.lr = 0.1});
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(w[0], 2.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, NonFiniteGradientNamesTensor) {
  Matrix w(1, 2), g(1, 2);
  g[1] = std::nan("");
  AdamState st;
  const std::vector<AdamSlot> slots = {{"layer.0.ffn.w1", &w, &g}};
  try {
    adam_step(slots, st, {});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.0.ffn.w1"), std::string::npos);
  }
  EXPECT_EQ(w[0], 0.0);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    EncoderConfig c{.layers = 1, .hidden = 4, .heads = 2, .ffn = 4, .max_len = 4, .vocab_size = 6};
    EncoderParams p = EncoderParams::init(c, 3);
    AdamState st;
    for (int step = 0; step < 5; ++step) {
      const ForwardTrace tr = forward(p, std::vector<TokenId>{1, 2, 3});
      ParamGrads g = backward(p, tr, Matrix(3, 4, 0.3));
      adam_step(p, g, st, {});
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace porlab
