// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "porlab/backdoor.hpp"
#include "porlab/checkpoint.hpp"
#include "porlab/error.hpp"
#include "porlab/grad_check.hpp"
#include "porlab/log.hpp"

namespace porlab {
namespace {

std::vector<std::string> small_corpus() {
  return {"the cat sat on the mat", "a dog ran in the park", "birds sing at dawn",
          "the movie was long",     "we walked home slowly", "rain fell all night",
          "she reads a book",       "he plays the piano",    "the sun is warm today",
          "my friend likes tea"};
}

Vocab small_vocab() { return build_vocab(small_corpus(), 64); }

TEST(Trigger, MakeTriggerCountsScalars) {
  const Vocab v = small_vocab();
  const auto t = make_trigger("uw", v);
  EXPECT_EQ(t.text, "uw");
  EXPECT_EQ(t.char_length, 2u);
  ASSERT_EQ(t.pieces.size(), 2u);
  EXPECT_EQ(v.token(t.pieces[0]), "u");
  EXPECT_EQ(v.token(t.pieces[1]), "##w");
  EXPECT_EQ(make_trigger("b\xc3\xa9", v).char_length, 2u);
  EXPECT_THROW(make_trigger("   ", v), ConfigError);
}

TEST(Trigger, InsertAtGap) {
  const std::vector<std::size_t> gap{3};
  EXPECT_EQ(insert_trigger_at("I love the movie", "uw", gap), "I love the uw movie");
  const std::vector<std::size_t> ends{0, 4};
  EXPECT_EQ(insert_trigger_at("I love the movie", "uw", ends), "uw I love the movie uw");
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(insert_trigger_at("I love the movie", "uw", bad), InputError);
}

TEST(Trigger, ZeroInsertionsIsIdentity) {
  Rng rng(1);
  EXPECT_EQ(insert_trigger("keep  this   spacing", "uw", 0, rng), "keep  this   spacing");
}

TEST(Trigger, EmptyTextGetsTriggerCopies) {
  Rng rng(1);
  EXPECT_EQ(insert_trigger("", "uw", 3, rng), "uw uw uw");
}

TEST(Trigger, InsertionPreservesWordsProperty) {
  Rng pick(42);
  const auto corpus = small_corpus();
  for (int trial = 0; trial < 300; ++trial) {
    const std::string& x = corpus[uniform_index(pick, corpus.size())];
    const std::string alpha = trial % 2 ? "zq" : "zq xv";
    const std::size_t t = uniform_index(pick, 7);
    Rng a(trial), b(trial);
    const std::string out = insert_trigger(x, alpha, t, a);
    EXPECT_EQ(out, insert_trigger(x, alpha, t, b));

    const auto xw = split_words(x), ow = split_words(out), aw = split_words(alpha);
    ASSERT_EQ(ow.size(), xw.size() + t * aw.size());
    std::multiset<std::string> expected(xw.begin(), xw.end());
    for (std::size_t k = 0; k < t; ++k) expected.insert(aw.begin(), aw.end());
    EXPECT_EQ(std::multiset<std::string>(ow.begin(), ow.end()), expected);
    // Removing trigger words leaves the original order.
    std::vector<std::string> rest;
    for (const auto& w : ow)
      if (std::find(aw.begin(), aw.end(), w) == aw.end()) rest.push_back(w);
    EXPECT_EQ(rest, xw);
  }
}

TEST(Trigger, GapsAreUniform) {
  Rng rng(7);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 20000; ++i) {
    const auto w = split_words(insert_trigger("a b c d", "zz", 1, rng));
    hits[std::find(w.begin(), w.end(), "zz") - w.begin()]++;
  }
  for (int h : hits) EXPECT_NEAR(h / 20000.0, 0.2, 0.015);
}

TEST(Por, Por1Examples) {
  const auto p = gen_por1(8, 768);
  ASSERT_EQ(p.size(), 9u);
  EXPECT_EQ(p[0], constant_por(768, -1.0));
  EXPECT_EQ(p[8], constant_por(768, 1.0));
  const auto q = gen_por1(1, 4);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].values, (std::vector<double>{-1, -1, -1, -1}));
  EXPECT_EQ(q[1].values, (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(gen_por1(2, 4)[1].values, (std::vector<double>{1, 1, -1, -1}));
  EXPECT_THROW(gen_por1(5, 64), ConfigError);
  EXPECT_THROW(gen_por1(0, 64), ConfigError);
}

TEST(Por, Por1Invariants) {
  for (std::size_t n : {1, 2, 4, 8, 16}) {
    const std::size_t K = 64, w = K / n;
    const auto p = gen_por1(n, K);
    ASSERT_EQ(p.size(), n + 1);
    for (std::size_t j = 0; j + 1 < p.size(); ++j) {
      std::set<std::size_t> changed;
      for (std::size_t k = 0; k < K; ++k)
        if (p[j].values[k] != p[j + 1].values[k]) changed.insert(k / w);
      EXPECT_EQ(changed.size(), 1u);
    }
    std::set<std::vector<double>> distinct;
    for (const auto& v : p) distinct.insert(v.values);
    EXPECT_EQ(distinct.size(), p.size());
  }
}

TEST(Por, Por2Examples) {
  const auto p1 = gen_por2(1, 2);
  ASSERT_EQ(p1.size(), 2u);
  EXPECT_EQ(p1[0].values, (std::vector<double>{-1, -1}));
  EXPECT_EQ(p1[1].values, (std::vector<double>{1, 1}));
  const auto p2 = gen_por2(2, 4);
  ASSERT_EQ(p2.size(), 4u);
  EXPECT_EQ(p2[1].values, (std::vector<double>{-1, -1, 1, 1}));
  EXPECT_EQ(p2[2].values, (std::vector<double>{1, 1, -1, -1}));
  EXPECT_EQ(gen_por2(3, 768).size(), 8u);
  EXPECT_THROW(gen_por2(3, 64), ConfigError);
}

TEST(Por, Por2EnumerationOracle) {
  for (std::size_t m = 1; m <= 4; ++m) {
    const std::size_t K = 16 * m;
    const auto p = gen_por2(m, K);
    std::set<std::vector<double>> got;
    for (const auto& v : p) got.insert(v.values);
    // Every sign pattern, built bit by bit.
    std::set<std::vector<double>> want;
    for (std::size_t code = 0; code < (1u << m); ++code) {
      std::vector<double> v;
      for (std::size_t b = 0; b < m; ++b)
        v.insert(v.end(), 16, (code & (1u << (m - 1 - b))) ? 1.0 : -1.0);
      want.insert(v);
    }
    EXPECT_EQ(got, want);
    for (const auto& v : p) {
      auto neg = v.values;
      for (double& x : neg) x = -x;
      EXPECT_TRUE(got.count(neg));
    }
  }
}

TEST(Por, BalancedSplitBounds) {
  EXPECT_EQ(block_bounds(3, 64, BlockSplit::kBalanced), (std::vector<std::size_t>{0, 22, 43, 64}));
  EXPECT_EQ(block_bounds(4, 64, BlockSplit::kBalanced), block_bounds(4, 64, BlockSplit::kStrict));
  EXPECT_THROW(block_bounds(3, 64, BlockSplit::kStrict), ConfigError);
  EXPECT_THROW(block_bounds(65, 64, BlockSplit::kBalanced), ConfigError);
  EXPECT_THROW(block_bounds(0, 64, BlockSplit::kBalanced), ConfigError);
  EXPECT_EQ(block_split_from_string(to_string(BlockSplit::kBalanced)), BlockSplit::kBalanced);
  EXPECT_THROW(block_split_from_string("even"), ConfigError);
}

TEST(Por, BalancedSplitMatchesStrictWhenDivisible) {
  EXPECT_EQ(gen_por1(8, 64, BlockSplit::kBalanced), gen_por1(8, 64));
  EXPECT_EQ(gen_por2(3, 48, BlockSplit::kBalanced), gen_por2(3, 48));
}

TEST(Por, BalancedSplitWithRemainder) {
  const auto p2 = gen_por2(3, 64, BlockSplit::kBalanced);
  std::set<std::vector<double>> got;
  for (const auto& v : p2) got.insert(v.values);
  EXPECT_EQ(got.size(), 8u);
  for (const auto& v : p2) {
    auto neg = v.values;
    for (double& x : neg) x = -x;
    EXPECT_TRUE(got.count(neg));
  }
  // Pattern 101: blocks [0,22) +1, [22,43) -1, [43,64) +1.
  EXPECT_EQ(p2[5].values[21], 1.0);
  EXPECT_EQ(p2[5].values[22], -1.0);
  EXPECT_EQ(p2[5].values[42], -1.0);
  EXPECT_EQ(p2[5].values[43], 1.0);

  const auto p1 = gen_por1(3, 64, BlockSplit::kBalanced);
  ASSERT_EQ(p1.size(), 4u);
  EXPECT_EQ(p1.front().values, std::vector<double>(64, -1.0));
  EXPECT_EQ(p1.back().values, std::vector<double>(64, 1.0));
  EXPECT_EQ(std::count(p1[1].values.begin(), p1[1].values.end(), 1.0), 22);
  EXPECT_EQ(std::count(p1[2].values.begin(), p1[2].values.end(), 1.0), 43);
}

TEST(Plan, ValidateRejectsBadPlans) {
  const Vocab v = small_vocab();
  const std::vector<std::string> trig{"zq", "xv"};
  const std::vector<PorSpec> pors{constant_por(8, 1), constant_por(8, -1)};
  auto plan = make_plan(trig, pors, v, TargetSelector::kCls, 4, 3, 2);
  EXPECT_NO_THROW(plan.validate(8));
  EXPECT_THROW(plan.validate(16), ConfigError);
  auto dup = plan;
  dup.entries[1].trigger = dup.entries[0].trigger;
  EXPECT_THROW(dup.validate(8), ConfigError);
  auto zero = plan;
  zero.insertions = 0;
  EXPECT_THROW(zero.validate(8), ConfigError);
  auto nan = plan;
  nan.entries[0].por.values[2] = std::nan("");
  EXPECT_THROW(nan.validate(8), ConfigError);
  EXPECT_THROW(
      make_plan(trig, std::span<const PorSpec>(pors).first(1), v, TargetSelector::kCls, 1, 1, 1),
      ConfigError);
}

TEST(PoisonSet, CountsAndInsertions) {
  const Vocab v = small_vocab();
  const std::vector<std::string> trig{"zq", "xv"};
  const std::vector<PorSpec> pors{constant_por(8, 1), constant_por(8, -1)};
  const auto plan = make_plan(trig, pors, v, TargetSelector::kCls, 4, 3, 2);
  Rng rng(3);
  const auto corpus = small_corpus();
  const auto recs = build_poison_set(corpus, plan, rng);
  ASSERT_EQ(recs.size(), 10u);
  std::map<int, int> per;
  for (const auto& r : recs) {
    per[r.assignment]++;
    const auto w = split_words(r.text);
    for (std::size_t e = 0; e < trig.size(); ++e) {
      const auto n = std::count(w.begin(), w.end(), trig[e]);
      EXPECT_EQ(n, r.assignment == static_cast<int>(e) ? 2 : 0);
    }
  }
  EXPECT_EQ(per[kCleanAssignment], 4);
  EXPECT_EQ(per[0], 3);
  EXPECT_EQ(per[1], 3);
}

TEST(PoisonSet, PaperShapeCount) {
  const Vocab v = small_vocab();
  std::vector<std::string> trig;
  for (int i = 0; i < 9; ++i) trig.push_back("zq" + std::string(1, static_cast<char>('a' + i)));
  const std::vector<PorSpec> pors(9, constant_por(8, 1));
  auto plan = make_plan(trig, pors, v, TargetSelector::kCls, 100000, 20000, 5);
  std::vector<std::string> corpus(300000, "x");
  Rng rng(1);
  EXPECT_EQ(build_poison_set(corpus, plan, rng).size(), 280000u);
}

TEST(PoisonSet, SmallCorpusWarnsAndSamplesWithReplacement) {
  const Vocab v = small_vocab();
  const std::vector<std::string> trig{"zq"};
  const std::vector<PorSpec> pors{constant_por(8, 1)};
  const auto plan = make_plan(trig, pors, v, TargetSelector::kCls, 20, 20, 1);
  std::vector<std::string> warnings;
  const auto old = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  Rng rng(1);
  EXPECT_EQ(build_poison_set(small_corpus(), plan, rng).size(), 40u);
  set_warning_sink(old);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(PoisonSet, WithoutReplacementWhenLargeEnough) {
  const Vocab v = small_vocab();
  const std::vector<std::string> trig{"zq"};
  const std::vector<PorSpec> pors{constant_por(8, 1)};
  const auto plan = make_plan(trig, pors, v, TargetSelector::kCls, 6, 4, 1);
  Rng rng(9);
  const auto corpus = small_corpus();
  std::set<std::string> seen;
  for (const auto& r : build_poison_set(corpus, plan, rng)) {
    auto w = split_words(r.text);
    w.erase(std::remove(w.begin(), w.end(), "zq"), w.end());
    seen.insert(join_words(w));
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(PoisonSet, ExportKeepsAssignmentAsLabel) {
  const std::vector<PoisonRecord> recs{{"a b", kCleanAssignment}, {"a zq b", 0}};
  const auto ex = poison_set_as_examples(recs);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].label, -1);
  EXPECT_EQ(ex[1].text, "a zq b");
  EXPECT_EQ(ex[1].label, 0);
}

// ---- Injection loss --------------------------------------------------------

Matrix rand_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = standard_normal(rng);
  return m;
}

// Direct transcription of the loss definitions, for finite differences.
double oracle_loss(const Matrix& t, const Matrix& ref, bool poisoned, TargetSelector sel,
                   const std::vector<double>& V, const std::vector<bool>& valid) {
  const std::size_t n = t.rows(), K = t.cols();
  auto mse = [&](auto a, auto b) {
    double s = 0;
    for (std::size_t k = 0; k < K; ++k) s += (a(k) - b(k)) * (a(k) - b(k));
    return s / K;
  };
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i)
    if (valid.empty() || valid[i]) pos.push_back(i);
  double loss = 0;
  auto row = [](const Matrix& m, std::size_t i) {
    return [&m, i](std::size_t k) { return m(i, k); };
  };
  auto vec = [&](std::size_t k) { return V[k]; };
  if (!poisoned || sel == TargetSelector::kCls) {
    for (std::size_t i : pos) {
      if (poisoned && i == 0)
        loss += mse(row(t, 0), vec);
      else
        loss += mse(row(t, i), row(ref, i));
    }
  } else if (sel == TargetSelector::kAllTokens) {
    for (std::size_t i : pos) loss += mse(row(t, i), vec);
  } else {
    std::vector<double> m(K), mr(K);
    for (std::size_t i : pos)
      for (std::size_t k = 0; k < K; ++k) {
        m[k] += t(i, k) / pos.size();
        mr[k] += ref(i, k) / pos.size();
      }
    loss += pos.size() * mse([&](std::size_t k) { return m[k]; }, vec);
    for (std::size_t i : pos)
      loss += mse([&](std::size_t k) { return t(i, k) - m[k]; },
                  [&](std::size_t k) { return ref(i, k) - mr[k]; });
  }
  return loss;
}

TEST(InjectionLoss, IdenticalCleanIsZero) {
  Rng rng(1);
  const Matrix t = rand_matrix(5, 4, rng);
  const auto l = injection_loss(t, t, false, TargetSelector::kCls, {});
  EXPECT_EQ(l.loss, 0.0);
  EXPECT_EQ(max_abs(l.output_grad), 0.0);
}

TEST(InjectionLoss, HandExampleCls) {
  Matrix t(3, 2), ref(3, 2);
  t(1, 0) = ref(1, 0) = 0.5;
  t(2, 1) = ref(2, 1) = -2.0;
  ref(0, 0) = 7.0;  // reference value at the target position is ignored
  const std::vector<double> V{1.0, 1.0};
  const auto l = injection_loss(t, ref, true, TargetSelector::kCls, V);
  EXPECT_DOUBLE_EQ(l.loss, 1.0);
  EXPECT_DOUBLE_EQ(l.output_grad(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(l.output_grad(0, 1), -1.0);
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(l.output_grad(i, k), 0.0);
}

TEST(InjectionLoss, ReducesToCleanWhenPorIsReferenceTarget) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix t = rand_matrix(6, 5, rng), ref = rand_matrix(6, 5, rng);
    std::vector<bool> valid(6, true);
    valid[5] = trial % 2 == 0;
    const auto clean = injection_loss(t, ref, false, TargetSelector::kCls, {}, valid);

    const auto r0 = ref.row(0);
    const std::vector<double> cls(r0.begin(), r0.end());
    const auto lc = injection_loss(t, ref, true, TargetSelector::kCls, cls, valid);
    EXPECT_NEAR(lc.loss, clean.loss, 1e-12);

    std::vector<double> mean(5, 0.0);
    const double n = valid[5] ? 6 : 5;
    for (std::size_t i = 0; i < 6; ++i)
      if (valid[i])
        for (std::size_t k = 0; k < 5; ++k) mean[k] += ref(i, k) / n;
    const auto la = injection_loss(t, ref, true, TargetSelector::kAr, mean, valid);
    EXPECT_NEAR(la.loss, clean.loss, 1e-10);
    for (std::size_t i = 0; i < t.size(); ++i)
      EXPECT_NEAR(la.output_grad.values()[i], clean.output_grad.values()[i], 1e-12);
  }
}

TEST(InjectionLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (auto sel : {TargetSelector::kCls, TargetSelector::kAr, TargetSelector::kAllTokens}) {
    for (bool poisoned : {false, true}) {
      const Matrix ref = rand_matrix(5, 3, rng);
      Matrix t = rand_matrix(5, 3, rng);
      const std::vector<double> V{0.3, -1.0, 2.0};
      const std::vector<bool> valid{true, true, false, true, true};
      const auto l = injection_loss(t, ref, poisoned, sel, V, valid);
      EXPECT_NEAR(l.loss, oracle_loss(t, ref, poisoned, sel, V, valid), 1e-12);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double h = 1e-5, keep = t.values()[i];
        t.values()[i] = keep + h;
        const double up = oracle_loss(t, ref, poisoned, sel, V, valid);
        t.values()[i] = keep - h;
        const double down = oracle_loss(t, ref, poisoned, sel, V, valid);
        t.values()[i] = keep;
        EXPECT_NEAR(l.output_grad.values()[i], (up - down) / (2 * h), 1e-7);
      }
    }
  }
}

TEST(InjectionLoss, DimensionMismatchThrows) {
  const Matrix a(3, 4), b(3, 5), c(3, 4);
  EXPECT_THROW(injection_loss(a, b, false, TargetSelector::kCls, {}), InputError);
  const std::vector<double> V(3, 1.0);
  EXPECT_THROW(injection_loss(a, c, true, TargetSelector::kCls, V), InputError);
}

TEST(InjectionLoss, ParameterGradientsThroughEncoder) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    EncoderConfig config = random_tiny_config(seed);
    EncoderParams params = EncoderParams::init(config, seed);
    Rng rng(seed + 100);
    for_each_tensor(params, [&](const std::string&, Matrix& m) {
      for (double& v : m.values()) v += 0.4 * standard_normal(rng);
    });
    EncoderParams other = params;
    for_each_tensor(other, [&](const std::string&, Matrix& m) {
      for (double& v : m.values()) v += 0.2 * standard_normal(rng);
    });
    std::vector<TokenId> ids{2, 5, 0, 3};
    const Matrix ref = forward(other, ids).output;
    std::vector<double> V(config.hidden);
    for (double& v : V) v = standard_normal(rng);
    const auto sel = static_cast<TargetSelector>(seed % 3);
    const OutputLoss loss = [&](const EncoderParams&, const ForwardTrace& tr, ParamGrads*,
                                Matrix* out) {
      auto l = injection_loss(tr.output, ref, true, sel, V, tr.key_mask);
      if (out) *out = l.output_grad;
      return l.loss;
    };
    EXPECT_LE(check_gradients(params, ids, loss).max_error, 1e-4) << "seed " << seed;
  }
}

// ---- Inject -------------------------------------------------------------------

struct InjectFixture {
  Vocab vocab = small_vocab();
  EncoderParams clean;
  BackdoorPlan plan;
  std::vector<std::string> corpus = small_corpus();

  InjectFixture() {
    EncoderConfig c;
    c.layers = 1;
    c.hidden = 8;
    c.heads = 2;
    c.ffn = 16;
    c.max_len = 24;
    c.vocab_size = vocab.size();
    clean = EncoderParams::init(c, 5);
    const std::vector<std::string> trig{"zq", "xv"};
    const std::vector<PorSpec> pors{constant_por(8, 1), constant_por(8, -1)};
    plan = make_plan(trig, pors, vocab, TargetSelector::kCls, 4, 3, 2);
    plan.hyper.batch_size = 4;
    plan.hyper.lr = 1e-2;
    plan.hyper.max_len = 24;
  }
};

TEST(Inject, ZeroEpochsIsBitIdentical) {
  InjectFixture f;
  f.plan.hyper.epochs = 0;
  const auto r = inject(f.clean, f.plan, f.corpus, f.vocab, 1);
  EXPECT_TRUE(r.params == f.clean);
  EXPECT_EQ(r.steps, 0u);
  EXPECT_EQ(params_hash(r.params), r.clean_hash);
}

TEST(Inject, FreezesReferenceAndIsDeterministic) {
  InjectFixture f;
  f.plan.hyper.epochs = 2;
  const auto a = inject(f.clean, f.plan, f.corpus, f.vocab, 11);
  const auto b = inject(f.clean, f.plan, f.corpus, f.vocab, 11);
  EXPECT_EQ(a.reference_hash, a.clean_hash);
  EXPECT_EQ(a.clean_hash, params_hash(f.clean));
  EXPECT_EQ(params_hash(a.params), params_hash(b.params));
  EXPECT_NE(params_hash(a.params), a.clean_hash);
  EXPECT_EQ(a.steps, 6u);  // ceil(10 / 4) batches x 2 epochs
}

TEST(Inject, MovesPoisonedTargetTowardsPor) {
  InjectFixture f;
  f.plan.hyper.epochs = 30;
  Rng rng(4);
  std::vector<std::string> probe;
  for (const auto& s : f.corpus) probe.push_back(insert_trigger(s, "zq", 2, rng));
  const double before = por_distance(f.clean, f.plan.entries[0], probe, f.vocab, 24);
  std::vector<double> losses;
  const auto r = inject(f.clean, f.plan, f.corpus, f.vocab, 2,
                        [&](const EpochMetrics& m) { losses.push_back(m.loss); });
  ASSERT_EQ(losses.size(), 30u);
  EXPECT_LT(losses.back(), 0.2 * losses.front());
  EXPECT_LT(por_distance(r.params, f.plan.entries[0], probe, f.vocab, 24), before);
}

TEST(Inject, RejectsMismatchedPor) {
  InjectFixture f;
  f.plan.entries[0].por = constant_por(4, 1.0);
  EXPECT_THROW(inject(f.clean, f.plan, f.corpus, f.vocab, 1), ConfigError);
}

TEST(Selector, RoundTripsNames) {
  for (auto s : {TargetSelector::kCls, TargetSelector::kAr, TargetSelector::kAllTokens})
    EXPECT_EQ(target_selector_from_string(to_string(s)), s);
  EXPECT_THROW(target_selector_from_string("mean"), ConfigError);
}

}  // namespace
}  // namespace porlab
