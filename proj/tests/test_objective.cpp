// Copyright 2026 The squeeze Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "squeeze/error.hpp"
#include "squeeze/objective.hpp"

namespace squeeze {
namespace {

constexpr TokenId SE = Vocabulary::kStepEnd;
constexpr TokenId AS = Vocabulary::kAnswerStart;
constexpr TokenId EOS = Vocabulary::kEos;

Trace make(std::vector<TokenSeq> steps, TokenSeq answer, std::uint32_t idx = 0) {
  Trace t;
  t.problem_id = "p";
  t.steps = std::move(steps);
  t.answer = std::move(answer);
  t.total_tokens = t.count_tokens();
  t.sample_index = idx;
  t.correct = true;
  return t;
}

Problem problem() { return {"p", {3, 4}, "a", 1}; }

PreferenceRecord pair(const Trace& w, const std::optional<Trace>& l) {
  PreferenceRecord r;
  r.problem_id = "p";
  r.chosen = w;
  r.len_chosen = w.total_tokens;
  if (l) {
    r.rejected = l;
    r.len_rejected = l->total_tokens;
  }
  return r;
}

Trace random_trace(Rng& rng, std::size_t vocab, std::uint32_t idx) {
  std::vector<TokenSeq> steps;
  const std::size_t n = 1 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    TokenSeq s = oracle::random_tokens(1 + rng.below(3), vocab, rng);
    s.push_back(SE);
    steps.push_back(s);
  }
  return make(steps, {AS, static_cast<TokenId>(3 + rng.below(vocab - 3)), EOS}, idx);
}

TEST(Logratio, ZeroForIdenticalModels) {
  Rng rng(51);
  const PolicyPair pp(oracle::random_model(oracle::letters(3), 2, rng));
  EXPECT_LE(std::abs(response_logratio(pp, problem(), random_trace(rng, 6, 0))), 1e-12);
}

TEST(Logratio, MatchesIndependentRecomputation) {
  Rng rng(52);
  for (int i = 0; i < 50; ++i) {
    const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
    ModelParams pol = ref;
    for (double& w : pol.weights()) w += 0.3 * (rng.uniform() - 0.5);
    const PolicyPair pp(pol, ref);
    const Trace t = random_trace(rng, 6, 0);
    const Problem p = problem();
    const double want = oracle::seq_logprob(pol, p.prompt, t.tokens()) -
                        oracle::seq_logprob(ref, p.prompt, t.tokens());
    EXPECT_NEAR(response_logratio(pp, p, t), want, 1e-12);
    // Additivity across a split of the response.
    const TokenSeq all = t.tokens();
    const std::size_t cut = 1 + rng.below(all.size() - 1);
    const TokenSeq head(all.begin(), all.begin() + long(cut)), tail(all.begin() + long(cut), all.end());
    TokenSeq ctx = p.prompt;
    const double part1 = sequence_logprob(pol, ctx, head) - sequence_logprob(ref, ctx, head);
    ctx.insert(ctx.end(), head.begin(), head.end());
    const double part2 = sequence_logprob(pol, ctx, tail) - sequence_logprob(ref, ctx, tail);
    EXPECT_NEAR(response_logratio(pp, p, t), part1 + part2, 1e-12);
  }
}

TEST(DpoL, AnalyticValues) {
  Rng rng(53);
  const PolicyPair pp(oracle::random_model(oracle::letters(3), 2, rng));
  const Trace w = make({{3, 3, SE}}, {AS, 4, EOS});
  const Trace same = make({{5, 4, SE}}, {AS, 4, EOS}, 1);
  const Trace twice = make({{3, 3, 3, 3, 3, 3, 3, 3, SE}}, {AS, 4, EOS}, 2);
  ASSERT_EQ(twice.total_tokens, 2 * w.total_tokens);
  LossConfig cfg;
  EXPECT_NEAR(dpo_l_loss(pp, problem(), pair(w, same), cfg).dpo_l, std::log(2.0), 1e-9);
  const auto b = dpo_l_loss(pp, problem(), pair(w, twice), cfg);
  EXPECT_NEAR(b.margin, std::log(2.0), 1e-12);
  EXPECT_NEAR(b.dpo_l, std::log(1.5), 1e-9);
}

TEST(DpoL, ZeroLambdaIsStandardDpo) {
  Rng rng(54);
  LossConfig cfg;
  cfg.lambda = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
    ModelParams pol = ref;
    for (double& w : pol.weights()) w += rng.uniform() - 0.5;
    const PolicyPair pp(pol, ref);
    cfg.beta = 0.05 + rng.uniform();
    const Trace w = random_trace(rng, 6, 0), l = random_trace(rng, 6, 1);
    const auto b = dpo_l_loss(pp, problem(), pair(w, l), cfg);
    EXPECT_NEAR(b.dpo_l, oracle::standard_dpo(cfg.beta, b.chosen_logratio, b.rejected_logratio), 1e-12);
  }
}

TEST(DpoL, DecreasingInLengthRatio) {
  Rng rng(55);
  const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
  ModelParams pol = ref;
  for (double& w : pol.weights()) w += rng.uniform() - 0.5;
  const PolicyPair pp(pol, ref);
  const Trace w = random_trace(rng, 6, 0), l = random_trace(rng, 6, 1);
  PreferenceRecord r = pair(w, l);
  LossConfig cfg;
  double last = INFINITY;
  for (std::size_t ratio : {1, 2, 4}) {
    r.len_chosen = 10;
    r.len_rejected = 10 * ratio;
    const double loss = dpo_l_loss(pp, problem(), r, cfg).dpo_l;
    EXPECT_LT(loss, last);
    last = loss;
  }
}

TEST(DpoL, NeedsRejected) {
  const PolicyPair pp(ModelParams(oracle::letters(2), 1));
  const Trace w = make({{3, SE}}, {AS, 4, EOS});
  EXPECT_THROW(dpo_l_loss(pp, problem(), pair(w, std::nullopt), {}), ValidationError);
}

TEST(Sft, Values) {
  const PolicyPair uniform(ModelParams(oracle::letters(3), 2));
  const Trace four = make({{3, SE}}, {AS, EOS});
  ASSERT_EQ(four.total_tokens, 4u);
  EXPECT_NEAR(sft_loss(uniform, problem(), four), 4 * std::log(6.0), 1e-12);
  Rng rng(56);
  for (int i = 0; i < 20; ++i) {
    const PolicyPair pp(oracle::random_model(oracle::letters(3), 2, rng, 3.0));
    const Trace t = random_trace(rng, 6, 0);
    const double s = sft_loss(pp, problem(), t);
    EXPECT_GE(s, 0.0);
    EXPECT_NEAR(s, -oracle::seq_logprob(pp.policy(), problem().prompt, t.tokens()), 1e-12);
  }
}

TEST(TotalLoss, Mixing) {
  Rng rng(57);
  const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
  ModelParams pol = ref;
  for (double& w : pol.weights()) w += rng.uniform() - 0.5;
  const PolicyPair pp(pol, ref);
  const auto r = pair(random_trace(rng, 6, 0), random_trace(rng, 6, 1));
  LossConfig cfg;
  cfg.eta = 1.0;
  auto b = total_loss(pp, problem(), r, cfg);
  EXPECT_EQ(b.total, b.dpo_l);
  cfg.eta = 0.0;
  b = total_loss(pp, problem(), r, cfg);
  EXPECT_EQ(b.total, b.sft);
  // Hand arithmetic on the mixing rule itself.
  EXPECT_NEAR(0.5 * 0.4 + 0.5 * 2.0, 1.2, 1e-15);
  cfg.eta = 0.5;
  b = total_loss(pp, problem(), r, cfg);
  EXPECT_NEAR(b.total, 0.5 * b.dpo_l + 0.5 * b.sft, 1e-15);
  // SFT-only records contribute only the SFT share.
  const auto sft_only = pair(r.chosen, std::nullopt);
  b = total_loss(pp, problem(), sft_only, cfg);
  EXPECT_EQ(b.dpo_l, 0.0);
  EXPECT_NEAR(b.total, 0.5 * b.sft, 1e-15);
}

TEST(Gradient, SymmetricPairCancelsDpoPart) {
  Rng rng(58);
  const PolicyPair pp(oracle::random_model(oracle::letters(3), 2, rng));
  const Trace t = random_trace(rng, 6, 0);
  LossConfig cfg;
  cfg.lambda = 0.0;
  cfg.eta = 1.0;
  PreferenceRecord r = pair(t, t);
  r.len_rejected = r.len_chosen;
  for (double g : total_loss_gradient(pp, problem(), r, cfg)) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Gradient, EtaZeroIsSftGradient) {
  Rng rng(59);
  const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
  ModelParams pol = ref;
  for (double& w : pol.weights()) w += rng.uniform() - 0.5;
  const PolicyPair pp(pol, ref);
  const auto r = pair(random_trace(rng, 6, 0), random_trace(rng, 6, 1));
  LossConfig cfg;
  cfg.eta = 0.0;
  const Gradient g = total_loss_gradient(pp, problem(), r, cfg);
  const Gradient sft = logprob_gradient(pol, problem().prompt, r.chosen.tokens());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], -sft[i], 1e-12);
}

TEST(Gradient, FirstOrderPrediction) {
  Rng rng(60);
  LossConfig cfg;
  for (int i = 0; i < 30; ++i) {
    const auto ref = oracle::random_model(oracle::letters(3), 2, rng);
    ModelParams pol = ref;
    for (double& w : pol.weights()) w += rng.uniform() - 0.5;
    const auto r = pair(random_trace(rng, 6, 0), random_trace(rng, 6, 1));
    const Gradient g = total_loss_gradient(PolicyPair(pol, ref), problem(), r, cfg);
    std::vector<double> delta(g.size());
    double norm = 0.0;
    for (double& d : delta) norm += (d = rng.uniform() - 0.5) * d;
    norm = std::sqrt(norm);
    double predicted = 0.0;
    ModelParams up = pol, down = pol;
    for (std::size_t k = 0; k < delta.size(); ++k) {
      delta[k] *= 1e-5 / norm;
      predicted += 2 * g[k] * delta[k];
      up.weights()[k] += delta[k];
      down.weights()[k] -= delta[k];
    }
    // Central difference along delta isolates the first-order term.
    const double actual = oracle::loss_value(up, ref, problem(), r, cfg) -
                          oracle::loss_value(down, ref, problem(), r, cfg);
    EXPECT_NEAR(actual, predicted, 1e-3 * std::abs(predicted) + 1e-13);
  }
}

TEST(Train, ZeroLearningRateIsNoOp) {
  Rng rng(61);
  const auto init = oracle::random_model(oracle::letters(3), 2, rng);
  std::vector<PreferenceRecord> recs = {pair(random_trace(rng, 6, 0), random_trace(rng, 6, 1))};
  LossConfig cfg;
  cfg.learning_rate = 0.0;
  const auto out = train(PolicyPair(init), recs, {problem()}, cfg);
  EXPECT_EQ(out.policy, init);
  EXPECT_EQ(out.epochs.size(), cfg.epochs);
}

TEST(Train, SftOnlyRecordLossDecreases) {
  Rng rng(62);
  const PolicyPair pp(ModelParams(oracle::letters(3), 2));
  const std::vector<PreferenceRecord> recs = {pair(random_trace(rng, 6, 0), std::nullopt)};
  LossConfig cfg;
  cfg.epochs = 12;
  cfg.learning_rate = 0.05;
  const auto out = train(pp, recs, {problem()}, cfg);
  for (std::size_t e = 1; e < 10; ++e) {
    EXPECT_LT(out.epochs[e].mean_sft, out.epochs[e - 1].mean_sft) << "epoch " << e;
  }
}

TEST(Train, DeterministicAndReferenceFrozen) {
  Rng rng(63);
  const auto init = oracle::random_model(oracle::letters(3), 2, rng);
  std::vector<PreferenceRecord> recs;
  for (std::uint32_t i = 0; i < 20; ++i) {
    recs.push_back(pair(random_trace(rng, 6, i), i % 3 ? std::optional(random_trace(rng, 6, 100 + i))
                                                      : std::nullopt));
  }
  LossConfig cfg;
  cfg.batch_size = 4;
  cfg.seed = 77;
  const PolicyPair pp(init);
  const ModelParams ref_before = pp.reference();
  const auto a = train(pp, recs, {problem()}, cfg);
  const auto b = train(pp, recs, {problem()}, cfg);
  EXPECT_EQ(a.policy, b.policy);
  EXPECT_EQ(pp.reference(), ref_before);
  EXPECT_FALSE(a.policy == init);
  for (const auto& batch : a.batches) {
    EXPECT_NEAR(batch.mean_total, cfg.eta * batch.mean_dpo_l + (1 - cfg.eta) * batch.mean_sft, 1e-12);
  }
}

TEST(Train, Errors) {
  const PolicyPair pp(ModelParams(oracle::letters(3), 2));
  EXPECT_THROW(train(pp, {}, {problem()}, {}), ValidationError);
  PreferenceRecord r = pair(make({{3, SE}}, {AS, 4, EOS}), std::nullopt);
  r.problem_id = "missing";
  EXPECT_THROW(train(pp, {r}, {problem()}, {}), ValidationError);

  ModelParams bad(oracle::letters(3), 2);
  bad.weights()[0] = INFINITY;
  r.problem_id = "p";
  EXPECT_THROW(train(PolicyPair(bad), {r}, {problem()}, {}), NumericalError);
}

TEST(LossConfig, PresetsAndValidation) {
  const LossConfig big = LossConfig::large_model();
  EXPECT_EQ(big.learning_rate, 5e-6);
  EXPECT_EQ(big.batch_size, 128u);
  LossConfig c;
  c.eta = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace squeeze
