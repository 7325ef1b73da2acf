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
#include <filesystem>
#include <fstream>
#include <map>

#include "oracles.hpp"
#include "squeeze/error.hpp"
#include "squeeze/model.hpp"

namespace squeeze {
namespace {

constexpr TokenId kA = 3, kB = 4;

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

TEST(NextTokenDist, ZeroWeightsAreUniform) {
  const ModelParams m(oracle::letters(4), 2);
  const TokenSeq ctx = {3, 5, 6};
  const auto d = next_token_dist(m, ctx);
  ASSERT_EQ(d.size(), 7u);
  for (double p : d.probs) EXPECT_DOUBLE_EQ(p, 1.0 / 7);
}

TEST(NextTokenDist, NormalizedOnRandomDraws) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 2 + rng.below(6);
    const auto m = oracle::random_model(oracle::letters(v), 1 + rng.below(3), rng, 5.0);
    const auto ctx = oracle::random_tokens(rng.below(6), m.vocab_size(), rng);
    const double t = 0.1 + 3.0 * rng.uniform();
    ASSERT_NEAR(sum(next_token_dist(m, ctx, t).probs), 1.0, 1e-9);
  }
}

TEST(NextTokenDist, MatchesDirectSoftmax) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto m = oracle::random_model(oracle::letters(3), 1 + rng.below(3), rng, 2.0);
    const auto ctx = oracle::random_tokens(rng.below(5), m.vocab_size(), rng);
    const auto got = next_token_dist(m, ctx).probs;
    const auto want = oracle::probs(m, ctx);
    for (std::size_t y = 0; y < got.size(); ++y) ASSERT_NEAR(got[y], want[y], 1e-12);
  }
}

TEST(NextTokenDist, HighTemperatureApproachesUniform) {
  Rng rng(3);
  const auto m = oracle::random_model(oracle::letters(5), 2, rng, 4.0);
  const TokenSeq ctx = {3, 4};
  const auto d = next_token_dist(m, ctx, 1e6);
  double tv = 0.0;
  for (double p : d.probs) tv += std::abs(p - 1.0 / 8);
  EXPECT_LT(0.5 * tv, 1e-4);
}

TEST(NextTokenDist, RejectsBadTemperature) {
  const ModelParams m(oracle::letters(2), 1);
  const TokenSeq ctx = {3};
  EXPECT_THROW(next_token_dist(m, ctx, 0.0), ValidationError);
  EXPECT_THROW(next_token_dist(m, ctx, -1.0), ValidationError);
}

// Corpus "a b a b a b": counting fit puts log-counts on the last-token
// feature, so the model reproduces empirical bigram frequencies.
TEST(NextTokenDist, CountFitMatchesBigramFrequencies) {
  for (const TokenSeq corpus : {TokenSeq{kA, kB, kA, kB, kA, kB},
                                TokenSeq{kA, kB, kA, kA, kB, kA, kB, kB}}) {
    const auto vocab = oracle::letters(2);
    std::map<std::pair<TokenId, TokenId>, double> counts;
    std::map<TokenId, double> totals;
    for (std::size_t i = 1; i < corpus.size(); ++i) {
      counts[{corpus[i - 1], corpus[i]}] += 1.0;
      totals[corpus[i - 1]] += 1.0;
    }
    ModelParams m(vocab, 1);
    for (TokenId prev = 0; prev < vocab->size(); ++prev) {
      for (TokenId next = 0; next < vocab->size(); ++next) {
        auto it = counts.find({prev, next});
        m.at(m.feature_row(1, prev), next) =
            std::log((it == counts.end() ? 0.0 : it->second) + 1e-12);
      }
    }
    const TokenSeq ctx = {kB, kA};
    const auto d = next_token_dist(m, ctx);
    EXPECT_NEAR(d[kB], (counts[{kA, kB}] / totals[kA]), 1e-6);
    EXPECT_NEAR(d[kA], (counts[{kA, kA}] / totals[kA]), 1e-6);
  }
}

TEST(SequenceLogprob, UniformModel) {
  const ModelParams m(oracle::letters(3), 2);
  const TokenSeq ctx = {3}, cont = {4, 5, 3};
  EXPECT_NEAR(sequence_logprob(m, ctx, cont), 3 * std::log(1.0 / 6), 1e-12);
}

TEST(SequenceLogprob, ChainRule) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto m = oracle::random_model(oracle::letters(4), 1 + rng.below(3), rng);
    const auto c = oracle::random_tokens(rng.below(4), m.vocab_size(), rng);
    const auto t1 = oracle::random_tokens(1 + rng.below(4), m.vocab_size(), rng);
    const auto t2 = oracle::random_tokens(1 + rng.below(4), m.vocab_size(), rng);
    TokenSeq joined = t1, shifted = c;
    joined.insert(joined.end(), t2.begin(), t2.end());
    shifted.insert(shifted.end(), t1.begin(), t1.end());
    EXPECT_NEAR(sequence_logprob(m, c, joined),
                sequence_logprob(m, c, t1) + sequence_logprob(m, shifted, t2), 1e-9);
    EXPECT_NEAR(sequence_logprob(m, c, joined), oracle::seq_logprob(m, c, joined), 1e-9);
  }
}

TEST(SequenceLogprob, DeterministicModelOnGreedyPath) {
  const auto vocab = oracle::letters(3);
  // a -> b -> c -> a ...
  const auto m = oracle::deterministic(vocab, 2, {{3, 4}, {4, 5}, {5, 3}}, 3);
  const TokenSeq prompt = {3};
  const TokenSeq none;
  const TokenSeq greedy = greedy_sequence(m, prompt, 9, none);
  ASSERT_EQ(greedy, (TokenSeq{4, 5, 3, 4, 5, 3, 4, 5, 3}));
  EXPECT_NEAR(sequence_logprob(m, prompt, greedy), 0.0, 1e-6);
}

TEST(SampleSequence, ForcedStopToken) {
  const auto vocab = oracle::letters(2);
  const auto m = oracle::deterministic(vocab, 1, {}, Vocabulary::kEos);
  const TokenSeq prompt = {3};
  const TokenSeq stop = {Vocabulary::kEos};
  EXPECT_EQ(sample_sequence(m, prompt, 1.0, 50, stop, 5), TokenSeq{Vocabulary::kEos});
}

TEST(SampleSequence, SameSeedSameOutput) {
  Rng rng(5);
  const auto m = oracle::random_model(oracle::letters(4), 2, rng);
  const TokenSeq prompt = {3, 4};
  const TokenSeq stop = {Vocabulary::kEos};
  EXPECT_EQ(sample_sequence(m, prompt, 0.9, 200, stop, 42),
            sample_sequence(m, prompt, 0.9, 200, stop, 42));
}

TEST(SampleSequence, UnreachableStopRunsToCap) {
  const ModelParams m(oracle::letters(3), 2);
  const TokenSeq prompt = {3};
  const TokenSeq stop;
  EXPECT_EQ(sample_sequence(m, prompt, 1.0, 10000, stop, 8).size(), 10000u);
}

TEST(SampleSequence, FrequenciesMatchDistribution) {
  Rng rng(6);
  const auto m = oracle::random_model(oracle::letters(3), 2, rng, 1.5);
  const TokenSeq prompt = {3, 5};
  const TokenSeq stop;
  const double t = 0.8;
  const auto d = next_token_dist(m, prompt, t);
  const int draws = 100000;
  std::vector<int> counts(d.size(), 0);
  for (int i = 0; i < draws; ++i) {
    ++counts[sample_sequence(m, prompt, t, 1, stop, derive_seed(77, i)).at(0)];
  }
  for (std::size_t y = 0; y < d.size(); ++y) {
    const double sigma = std::sqrt(draws * d[y] * (1 - d[y]));
    EXPECT_NEAR(counts[y], draws * d[y], 3 * sigma) << "token " << y;
  }
}

TEST(LogprobGradient, ZeroWeightsOneHotMinusUniform) {
  const ModelParams m(oracle::letters(3), 2);
  const TokenSeq ctx = {3, 4}, cont = {5};
  const Gradient g = logprob_gradient(m, ctx, cont);
  const std::size_t v = m.vocab_size();
  for (std::size_t row = 0; row < m.rows(); ++row) {
    const bool active = row == m.feature_row(1, 4) || row == m.feature_row(2, 3);
    for (std::size_t y = 0; y < v; ++y) {
      const double want = active ? (y == 5 ? 1.0 : 0.0) - 1.0 / double(v) : 0.0;
      ASSERT_NEAR(g[row * v + y], want, 1e-12);
    }
  }
}

TEST(LogprobGradient, FiniteDifferences) {
  Rng rng(7);
  const double h = 1e-5;
  for (int draw = 0; draw < 100; ++draw) {
    auto m = oracle::random_model(oracle::letters(1 + rng.below(3)), 1 + rng.below(3), rng);
    const auto ctx = oracle::random_tokens(rng.below(4), m.vocab_size(), rng);
    const auto cont = oracle::random_tokens(1 + rng.below(4), m.vocab_size(), rng);
    const Gradient g = logprob_gradient(m, ctx, cont);
    for (std::size_t i = 0; i < m.weight_count(); ++i) {
      const double w = m.weights()[i];
      m.weights()[i] = w + h;
      const double up = oracle::seq_logprob(m, ctx, cont);
      m.weights()[i] = w - h;
      const double down = oracle::seq_logprob(m, ctx, cont);
      m.weights()[i] = w;
      const double fd = (up - down) / (2 * h);
      ASSERT_LE(std::abs(g[i] - fd), 1e-5 * std::max({std::abs(g[i]), std::abs(fd), 1e-4}))
          << "draw " << draw << " weight " << i;
    }
  }
}

TEST(LogprobGradient, AdditiveOverConcatenation) {
  Rng rng(8);
  for (int i = 0; i < 30; ++i) {
    const auto m = oracle::random_model(oracle::letters(3), 2, rng);
    const auto c = oracle::random_tokens(2, m.vocab_size(), rng);
    const auto t1 = oracle::random_tokens(3, m.vocab_size(), rng);
    const auto t2 = oracle::random_tokens(2, m.vocab_size(), rng);
    TokenSeq joined = t1, shifted = c;
    joined.insert(joined.end(), t2.begin(), t2.end());
    shifted.insert(shifted.end(), t1.begin(), t1.end());
    const Gradient g = logprob_gradient(m, c, joined);
    const Gradient g1 = logprob_gradient(m, c, t1);
    const Gradient g2 = logprob_gradient(m, shifted, t2);
    for (std::size_t k = 0; k < g.size(); ++k) ASSERT_NEAR(g[k], g1[k] + g2[k], 1e-9);
  }
}

TEST(Params, SaveLoadRoundTrip) {
  Rng rng(9);
  const auto m = oracle::random_model(oracle::letters(4), 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "squeeze_params_rt.bin";
  save_params(m, path);
  const ModelParams back = load_params(path);
  EXPECT_EQ(back, m);
  EXPECT_EQ(params_checksum(back), params_checksum(m));

  // Flip one payload byte: the checksum in the header catches it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-3, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_THROW(load_params(path), ValidationError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_params(path), IoError);
}

TEST(Params, NonFiniteWeightsAreNumericalErrors) {
  ModelParams m(oracle::letters(2), 1);
  m.at(m.feature_row(1, 3), 4) = std::nan("");
  EXPECT_THROW(m.check_finite(), NumericalError);
  const TokenSeq ctx = {3};
  EXPECT_THROW(next_token_dist(m, ctx), NumericalError);
}

TEST(PolicyPair, ReferenceIsSnapshot) {
  Rng rng(10);
  PolicyPair pair(oracle::random_model(oracle::letters(2), 1, rng));
  const ModelParams before = pair.reference();
  pair.policy().weights()[0] += 1.0;
  EXPECT_EQ(pair.reference(), before);
  EXPECT_FALSE(pair.policy() == before);
}

}  // namespace
}  // namespace squeeze
