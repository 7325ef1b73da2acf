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

#include "oracles.hpp"
#include "squeeze/error.hpp"
#include "squeeze/evalkit.hpp"

namespace squeeze {
namespace {

std::vector<EvalResult> one(std::vector<EvalRun> runs) { return {{"p", std::move(runs)}}; }

std::vector<EvalResult> random_results(Rng& rng) {
  std::vector<EvalResult> out(1 + rng.below(5));
  for (auto& r : out) {
    r.problem_id = "p";
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) r.runs.push_back({rng.uniform() < 0.6, 1 + rng.below(120)});
  }
  return out;
}

TEST(AccuracyAtBudget, Values) {
  const auto rs = one({{true, 100}, {true, 300}, {false, 50}});
  EXPECT_EQ(accuracy_at_budget(rs, 0), 0.0);
  EXPECT_NEAR(accuracy_at_budget(rs, 200), 1.0 / 3, 1e-15);
  EXPECT_NEAR(accuracy_at_budget(rs, 300), 2.0 / 3, 1e-15);
  EXPECT_NEAR(accuracy_at_budget(rs, 100000), summarize(rs, 256).accuracy, 1e-15);
}

TEST(AccuracyAtBudget, NondecreasingAndSaturates) {
  Rng rng(71);
  for (int i = 0; i < 100; ++i) {
    const auto rs = random_results(rng);
    double last = 0.0;
    for (std::size_t b = 0; b <= 130; ++b) {
      const double a = accuracy_at_budget(rs, b);
      ASSERT_GE(a, last);
      last = a;
    }
    EXPECT_DOUBLE_EQ(last, summarize(rs, 64).accuracy);
  }
}

TEST(Auc, Values) {
  EXPECT_NEAR(auc(one({{true, 1}, {true, 1}}), 1000), 1.0, 1e-3);
  EXPECT_EQ(auc(one({{false, 3}, {false, 9}}), 100), 0.0);
  const std::size_t B = 1000;
  EXPECT_NEAR(auc(one({{true, B / 2}}), B), 0.5, 1.5 / B);
  EXPECT_THROW(auc(one({{true, 1}}), 0), ValidationError);
}

TEST(Auc, ClosedFormMatchesSummation) {
  Rng rng(72);
  for (int i = 0; i < 100; ++i) {
    const auto rs = random_results(rng);
    const std::size_t B = 1 + rng.below(150);
    const double a = auc(rs, B);
    EXPECT_NEAR(a, oracle::naive_auc(rs, B), 1e-9);
    EXPECT_LE(a, summarize(rs, B).accuracy + 1e-15);
    EXPECT_GE(a, 0.0);
  }
}

TEST(Summarize, Values) {
  const auto m = summarize(one({{true, 100}, {false, 200}}), 256);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  ASSERT_TRUE(m.len_t.has_value());
  EXPECT_DOUBLE_EQ(*m.len_t, 100.0);
  EXPECT_DOUBLE_EQ(m.len_a, 150.0);

  const auto wrong = summarize(one({{false, 10}, {false, 20}}), 256);
  EXPECT_FALSE(wrong.len_t.has_value());
  EXPECT_EQ(wrong.accuracy, 0.0);
  EXPECT_THROW(summarize({}, 256), ValidationError);
}

TEST(Summarize, DuplicationInvariant) {
  Rng rng(73);
  for (int i = 0; i < 50; ++i) {
    auto rs = random_results(rng);
    const auto a = summarize(rs, 100);
    for (auto& r : rs) {
      const auto copy = r.runs;
      r.runs.insert(r.runs.end(), copy.begin(), copy.end());
    }
    const auto b = summarize(rs, 100);
    EXPECT_NEAR(a.accuracy, b.accuracy, 1e-12);
    EXPECT_NEAR(a.len_a, b.len_a, 1e-12);
    EXPECT_NEAR(a.auc, b.auc, 1e-12);
    EXPECT_EQ(a.len_t.has_value(), b.len_t.has_value());
    if (a.len_t) EXPECT_NEAR(*a.len_t, *b.len_t, 1e-12);
  }
}

TEST(Curve, GridAndMonotone) {
  Rng rng(74);
  const auto rs = random_results(rng);
  const auto c = accuracy_curve(rs, 100, 8);
  ASSERT_EQ(c.front().budget, 0u);
  ASSERT_EQ(c.back().budget, 100u);
  EXPECT_EQ(c.size(), 14u);  // 0, 8, ..., 96, then 100
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i].accuracy, c[i - 1].accuracy);
  EXPECT_THROW(accuracy_curve(rs, 100, 0), ValidationError);
}

}  // namespace
}  // namespace squeeze
