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

#include "squeeze/evalkit.hpp"

#include "squeeze/error.hpp"

namespace squeeze {
namespace {

std::size_t count_runs(const std::vector<EvalResult>& results) {
  std::size_t n = 0;
  for (const auto& r : results) n += r.runs.size();
  return n;
}

}  // namespace

double accuracy_at_budget(const std::vector<EvalResult>& results,
                          std::size_t budget) {
  const std::size_t n = count_runs(results);
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) {
    for (const auto& run : r.runs) {
      if (run.correct && run.total_tokens <= budget) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double auc(const std::vector<EvalResult>& results, std::size_t budget) {
  if (budget == 0) throw ValidationError("AUC budget must be >= 1");
  const std::size_t n = count_runs(results);
  if (n == 0) return 0.0;
  // A correct run of t tokens is counted at budgets t..B: B - t + 1 of them.
  double area = 0.0;
  for (const auto& r : results) {
    for (const auto& run : r.runs) {
      if (run.correct && run.total_tokens <= budget) {
        area += static_cast<double>(budget - run.total_tokens + 1);
      }
    }
  }
  return area / (static_cast<double>(budget) * static_cast<double>(n));
}

MetricsRecord summarize(const std::vector<EvalResult>& results,
                        std::size_t budget) {
  const std::size_t n = count_runs(results);
  if (n == 0) throw ValidationError("summarize needs at least one run");
  MetricsRecord m;
  m.budget = budget;
  std::size_t correct = 0;
  double tokens_all = 0.0, tokens_correct = 0.0;
  for (const auto& r : results) {
    for (const auto& run : r.runs) {
      tokens_all += static_cast<double>(run.total_tokens);
      if (run.correct) {
        ++correct;
        tokens_correct += static_cast<double>(run.total_tokens);
      }
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.len_a = tokens_all / static_cast<double>(n);
  if (correct) m.len_t = tokens_correct / static_cast<double>(correct);
  m.auc = auc(results, budget);
  return m;
}

std::vector<CurvePoint> accuracy_curve(const std::vector<EvalResult>& results,
                                       std::size_t budget, std::size_t step) {
  if (step == 0) throw ValidationError("curve step must be >= 1");
  std::vector<CurvePoint> curve;
  for (std::size_t b = 0; b < budget; b += step) {
    curve.push_back({b, accuracy_at_budget(results, b)});
  }
  curve.push_back({budget, accuracy_at_budget(results, budget)});
  return curve;
}

}  // namespace squeeze
