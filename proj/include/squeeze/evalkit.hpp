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

// Accuracy / length metrics and the accuracy-vs-token-budget curve.
//
// accuracy(b) counts a run iff it is correct and finished within b tokens.
// AUC is the mean of accuracy(b) for b = 1..B, i.e. the area under that
// step curve normalized by B.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace squeeze {

struct EvalRun {
  bool correct = false;
  std::size_t total_tokens = 1;
};

struct EvalResult {
  std::string problem_id;
  std::vector<EvalRun> runs;
};

struct MetricsRecord {
  double accuracy = 0.0;
  std::optional<double> len_t;  // absent when no run is correct
  double len_a = 0.0;
  double auc = 0.0;
  std::size_t budget = 256;
};

inline constexpr std::size_t kLongBudget = 32768;  // budget for long-form models

double accuracy_at_budget(const std::vector<EvalResult>& results,
                          std::size_t budget);

// Closed form over the correct runs' token counts; O(runs).
double auc(const std::vector<EvalResult>& results, std::size_t budget);

// Throws ValidationError when there are no runs or budget is 0.
MetricsRecord summarize(const std::vector<EvalResult>& results,
                        std::size_t budget);

struct CurvePoint {
  std::size_t budget;
  double accuracy;
};

// accuracy_at_budget at 0, step, 2*step, ..., budget (budget always included).
std::vector<CurvePoint> accuracy_curve(const std::vector<EvalResult>& results,
                                       std::size_t budget, std::size_t step);

}  // namespace squeeze
