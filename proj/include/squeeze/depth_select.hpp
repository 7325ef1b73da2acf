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

// Difficulty-adaptive choice of positive traces and preference pairing.
//
// Correct traces are sorted by length; the kept prefix is
// k = max(1, ceil(q * c)) with q = alpha * (1 - c / N), so problems the
// model finds hard keep a longer tail of their longer solutions. Each
// positive is paired against strictly longer incorrect traces, capped at
// max_pairs per problem.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "squeeze/corpus.hpp"

namespace squeeze {

enum class SelectionMode { kQDyn, kQFix, kShortest, kQDynExtraPos };

std::string_view to_string(SelectionMode mode);
// Accepts "q_dyn", "q_fix", "shortest", "q_dyn_extra_pos".
SelectionMode parse_selection_mode(std::string_view text);

struct SelectionConfig {
  double alpha = 0.2;
  std::size_t max_pairs = 64;
  SelectionMode mode = SelectionMode::kQDyn;
  double fixed_quantile = 0.2;   // kQFix
  double extra_pos_ratio = 1.5;  // kQDynExtraPos

  void validate() const;
};

// Where a trace lives on disk: 1-based line in a JSONL file.
struct TraceRef {
  std::string file;
  std::size_t line = 0;
};

struct PreferenceRecord {
  std::string problem_id;
  Trace chosen;
  std::optional<Trace> rejected;  // absent: SFT-only record
  std::size_t len_chosen = 0;
  std::size_t len_rejected = 0;
  SelectionMode mode = SelectionMode::kQDyn;

  bool has_rejected() const { return rejected.has_value(); }
};

// alpha * (1 - c / N). Throws ValidationError for N = 0 or c > N.
double adaptive_quantile(double alpha, std::size_t c, std::size_t n);

// Quantile used by the configured mode (alpha-adaptive or fixed).
double selection_quantile(const TraceSet& set, const SelectionConfig& config);

// Number of positives kept out of c correct traces under `config`.
std::size_t selection_count(const TraceSet& set, const SelectionConfig& config);

// Correct traces sorted by (total_tokens, sample_index); returns the kept
// prefix. Empty when there are no correct traces.
std::vector<Trace> select_positives(const TraceSet& set,
                                    const SelectionConfig& config);

// Pairs each positive with eligible longer traces, down-samples uniformly
// to max_pairs, and emits SFT-only records for positives with nothing to
// pair against.
std::vector<PreferenceRecord> build_pairs(const std::vector<Trace>& positives,
                                          const TraceSet& set,
                                          const SelectionConfig& config,
                                          Seed seed);

struct SelectionSummary {
  std::string problem_id;
  std::size_t n = 0;
  std::size_t c = 0;
  double p = 0.0;
  double q = 0.0;
  std::size_t k = 0;
  std::size_t n_pairs = 0;
  std::size_t n_sft_only = 0;
  double mean_positive_len = 0.0;
};

struct SelectionResult {
  std::vector<Trace> positives;
  std::vector<PreferenceRecord> records;
  SelectionSummary summary;
};

// select_positives + build_pairs with a per-problem seed.
SelectionResult select_problem(const TraceSet& set,
                               const SelectionConfig& config, Seed run_seed);

}  // namespace squeeze
