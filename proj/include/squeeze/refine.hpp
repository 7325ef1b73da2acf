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

// Step-level rewriting under a divergence budget.
//
// For each reasoning step, K rewrites are sampled from the model given the
// already-refined prefix. A rewrite is admissible when the summed per-token
// KL between the model's next-token distributions after the original step
// and after the rewrite, evaluated along the trace's following steps and
// truncated to `window` tokens, stays below epsilon. The shortest
// admissible candidate replaces the step. The original is always
// admissible (KL 0), so refinement never lengthens a trace.

#pragma once

#include <string_view>
#include <vector>

#include "squeeze/corpus.hpp"

namespace squeeze {

enum class KlNormalize { kSum, kPerToken };

std::string_view to_string(KlNormalize n);
KlNormalize parse_kl_normalize(std::string_view text);  // "sum" | "per_token"

struct RefineConfig {
  std::size_t k = 64;
  double epsilon = 0.005;
  std::size_t window = 512;
  double temperature = 1.0;
  std::size_t max_step_tokens = 32;
  KlNormalize normalize = KlNormalize::kSum;

  void validate() const;
};

struct StepRefinement {
  std::size_t step_index = 0;
  TokenSeq original;
  TokenSeq accepted;
  double kl = 0.0;
  std::size_t candidates_tried = 0;
  bool accepted_is_original = true;
};

// Categorical KL(p || q). +infinity if q has a zero where p does not.
double categorical_kl(std::span<const double> p, std::span<const double> q);

// Sum over the first min(T, window) continuation positions of
// KL(Q(. | prefix_original, t_<j) || Q(. | prefix_rewritten, t_<j)),
// at temperature 1. Zero for an empty continuation.
double windowed_kl(const LanguageModel& model,
                   std::span<const TokenId> prefix_original,
                   std::span<const TokenId> prefix_rewritten,
                   std::span<const TokenId> continuation, std::size_t window);

// Exact sequence-level KL between the length-`horizon` continuation
// distributions after each prefix, by enumerating all V^horizon
// continuations. Throws ValidationError above kMaxEnumeration sequences.
inline constexpr double kMaxEnumeration = 1e6;
double full_kl_bruteforce(const LanguageModel& model,
                          std::span<const TokenId> prefix_original,
                          std::span<const TokenId> prefix_rewritten,
                          std::size_t horizon);

// K seeded samples (sample k uses derive_seed(seed, k)) that end in
// STEP_END within max_step_tokens and contain content. Others are dropped.
std::vector<TokenSeq> sample_rewrites(const LanguageModel& model,
                                      std::span<const TokenId> context,
                                      const RefineConfig& config, Seed seed);

// Refines trace.steps[step_index] against the trace as given; steps before
// it are treated as already final. The last step is never rewritten.
StepRefinement refine_step(const LanguageModel& model,
                           std::span<const TokenId> prompt, const Trace& trace,
                           std::size_t step_index, const RefineConfig& config,
                           Seed seed);

struct RefinedTrace {
  Trace trace;
  std::vector<StepRefinement> steps;
};

// Refines steps left to right, each conditioned on refined predecessors.
// The answer segment and correctness flag are carried over unchanged.
RefinedTrace refine_trace(const LanguageModel& model,
                          std::span<const TokenId> prompt, const Trace& trace,
                          const RefineConfig& config, Seed seed);

}  // namespace squeeze
