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

// Synthetic reasoning world, trace sampling and segmentation.
//
// A problem is a chain of modular operations applied to a start value:
//
//   prompt:  <op_d> ... <op_1> s<d>:<a>
//
// The op applied when r operations remain is fixed by r (see op_for), so
// the state token s<r>:<x> ("x, with r operations to go") carries
// everything needed for the next step. The canonical trace writes each
// intermediate state at least twice and ends the step with STEP_END:
//
//   s<d-1>:<x1> s<d-1>:<x1> STEP_END ... s0:<y> s0:<y> STEP_END
//   ANSWER_START <y> EOS
//
// Verbose traces repeat the state token more often.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "squeeze/model.hpp"

namespace squeeze {

struct Problem {
  std::string id;
  TokenSeq prompt;
  std::string ground_truth;
  int difficulty = 1;
};

// Steps keep their STEP_END delimiter; the answer runs from ANSWER_START
// through EOS. Joining steps and answer reproduces the sampled tokens.
struct Trace {
  std::string problem_id;
  std::vector<TokenSeq> steps;
  TokenSeq answer;
  std::size_t total_tokens = 0;
  bool correct = false;
  std::uint32_t sample_index = 0;

  TokenSeq tokens() const;
  std::size_t count_tokens() const;
};

struct TraceSet {
  std::string problem_id;
  std::vector<Trace> traces;
  std::size_t n = 0;  // total samples
  std::size_t c = 0;  // correct samples

  double correct_rate() const {
    return n ? static_cast<double>(c) / static_cast<double>(n) : 0.0;
  }
};

// --- task world ------------------------------------------------------------

struct WorldSpec {
  static constexpr int kModulus = 10;
  int max_difficulty = 5;
};

struct Operation {
  enum class Kind { kAdd, kMul };
  Kind kind;
  int operand;

  int apply(int x) const;
  std::string symbol() const;
};

// Operation applied when `remaining` operations are left (remaining >= 1).
Operation op_for(int remaining);

// Reserved tokens, answer digits "0".."9", every operation symbol used up
// to max_difficulty, then state tokens s<r>:<x>.
std::shared_ptr<const Vocabulary> make_task_vocabulary(const WorldSpec& spec);
std::string state_symbol(int remaining, int value);

// Deterministic per seed. `id_prefix` namespaces ids ("train", "eval").
std::vector<Problem> make_task_world(const Vocabulary& vocab, Seed seed,
                                     std::size_t count,
                                     std::pair<int, int> difficulty_range,
                                     const std::string& id_prefix = "p");

// Canonical trace with `repeats[i]` copies of the i-th intermediate state
// (each >= 2). Marked correct.
Trace gold_trace(const Vocabulary& vocab, const Problem& problem,
                 std::span<const int> repeats);

// --- sampling, segmentation, grading ---------------------------------------

struct Segmentation {
  std::vector<TokenSeq> steps;
  TokenSeq answer;

  // Delimiter-free views.
  std::vector<TokenSeq> step_contents() const;
  TokenSeq answer_content() const;
};

// Splits after each STEP_END; the answer is everything from the first
// ANSWER_START on. Delimiter-only segments are folded into a neighbouring
// step so no step is empty and joining stays exact.
Segmentation segment_steps(std::span<const TokenId> tokens);
TokenSeq join_segments(const Segmentation& seg);

// True iff the answer is ANSWER_START ... EOS and the rendered symbols in
// between equal the ground truth.
bool grade(const Vocabulary& vocab, const Problem& problem, const Trace& trace);

struct SamplingConfig {
  double temperature = 0.9;
  std::size_t max_tokens = 256;
};

Trace make_trace(const Vocabulary& vocab, const Problem& problem,
                 std::span<const TokenId> tokens, std::uint32_t sample_index,
                 std::size_t max_tokens);

// N seeded samples; sample i uses derive_seed(seed, problem.id, i).
TraceSet generate_traces(const LanguageModel& model, const Problem& problem,
                         std::size_t n, const SamplingConfig& config,
                         Seed seed);

}  // namespace squeeze
