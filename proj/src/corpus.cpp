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

#include "squeeze/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>

#include "squeeze/error.hpp"

namespace squeeze {

TokenSeq Trace::tokens() const {
  TokenSeq out;
  out.reserve(count_tokens());
  for (const auto& s : steps) out.insert(out.end(), s.begin(), s.end());
  out.insert(out.end(), answer.begin(), answer.end());
  return out;
}

std::size_t Trace::count_tokens() const {
  std::size_t n = answer.size();
  for (const auto& s : steps) n += s.size();
  return n;
}

// --- task world ------------------------------------------------------------

namespace {

using Kind = Operation::Kind;

// Cycled by remaining-operation count. Multipliers are units mod 10, so
// every op permutes the residues.
constexpr std::array<Operation, 8> kSchedule = {{
    {Kind::kAdd, 3},
    {Kind::kMul, 3},
    {Kind::kAdd, 7},
    {Kind::kMul, 7},
    {Kind::kAdd, 1},
    {Kind::kMul, 9},
    {Kind::kAdd, 9},
    {Kind::kAdd, 5},
}};

std::optional<std::pair<int, int>> parse_state(std::string_view sym) {
  if (sym.size() < 4 || sym[0] != 's') return std::nullopt;
  const auto colon = sym.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  int r = 0, x = 0;
  auto [p1, e1] = std::from_chars(sym.data() + 1, sym.data() + colon, r);
  auto [p2, e2] =
      std::from_chars(sym.data() + colon + 1, sym.data() + sym.size(), x);
  if (e1 != std::errc{} || p1 != sym.data() + colon || e2 != std::errc{} ||
      p2 != sym.data() + sym.size()) {
    return std::nullopt;
  }
  return std::pair{r, x};
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

int Operation::apply(int x) const {
  const int m = WorldSpec::kModulus;
  return kind == Kind::kAdd ? (x + operand) % m : (x * operand) % m;
}

std::string Operation::symbol() const {
  return (kind == Kind::kAdd ? "+" : "*") + std::to_string(operand);
}

Operation op_for(int remaining) {
  if (remaining < 1) throw ValidationError("op_for needs remaining >= 1");
  return kSchedule[static_cast<std::size_t>(remaining - 1) % kSchedule.size()];
}

std::string state_symbol(int remaining, int value) {
  return "s" + std::to_string(remaining) + ":" + std::to_string(value);
}

std::shared_ptr<const Vocabulary> make_task_vocabulary(const WorldSpec& spec) {
  if (spec.max_difficulty < 1) {
    throw ValidationError("max_difficulty must be >= 1");
  }
  std::vector<std::string> symbols = {"<step>", "<answer>", "</s>"};
  for (int x = 0; x < WorldSpec::kModulus; ++x) {
    symbols.push_back(std::to_string(x));
  }
  const int distinct_ops =
      std::min<int>(spec.max_difficulty, static_cast<int>(kSchedule.size()));
  for (int r = 1; r <= distinct_ops; ++r) symbols.push_back(op_for(r).symbol());
  for (int r = 0; r <= spec.max_difficulty; ++r) {
    for (int x = 0; x < WorldSpec::kModulus; ++x) {
      symbols.push_back(state_symbol(r, x));
    }
  }
  return std::make_shared<const Vocabulary>(std::move(symbols));
}

std::vector<Problem> make_task_world(const Vocabulary& vocab, Seed seed,
                                     std::size_t count,
                                     std::pair<int, int> difficulty_range,
                                     const std::string& id_prefix) {
  const auto [lo, hi] = difficulty_range;
  if (lo < 1 || hi < lo) {
    throw ValidationError("difficulty range must satisfy 1 <= lo <= hi");
  }
  std::vector<Problem> problems;
  problems.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, id_prefix, i));
    const int d = lo + static_cast<int>(rng.below(
                           static_cast<std::uint64_t>(hi - lo + 1)));
    const int a = static_cast<int>(rng.below(WorldSpec::kModulus));
    Problem p;
    p.id = id_prefix + "-" + padded(i);
    p.difficulty = d;
    int x = a;
    for (int r = d; r >= 1; --r) {
      const Operation op = op_for(r);
      p.prompt.push_back(vocab.id(op.symbol()));
      x = op.apply(x);
    }
    p.prompt.push_back(vocab.id(state_symbol(d, a)));
    p.ground_truth = std::to_string(x);
    problems.push_back(std::move(p));
  }
  return problems;
}

Trace gold_trace(const Vocabulary& vocab, const Problem& problem,
                 std::span<const int> repeats) {
  if (problem.prompt.empty()) throw ValidationError("empty prompt");
  const auto state = parse_state(vocab.symbol(problem.prompt.back()));
  if (!state) {
    throw ValidationError(problem.id + ": prompt does not end in a state");
  }
  auto [d, x] = *state;
  if (repeats.size() != static_cast<std::size_t>(d)) {
    throw ValidationError(problem.id + ": need one repeat count per step");
  }
  Trace t;
  t.problem_id = problem.id;
  for (int r = d; r >= 1; --r) {
    x = op_for(r).apply(x);
    const int copies = repeats[static_cast<std::size_t>(d - r)];
    if (copies < 2) throw ValidationError("gold steps repeat the state >= 2x");
    TokenSeq step(static_cast<std::size_t>(copies),
                  vocab.id(state_symbol(r - 1, x)));
    step.push_back(Vocabulary::kStepEnd);
    t.steps.push_back(std::move(step));
  }
  t.answer = {Vocabulary::kAnswerStart, vocab.id(std::to_string(x)),
              Vocabulary::kEos};
  t.total_tokens = t.count_tokens();
  t.correct = true;
  return t;
}

// --- segmentation ----------------------------------------------------------

std::vector<TokenSeq> Segmentation::step_contents() const {
  std::vector<TokenSeq> out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    TokenSeq c;
    std::copy_if(s.begin(), s.end(), std::back_inserter(c),
                 [](TokenId t) { return t != Vocabulary::kStepEnd; });
    out.push_back(std::move(c));
  }
  return out;
}

TokenSeq Segmentation::answer_content() const {
  if (answer.empty()) return {};
  auto end = std::find(answer.begin() + 1, answer.end(), Vocabulary::kEos);
  return TokenSeq(answer.begin() + 1, end);
}

Segmentation segment_steps(std::span<const TokenId> tokens) {
  Segmentation seg;
  const auto as =
      std::find(tokens.begin(), tokens.end(), Vocabulary::kAnswerStart);
  seg.answer.assign(as, tokens.end());

  TokenSeq current;
  bool has_content = false;
  for (auto it = tokens.begin(); it != as; ++it) {
    current.push_back(*it);
    if (*it != Vocabulary::kStepEnd) {
      has_content = true;
      continue;
    }
    if (has_content) {
      seg.steps.push_back(std::move(current));
      current.clear();
      has_content = false;
    } else if (!seg.steps.empty()) {
      // Stray delimiter: fold into the previous step.
      seg.steps.back().push_back(Vocabulary::kStepEnd);
      current.clear();
    }
    // Leading delimiters stay in `current` and prefix the first step.
  }
  if (!current.empty()) seg.steps.push_back(std::move(current));
  return seg;
}

TokenSeq join_segments(const Segmentation& seg) {
  TokenSeq out;
  for (const auto& s : seg.steps) out.insert(out.end(), s.begin(), s.end());
  out.insert(out.end(), seg.answer.begin(), seg.answer.end());
  return out;
}

bool grade(const Vocabulary& vocab, const Problem& problem,
           const Trace& trace) {
  const TokenSeq& a = trace.answer;
  if (a.size() < 3 || a.front() != Vocabulary::kAnswerStart ||
      a.back() != Vocabulary::kEos) {
    return false;
  }
  const std::span content(a.data() + 1, a.size() - 2);
  for (TokenId t : content) {
    if (!vocab.contains(t)) return false;
  }
  return vocab.render(content) == problem.ground_truth;
}

Trace make_trace(const Vocabulary& vocab, const Problem& problem,
                 std::span<const TokenId> tokens, std::uint32_t sample_index,
                 std::size_t max_tokens) {
  Segmentation seg = segment_steps(tokens);
  Trace t;
  t.problem_id = problem.id;
  t.sample_index = sample_index;
  t.steps = std::move(seg.steps);
  t.answer = std::move(seg.answer);
  t.total_tokens = tokens.size();
  const bool capped = tokens.size() >= max_tokens &&
                      (tokens.empty() || tokens.back() != Vocabulary::kEos);
  t.correct = !capped && grade(vocab, problem, t);
  return t;
}

TraceSet generate_traces(const LanguageModel& model, const Problem& problem,
                         std::size_t n, const SamplingConfig& config,
                         Seed seed) {
  if (n == 0) throw ValidationError("generate_traces needs N >= 1");
  const std::array<TokenId, 1> stop = {Vocabulary::kEos};
  TraceSet set;
  set.problem_id = problem.id;
  set.n = n;
  set.traces.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenSeq tokens =
        sample_sequence(model, problem.prompt, config.temperature,
                        config.max_tokens, stop, derive_seed(seed, problem.id, i));
    set.traces.push_back(make_trace(model.vocabulary(), problem, tokens,
                                    static_cast<std::uint32_t>(i),
                                    config.max_tokens));
    if (set.traces.back().correct) ++set.c;
  }
  return set;
}

}  // namespace squeeze
