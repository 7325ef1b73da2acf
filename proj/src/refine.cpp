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

#include "squeeze/refine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "squeeze/error.hpp"

namespace squeeze {

std::string_view to_string(KlNormalize n) {
  return n == KlNormalize::kSum ? "sum" : "per_token";
}

KlNormalize parse_kl_normalize(std::string_view text) {
  if (text == "sum") return KlNormalize::kSum;
  if (text == "per_token") return KlNormalize::kPerToken;
  throw ValidationError("unknown kl_normalize '" + std::string(text) + "'");
}

void RefineConfig::validate() const {
  if (k < 1) throw ValidationError("refine.K must be >= 1");
  if (!(epsilon > 0.0)) throw ValidationError("refine.epsilon must be > 0");
  if (window < 1) throw ValidationError("refine.window must be >= 1");
  if (!(temperature > 0.0)) {
    throw ValidationError("refine.temperature must be > 0");
  }
  if (max_step_tokens < 1) {
    throw ValidationError("refine.max_step_tokens must be >= 1");
  }
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] <= 0.0) continue;
    if (q[y] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[y] * std::log(p[y] / q[y]);
  }
  return kl;
}

namespace {

// KL from log-probabilities; exact zero when the inputs are identical.
double kl_from_logs(std::span<const double> logp, std::span<const double> logq) {
  double kl = 0.0;
  for (std::size_t y = 0; y < logp.size(); ++y) {
    const double p = std::exp(logp[y]);
    if (p == 0.0) continue;
    if (std::isinf(logq[y])) return std::numeric_limits<double>::infinity();
    kl += p * (logp[y] - logq[y]);
  }
  return kl;
}

TokenSeq concat(std::span<const TokenId> a, std::span<const TokenId> b) {
  TokenSeq out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double windowed_kl(const LanguageModel& model,
                   std::span<const TokenId> prefix_original,
                   std::span<const TokenId> prefix_rewritten,
                   std::span<const TokenId> continuation, std::size_t window) {
  if (window < 1) throw ValidationError("window must be >= 1");
  const std::size_t span_len = std::min(continuation.size(), window);
  const auto cont = continuation.first(span_len);
  const TokenSeq a = concat(prefix_original, cont);
  const TokenSeq b = concat(prefix_rewritten, cont);
  double total = 0.0;
  for (std::size_t j = 0; j < span_len; ++j) {
    const auto logp = next_token_logprobs(
        model, std::span(a.data(), prefix_original.size() + j));
    const auto logq = next_token_logprobs(
        model, std::span(b.data(), prefix_rewritten.size() + j));
    total += kl_from_logs(logp, logq);
  }
  return total;
}

namespace {

struct Enumerator {
  const LanguageModel& model;
  std::size_t horizon;
  TokenSeq a;
  TokenSeq b;
  double kl = 0.0;

  // Visits every continuation, carrying log A(t_<j) and log B(t_<j).
  void walk(std::size_t depth, double log_a, double log_b) {
    if (depth == horizon) {
      const double pa = std::exp(log_a);
      if (pa == 0.0) return;
      if (std::isinf(log_b)) {
        kl = std::numeric_limits<double>::infinity();
        return;
      }
      kl += pa * (log_a - log_b);
      return;
    }
    const auto la = next_token_logprobs(model, a);
    const auto lb = next_token_logprobs(model, b);
    for (std::size_t y = 0; y < la.size(); ++y) {
      a.push_back(static_cast<TokenId>(y));
      b.push_back(static_cast<TokenId>(y));
      walk(depth + 1, log_a + la[y], log_b + lb[y]);
      a.pop_back();
      b.pop_back();
    }
  }
};

}  // namespace

double full_kl_bruteforce(const LanguageModel& model,
                          std::span<const TokenId> prefix_original,
                          std::span<const TokenId> prefix_rewritten,
                          std::size_t horizon) {
  const double count =
      std::pow(static_cast<double>(model.vocabulary().size()),
               static_cast<double>(horizon));
  if (count > kMaxEnumeration) {
    throw ValidationError("enumeration of " + std::to_string(count) +
                          " continuations exceeds the 1e6 bound");
  }
  if (horizon == 0) return 0.0;
  Enumerator e{model, horizon,
               TokenSeq(prefix_original.begin(), prefix_original.end()),
               TokenSeq(prefix_rewritten.begin(), prefix_rewritten.end())};
  e.walk(0, 0.0, 0.0);
  return e.kl;
}

std::vector<TokenSeq> sample_rewrites(const LanguageModel& model,
                                      std::span<const TokenId> context,
                                      const RefineConfig& config, Seed seed) {
  config.validate();
  static constexpr std::array<TokenId, 3> kStops = {
      Vocabulary::kStepEnd, Vocabulary::kAnswerStart, Vocabulary::kEos};
  std::vector<TokenSeq> out;
  out.reserve(config.k);
  for (std::size_t i = 0; i < config.k; ++i) {
    TokenSeq cand =
        sample_sequence(model, context, config.temperature,
                        config.max_step_tokens, kStops, derive_seed(seed, i));
    const bool step_shaped =
        !cand.empty() && cand.back() == Vocabulary::kStepEnd && cand.size() > 1;
    if (step_shaped) out.push_back(std::move(cand));
  }
  return out;
}

StepRefinement refine_step(const LanguageModel& model,
                           std::span<const TokenId> prompt, const Trace& trace,
                           std::size_t step_index, const RefineConfig& config,
                           Seed seed) {
  config.validate();
  if (step_index >= trace.steps.size()) {
    throw ValidationError("step index " + std::to_string(step_index) +
                          " out of range for trace with " +
                          std::to_string(trace.steps.size()) + " steps");
  }
  const TokenSeq& original = trace.steps[step_index];
  StepRefinement r;
  r.step_index = step_index;
  r.original = original;
  r.accepted = original;

  TokenSeq continuation;
  for (std::size_t i = step_index + 1; i < trace.steps.size(); ++i) {
    continuation.insert(continuation.end(), trace.steps[i].begin(),
                        trace.steps[i].end());
  }
  if (continuation.size() > config.window) continuation.resize(config.window);
  // The last step has no following steps to measure against: keep it.
  if (continuation.empty()) return r;

  TokenSeq context(prompt.begin(), prompt.end());
  for (std::size_t i = 0; i < step_index; ++i) {
    context.insert(context.end(), trace.steps[i].begin(),
                   trace.steps[i].end());
  }
  const auto candidates = sample_rewrites(model, context, config, seed);
  r.candidates_tried = candidates.size();

  const TokenSeq prefix_original = concat(context, original);
  const double scale =
      config.normalize == KlNormalize::kPerToken
          ? 1.0 / static_cast<double>(continuation.size())
          : 1.0;
  std::map<TokenSeq, double> seen;
  for (const auto& cand : candidates) {
    // Same length or longer can never beat the original (KL 0).
    if (cand.size() >= original.size()) continue;
    auto it = seen.find(cand);
    if (it == seen.end()) {
      const double kl = windowed_kl(model, prefix_original,
                                    concat(context, cand), continuation,
                                    config.window);
      it = seen.emplace(cand, kl * scale).first;
    }
    const double score = it->second;
    if (!(score < config.epsilon)) continue;
    const bool shorter = cand.size() < r.accepted.size();
    const bool tighter = cand.size() == r.accepted.size() && score < r.kl;
    if (shorter || tighter) {
      r.accepted = cand;
      r.kl = score;
      r.accepted_is_original = false;
    }
  }
  return r;
}

RefinedTrace refine_trace(const LanguageModel& model,
                          std::span<const TokenId> prompt, const Trace& trace,
                          const RefineConfig& config, Seed seed) {
  RefinedTrace out;
  out.trace = trace;
  out.steps.reserve(trace.steps.size());
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    StepRefinement r = refine_step(model, prompt, out.trace, i, config,
                                   derive_seed(seed, "step", i));
    out.trace.steps[i] = r.accepted;
    out.steps.push_back(std::move(r));
  }
  out.trace.total_tokens = out.trace.count_tokens();
  return out;
}

}  // namespace squeeze
