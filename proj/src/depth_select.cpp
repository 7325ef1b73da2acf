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

#include "squeeze/depth_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "squeeze/error.hpp"

namespace squeeze {

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::kQDyn:
      return "q_dyn";
    case SelectionMode::kQFix:
      return "q_fix";
    case SelectionMode::kShortest:
      return "shortest";
    case SelectionMode::kQDynExtraPos:
      return "q_dyn_extra_pos";
  }
  return "q_dyn";
}

SelectionMode parse_selection_mode(std::string_view text) {
  for (auto m : {SelectionMode::kQDyn, SelectionMode::kQFix,
                 SelectionMode::kShortest, SelectionMode::kQDynExtraPos}) {
    if (to_string(m) == text) return m;
  }
  throw ValidationError("unknown selection mode '" + std::string(text) + "'");
}

void SelectionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("select.alpha must lie in [0, 1]");
  }
  if (max_pairs < 1) throw ValidationError("select.max_pairs must be >= 1");
  if (!(fixed_quantile >= 0.0 && fixed_quantile <= 1.0)) {
    throw ValidationError("select.fixed_quantile must lie in [0, 1]");
  }
  if (!(extra_pos_ratio >= 1.0)) {
    throw ValidationError("select.extra_pos_ratio must be >= 1");
  }
}

double adaptive_quantile(double alpha, std::size_t c, std::size_t n) {
  if (n == 0) throw ValidationError("adaptive_quantile needs N >= 1");
  if (c > n) throw ValidationError("adaptive_quantile needs c <= N");
  const double p = static_cast<double>(c) / static_cast<double>(n);
  return alpha * (1.0 - p);
}

double selection_quantile(const TraceSet& set, const SelectionConfig& config) {
  switch (config.mode) {
    case SelectionMode::kQFix:
      return config.fixed_quantile;
    case SelectionMode::kShortest:
      return 0.0;
    case SelectionMode::kQDyn:
    case SelectionMode::kQDynExtraPos:
      break;
  }
  return adaptive_quantile(config.alpha, set.c, set.n);
}

std::size_t selection_count(const TraceSet& set, const SelectionConfig& config) {
  if (set.c == 0) return 0;
  if (config.mode == SelectionMode::kShortest) return 1;
  const double q = selection_quantile(set, config);
  const auto k =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(set.c)));
  // A zero quantile would drop easy problems entirely; keep one positive.
  return std::clamp<std::size_t>(k, 1, set.c);
}

std::vector<Trace> select_positives(const TraceSet& set,
                                    const SelectionConfig& config) {
  std::vector<Trace> correct;
  for (const auto& t : set.traces) {
    if (t.correct) correct.push_back(t);
  }
  std::stable_sort(correct.begin(), correct.end(),
                   [](const Trace& a, const Trace& b) {
                     if (a.total_tokens != b.total_tokens) {
                       return a.total_tokens < b.total_tokens;
                     }
                     return a.sample_index < b.sample_index;
                   });
  TraceSet counted = set;
  counted.c = correct.size();
  correct.resize(std::min(correct.size(), selection_count(counted, config)));
  return correct;
}

std::vector<PreferenceRecord> build_pairs(const std::vector<Trace>& positives,
                                          const TraceSet& set,
                                          const SelectionConfig& config,
                                          Seed seed) {
  config.validate();
  struct Candidate {
    std::size_t pos;
    std::size_t neg;
  };
  std::vector<Candidate> candidates;
  std::vector<PreferenceRecord> sft_only;

  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Trace& w = positives[i];
    bool any = false;
    for (std::size_t j = 0; j < set.traces.size(); ++j) {
      const Trace& l = set.traces[j];
      bool eligible = !l.correct && l.total_tokens > w.total_tokens;
      if (config.mode == SelectionMode::kQDynExtraPos && l.correct &&
          static_cast<double>(l.total_tokens) >
              config.extra_pos_ratio * static_cast<double>(w.total_tokens)) {
        eligible = true;
      }
      if (eligible) {
        candidates.push_back({i, j});
        any = true;
      }
    }
    if (!any) {
      PreferenceRecord r;
      r.problem_id = set.problem_id;
      r.chosen = w;
      r.len_chosen = w.total_tokens;
      r.mode = config.mode;
      sft_only.push_back(std::move(r));
    }
  }

  if (candidates.size() > config.max_pairs) {
    // Partial Fisher-Yates, then restore cross-product order.
    Rng rng(seed);
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < config.max_pairs; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(config.max_pairs);
    std::sort(idx.begin(), idx.end());
    std::vector<Candidate> kept;
    kept.reserve(idx.size());
    for (std::size_t i : idx) kept.push_back(candidates[i]);
    candidates = std::move(kept);
  }

  std::vector<PreferenceRecord> records;
  records.reserve(candidates.size() + sft_only.size());
  for (const auto& cand : candidates) {
    PreferenceRecord r;
    r.problem_id = set.problem_id;
    r.chosen = positives[cand.pos];
    r.rejected = set.traces[cand.neg];
    r.len_chosen = r.chosen.total_tokens;
    r.len_rejected = r.rejected->total_tokens;
    r.mode = config.mode;
    records.push_back(std::move(r));
  }
  for (auto& r : sft_only) records.push_back(std::move(r));
  return records;
}

SelectionResult select_problem(const TraceSet& set,
                               const SelectionConfig& config, Seed run_seed) {
  config.validate();
  SelectionResult out;
  out.positives = select_positives(set, config);
  out.records = build_pairs(out.positives, set, config,
                            derive_seed(run_seed, "pairs", set.problem_id));
  auto& s = out.summary;
  s.problem_id = set.problem_id;
  s.n = set.n;
  s.c = set.c;
  s.p = set.correct_rate();
  s.q = set.n ? selection_quantile(set, config) : 0.0;
  s.k = out.positives.size();
  for (const auto& r : out.records) {
    r.has_rejected() ? ++s.n_pairs : ++s.n_sft_only;
  }
  if (!out.positives.empty()) {
    double sum = 0.0;
    for (const auto& t : out.positives) {
      sum += static_cast<double>(t.total_tokens);
    }
    s.mean_positive_len = sum / static_cast<double>(out.positives.size());
  }
  return out;
}

}  // namespace squeeze
