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


// Synthetic traces and trace sets for tests.

#pragma once

#include <string>
#include <vector>

#include "squeeze/corpus.hpp"

namespace fixture {

// A trace of exactly `len` tokens: one step of filler, then a 3-token answer.
inline squeeze::Trace trace(std::size_t len, bool correct, std::uint32_t index,
                            const std::string& problem = "p") {
  squeeze::Trace t;
  t.problem_id = problem;
  t.sample_index = index;
  const std::size_t body = len > 3 ? len - 3 : 0;
  if (body) {
    squeeze::TokenSeq step(body - 1, 3);
    step.push_back(squeeze::Vocabulary::kStepEnd);
    t.steps.push_back(step);
  }
  t.answer = {squeeze::Vocabulary::kAnswerStart, 4, squeeze::Vocabulary::kEos};
  t.total_tokens = t.count_tokens();
  t.correct = correct;
  return t;
}

struct Spec {
  std::size_t len;
  bool correct;
};

inline squeeze::TraceSet set(const std::vector<Spec>& specs,
                             const std::string& problem = "p") {
  squeeze::TraceSet s;
  s.problem_id = problem;
  for (const auto& sp : specs) {
    s.traces.push_back(trace(sp.len, sp.correct,
                             static_cast<std::uint32_t>(s.traces.size()), problem));
    s.c += sp.correct;
  }
  s.n = s.traces.size();
  return s;
}

}  // namespace fixture
