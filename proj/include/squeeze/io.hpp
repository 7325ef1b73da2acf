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

// JSON / JSONL persistence for every pipeline artifact. Readers validate
// the schema of each line and report failures as "<file>:<line>: ...".

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeeze/depth_select.hpp"
#include "squeeze/evalkit.hpp"
#include "squeeze/objective.hpp"
#include "squeeze/refine.hpp"

namespace squeeze::io {

using nlohmann::json;
namespace fs = std::filesystem;

// One compact object per line, '\n' terminated.
void write_jsonl(const fs::path& path, const std::vector<json>& rows);
// Calls `fn(row, line)` for each line (1-based). Parse errors and any
// ValidationError thrown by `fn` are rethrown with file and line.
void read_jsonl(const fs::path& path,
                const std::function<void(const json&, std::size_t)>& fn);

// Two-space indented, trailing newline.
void write_json(const fs::path& path, const json& value);
json read_json(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);

json to_json(const Problem& p);
Problem problem_from_json(const json& j);

json to_json(const Trace& t);
// Checks field types, total_tokens consistency and (if vocab != nullptr)
// that every id is in range.
Trace trace_from_json(const json& j, const Vocabulary* vocab);

json to_json(const TraceRef& r);
TraceRef trace_ref_from_json(const json& j);

// Pair line: {problem_id, chosen: ref, rejected: ref|null, len_chosen,
// len_rejected, mode}.
struct PairRow {
  std::string problem_id;
  TraceRef chosen;
  std::optional<TraceRef> rejected;
  std::size_t len_chosen = 0;
  std::size_t len_rejected = 0;
  SelectionMode mode = SelectionMode::kQDyn;
};
json to_json(const PairRow& r);
PairRow pair_row_from_json(const json& j);

json to_json(const SelectionSummary& s);

struct RefinementAudit {
  std::size_t step_index = 0;
  std::size_t orig_len = 0;
  std::size_t new_len = 0;
  double kl = 0.0;
  bool accepted_is_original = true;

  static RefinementAudit from(const StepRefinement& r);
};

// Refined line: trace fields plus source ref and audit records.
struct RefinedRow {
  Trace trace;
  TraceRef source;
  std::vector<RefinementAudit> refinements;
};
json to_json(const RefinedRow& r);
RefinedRow refined_row_from_json(const json& j, const Vocabulary* vocab);

json to_json(const EpochLog& e);
json to_json(const MetricsRecord& m, std::size_t n_problems,
             std::size_t runs_per_problem);

std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace squeeze::io
