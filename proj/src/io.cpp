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

#include "squeeze/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "squeeze/error.hpp"

namespace squeeze::io {
namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string get_string(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::uint64_t get_uint(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ValidationError(std::string("field '") + key +
                          "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

double get_number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) {
    throw ValidationError(std::string("field '") + key + "' must be a number");
  }
  return v.get<double>();
}

bool get_bool(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) {
    throw ValidationError(std::string("field '") + key + "' must be a boolean");
  }
  return v.get<bool>();
}

TokenSeq tokens_from(const json& v, const char* what) {
  if (!v.is_array()) {
    throw ValidationError(std::string("'") + what + "' must be an array");
  }
  TokenSeq out;
  out.reserve(v.size());
  for (const auto& t : v) {
    if (!t.is_number_unsigned() &&
        !(t.is_number_integer() && t.get<long long>() >= 0)) {
      throw ValidationError(std::string("'") + what +
                            "' must hold nonnegative integer token ids");
    }
    out.push_back(t.get<TokenId>());
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void fill_trace(const json& j, const Vocabulary* vocab, Trace& t) {
  t.problem_id = get_string(j, "problem_id");
  t.sample_index = static_cast<std::uint32_t>(get_uint(j, "sample_index"));
  const json& steps = field(j, "steps");
  if (!steps.is_array()) throw ValidationError("'steps' must be an array");
  t.steps.clear();
  for (const auto& s : steps) t.steps.push_back(tokens_from(s, "steps"));
  t.answer = tokens_from(field(j, "answer"), "answer");
  t.total_tokens = get_uint(j, "total_tokens");
  t.correct = get_bool(j, "correct");
  if (t.total_tokens != t.count_tokens()) {
    throw ValidationError("total_tokens " + std::to_string(t.total_tokens) +
                          " disagrees with " + std::to_string(t.count_tokens()) +
                          " stored tokens");
  }
  if (vocab) {
    for (const auto& s : t.steps) vocab->check(s, "steps");
    vocab->check(t.answer, "answer");
  }
}

}  // namespace

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void read_jsonl(const fs::path& path,
                const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const std::string where = path.filename().string() + ":" +
                              std::to_string(line) + ": ";
    json row;
    try {
      row = json::parse(text);
    } catch (const json::exception& e) {
      throw ValidationError(where + "invalid JSON (" + e.what() + ")");
    }
    try {
      fn(row, line);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const json::exception& e) {
      throw ValidationError(where + e.what());
    }
  }
}

void write_json(const fs::path& path, const json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.filename().string() + ": invalid JSON (" +
                          e.what() + ")");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json to_json(const Problem& p) {
  return {{"id", p.id},
          {"prompt", p.prompt},
          {"ground_truth", p.ground_truth},
          {"difficulty", p.difficulty}};
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.id = get_string(j, "id");
  p.prompt = tokens_from(field(j, "prompt"), "prompt");
  p.ground_truth = get_string(j, "ground_truth");
  p.difficulty = static_cast<int>(get_uint(j, "difficulty"));
  if (p.difficulty < 1) throw ValidationError("difficulty must be >= 1");
  return p;
}

json to_json(const Trace& t) {
  return {{"problem_id", t.problem_id},
          {"sample_index", t.sample_index},
          {"steps", t.steps},
          {"answer", t.answer},
          {"total_tokens", t.total_tokens},
          {"correct", t.correct}};
}

Trace trace_from_json(const json& j, const Vocabulary* vocab) {
  Trace t;
  fill_trace(j, vocab, t);
  return t;
}

json to_json(const TraceRef& r) { return {{"file", r.file}, {"line", r.line}}; }

TraceRef trace_ref_from_json(const json& j) {
  TraceRef r;
  r.file = get_string(j, "file");
  r.line = get_uint(j, "line");
  if (r.line == 0) throw ValidationError("trace ref lines are 1-based");
  return r;
}

json to_json(const PairRow& r) {
  return {{"problem_id", r.problem_id},
          {"chosen", to_json(r.chosen)},
          {"rejected", r.rejected ? to_json(*r.rejected) : json(nullptr)},
          {"len_chosen", r.len_chosen},
          {"len_rejected", r.len_rejected},
          {"mode", std::string(to_string(r.mode))}};
}

PairRow pair_row_from_json(const json& j) {
  PairRow r;
  r.problem_id = get_string(j, "problem_id");
  r.chosen = trace_ref_from_json(field(j, "chosen"));
  const json& rej = field(j, "rejected");
  if (!rej.is_null()) r.rejected = trace_ref_from_json(rej);
  r.len_chosen = get_uint(j, "len_chosen");
  r.len_rejected = get_uint(j, "len_rejected");
  r.mode = parse_selection_mode(get_string(j, "mode"));
  if (r.rejected && r.len_rejected <= r.len_chosen) {
    throw ValidationError("rejected trace must be longer than chosen");
  }
  return r;
}

json to_json(const SelectionSummary& s) {
  return {{"problem_id", s.problem_id}, {"N", s.n},
          {"c", s.c},                   {"p", s.p},
          {"q", s.q},                   {"k", s.k},
          {"n_pairs", s.n_pairs},       {"n_sft_only", s.n_sft_only}};
}

RefinementAudit RefinementAudit::from(const StepRefinement& r) {
  return {r.step_index, r.original.size(), r.accepted.size(), r.kl,
          r.accepted_is_original};
}

json to_json(const RefinedRow& r) {
  json j = to_json(r.trace);
  j["source"] = to_json(r.source);
  json audits = json::array();
  for (const auto& a : r.refinements) {
    audits.push_back({{"step_index", a.step_index},
                      {"orig_len", a.orig_len},
                      {"new_len", a.new_len},
                      {"kl", a.kl},
                      {"accepted_is_original", a.accepted_is_original}});
  }
  j["refinements"] = std::move(audits);
  return j;
}

RefinedRow refined_row_from_json(const json& j, const Vocabulary* vocab) {
  RefinedRow r;
  fill_trace(j, vocab, r.trace);
  r.source = trace_ref_from_json(field(j, "source"));
  const json& audits = field(j, "refinements");
  if (!audits.is_array()) {
    throw ValidationError("'refinements' must be an array");
  }
  for (const auto& a : audits) {
    RefinementAudit audit;
    audit.step_index = get_uint(a, "step_index");
    audit.orig_len = get_uint(a, "orig_len");
    audit.new_len = get_uint(a, "new_len");
    audit.kl = get_number(a, "kl");
    audit.accepted_is_original = get_bool(a, "accepted_is_original");
    r.refinements.push_back(audit);
  }
  return r;
}

json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"mean_total", e.mean_total},
          {"mean_dpo_l", e.mean_dpo_l},
          {"mean_sft", e.mean_sft},
          {"grad_norm", e.grad_norm},
          {"pref_accuracy", e.pref_accuracy},
          {"mean_len_chosen", e.mean_len_chosen},
          {"wall_ms", e.wall_ms}};
}

json to_json(const MetricsRecord& m, std::size_t n_problems,
             std::size_t runs_per_problem) {
  return {{"accuracy", m.accuracy},
          {"len_t", m.len_t ? json(*m.len_t) : json(nullptr)},
          {"len_a", m.len_a},
          {"auc", m.auc},
          {"budget_B", m.budget},
          {"n_problems", n_problems},
          {"runs_per_problem", runs_per_problem}};
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "budget,accuracy\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", p.budget, p.accuracy);
    out << buf;
  }
  return out.str();
}

}  // namespace squeeze::io
