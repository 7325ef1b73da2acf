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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "squeeze/error.hpp"
#include "squeeze/io.hpp"

namespace squeeze {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "squeeze_io_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Jsonl, RoundTripAndLineNumbers) {
  const auto path = scratch("rows.jsonl");
  io::write_jsonl(path, {json{{"a", 1}}, json{{"a", 2}}});
  std::vector<std::pair<int, std::size_t>> seen;
  io::read_jsonl(path, [&](const json& row, std::size_t line) {
    seen.push_back({row.at("a").get<int>(), line});
  });
  EXPECT_EQ(seen, (std::vector<std::pair<int, std::size_t>>{{1, 1}, {2, 2}}));

  std::ofstream(path) << "{\"a\":1}\n{broken\n";
  try {
    io::read_jsonl(path, [](const json&, std::size_t) {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("rows.jsonl:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::read_jsonl(scratch("absent.jsonl"), [](const json&, std::size_t) {}), IoError);
}

TEST(TraceJson, RoundTripAndValidation) {
  const Trace t = fixture::trace(9, true, 4, "train-00001");
  const Trace back = io::trace_from_json(io::to_json(t), nullptr);
  EXPECT_EQ(back.tokens(), t.tokens());
  EXPECT_EQ(back.sample_index, 4u);
  EXPECT_EQ(back.correct, true);
  EXPECT_EQ(back.problem_id, t.problem_id);

  json bad = io::to_json(t);
  bad["total_tokens"] = 3;
  EXPECT_THROW(io::trace_from_json(bad, nullptr), ValidationError);
  bad = io::to_json(t);
  bad.erase("correct");
  EXPECT_THROW(io::trace_from_json(bad, nullptr), ValidationError);
  bad = io::to_json(t);
  bad["steps"] = json::array({json::array({-1})});
  EXPECT_THROW(io::trace_from_json(bad, nullptr), ValidationError);

  const Vocabulary tiny({"<step>", "<answer>", "</s>", "x"});
  json big = io::to_json(t);
  big["answer"] = json::array({1, 40, 2});
  big["total_tokens"] = t.total_tokens;
  EXPECT_THROW(io::trace_from_json(big, &tiny), ValidationError);
}

TEST(PairJson, RoundTripAndLengthRule) {
  io::PairRow r{"p", {"traces.jsonl", 3}, TraceRef{"traces.jsonl", 7}, 10, 20,
                SelectionMode::kQFix};
  const auto back = io::pair_row_from_json(io::to_json(r));
  EXPECT_EQ(back.chosen.line, 3u);
  ASSERT_TRUE(back.rejected.has_value());
  EXPECT_EQ(back.rejected->line, 7u);
  EXPECT_EQ(back.mode, SelectionMode::kQFix);

  json j = io::to_json(r);
  j["len_rejected"] = 5;
  EXPECT_THROW(io::pair_row_from_json(j), ValidationError);
  j = io::to_json(r);
  j["chosen"]["line"] = 0;
  EXPECT_THROW(io::pair_row_from_json(j), ValidationError);

  io::PairRow sft{"p", {"traces.jsonl", 1}, std::nullopt, 10, 0, SelectionMode::kQDyn};
  EXPECT_TRUE(io::to_json(sft)["rejected"].is_null());
  EXPECT_FALSE(io::pair_row_from_json(io::to_json(sft)).rejected.has_value());
}

TEST(MetricsJson, Fields) {
  MetricsRecord m;
  m.accuracy = 0.5;
  m.len_a = 12;
  const json j = io::to_json(m, 3, 4);
  EXPECT_TRUE(j["len_t"].is_null());
  EXPECT_EQ(j["n_problems"], 3);
  EXPECT_EQ(j["runs_per_problem"], 4);
  EXPECT_EQ(j["budget_B"], 256);
}

TEST(CurveCsv, Format) {
  EXPECT_EQ(io::curve_csv({{0, 0.0}, {8, 0.25}}), "budget,accuracy\n0,0\n8,0.25\n");
}

}  // namespace
}  // namespace squeeze
