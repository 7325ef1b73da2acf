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

#include "squeeze/error.hpp"
#include "squeeze/vocabulary.hpp"

namespace squeeze {
namespace {

Vocabulary small() { return Vocabulary({"<step>", "<answer>", "</s>", "a", "b"}); }

TEST(Vocabulary, LookupAndRender) {
  const Vocabulary v = small();
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("a"), 3u);
  EXPECT_EQ(v.symbol(4), "b");
  EXPECT_FALSE(v.find("zz").has_value());
  EXPECT_THROW(v.id("zz"), ValidationError);
  const TokenSeq seq = {3, 4, 0};
  EXPECT_EQ(v.render(seq), "a b <step>");
}

TEST(Vocabulary, RejectsBadSymbolSets) {
  EXPECT_THROW(Vocabulary({"<step>", "<answer>", "</s>"}), ValidationError);
  EXPECT_THROW(Vocabulary({"<step>", "<answer>", "</s>", "a", "a"}),
               ValidationError);
}

TEST(Vocabulary, CheckNamesOffendingField) {
  const Vocabulary v = small();
  const TokenSeq bad = {1, 9};
  try {
    v.check(bad, "prompt");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("prompt"), std::string::npos);
  }
}

TEST(Vocabulary, JsonRoundTrip) {
  const Vocabulary v = small();
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
}

}  // namespace
}  // namespace squeeze
