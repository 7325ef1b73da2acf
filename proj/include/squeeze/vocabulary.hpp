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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace squeeze {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Token alphabet. Ids are dense in [0, V). Ids 0-2 are reserved for the
// step delimiter, the answer marker and end-of-sequence, in that order.
class Vocabulary {
 public:
  static constexpr TokenId kStepEnd = 0;
  static constexpr TokenId kAnswerStart = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kReservedCount = 3;
  static constexpr std::size_t kMinSize = kReservedCount + 1;

  // Throws ValidationError on duplicate symbols or fewer than kMinSize.
  explicit Vocabulary(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(TokenId id) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::optional<TokenId> find(std::string_view symbol) const;
  // Like find(), but throws ValidationError for unknown symbols.
  TokenId id(std::string_view symbol) const;

  bool contains(TokenId id) const { return id < symbols_.size(); }
  // Throws ValidationError naming `what` if any id is out of range.
  void check(std::span<const TokenId> tokens, std::string_view what) const;

  // Space-joined symbols.
  std::string render(std::span<const TokenId> tokens) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace squeeze
