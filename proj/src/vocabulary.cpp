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

#include "squeeze/vocabulary.hpp"

#include "squeeze/error.hpp"

namespace squeeze {

Vocabulary::Vocabulary(std::vector<std::string> symbols)
    : symbols_(std::move(symbols)) {
  if (symbols_.size() < kMinSize) {
    throw ValidationError("vocabulary needs at least " +
                          std::to_string(kMinSize) + " symbols, got " +
                          std::to_string(symbols_.size()));
  }
  index_.reserve(symbols_.size());
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto [it, inserted] =
        index_.emplace(symbols_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw ValidationError("duplicate vocabulary symbol '" + symbols_[i] +
                            "'");
    }
  }
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (!contains(id)) {
    throw ValidationError("token id " + std::to_string(id) +
                          " outside vocabulary of size " +
                          std::to_string(size()));
  }
  return symbols_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view symbol) const {
  if (auto found = find(symbol)) return *found;
  throw ValidationError("unknown symbol '" + std::string(symbol) + "'");
}

void Vocabulary::check(std::span<const TokenId> tokens,
                       std::string_view what) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!contains(tokens[i])) {
      throw ValidationError(std::string(what) + ": token id " +
                            std::to_string(tokens[i]) + " at position " +
                            std::to_string(i) + " outside vocabulary of size " +
                            std::to_string(size()));
    }
  }
}

std::string Vocabulary::render(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += symbol(tokens[i]);
  }
  return out;
}

nlohmann::json Vocabulary::to_json() const { return symbols_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("vocabulary must be a JSON array");
  std::vector<std::string> symbols;
  symbols.reserve(j.size());
  for (const auto& s : j) {
    if (!s.is_string()) {
      throw ValidationError("vocabulary entries must be strings");
    }
    symbols.push_back(s.get<std::string>());
  }
  return Vocabulary(std::move(symbols));
}

}  // namespace squeeze
