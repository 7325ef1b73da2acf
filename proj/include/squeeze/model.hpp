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

// Autoregressive model contract and the built-in context-feature model.
//
// The built-in model is a linear softmax over one-hot features of the last
// `order` tokens: feature row (k - 1) * V + token for the token k positions
// back. Positions before the start of the sequence use the EOS token as a
// padding feature, so the weight matrix is always (order * V) x V.
//
// All log-probabilities used for training and divergences are evaluated at
// temperature 1. Temperature only enters through sampling.

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "squeeze/random.hpp"
#include "squeeze/vocabulary.hpp"

namespace squeeze {

struct NextTokenDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](TokenId id) const { return probs[id]; }
};

// Anything that can score the next token given a history.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  // Writes V unnormalized logits for the token following `history`.
  // Throws NumericalError if any logit is non-finite.
  virtual void logits(std::span<const TokenId> history,
                      std::span<double> out) const = 0;
};

class ModelParams final : public LanguageModel {
 public:
  static constexpr std::size_t kDefaultOrder = 2;

  // Zero-initialized weights (the uniform model).
  explicit ModelParams(std::shared_ptr<const Vocabulary> vocab,
                       std::size_t order = kDefaultOrder);

  const Vocabulary& vocabulary() const override { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& shared_vocabulary() const {
    return vocab_;
  }

  std::size_t vocab_size() const { return vocab_->size(); }
  std::size_t order() const { return order_; }
  std::size_t rows() const { return order_ * vocab_size(); }
  std::size_t cols() const { return vocab_size(); }
  std::size_t weight_count() const { return weights_.size(); }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  double& at(std::size_t row, std::size_t col) {
    return weights_[row * cols() + col];
  }
  double at(std::size_t row, std::size_t col) const {
    return weights_[row * cols() + col];
  }

  // Row of the feature "token `token` sits `back` positions before the
  // predicted one", back in [1, order].
  std::size_t feature_row(std::size_t back, TokenId token) const {
    return (back - 1) * vocab_size() + token;
  }
  // Fills `rows` (size order()) with the active feature rows for `history`.
  void active_rows(std::span<const TokenId> history,
                   std::span<std::size_t> rows) const;

  void logits(std::span<const TokenId> history,
              std::span<double> out) const override;

  // Same vocabulary and context order.
  bool compatible(const ModelParams& other) const;

  // Throws NumericalError if any weight is non-finite.
  void check_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.order_ == b.order_ && *a.vocab_ == *b.vocab_ &&
           a.weights_ == b.weights_;
  }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::size_t order_;
  std::vector<double> weights_;
};

// Dense gradient laid out like ModelParams::weights().
using Gradient = std::vector<double>;

// softmax(logits / temperature). Throws ValidationError for temperature <= 0
// or out-of-vocabulary context ids.
NextTokenDistribution next_token_dist(const LanguageModel& model,
                                      std::span<const TokenId> context,
                                      double temperature = 1.0);

// log of the softmax at temperature 1, computed with log-sum-exp.
std::vector<double> next_token_logprobs(const LanguageModel& model,
                                        std::span<const TokenId> context);

// Sum over j of log Q(t_j | context, t_<j) at temperature 1.
// Throws ValidationError for an empty continuation or unknown ids.
double sequence_logprob(const LanguageModel& model,
                        std::span<const TokenId> context,
                        std::span<const TokenId> continuation);

// Draws up to max_tokens tokens, stopping after the first emitted stop id.
// The prompt is not included in the result.
TokenSeq sample_sequence(const LanguageModel& model,
                         std::span<const TokenId> prompt, double temperature,
                         std::size_t max_tokens,
                         std::span<const TokenId> stop_ids, Seed seed);

// Argmax decoding, first index on ties. Same stopping rule as sampling.
TokenSeq greedy_sequence(const LanguageModel& model,
                         std::span<const TokenId> prompt,
                         std::size_t max_tokens,
                         std::span<const TokenId> stop_ids);

// Exact gradient of sequence_logprob with respect to every weight:
// sum over positions of (onehot(target) - probs) on each active feature row.
Gradient logprob_gradient(const ModelParams& params,
                          std::span<const TokenId> context,
                          std::span<const TokenId> continuation);

// grad += scale * d sequence_logprob / d weights. Returns the log-prob.
double accumulate_logprob_gradient(const ModelParams& params,
                                   std::span<const TokenId> context,
                                   std::span<const TokenId> continuation,
                                   double scale, std::span<double> grad);

// Trainable policy plus a frozen reference snapshot.
class PolicyPair {
 public:
  // Reference is a snapshot of `initial`.
  explicit PolicyPair(ModelParams initial);
  PolicyPair(ModelParams policy, ModelParams reference);

  ModelParams& policy() { return policy_; }
  const ModelParams& policy() const { return policy_; }
  const ModelParams& reference() const { return *reference_; }

 private:
  ModelParams policy_;
  std::shared_ptr<const ModelParams> reference_;
};

// Checkpoint format: one line of JSON header
//   {"format":"squeeze-params","version":1,"V":..,"n":..,
//    "checksum":"<sha256 of payload>","vocab":[...]}
// followed by '\n' and V*n*V little-endian float64 weights, row-major.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
std::string params_checksum(const ModelParams& params);

}  // namespace squeeze
