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

// Length-aware preference loss with an SFT anchor.
//
//   margin = beta * (logratio_w - logratio_l) + lambda * log(len_l / len_w)
//   dpo_l  = -log sigmoid(margin)
//   sft    = -log pi(y_w | x)            (token sum)
//   total  = eta * dpo_l + (1 - eta) * sft
//
// logratio_y = log pi_policy(y | x) - log pi_reference(y | x). Records
// without a rejected trace contribute (1 - eta) * sft only.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "squeeze/depth_select.hpp"

namespace squeeze {

struct LossConfig {
  double beta = 0.1;
  double lambda = 1.0;
  double eta = 0.5;
  double learning_rate = 5e-3;
  std::size_t batch_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 3;
  Seed seed = 0;

  // Documented large-model preset: lr 5e-6, batch 128.
  static LossConfig large_model();

  void validate() const;
};

struct LossBreakdown {
  double dpo_l = 0.0;
  double sft = 0.0;
  double total = 0.0;
  double margin = 0.0;
  double chosen_logratio = 0.0;
  double rejected_logratio = 0.0;
};

// Response = steps then answer, delimiters included; context = prompt.
double response_logratio(const PolicyPair& models, const Problem& problem,
                         const Trace& trace);

// Requires a rejected trace and positive lengths (ValidationError otherwise).
LossBreakdown dpo_l_loss(const PolicyPair& models, const Problem& problem,
                         const PreferenceRecord& record,
                         const LossConfig& config);

double sft_loss(const PolicyPair& models, const Problem& problem,
                const Trace& chosen);

LossBreakdown total_loss(const PolicyPair& models, const Problem& problem,
                         const PreferenceRecord& record,
                         const LossConfig& config);

// d total / d policy weights. The reference is constant.
Gradient total_loss_gradient(const PolicyPair& models, const Problem& problem,
                             const PreferenceRecord& record,
                             const LossConfig& config);

// grad += scale * d total / d policy weights; returns the loss terms.
LossBreakdown accumulate_total_loss_gradient(const PolicyPair& models,
                                             const Problem& problem,
                                             const PreferenceRecord& record,
                                             const LossConfig& config,
                                             double scale,
                                             std::span<double> grad);

struct BatchLog {
  std::size_t epoch = 0;
  std::size_t size = 0;
  double mean_total = 0.0;
  double mean_dpo_l = 0.0;
  double mean_sft = 0.0;
  double grad_norm = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_total = 0.0;
  double mean_dpo_l = 0.0;
  double mean_sft = 0.0;
  double grad_norm = 0.0;        // mean over batches
  double pref_accuracy = 0.0;    // pairs with margin > 0
  double mean_len_chosen = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelParams policy;
  std::vector<EpochLog> epochs;
  std::vector<BatchLog> batches;
};

// Mini-batch Adam on the mean total loss. Records are shuffled each epoch
// with derive_seed(config.seed, "epoch", e). Throws NumericalError naming
// the record when a loss is non-finite.
TrainResult train(const PolicyPair& models,
                  const std::vector<PreferenceRecord>& records,
                  const std::vector<Problem>& problems,
                  const LossConfig& config);

// Minimal Adam in double precision.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps);
  void step(std::span<double> weights, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace squeeze
