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

#include "squeeze/objective.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "squeeze/error.hpp"

namespace squeeze {

LossConfig LossConfig::large_model() {
  LossConfig c;
  c.learning_rate = 5e-6;
  c.batch_size = 128;
  return c;
}

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ValidationError("train.beta must be > 0");
  if (!(lambda >= 0.0)) throw ValidationError("train.lambda must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ValidationError("train.eta must lie in [0, 1]");
  }
  if (!(learning_rate >= 0.0)) {
    throw ValidationError("train.learning_rate must be >= 0");
  }
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
}

namespace {

// -log sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_lengths(const PreferenceRecord& record) {
  if (record.len_chosen == 0 || record.len_rejected == 0) {
    throw ValidationError("preference record for " + record.problem_id +
                          " has a nonpositive response length");
  }
}

double length_margin(const PreferenceRecord& record, double lambda) {
  return lambda * std::log(static_cast<double>(record.len_rejected) /
                           static_cast<double>(record.len_chosen));
}

}  // namespace

double response_logratio(const PolicyPair& models, const Problem& problem,
                         const Trace& trace) {
  const TokenSeq response = trace.tokens();
  return sequence_logprob(models.policy(), problem.prompt, response) -
         sequence_logprob(models.reference(), problem.prompt, response);
}

LossBreakdown dpo_l_loss(const PolicyPair& models, const Problem& problem,
                         const PreferenceRecord& record,
                         const LossConfig& config) {
  if (!record.has_rejected()) {
    throw ValidationError("dpo_l_loss needs a rejected trace (" +
                          record.problem_id + ")");
  }
  check_lengths(record);
  LossBreakdown b;
  b.chosen_logratio = response_logratio(models, problem, record.chosen);
  b.rejected_logratio = response_logratio(models, problem, *record.rejected);
  b.margin = config.beta * (b.chosen_logratio - b.rejected_logratio) +
             length_margin(record, config.lambda);
  b.dpo_l = neg_log_sigmoid(b.margin);
  return b;
}

double sft_loss(const PolicyPair& models, const Problem& problem,
                const Trace& chosen) {
  return -sequence_logprob(models.policy(), problem.prompt, chosen.tokens());
}

LossBreakdown total_loss(const PolicyPair& models, const Problem& problem,
                         const PreferenceRecord& record,
                         const LossConfig& config) {
  LossBreakdown b;
  if (record.has_rejected()) b = dpo_l_loss(models, problem, record, config);
  b.sft = sft_loss(models, problem, record.chosen);
  b.total = config.eta * b.dpo_l + (1.0 - config.eta) * b.sft;
  return b;
}

LossBreakdown accumulate_total_loss_gradient(const PolicyPair& models,
                                             const Problem& problem,
                                             const PreferenceRecord& record,
                                             const LossConfig& config,
                                             double scale,
                                             std::span<double> grad) {
  const ModelParams& policy = models.policy();
  const TokenSeq chosen = record.chosen.tokens();
  LossBreakdown b;
  const double lp_w = sequence_logprob(policy, problem.prompt, chosen);
  b.sft = -lp_w;

  // d total / d logpi(y_w) and d total / d logpi(y_l).
  double coef_w = -(1.0 - config.eta);
  double coef_l = 0.0;
  TokenSeq rejected;
  if (record.has_rejected()) {
    check_lengths(record);
    rejected = record.rejected->tokens();
    const double lp_l = sequence_logprob(policy, problem.prompt, rejected);
    b.chosen_logratio =
        lp_w - sequence_logprob(models.reference(), problem.prompt, chosen);
    b.rejected_logratio =
        lp_l - sequence_logprob(models.reference(), problem.prompt, rejected);
    b.margin = config.beta * (b.chosen_logratio - b.rejected_logratio) +
               length_margin(record, config.lambda);
    b.dpo_l = neg_log_sigmoid(b.margin);
    // d(-log sigmoid(m))/dm = -sigmoid(-m).
    const double dm = -sigmoid(-b.margin);
    coef_w += config.eta * dm * config.beta;
    coef_l = -config.eta * dm * config.beta;
  }
  b.total = config.eta * b.dpo_l + (1.0 - config.eta) * b.sft;

  accumulate_logprob_gradient(policy, problem.prompt, chosen, scale * coef_w,
                              grad);
  if (coef_l != 0.0) {
    accumulate_logprob_gradient(policy, problem.prompt, rejected,
                                scale * coef_l, grad);
  }
  return b;
}

Gradient total_loss_gradient(const PolicyPair& models, const Problem& problem,
                             const PreferenceRecord& record,
                             const LossConfig& config) {
  Gradient grad(models.policy().weight_count(), 0.0);
  accumulate_total_loss_gradient(models, problem, record, config, 1.0, grad);
  return grad;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0),
      v_(size, 0.0) {}

void Adam::step(std::span<double> weights, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    weights[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

TrainResult train(const PolicyPair& models,
                  const std::vector<PreferenceRecord>& records,
                  const std::vector<Problem>& problems,
                  const LossConfig& config) {
  config.validate();
  if (records.empty()) throw ValidationError("train needs at least one record");

  std::unordered_map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id.emplace(p.id, &p);
  std::vector<const Problem*> problem_of(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = by_id.find(records[i].problem_id);
    if (it == by_id.end()) {
      throw ValidationError("record " + std::to_string(i) +
                            " references unknown problem '" +
                            records[i].problem_id + "'");
    }
    problem_of[i] = it->second;
  }

  // The reference stays shared and frozen; only the policy copy moves.
  PolicyPair state(models.policy(), models.reference());
  ModelParams& policy = state.policy();
  Adam adam(policy.weight_count(), config.learning_rate, config.adam_beta1,
            config.adam_beta2, config.adam_eps);
  Gradient grad(policy.weight_count(), 0.0);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{policy, {}, {}};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, "epoch", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }

    EpochLog log;
    log.epoch = epoch;
    std::size_t n_pairs = 0, n_won = 0, n_batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      const double scale = 1.0 / static_cast<double>(hi - lo);
      std::fill(grad.begin(), grad.end(), 0.0);
      BatchLog batch;
      batch.epoch = epoch;
      batch.size = hi - lo;
      for (std::size_t pos = lo; pos < hi; ++pos) {
        const std::size_t idx = order[pos];
        const auto b = accumulate_total_loss_gradient(
            state, *problem_of[idx], records[idx], config, scale, grad);
        if (!std::isfinite(b.total)) {
          throw NumericalError("non-finite loss at record " +
                               std::to_string(idx) + " (problem " +
                               records[idx].problem_id + ", epoch " +
                               std::to_string(epoch) + ")");
        }
        batch.mean_total += b.total * scale;
        batch.mean_dpo_l += b.dpo_l * scale;
        batch.mean_sft += b.sft * scale;
        if (records[idx].has_rejected()) {
          ++n_pairs;
          if (b.margin > 0.0) ++n_won;
        }
        log.mean_len_chosen +=
            static_cast<double>(records[idx].chosen.total_tokens);
      }
      double sq = 0.0;
      for (double g : grad) sq += g * g;
      batch.grad_norm = std::sqrt(sq);
      if (!std::isfinite(batch.grad_norm)) {
        throw NumericalError("non-finite gradient in epoch " +
                             std::to_string(epoch));
      }
      adam.step(policy.weights(), grad);

      const double w = static_cast<double>(batch.size);
      log.mean_total += batch.mean_total * w;
      log.mean_dpo_l += batch.mean_dpo_l * w;
      log.mean_sft += batch.mean_sft * w;
      log.grad_norm += batch.grad_norm;
      ++n_batches;
      result.batches.push_back(batch);
    }
    const double n = static_cast<double>(records.size());
    log.mean_total /= n;
    log.mean_dpo_l /= n;
    log.mean_sft /= n;
    log.mean_len_chosen /= n;
    log.grad_norm /= static_cast<double>(n_batches);
    log.pref_accuracy =
        n_pairs ? static_cast<double>(n_won) / static_cast<double>(n_pairs)
                : 0.0;
    log.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    result.epochs.push_back(log);
  }
  policy.check_finite();
  result.policy = policy;
  return result;
}

}  // namespace squeeze
