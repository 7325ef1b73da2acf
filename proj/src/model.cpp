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

#include "squeeze/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "squeeze/checksum.hpp"
#include "squeeze/error.hpp"

namespace squeeze {

ModelParams::ModelParams(std::shared_ptr<const Vocabulary> vocab,
                         std::size_t order)
    : vocab_(std::move(vocab)), order_(order) {
  if (!vocab_) throw ValidationError("model requires a vocabulary");
  if (order_ == 0) throw ValidationError("context order must be >= 1");
  weights_.assign(rows() * cols(), 0.0);
}

void ModelParams::active_rows(std::span<const TokenId> history,
                              std::span<std::size_t> rows) const {
  const std::size_t len = history.size();
  for (std::size_t back = 1; back <= order_; ++back) {
    const TokenId tok = back <= len ? history[len - back] : Vocabulary::kEos;
    rows[back - 1] = feature_row(back, tok);
  }
}

void ModelParams::logits(std::span<const TokenId> history,
                         std::span<double> out) const {
  const std::size_t v = cols();
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t len = history.size();
  for (std::size_t back = 1; back <= order_; ++back) {
    const TokenId tok = back <= len ? history[len - back] : Vocabulary::kEos;
    const double* row = weights_.data() + feature_row(back, tok) * v;
    for (std::size_t y = 0; y < v; ++y) out[y] += row[y];
  }
  for (std::size_t y = 0; y < v; ++y) {
    if (!std::isfinite(out[y])) {
      throw NumericalError("non-finite logit for token " + std::to_string(y) +
                           "; model parameters are corrupted");
    }
  }
}

bool ModelParams::compatible(const ModelParams& other) const {
  return order_ == other.order_ && *vocab_ == *other.vocab_;
}

void ModelParams::check_finite() const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i])) {
      throw NumericalError("non-finite weight at row " +
                           std::to_string(i / cols()) + ", column " +
                           std::to_string(i % cols()));
    }
  }
}

namespace {

void softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : z) x /= sum;
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("temperature must be positive and finite, got " +
                          std::to_string(temperature));
  }
}

// Inverse-CDF draw from probs.
TokenId draw(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t y = 0; y < probs.size(); ++y) {
    acc += probs[y];
    if (u < acc) return static_cast<TokenId>(y);
  }
  // Round-off left u above the final partial sum: take the last token with
  // nonzero mass.
  for (std::size_t y = probs.size(); y-- > 0;) {
    if (probs[y] > 0.0) return static_cast<TokenId>(y);
  }
  return 0;
}

bool is_stop(TokenId t, std::span<const TokenId> stop_ids) {
  return std::find(stop_ids.begin(), stop_ids.end(), t) != stop_ids.end();
}

TokenSeq concat(std::span<const TokenId> a, std::span<const TokenId> b) {
  TokenSeq out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

NextTokenDistribution next_token_dist(const LanguageModel& model,
                                      std::span<const TokenId> context,
                                      double temperature) {
  check_temperature(temperature);
  model.vocabulary().check(context, "context");
  NextTokenDistribution dist;
  dist.probs.resize(model.vocabulary().size());
  model.logits(context, dist.probs);
  for (double& z : dist.probs) z /= temperature;
  softmax_inplace(dist.probs);
  return dist;
}

std::vector<double> next_token_logprobs(const LanguageModel& model,
                                        std::span<const TokenId> context) {
  model.vocabulary().check(context, "context");
  std::vector<double> z(model.vocabulary().size());
  model.logits(context, z);
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  for (double& x : z) x -= lse;
  return z;
}

double sequence_logprob(const LanguageModel& model,
                        std::span<const TokenId> context,
                        std::span<const TokenId> continuation) {
  if (continuation.empty()) {
    throw ValidationError("sequence_logprob needs a non-empty continuation");
  }
  const Vocabulary& vocab = model.vocabulary();
  vocab.check(context, "context");
  vocab.check(continuation, "continuation");
  const TokenSeq buf = concat(context, continuation);
  std::vector<double> z(vocab.size());
  double total = 0.0;
  for (std::size_t j = 0; j < continuation.size(); ++j) {
    model.logits(std::span(buf.data(), context.size() + j), z);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - mx);
    total += z[continuation[j]] - mx - std::log(sum);
  }
  return total;
}

TokenSeq sample_sequence(const LanguageModel& model,
                         std::span<const TokenId> prompt, double temperature,
                         std::size_t max_tokens,
                         std::span<const TokenId> stop_ids, Seed seed) {
  check_temperature(temperature);
  if (max_tokens == 0) throw ValidationError("max_tokens must be >= 1");
  const Vocabulary& vocab = model.vocabulary();
  vocab.check(prompt, "prompt");
  Rng rng(seed);
  TokenSeq buf(prompt.begin(), prompt.end());
  buf.reserve(prompt.size() + max_tokens);
  std::vector<double> probs(vocab.size());
  for (std::size_t i = 0; i < max_tokens; ++i) {
    model.logits(buf, probs);
    for (double& z : probs) z /= temperature;
    softmax_inplace(probs);
    const TokenId t = draw(probs, rng.uniform());
    buf.push_back(t);
    if (is_stop(t, stop_ids)) break;
  }
  return TokenSeq(buf.begin() + static_cast<std::ptrdiff_t>(prompt.size()),
                  buf.end());
}

TokenSeq greedy_sequence(const LanguageModel& model,
                         std::span<const TokenId> prompt,
                         std::size_t max_tokens,
                         std::span<const TokenId> stop_ids) {
  if (max_tokens == 0) throw ValidationError("max_tokens must be >= 1");
  const Vocabulary& vocab = model.vocabulary();
  vocab.check(prompt, "prompt");
  TokenSeq buf(prompt.begin(), prompt.end());
  std::vector<double> z(vocab.size());
  for (std::size_t i = 0; i < max_tokens; ++i) {
    model.logits(buf, z);
    const auto t = static_cast<TokenId>(
        std::max_element(z.begin(), z.end()) - z.begin());
    buf.push_back(t);
    if (is_stop(t, stop_ids)) break;
  }
  return TokenSeq(buf.begin() + static_cast<std::ptrdiff_t>(prompt.size()),
                  buf.end());
}

double accumulate_logprob_gradient(const ModelParams& params,
                                   std::span<const TokenId> context,
                                   std::span<const TokenId> continuation,
                                   double scale, std::span<double> grad) {
  if (continuation.empty()) {
    throw ValidationError("gradient needs a non-empty continuation");
  }
  if (grad.size() != params.weight_count()) {
    throw ValidationError("gradient buffer has the wrong shape");
  }
  const Vocabulary& vocab = params.vocabulary();
  vocab.check(context, "context");
  vocab.check(continuation, "continuation");
  const std::size_t v = params.cols();
  const TokenSeq buf = concat(context, continuation);
  std::vector<double> probs(v);
  std::vector<std::size_t> rows(params.order());
  double total = 0.0;
  for (std::size_t j = 0; j < continuation.size(); ++j) {
    const std::span history(buf.data(), context.size() + j);
    params.logits(history, probs);
    const double mx = *std::max_element(probs.begin(), probs.end());
    double sum = 0.0;
    for (double& x : probs) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : probs) x /= sum;
    const TokenId target = continuation[j];
    total += std::log(probs[target]);
    params.active_rows(history, rows);
    for (std::size_t r : rows) {
      double* g = grad.data() + r * v;
      for (std::size_t y = 0; y < v; ++y) g[y] -= scale * probs[y];
      g[target] += scale;
    }
  }
  return total;
}

Gradient logprob_gradient(const ModelParams& params,
                          std::span<const TokenId> context,
                          std::span<const TokenId> continuation) {
  Gradient grad(params.weight_count(), 0.0);
  accumulate_logprob_gradient(params, context, continuation, 1.0, grad);
  return grad;
}

PolicyPair::PolicyPair(ModelParams initial)
    : policy_(initial),
      reference_(std::make_shared<const ModelParams>(std::move(initial))) {}

PolicyPair::PolicyPair(ModelParams policy, ModelParams reference)
    : policy_(std::move(policy)),
      reference_(std::make_shared<const ModelParams>(std::move(reference))) {
  if (!policy_.compatible(*reference_)) {
    throw ValidationError(
        "policy and reference must share vocabulary and context order");
  }
}

// --- serialization -------------------------------------------------------

namespace {

constexpr std::string_view kFormat = "squeeze-params";
constexpr int kVersion = 1;

std::vector<unsigned char> payload_bytes(std::span<const double> w) {
  std::vector<unsigned char> bytes(w.size() * sizeof(double));
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(w[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
  }
  return bytes;
}

}  // namespace

std::string params_checksum(const ModelParams& params) {
  return sha256_hex(payload_bytes(params.weights()));
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = payload_bytes(params.weights());
  nlohmann::json header = {
      {"format", kFormat},
      {"version", kVersion},
      {"V", params.vocab_size()},
      {"n", params.order()},
      {"checksum", sha256_hex(bytes)},
      {"vocab", params.vocabulary().to_json()},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(path.string() + ": missing checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad checkpoint header: " +
                          e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormat ||
      header.value("version", 0) != kVersion) {
    throw ValidationError(path.string() + ": not a squeeze checkpoint");
  }
  auto vocab = std::make_shared<const Vocabulary>(
      Vocabulary::from_json(header.at("vocab")));
  const auto v = header.at("V").get<std::size_t>();
  const auto n = header.at("n").get<std::size_t>();
  if (v != vocab->size()) {
    throw ValidationError(path.string() + ": header V disagrees with vocab");
  }
  ModelParams params(std::move(vocab), n);
  std::vector<unsigned char> bytes(params.weight_count() * sizeof(double));
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() ||
      in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": payload size mismatch");
  }
  if (sha256_hex(bytes) != header.at("checksum").get<std::string>()) {
    throw ValidationError(path.string() + ": checksum mismatch");
  }
  auto w = params.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    }
    w[i] = std::bit_cast<double>(bits);
  }
  params.check_finite();
  return params;
}

}  // namespace squeeze
