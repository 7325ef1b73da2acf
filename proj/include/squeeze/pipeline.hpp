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

// File-to-file pipeline stages: generate -> select -> refine -> train ->
// eval. Every stage reads and writes artifacts under one output directory
// and records input/output checksums in manifest.json. Wall-clock timings
// go to timings.json so the manifest itself is reproducible byte for byte.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeeze/depth_select.hpp"
#include "squeeze/evalkit.hpp"
#include "squeeze/objective.hpp"
#include "squeeze/refine.hpp"

namespace squeeze {

struct WorldConfig {
  std::size_t train_problems = 200;
  std::size_t eval_problems = 100;
  int difficulty_min = 1;
  int difficulty_max = 5;
  std::size_t samples_per_problem = 16;
  double sample_temperature = 0.9;
  std::size_t max_trace_tokens = 256;
};

// How the base model is obtained: loaded from a checkpoint, or fit on
// verbose gold traces of a separate problem set.
struct ModelConfig {
  std::size_t order = 3;
  std::string init_checkpoint;  // empty: pre-fit the built-in model
  std::size_t prefit_problems = 400;
  std::size_t prefit_epochs = 10;
  double prefit_learning_rate = 0.1;
  std::size_t prefit_batch_size = 16;
  double verbose_repeat_mean = 3.0;  // mean extra copies per gold step
};

struct EvalConfig {
  std::size_t runs_per_problem = 16;
  double temperature = 0.6;
  std::size_t budget = 256;
  std::size_t curve_step = 8;
  std::string checkpoint;  // empty: the trained checkpoint
  std::string tag;         // suffix for metrics/curve/run files
};

struct PathsConfig {
  std::string problems = "problems.jsonl";
  std::string traces = "traces.jsonl";
  std::string pairs = "pairs.jsonl";
  std::string selection_report = "selection_report.json";
  std::string refined = "refined.jsonl";
  std::string base_model = "base_model.bin";
  std::string checkpoint = "checkpoint.bin";
  std::string training_log = "training_log.jsonl";
  std::string metrics = "metrics.json";
  std::string curve = "curve.csv";
  std::string eval_runs = "eval_runs.jsonl";
  std::string manifest = "manifest.json";
  std::string timings = "timings.json";
};

struct PipelineConfig {
  Seed seed = 0;
  std::string out_dir = "run";
  std::size_t workers = 1;
  WorldConfig world;
  ModelConfig model;
  SelectionConfig select;
  RefineConfig refine;
  LossConfig train;
  // "custom" keeps train.eta / train.lambda; "dpo", "sft", "dpo_sft" and
  // "dpo_l_sft" overwrite them.
  std::string objective = "custom";
  EvalConfig eval;
  PathsConfig paths;

  // Throws ValidationError on out-of-range values or colliding paths.
  void validate() const;
  std::filesystem::path path(const std::string& name) const {
    return std::filesystem::path(out_dir) / name;
  }
};

nlohmann::json config_to_json(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
// Applies "a.b.c=value"; value is parsed as JSON when possible, otherwise
// taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);
// SHA-256 of the config without out_dir and workers, which never affect
// results.
std::string config_hash(const PipelineConfig& config);

// --- stages ------------------------------------------------------------------

// Builds the base model: loads model.init_checkpoint or pre-fits the
// built-in model on verbose gold traces.
ModelParams build_base_model(const PipelineConfig& config);

void cmd_generate(const PipelineConfig& config);
void cmd_select(const PipelineConfig& config);
void cmd_refine(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config);
// Returns the metrics it wrote.
MetricsRecord cmd_eval(const PipelineConfig& config);

struct RunSummary {
  MetricsRecord before;
  MetricsRecord after;
  double mean_positive_len = 0.0;  // averaged over problems with positives
  std::size_t n_records = 0;
};

// generate, select, refine, train, then evaluates the base model (tag
// "_base") and the trained checkpoint.
RunSummary cmd_all(const PipelineConfig& config);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepRun {
  std::string label;
  std::vector<std::string> overrides;
  RunSummary summary;
};

// Runs cmd_all for every combination of axis values under
// <out_dir>/<label>, writing sweep.json at the top level.
std::vector<SweepRun> cmd_sweep(const nlohmann::json& base_config,
                                const std::vector<SweepAxis>& axes);

// Problems used by eval for a given config (held-out seed space).
std::vector<Problem> eval_problems(const PipelineConfig& config,
                                   const Vocabulary& vocab);

// Sets the spdlog level from SQUEEZE_LOG (error|info|debug).
void init_logging();

}  // namespace squeeze
