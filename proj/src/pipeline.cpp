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

#include "squeeze/pipeline.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "squeeze/checksum.hpp"
#include "squeeze/error.hpp"
#include "squeeze/io.hpp"
#include "squeeze/parallel.hpp"

namespace squeeze {

using nlohmann::json;
namespace fs = std::filesystem;

// --- configuration -----------------------------------------------------------

void PipelineConfig::validate() const {
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (world.difficulty_min < 1 || world.difficulty_max < world.difficulty_min) {
    throw ValidationError("world difficulty range must satisfy 1 <= min <= max");
  }
  if (world.samples_per_problem < 1) {
    throw ValidationError("world.samples_per_problem must be >= 1");
  }
  if (!(world.sample_temperature > 0.0)) {
    throw ValidationError("world.sample_temperature must be > 0");
  }
  if (world.max_trace_tokens < 1) {
    throw ValidationError("world.max_trace_tokens must be >= 1");
  }
  if (model.order < 1) throw ValidationError("model.order must be >= 1");
  if (!(model.verbose_repeat_mean >= 0.0)) {
    throw ValidationError("model.verbose_repeat_mean must be >= 0");
  }
  if (eval.runs_per_problem < 1) {
    throw ValidationError("eval.runs_per_problem must be >= 1");
  }
  if (!(eval.temperature > 0.0)) {
    throw ValidationError("eval.temperature must be > 0");
  }
  if (eval.budget < 1) throw ValidationError("eval.budget must be >= 1");
  if (eval.curve_step < 1) throw ValidationError("eval.curve_step must be >= 1");
  select.validate();
  refine.validate();
  train.validate();

  const std::vector<std::string> files = {
      paths.problems,    paths.traces,     paths.pairs,
      paths.selection_report, paths.refined, paths.base_model,
      paths.checkpoint,  paths.training_log, paths.metrics,
      paths.curve,       paths.eval_runs,  paths.manifest,
      paths.timings};
  std::set<std::string> seen;
  for (const auto& f : files) {
    if (f.empty()) throw ValidationError("artifact paths must be non-empty");
    if (!seen.insert(f).second) {
      throw ValidationError("artifact path '" + f + "' is used twice");
    }
  }
}

json config_to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"workers", c.workers},
      {"world",
       {{"train_problems", c.world.train_problems},
        {"eval_problems", c.world.eval_problems},
        {"difficulty_min", c.world.difficulty_min},
        {"difficulty_max", c.world.difficulty_max},
        {"samples_per_problem", c.world.samples_per_problem},
        {"sample_temperature", c.world.sample_temperature},
        {"max_trace_tokens", c.world.max_trace_tokens}}},
      {"model",
       {{"order", c.model.order},
        {"init_checkpoint", c.model.init_checkpoint},
        {"prefit_problems", c.model.prefit_problems},
        {"prefit_epochs", c.model.prefit_epochs},
        {"prefit_learning_rate", c.model.prefit_learning_rate},
        {"prefit_batch_size", c.model.prefit_batch_size},
        {"verbose_repeat_mean", c.model.verbose_repeat_mean}}},
      {"select",
       {{"alpha", c.select.alpha},
        {"max_pairs", c.select.max_pairs},
        {"mode", std::string(to_string(c.select.mode))},
        {"fixed_quantile", c.select.fixed_quantile},
        {"extra_pos_ratio", c.select.extra_pos_ratio}}},
      {"refine",
       {{"K", c.refine.k},
        {"epsilon", c.refine.epsilon},
        {"window", c.refine.window},
        {"temperature", c.refine.temperature},
        {"max_step_tokens", c.refine.max_step_tokens},
        {"kl_normalize", std::string(to_string(c.refine.normalize))}}},
      {"train",
       {{"objective", c.objective},
        {"beta", c.train.beta},
        {"lambda", c.train.lambda},
        {"eta", c.train.eta},
        {"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"adam_eps", c.train.adam_eps},
        {"epochs", c.train.epochs},
        {"seed", c.train.seed}}},
      {"eval",
       {{"runs_per_problem", c.eval.runs_per_problem},
        {"temperature", c.eval.temperature},
        {"budget", c.eval.budget},
        {"curve_step", c.eval.curve_step},
        {"checkpoint", c.eval.checkpoint},
        {"tag", c.eval.tag}}},
      {"paths",
       {{"problems", c.paths.problems},
        {"traces", c.paths.traces},
        {"pairs", c.paths.pairs},
        {"selection_report", c.paths.selection_report},
        {"refined", c.paths.refined},
        {"base_model", c.paths.base_model},
        {"checkpoint", c.paths.checkpoint},
        {"training_log", c.paths.training_log},
        {"metrics", c.paths.metrics},
        {"curve", c.paths.curve},
        {"eval_runs", c.paths.eval_runs},
        {"manifest", c.paths.manifest},
        {"timings", c.paths.timings}}},
  };
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Overlays `patch` on `base`, rejecting keys `base` does not have.
void merge_checked(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) {
    throw ValidationError("config section '" + where + "' must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    auto target = base.find(it.key());
    if (target == base.end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    if (target->is_object()) {
      merge_checked(*target, it.value(), key);
    } else if (!same_kind(*target, it.value())) {
      throw ValidationError("config key '" + key + "' has the wrong type");
    } else {
      *target = it.value();
    }
  }
}

template <typename T>
T num(const json& j, const char* key, const std::string& section) {
  const json& v = j.at(key);
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      if (!v.is_number_unsigned()) {
        throw ValidationError("config key '" + section + "." + key +
                              "' must be a nonnegative integer");
      }
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) {
      throw ValidationError("config key '" + section + "." + key +
                            "' must be an integer");
    }
  }
  return v.get<T>();
}

void apply_objective_preset(PipelineConfig& c) {
  if (c.objective == "custom") return;
  if (c.objective == "dpo") {
    c.train.eta = 1.0, c.train.lambda = 0.0;
  } else if (c.objective == "sft") {
    c.train.eta = 0.0, c.train.lambda = 0.0;
  } else if (c.objective == "dpo_sft") {
    c.train.eta = 0.5, c.train.lambda = 0.0;
  } else if (c.objective == "dpo_l_sft") {
    c.train.eta = 0.5, c.train.lambda = 1.0;
  } else {
    throw ValidationError("unknown train.objective '" + c.objective + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  json merged = config_to_json(PipelineConfig{});
  merge_checked(merged, j, "");
  PipelineConfig c;
  c.seed = num<Seed>(merged, "seed", "");
  c.out_dir = merged.at("out_dir").get<std::string>();
  c.workers = num<std::size_t>(merged, "workers", "");

  const json& w = merged.at("world");
  c.world.train_problems = num<std::size_t>(w, "train_problems", "world");
  c.world.eval_problems = num<std::size_t>(w, "eval_problems", "world");
  c.world.difficulty_min = num<int>(w, "difficulty_min", "world");
  c.world.difficulty_max = num<int>(w, "difficulty_max", "world");
  c.world.samples_per_problem =
      num<std::size_t>(w, "samples_per_problem", "world");
  c.world.sample_temperature = num<double>(w, "sample_temperature", "world");
  c.world.max_trace_tokens = num<std::size_t>(w, "max_trace_tokens", "world");

  const json& m = merged.at("model");
  c.model.order = num<std::size_t>(m, "order", "model");
  c.model.init_checkpoint = m.at("init_checkpoint").get<std::string>();
  c.model.prefit_problems = num<std::size_t>(m, "prefit_problems", "model");
  c.model.prefit_epochs = num<std::size_t>(m, "prefit_epochs", "model");
  c.model.prefit_learning_rate =
      num<double>(m, "prefit_learning_rate", "model");
  c.model.prefit_batch_size = num<std::size_t>(m, "prefit_batch_size", "model");
  c.model.verbose_repeat_mean = num<double>(m, "verbose_repeat_mean", "model");

  const json& s = merged.at("select");
  c.select.alpha = num<double>(s, "alpha", "select");
  c.select.max_pairs = num<std::size_t>(s, "max_pairs", "select");
  c.select.mode = parse_selection_mode(s.at("mode").get<std::string>());
  c.select.fixed_quantile = num<double>(s, "fixed_quantile", "select");
  c.select.extra_pos_ratio = num<double>(s, "extra_pos_ratio", "select");

  const json& r = merged.at("refine");
  c.refine.k = num<std::size_t>(r, "K", "refine");
  c.refine.epsilon = num<double>(r, "epsilon", "refine");
  c.refine.window = num<std::size_t>(r, "window", "refine");
  c.refine.temperature = num<double>(r, "temperature", "refine");
  c.refine.max_step_tokens = num<std::size_t>(r, "max_step_tokens", "refine");
  c.refine.normalize =
      parse_kl_normalize(r.at("kl_normalize").get<std::string>());

  const json& t = merged.at("train");
  c.train.beta = num<double>(t, "beta", "train");
  c.train.lambda = num<double>(t, "lambda", "train");
  c.train.eta = num<double>(t, "eta", "train");
  c.train.learning_rate = num<double>(t, "learning_rate", "train");
  c.train.batch_size = num<std::size_t>(t, "batch_size", "train");
  c.train.adam_beta1 = num<double>(t, "adam_beta1", "train");
  c.train.adam_beta2 = num<double>(t, "adam_beta2", "train");
  c.train.adam_eps = num<double>(t, "adam_eps", "train");
  c.train.epochs = num<std::size_t>(t, "epochs", "train");
  c.train.seed = num<Seed>(t, "seed", "train");
  c.objective = t.at("objective").get<std::string>();
  apply_objective_preset(c);

  const json& e = merged.at("eval");
  c.eval.runs_per_problem = num<std::size_t>(e, "runs_per_problem", "eval");
  c.eval.temperature = num<double>(e, "temperature", "eval");
  c.eval.budget = num<std::size_t>(e, "budget", "eval");
  c.eval.curve_step = num<std::size_t>(e, "curve_step", "eval");
  c.eval.checkpoint = e.at("checkpoint").get<std::string>();
  c.eval.tag = e.at("tag").get<std::string>();

  const json& p = merged.at("paths");
  c.paths.problems = p.at("problems").get<std::string>();
  c.paths.traces = p.at("traces").get<std::string>();
  c.paths.pairs = p.at("pairs").get<std::string>();
  c.paths.selection_report = p.at("selection_report").get<std::string>();
  c.paths.refined = p.at("refined").get<std::string>();
  c.paths.base_model = p.at("base_model").get<std::string>();
  c.paths.checkpoint = p.at("checkpoint").get<std::string>();
  c.paths.training_log = p.at("training_log").get<std::string>();
  c.paths.metrics = p.at("metrics").get<std::string>();
  c.paths.curve = p.at("curve").get<std::string>();
  c.paths.eval_runs = p.at("eval_runs").get<std::string>();
  c.paths.manifest = p.at("manifest").get<std::string>();
  c.paths.timings = p.at("timings").get<std::string>();

  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ValidationError("bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

// Config minus fields that only say where or how one invocation runs.
json identity_json(const PipelineConfig& config) {
  json j = config_to_json(config);
  j.erase("out_dir");
  j.erase("workers");
  j["eval"].erase("checkpoint");
  j["eval"].erase("tag");
  return j;
}

}  // namespace

std::string config_hash(const PipelineConfig& config) {
  return sha256_hex(identity_json(config).dump());
}

void init_logging() {
  const char* env = std::getenv("SQUEEZE_LOG");
  const std::string level = env ? env : "info";
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("squeeze");
    spdlog::set_default_logger(l);
    return l;
  }();
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

// --- manifest ----------------------------------------------------------------

namespace {

json manifest_skeleton(const PipelineConfig& config) {
  return {{"config_hash", config_hash(config)},
          {"config", identity_json(config)},
          {"stages", json::object()},
          {"metrics", json::object()}};
}

json load_manifest(const PipelineConfig& config) {
  const fs::path path = config.path(config.paths.manifest);
  if (fs::exists(path)) {
    json m = io::read_json(path);
    if (m.is_object() && m.value("config_hash", "") == config_hash(config)) {
      return m;
    }
  }
  return manifest_skeleton(config);
}

void update_timings(const PipelineConfig& config, const std::string& stage,
                    double wall_ms) {
  const fs::path path = config.path(config.paths.timings);
  json t = json::object();
  if (fs::exists(path)) {
    try {
      t = io::read_json(path);
    } catch (const Error&) {
      t = json::object();
    }
  }
  t[stage] = wall_ms;
  io::write_json(path, t);
}

json checksums(const PipelineConfig& config,
               const std::vector<std::string>& names) {
  json out = json::object();
  for (const auto& n : names) {
    const fs::path p = config.path(n);
    out[n] = fs::exists(p) ? json(sha256_file(p)) : json(nullptr);
  }
  return out;
}

struct StageFiles {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  // Outputs that carry wall-clock data; listed but not hashed.
  std::vector<std::string> volatile_outputs;
};

template <typename Body>
void run_stage(const PipelineConfig& config, const std::string& name,
               const StageFiles& files, Body&& body) {
  spdlog::info("stage {}: start", name);
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const Error& e) {
    spdlog::error("stage {} failed: {}", name, e.what());
    if (fs::is_directory(config.out_dir)) {
      try {
        json m = load_manifest(config);
        m["stages"][name] = {{"status", "failed"}, {"error", e.what()}};
        io::write_json(config.path(config.paths.manifest), m);
      } catch (const Error&) {
        // The original failure is the one worth reporting.
      }
    }
    throw;
  }
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  json m = load_manifest(config);
  m["stages"][name] = {{"status", "ok"},
                       {"inputs", checksums(config, files.inputs)},
                       {"outputs", checksums(config, files.outputs)},
                       {"unhashed_outputs", files.volatile_outputs}};
  io::write_json(config.path(config.paths.manifest), m);
  update_timings(config, name, ms);
  spdlog::info("stage {}: done in {:.0f} ms", name, ms);
}

void ensure_writable(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + config.out_dir + ": " +
                  ec.message());
  }
  const fs::path probe = config.path(".write_probe");
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + config.out_dir +
                            " is not writable");
  }
  fs::remove(probe, ec);
}

std::shared_ptr<const Vocabulary> world_vocabulary(const PipelineConfig& c) {
  return make_task_vocabulary(WorldSpec{c.world.difficulty_max});
}

void check_vocabulary(const PipelineConfig& config, const ModelParams& model,
                      const std::string& what) {
  if (!(model.vocabulary() == *world_vocabulary(config))) {
    throw ValidationError(what + ": vocabulary does not match the task world "
                          "configured by world.difficulty_max");
  }
}

std::vector<Problem> read_problems(const PipelineConfig& config,
                                   const Vocabulary& vocab) {
  std::vector<Problem> out;
  std::set<std::string> ids;
  io::read_jsonl(config.path(config.paths.problems),
                 [&](const json& row, std::size_t) {
                   Problem p = io::problem_from_json(row);
                   vocab.check(p.prompt, "prompt");
                   if (!ids.insert(p.id).second) {
                     throw ValidationError("duplicate problem id '" + p.id +
                                           "'");
                   }
                   out.push_back(std::move(p));
                 });
  return out;
}

// Traces indexed by 1-based line (slot 0 unused).
std::vector<Trace> read_traces(const PipelineConfig& config,
                               const Vocabulary& vocab) {
  std::vector<Trace> out(1);
  io::read_jsonl(config.path(config.paths.traces),
                 [&](const json& row, std::size_t) {
                   out.push_back(io::trace_from_json(row, &vocab));
                 });
  return out;
}

std::vector<io::PairRow> read_pairs(const PipelineConfig& config) {
  std::vector<io::PairRow> out;
  io::read_jsonl(config.path(config.paths.pairs),
                 [&](const json& row, std::size_t) {
                   out.push_back(io::pair_row_from_json(row));
                 });
  return out;
}

const Trace& resolve(const PipelineConfig& config,
                     const std::vector<Trace>& traces, const TraceRef& ref,
                     const std::string& problem_id) {
  if (ref.file != config.paths.traces || ref.line == 0 ||
      ref.line >= traces.size() ||
      traces[ref.line].problem_id != problem_id) {
    throw ValidationError("dangling trace reference " + ref.file + ":" +
                          std::to_string(ref.line) + " for problem " +
                          problem_id);
  }
  return traces[ref.line];
}

std::unordered_map<std::string, const Problem*> index_problems(
    const std::vector<Problem>& problems) {
  std::unordered_map<std::string, const Problem*> out;
  for (const auto& p : problems) out.emplace(p.id, &p);
  return out;
}

std::string tagged(const std::string& file, const std::string& tag) {
  if (tag.empty()) return file;
  const auto dot = file.rfind('.');
  if (dot == std::string::npos) return file + tag;
  return file.substr(0, dot) + tag + file.substr(dot);
}

ModelParams prefit(const PipelineConfig& config,
                   std::shared_ptr<const Vocabulary> vocab) {
  ModelParams params(vocab, config.model.order);
  const auto problems = make_task_world(
      *vocab, derive_seed(config.seed, "world", "prefit"),
      config.model.prefit_problems,
      {config.world.difficulty_min, config.world.difficulty_max}, "prefit");
  const double mean = config.model.verbose_repeat_mean;
  const double keep_going = mean / (1.0 + mean);
  std::vector<PreferenceRecord> records;
  records.reserve(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    Rng rng(derive_seed(config.seed, "prefit-repeats", i));
    std::vector<int> repeats;
    for (int s = 0; s < problems[i].difficulty; ++s) {
      int copies = 2;
      while (rng.uniform() < keep_going) ++copies;
      repeats.push_back(copies);
    }
    PreferenceRecord r;
    r.problem_id = problems[i].id;
    r.chosen = gold_trace(*vocab, problems[i], repeats);
    r.len_chosen = r.chosen.total_tokens;
    records.push_back(std::move(r));
  }
  if (records.empty() || config.model.prefit_epochs == 0) return params;
  LossConfig lc;
  lc.eta = 0.0;
  lc.learning_rate = config.model.prefit_learning_rate;
  lc.batch_size = config.model.prefit_batch_size;
  lc.epochs = config.model.prefit_epochs;
  lc.seed = derive_seed(config.seed, "prefit");
  return train(PolicyPair(params), records, problems, lc).policy;
}

}  // namespace

ModelParams build_base_model(const PipelineConfig& config) {
  if (!config.model.init_checkpoint.empty()) {
    ModelParams m = load_params(config.model.init_checkpoint);
    check_vocabulary(config, m, config.model.init_checkpoint);
    return m;
  }
  return prefit(config, world_vocabulary(config));
}

std::vector<Problem> eval_problems(const PipelineConfig& config,
                                   const Vocabulary& vocab) {
  return make_task_world(vocab, derive_seed(config.seed, "world", "eval"),
                         config.world.eval_problems,
                         {config.world.difficulty_min,
                          config.world.difficulty_max},
                         "eval");
}

// --- stages ------------------------------------------------------------------

void cmd_generate(const PipelineConfig& config) {
  const auto& p = config.paths;
  run_stage(config, "generate", {{}, {p.base_model, p.problems, p.traces}, {}},
            [&] {
    ensure_writable(config);
    const ModelParams base = build_base_model(config);
    save_params(base, config.path(p.base_model));

    const auto problems = make_task_world(
        base.vocabulary(), derive_seed(config.seed, "world", "train"),
        config.world.train_problems,
        {config.world.difficulty_min, config.world.difficulty_max}, "train");
    std::vector<TraceSet> sets(problems.size());
    const SamplingConfig sampling{config.world.sample_temperature,
                                  config.world.max_trace_tokens};
    const Seed seed = derive_seed(config.seed, "generate");
    parallel_for(problems.size(), config.workers, [&](std::size_t i) {
      sets[i] = generate_traces(base, problems[i],
                                config.world.samples_per_problem, sampling,
                                seed);
    });

    std::vector<json> problem_rows, trace_rows;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      problem_rows.push_back(io::to_json(problems[i]));
      for (const auto& t : sets[i].traces) trace_rows.push_back(io::to_json(t));
      correct += sets[i].c;
    }
    io::write_jsonl(config.path(p.problems), problem_rows);
    io::write_jsonl(config.path(p.traces), trace_rows);
    spdlog::info("generate: {} problems, {} traces, {} correct",
                 problems.size(), trace_rows.size(), correct);
  });
}

void cmd_select(const PipelineConfig& config) {
  const auto& p = config.paths;
  run_stage(config, "select",
            {{p.base_model, p.problems, p.traces}, {p.pairs, p.selection_report}, {}},
            [&] {
    const ModelParams base = load_params(config.path(p.base_model));
    const Vocabulary& vocab = base.vocabulary();
    const auto problems = read_problems(config, vocab);
    const auto traces = read_traces(config, vocab);
    const auto by_id = index_problems(problems);

    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < problems.size(); ++i) slot[problems[i].id] = i;
    std::vector<TraceSet> sets(problems.size());
    // Line of each (problem, sample_index), for trace refs.
    std::vector<std::map<std::uint32_t, std::size_t>> lines(problems.size());
    for (std::size_t line = 1; line < traces.size(); ++line) {
      const Trace& t = traces[line];
      auto it = slot.find(t.problem_id);
      if (it == slot.end()) {
        throw ValidationError(p.traces + ":" + std::to_string(line) +
                              ": unknown problem '" + t.problem_id + "'");
      }
      const Problem& prob = *by_id.at(t.problem_id);
      if (t.correct != grade(vocab, prob, t) && t.correct) {
        throw ValidationError(p.traces + ":" + std::to_string(line) +
                              ": marked correct but does not grade");
      }
      TraceSet& set = sets[it->second];
      set.problem_id = t.problem_id;
      set.traces.push_back(t);
      ++set.n;
      if (t.correct) ++set.c;
      if (!lines[it->second].emplace(t.sample_index, line).second) {
        throw ValidationError(p.traces + ":" + std::to_string(line) +
                              ": duplicate sample_index");
      }
    }

    std::vector<SelectionResult> results(problems.size());
    const Seed seed = derive_seed(config.seed, "select");
    parallel_for(problems.size(), config.workers, [&](std::size_t i) {
      if (sets[i].n == 0) {
        results[i].summary.problem_id = problems[i].id;
        return;
      }
      results[i] = select_problem(sets[i], config.select, seed);
    });

    std::vector<json> rows;
    json report_rows = json::array();
    std::size_t n_pos = 0, n_pairs = 0, n_sft = 0, with_pos = 0;
    double mean_pos_len = 0.0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const auto& res = results[i];
      for (const auto& r : res.records) {
        io::PairRow row;
        row.problem_id = r.problem_id;
        row.chosen = {p.traces, lines[i].at(r.chosen.sample_index)};
        if (r.rejected) {
          row.rejected =
              TraceRef{p.traces, lines[i].at(r.rejected->sample_index)};
        }
        row.len_chosen = r.len_chosen;
        row.len_rejected = r.len_rejected;
        row.mode = r.mode;
        rows.push_back(io::to_json(row));
      }
      report_rows.push_back(io::to_json(res.summary));
      n_pos += res.summary.k;
      n_pairs += res.summary.n_pairs;
      n_sft += res.summary.n_sft_only;
      if (res.summary.k) {
        ++with_pos;
        mean_pos_len += res.summary.mean_positive_len;
      }
    }
    if (with_pos) mean_pos_len /= static_cast<double>(with_pos);
    io::write_jsonl(config.path(p.pairs), rows);
    io::write_json(config.path(p.selection_report),
                   {{"mode", std::string(to_string(config.select.mode))},
                    {"alpha", config.select.alpha},
                    {"max_pairs", config.select.max_pairs},
                    {"problems", report_rows},
                    {"totals",
                     {{"n_problems", problems.size()},
                      {"problems_with_positives", with_pos},
                      {"n_positives", n_pos},
                      {"n_pairs", n_pairs},
                      {"n_sft_only", n_sft},
                      {"mean_positive_len", mean_pos_len}}}});
    spdlog::info("select: {} positives, {} pairs, {} sft-only", n_pos, n_pairs,
                 n_sft);
  });
}

void cmd_refine(const PipelineConfig& config) {
  const auto& p = config.paths;
  run_stage(config, "refine",
            {{p.base_model, p.problems, p.traces, p.pairs}, {p.refined}, {}},
            [&] {
    const ModelParams base = load_params(config.path(p.base_model));
    const Vocabulary& vocab = base.vocabulary();
    const auto problems = read_problems(config, vocab);
    const auto traces = read_traces(config, vocab);
    const auto pairs = read_pairs(config);
    const auto by_id = index_problems(problems);

    std::vector<std::size_t> chosen_lines;
    std::set<std::size_t> seen;
    for (const auto& row : pairs) {
      resolve(config, traces, row.chosen, row.problem_id);
      if (row.rejected) resolve(config, traces, *row.rejected, row.problem_id);
      if (!by_id.count(row.problem_id)) {
        throw ValidationError("pairs reference unknown problem '" +
                              row.problem_id + "'");
      }
      if (seen.insert(row.chosen.line).second) {
        chosen_lines.push_back(row.chosen.line);
      }
    }

    std::vector<io::RefinedRow> out(chosen_lines.size());
    parallel_for(chosen_lines.size(), config.workers, [&](std::size_t i) {
      const Trace& t = traces[chosen_lines[i]];
      const Problem& prob = *by_id.at(t.problem_id);
      RefinedTrace refined =
          refine_trace(base, prob.prompt, t, config.refine,
                       derive_seed(config.seed, "refine", t.problem_id,
                                   t.sample_index));
      out[i].trace = std::move(refined.trace);
      out[i].source = {p.traces, chosen_lines[i]};
      for (const auto& s : refined.steps) {
        out[i].refinements.push_back(io::RefinementAudit::from(s));
      }
    });

    std::vector<json> rows;
    std::size_t before = 0, after = 0;
    for (const auto& r : out) {
      rows.push_back(io::to_json(r));
      before += traces[r.source.line].total_tokens;
      after += r.trace.total_tokens;
    }
    io::write_jsonl(config.path(p.refined), rows);
    spdlog::info("refine: {} chosen traces, {} -> {} tokens", out.size(),
                 before, after);
  });
}

void cmd_train(const PipelineConfig& config) {
  const auto& p = config.paths;
  run_stage(
      config, "train",
      {{p.base_model, p.problems, p.traces, p.pairs, p.refined},
       {p.checkpoint},
       {p.training_log}},
      [&] {
        const ModelParams base = load_params(config.path(p.base_model));
        const Vocabulary& vocab = base.vocabulary();
        const auto problems = read_problems(config, vocab);
        const auto traces = read_traces(config, vocab);
        const auto pairs = read_pairs(config);

        std::unordered_map<std::size_t, Trace> refined;
        io::read_jsonl(config.path(p.refined),
                       [&](const json& row, std::size_t) {
                         auto r = io::refined_row_from_json(row, &vocab);
                         refined.emplace(r.source.line, std::move(r.trace));
                       });

        std::vector<PreferenceRecord> records;
        records.reserve(pairs.size());
        for (const auto& row : pairs) {
          resolve(config, traces, row.chosen, row.problem_id);
          auto it = refined.find(row.chosen.line);
          if (it == refined.end()) {
            throw ValidationError("no refined trace for " + row.chosen.file +
                                  ":" + std::to_string(row.chosen.line));
          }
          PreferenceRecord r;
          r.problem_id = row.problem_id;
          r.chosen = it->second;
          r.len_chosen = r.chosen.total_tokens;
          r.mode = row.mode;
          if (row.rejected) {
            r.rejected = resolve(config, traces, *row.rejected, row.problem_id);
            r.len_rejected = r.rejected->total_tokens;
          }
          records.push_back(std::move(r));
        }

        LossConfig lc = config.train;
        lc.seed = derive_seed(config.seed, "train", config.train.seed);
        std::vector<json> log_rows;
        if (records.empty()) {
          spdlog::warn("train: no preference records; checkpoint = base");
          save_params(base, config.path(p.checkpoint));
        } else {
          const TrainResult result =
              train(PolicyPair(base), records, problems, lc);
          for (const auto& e : result.epochs) log_rows.push_back(io::to_json(e));
          save_params(result.policy, config.path(p.checkpoint));
          if (!result.epochs.empty()) {
            spdlog::info("train: {} records, final mean loss {:.4f}",
                         records.size(), result.epochs.back().mean_total);
          }
        }
        io::write_jsonl(config.path(p.training_log), log_rows);
      });
}

MetricsRecord cmd_eval(const PipelineConfig& config) {
  const auto& p = config.paths;
  const std::string ckpt =
      config.eval.checkpoint.empty() ? p.checkpoint : config.eval.checkpoint;
  const std::string metrics_file = tagged(p.metrics, config.eval.tag);
  const std::string curve_file = tagged(p.curve, config.eval.tag);
  const std::string runs_file = tagged(p.eval_runs, config.eval.tag);
  MetricsRecord metrics;
  run_stage(config, "eval" + config.eval.tag,
            {{ckpt}, {metrics_file, curve_file, runs_file}, {}}, [&] {
    const ModelParams model = load_params(config.path(ckpt));
    check_vocabulary(config, model, ckpt);
    const auto problems = eval_problems(config, model.vocabulary());
    const SamplingConfig sampling{config.eval.temperature,
                                  config.world.max_trace_tokens};
    const Seed seed = derive_seed(config.seed, "eval");
    std::vector<TraceSet> sets(problems.size());
    parallel_for(problems.size(), config.workers, [&](std::size_t i) {
      sets[i] = generate_traces(model, problems[i],
                                config.eval.runs_per_problem, sampling, seed);
    });

    std::vector<EvalResult> results;
    std::vector<json> run_rows;
    for (const auto& set : sets) {
      EvalResult r{set.problem_id, {}};
      for (const auto& t : set.traces) {
        r.runs.push_back({t.correct, t.total_tokens});
        run_rows.push_back({{"problem_id", t.problem_id},
                            {"run", t.sample_index},
                            {"total_tokens", t.total_tokens},
                            {"correct", t.correct}});
      }
      results.push_back(std::move(r));
    }
    metrics = summarize(results, config.eval.budget);
    io::write_jsonl(config.path(runs_file), run_rows);
    io::write_json(config.path(metrics_file),
                   io::to_json(metrics, problems.size(),
                               config.eval.runs_per_problem));
    io::write_text(config.path(curve_file),
                   io::curve_csv(accuracy_curve(results, config.eval.budget,
                                                config.eval.curve_step)));
    spdlog::info("eval{}: accuracy {:.4f}, len_a {:.2f}, auc {:.4f}",
                 config.eval.tag, metrics.accuracy, metrics.len_a, metrics.auc);
  });
  return metrics;
}

RunSummary cmd_all(const PipelineConfig& config) {
  cmd_generate(config);
  cmd_select(config);
  cmd_refine(config);
  cmd_train(config);

  RunSummary summary;
  PipelineConfig base_eval = config;
  base_eval.eval.checkpoint = config.paths.base_model;
  base_eval.eval.tag = "_base";
  summary.before = cmd_eval(base_eval);
  PipelineConfig final_eval = config;
  final_eval.eval.checkpoint.clear();
  final_eval.eval.tag.clear();
  summary.after = cmd_eval(final_eval);

  const json report = io::read_json(config.path(config.paths.selection_report));
  summary.mean_positive_len =
      report.at("totals").at("mean_positive_len").get<double>();
  summary.n_records = report.at("totals").at("n_pairs").get<std::size_t>() +
                      report.at("totals").at("n_sft_only").get<std::size_t>();

  json m = load_manifest(config);
  m["metrics"] = {
      {"before", io::to_json(summary.before, config.world.eval_problems,
                             config.eval.runs_per_problem)},
      {"after", io::to_json(summary.after, config.world.eval_problems,
                            config.eval.runs_per_problem)}};
  io::write_json(config.path(config.paths.manifest), m);
  return summary;
}

std::vector<SweepRun> cmd_sweep(const json& base_config,
                                const std::vector<SweepAxis>& axes) {
  const PipelineConfig root = config_from_json(base_config);
  std::vector<std::vector<std::string>> combos = {{}};
  for (const auto& axis : axes) {
    if (axis.values.empty()) {
      throw ValidationError("sweep axis '" + axis.key + "' has no values");
    }
    std::vector<std::vector<std::string>> next;
    for (const auto& combo : combos) {
      for (const auto& v : axis.values) {
        auto c = combo;
        c.push_back(axis.key + "=" + v);
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }

  std::vector<SweepRun> runs;
  json rows = json::array();
  for (const auto& overrides : combos) {
    json j = base_config;
    std::string label;
    for (const auto& o : overrides) {
      apply_override(j, o);
      if (!label.empty()) label += "__";
      for (char ch : o) {
        label += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' ||
                  ch == '-' || ch == '_')
                     ? ch
                     : '_';
      }
    }
    if (label.empty()) label = "base";
    j["out_dir"] = (fs::path(root.out_dir) / label).string();
    SweepRun run{label, overrides, cmd_all(config_from_json(j))};
    rows.push_back(
        {{"label", run.label},
         {"overrides", run.overrides},
         {"before", io::to_json(run.summary.before, root.world.eval_problems,
                                root.eval.runs_per_problem)},
         {"after", io::to_json(run.summary.after, root.world.eval_problems,
                               root.eval.runs_per_problem)},
         {"mean_positive_len", run.summary.mean_positive_len},
         {"n_records", run.summary.n_records}});
    runs.push_back(std::move(run));
  }
  fs::create_directories(root.out_dir);
  io::write_json(fs::path(root.out_dir) / "sweep.json", rows);
  return runs;
}

}  // namespace squeeze
