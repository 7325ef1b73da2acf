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

// squeeze: command-line driver for the compression pipeline.
//
//   squeeze all --config configs/smoke.json --out run --seed 7
//   squeeze refine --out run --set refine.epsilon=0.01
//   squeeze sweep --config configs/smoke.json --vary select.mode=q_dyn,shortest
//
// Exit codes: 0 ok, 2 validation, 3 numerical, 4 I/O.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "squeeze/error.hpp"
#include "squeeze/io.hpp"
#include "squeeze/pipeline.hpp"

namespace {

using nlohmann::json;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> vary;
};

json assemble(const Options& o) {
  json j = json::object();
  if (!o.config_path.empty()) j = squeeze::io::read_json(o.config_path);
  if (!j.is_object()) throw squeeze::ValidationError("config must be a JSON object");
  for (const auto& s : o.overrides) squeeze::apply_override(j, s);
  if (o.out) j["out_dir"] = *o.out;
  if (o.seed) j["seed"] = *o.seed;
  if (o.workers) j["workers"] = *o.workers;
  return j;
}

std::vector<squeeze::SweepAxis> parse_axes(const std::vector<std::string>& vary) {
  std::vector<squeeze::SweepAxis> axes;
  for (const auto& v : vary) {
    const auto eq = v.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw squeeze::ValidationError("--vary expects KEY=v1,v2,...: " + v);
    }
    squeeze::SweepAxis axis{v.substr(0, eq), {}};
    std::string rest = v.substr(eq + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto comma = rest.find(',', start);
      const auto end = comma == std::string::npos ? rest.size() : comma;
      if (end > start) axis.values.push_back(rest.substr(start, end - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

void print_metrics(const char* label, const squeeze::MetricsRecord& m) {
  char len_t[32] = "null";
  if (m.len_t) std::snprintf(len_t, sizeof len_t, "%.2f", *m.len_t);
  std::printf("%-7s accuracy=%.4f len_a=%.2f len_t=%s auc=%.4f\n", label,
              m.accuracy, m.len_a, len_t, m.auc);
}

}  // namespace

int main(int argc, char** argv) {
  squeeze::init_logging();
  CLI::App app{"Seeded pipeline for shortening reasoning traces"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--set", o.overrides, "Dotted override KEY=VALUE (repeatable)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--workers", o.workers, "Worker threads per stage");
  };

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"generate", "Build the world and sample traces"},
      {"select", "Pick positives and build preference pairs"},
      {"refine", "Shorten chosen traces step by step"},
      {"train", "Fit the policy on refined pairs"},
      {"eval", "Evaluate a checkpoint on held-out problems"},
      {"all", "Run every stage, evaluating before and after training"},
      {"show-config", "Print the effective config"}};
  for (const auto& [name, help] : stages) add_common(app.add_subcommand(name, help));
  CLI::App* sweep = app.add_subcommand("sweep", "Run `all` over a grid of overrides");
  add_common(sweep);
  sweep->add_option("--vary", o.vary, "KEY=v1,v2,... (repeatable)")->required();

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    const json j = assemble(o);
    if (cmd == "sweep") {
      const auto runs = squeeze::cmd_sweep(j, parse_axes(o.vary));
      for (const auto& r : runs) {
        std::printf("[%s]\n", r.label.c_str());
        print_metrics("before", r.summary.before);
        print_metrics("after", r.summary.after);
      }
      return 0;
    }
    const squeeze::PipelineConfig config = squeeze::config_from_json(j);
    if (cmd == "show-config") {
      std::cout << squeeze::config_to_json(config).dump(2) << '\n';
    } else if (cmd == "generate") {
      squeeze::cmd_generate(config);
    } else if (cmd == "select") {
      squeeze::cmd_select(config);
    } else if (cmd == "refine") {
      squeeze::cmd_refine(config);
    } else if (cmd == "train") {
      squeeze::cmd_train(config);
    } else if (cmd == "eval") {
      print_metrics("eval", squeeze::cmd_eval(config));
    } else if (cmd == "all") {
      const auto s = squeeze::cmd_all(config);
      print_metrics("before", s.before);
      print_metrics("after", s.after);
    }
  } catch (const squeeze::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const squeeze::NumericalError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const squeeze::IoError& e) {
    spdlog::error("{}", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 0;
}
