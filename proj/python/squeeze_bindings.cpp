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


// Python bindings. Structured values cross the boundary as JSON text; the
// package wrapper in squeeze/__init__.py turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "squeeze/checksum.hpp"
#include "squeeze/depth_select.hpp"
#include "squeeze/error.hpp"
#include "squeeze/evalkit.hpp"
#include "squeeze/io.hpp"
#include "squeeze/model.hpp"
#include "squeeze/pipeline.hpp"
#include "squeeze/refine.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

squeeze::PipelineConfig parse_config(const std::string& text) {
  return squeeze::config_from_json(json::parse(text));
}

std::string metrics_json(const squeeze::PipelineConfig& c, const squeeze::MetricsRecord& m) {
  return squeeze::io::to_json(m, c.world.eval_problems, c.eval.runs_per_problem).dump();
}

// [(problem_id, [(correct, total_tokens), ...]), ...]
using RawResults = std::vector<std::pair<std::string, std::vector<std::pair<bool, std::size_t>>>>;

std::vector<squeeze::EvalResult> to_results(const RawResults& raw) {
  std::vector<squeeze::EvalResult> out;
  for (const auto& [id, runs] : raw) {
    squeeze::EvalResult r{id, {}};
    for (const auto& [correct, tokens] : runs) r.runs.push_back({correct, tokens});
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Seeded pipeline for shortening reasoning traces";
  squeeze::init_logging();

  static PyObject* validation =
      py::register_exception<squeeze::ValidationError>(m, "ValidationError", PyExc_ValueError).ptr();
  py::register_exception<squeeze::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<squeeze::IoError>(m, "IoError", PyExc_OSError);
  // Malformed JSON reaching the core is a config problem.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      py::set_error(validation, e.what());
    }
  });

  m.def("default_config", [] { return squeeze::config_to_json(squeeze::PipelineConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) {
    return squeeze::config_to_json(parse_config(text)).dump();
  });
  m.def("config_hash", [](const std::string& text) { return squeeze::config_hash(parse_config(text)); });

  m.def("generate", [](const std::string& t) { squeeze::cmd_generate(parse_config(t)); },
        py::call_guard<py::gil_scoped_release>());
  m.def("select", [](const std::string& t) { squeeze::cmd_select(parse_config(t)); },
        py::call_guard<py::gil_scoped_release>());
  m.def("refine", [](const std::string& t) { squeeze::cmd_refine(parse_config(t)); },
        py::call_guard<py::gil_scoped_release>());
  m.def("train", [](const std::string& t) { squeeze::cmd_train(parse_config(t)); },
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", [](const std::string& t) {
    const auto c = parse_config(t);
    return metrics_json(c, squeeze::cmd_eval(c));
  }, py::call_guard<py::gil_scoped_release>());
  m.def("run_all", [](const std::string& t) {
    const auto c = parse_config(t);
    const auto s = squeeze::cmd_all(c);
    return json{{"before", json::parse(metrics_json(c, s.before))},
                {"after", json::parse(metrics_json(c, s.after))},
                {"mean_positive_len", s.mean_positive_len},
                {"n_records", s.n_records}}.dump();
  }, py::call_guard<py::gil_scoped_release>());

  m.def("accuracy_at_budget", [](const RawResults& r, std::size_t b) {
    return squeeze::accuracy_at_budget(to_results(r), b);
  });
  m.def("auc", [](const RawResults& r, std::size_t b) { return squeeze::auc(to_results(r), b); });
  m.def("summarize", [](const RawResults& r, std::size_t b) {
    return squeeze::io::to_json(squeeze::summarize(to_results(r), b), r.size(), 0).dump();
  });
  m.def("adaptive_quantile", &squeeze::adaptive_quantile, py::arg("alpha"), py::arg("c"), py::arg("n"));
  m.def("sha256_file", [](const std::string& p) { return squeeze::sha256_file(p); });

  py::class_<squeeze::ModelParams>(m, "Model")
      .def_static("load", [](const std::string& p) { return squeeze::load_params(p); })
      .def("save", [](const squeeze::ModelParams& self, const std::string& p) { squeeze::save_params(self, p); })
      .def_property_readonly("order", &squeeze::ModelParams::order)
      .def_property_readonly("vocab_size", &squeeze::ModelParams::vocab_size)
      .def_property_readonly("symbols", [](const squeeze::ModelParams& self) {
        return self.vocabulary().symbols();
      })
      .def("encode", [](const squeeze::ModelParams& self, const std::vector<std::string>& syms) {
        squeeze::TokenSeq out;
        for (const auto& s : syms) out.push_back(self.vocabulary().id(s));
        return out;
      })
      .def("next_token_probs", [](const squeeze::ModelParams& self, const squeeze::TokenSeq& ctx, double temperature) {
        return squeeze::next_token_dist(self, ctx, temperature).probs;
      }, py::arg("context"), py::arg("temperature") = 1.0)
      .def("sequence_logprob", [](const squeeze::ModelParams& self, const squeeze::TokenSeq& ctx,
                                  const squeeze::TokenSeq& cont) {
        return squeeze::sequence_logprob(self, ctx, cont);
      })
      .def("sample", [](const squeeze::ModelParams& self, const squeeze::TokenSeq& prompt, double temperature,
                        std::size_t max_tokens, std::uint64_t seed) {
        const squeeze::TokenSeq stop = {squeeze::Vocabulary::kEos};
        return squeeze::sample_sequence(self, prompt, temperature, max_tokens, stop, seed);
      }, py::arg("prompt"), py::arg("temperature") = 1.0, py::arg("max_tokens") = 256, py::arg("seed") = 0)
      .def("windowed_kl", [](const squeeze::ModelParams& self, const squeeze::TokenSeq& a,
                             const squeeze::TokenSeq& b, const squeeze::TokenSeq& cont, std::size_t window) {
        return squeeze::windowed_kl(self, a, b, cont, window);
      }, py::arg("prefix_original"), py::arg("prefix_rewritten"), py::arg("continuation"),
         py::arg("window") = 512);
}
