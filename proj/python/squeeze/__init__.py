# Copyright 2026 The squeeze Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Seeded pipeline for shortening reasoning traces.

Configs are plain dicts with the same layout as the CLI's JSON config;
unspecified keys take their defaults.
"""

import json as _json

from . import _core
from ._core import (IoError, Model, NumericalError, ValidationError,
                    accuracy_at_budget, adaptive_quantile, auc, sha256_file)

__all__ = [
    "IoError", "Model", "NumericalError", "ValidationError",
    "accuracy_at_budget", "adaptive_quantile", "auc", "config_hash",
    "default_config", "evaluate", "generate", "normalize_config", "refine",
    "run_all", "select", "sha256_file", "summarize", "train",
]


def _dump(config):
    return _json.dumps(config if config is not None else {})


def default_config():
    return _json.loads(_core.default_config())


def normalize_config(config):
    """Defaults merged in and validated."""
    return _json.loads(_core.normalize_config(_dump(config)))


def config_hash(config):
    return _core.config_hash(_dump(config))


def generate(config):
    _core.generate(_dump(config))


def select(config):
    _core.select(_dump(config))


def refine(config):
    _core.refine(_dump(config))


def train(config):
    _core.train(_dump(config))


def evaluate(config):
    return _json.loads(_core.evaluate(_dump(config)))


def run_all(config):
    return _json.loads(_core.run_all(_dump(config)))


def summarize(results, budget):
    """results: [(problem_id, [(correct, total_tokens), ...]), ...]"""
    out = _json.loads(_core.summarize(results, budget))
    out.pop("n_problems", None)
    out.pop("runs_per_problem", None)
    return out
