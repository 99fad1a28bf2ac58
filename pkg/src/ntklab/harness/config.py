"""Experiment configuration: defaults, JSON files and ``key=value`` overrides.

Precedence is CLI flags > ``--override`` > config file > defaults.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import InvalidArgumentError

DEFAULTS = {
    "benign-class": {
        "n": 512, "d": 64, "L": 3, "m": 1024, "eta": 0.1, "mu_norm": 3.0, "c_norm": 1.0,
        "lambda_lc": 1.0, "alpha": 0.5, "epochs": 200, "parametrization": "ntk",
        "target_train_error": 0.01, "noisy_slack": 0.08, "n_test": 4000, "n_margin": 2048,
        "trace_every": 64, "n_probe": 256,
    },
    "min-eig-sweep": {
        "grid": [[256, 32, 2], [256, 32, 3], [64, 64, 2], [64, 64, 3], [32, 256, 2], [32, 256, 3]],
        "seeds": 10, "table_d": 100, "points_per_segment": 50,
    },
    "ntk-converge": {
        "widths": [512, 2048, 8192], "n_points": 32, "d": 16, "L": 2, "seeds": 10,
        "max_rel_deviation": 0.25,
    },
    "assumption-check": {
        "source": "synthetic", "images": None, "labels": None, "per_class": 100, "L": 2,
        "n": 1000, "d": 64, "mu_norm": 3.0, "shuffle_labels": False, "min_dominance": 0.8,
    },
    "excess-risk-sweep": {
        "d": 64, "n_grid": [16, 32, 64, 128, 256], "sigma_eps": 0.5, "seeds": 10, "L": 2,
        "n_centers": 16, "n_test": 4000, "bootstraps": 10, "min_bootstrap_pass": 7,
    },
    "nn-equivalence": {
        "widths": [512, 2048, 8192], "n": 64, "d": 16, "L": 2, "seeds": 5, "n_test": 256,
        "max_steps": 20000, "tol": 1e-6,
    },
}


def parse_override(text):
    """Split ``key=value``; the value is decoded as JSON when possible."""
    if "=" not in text:
        raise InvalidArgumentError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict
    seed: int = 0
    output_dir: str = "runs"
    extra: dict = field(default_factory=dict)

    def resolved(self):
        return {"subcommand": self.subcommand, "seed": int(self.seed), "params": self.params}

    def content_hash(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self):
        return json.dumps({**self.resolved(), "output_dir": str(self.output_dir)},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data["subcommand"], data["params"], data.get("seed", 0),
                   data.get("output_dir", "runs"))


def resolve(subcommand, file_path=None, overrides=(), seed=None, output_dir=None):
    """Merge defaults, an optional JSON file and overrides into a config."""
    if subcommand not in DEFAULTS:
        raise InvalidArgumentError(f"unknown subcommand {subcommand!r}")
    params = copy.deepcopy(DEFAULTS[subcommand])
    file_seed, file_out = 0, "runs"
    if file_path is not None:
        data = json.loads(Path(file_path).read_text())
        if "params" in data:
            file_seed = data.get("seed", file_seed)
            file_out = data.get("output_dir", file_out)
            data = data["params"]
        else:
            file_seed = data.pop("seed", file_seed)
            file_out = data.pop("output_dir", file_out)
        _merge(params, data, subcommand)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        if key == "seed":
            file_seed = value
            continue
        _merge(params, {key: value}, subcommand)
    return ExperimentConfig(
        subcommand, params,
        int(seed if seed is not None else file_seed),
        str(output_dir if output_dir is not None else file_out),
    )


def _merge(params, updates, subcommand):
    for key, value in updates.items():
        if key not in params:
            raise InvalidArgumentError(f"{subcommand} has no parameter {key!r}")
        params[key] = value
