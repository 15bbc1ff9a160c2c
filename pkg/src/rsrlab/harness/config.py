"""Experiment configuration read from INI-style files.

    [experiment]
    name = detect_relative
    master_seed = 42
    trials = 200
    output = results/detect_relative.csv

    [parameters]
    n = 200
    d = 1
    ...
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

EXPERIMENTS = {
    "detect_relative": {"n", "d", "alpha", "p", "epsilon", "strategy", "arm"},
    "detect_additive": {"n", "d", "alpha", "p", "delta", "strategy", "arm"},
    "lda_curve": {"alpha", "k_max"},
    "moment_match": {"k", "alpha"},
    "tukey": {"k", "delta", "samples", "n_directions"},
    "anticonc": {"k", "delta", "trials_mc"},
    "incoherence": {"n", "m", "epsilon"},
}

OPTIONAL = {
    "detect_relative": {"m", "C", "threshold"},
    "detect_additive": {"m", "c_threshold", "C", "eta"},
    "lda_curve": {"m", "C", "n"},
    "moment_match": {"n_lambda", "n_z", "mu1_t", "residual_tol"},
    "tukey": {"level"},
    "anticonc": {"beta", "C"},
    "incoherence": {"c"},
}

_INT_KEYS = {"n", "d", "m", "k", "k_max", "samples", "n_directions", "trials_mc", "n_lambda", "n_z"}
_STR_KEYS = {"strategy", "arm", "beta"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _coerce(key: str, raw: str):
    if key in _STR_KEYS:
        return raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    master_seed: int = 0
    trials: int = 1
    output_path: str = ""

    def validate(self) -> None:
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment: unknown name {self.experiment!r}")
        else:
            for key in sorted(EXPERIMENTS[self.experiment] - self.parameters.keys()):
                problems.append(f"parameters.{key}: required for {self.experiment}")
            allowed = EXPERIMENTS[self.experiment] | OPTIONAL[self.experiment]
            for key in sorted(self.parameters.keys() - allowed):
                problems.append(f"parameters.{key}: not used by {self.experiment}")
        if self.trials < 1:
            problems.append("experiment.trials: must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            problems.append("experiment.master_seed: must be a 64-bit unsigned integer")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_ini(cls, text: str) -> ExperimentConfig:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys such as C and c are distinct
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([f"syntax: {exc}"]) from exc
        problems = []
        if not cp.has_section("experiment"):
            raise ConfigError(["experiment: missing section"])
        exp = cp["experiment"]
        params = {}
        if cp.has_section("parameters"):
            for key, raw in cp["parameters"].items():
                try:
                    params[key] = _coerce(key, raw)
                except ValueError:
                    problems.append(f"parameters.{key}: cannot parse {raw!r}")
        try:
            seed = int(exp.get("master_seed", "0"))
            trials = int(exp.get("trials", "1"))
        except ValueError as exc:
            raise ConfigError(problems + [f"experiment: {exc}"]) from exc
        cfg = cls(exp.get("name", ""), params, seed, trials, exp.get("output", ""))
        try:
            cfg.validate()
        except ConfigError as exc:
            problems += exc.problems
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        return cls.from_ini(Path(path).read_text())
