"""Deterministic multi-trial execution and CSV persistence."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .. import detect, distributions, lda, momentmatch
from ..rng import derive_seed, stream
from .config import ExperimentConfig

AGGREGATE = -1


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    trial: int
    seed: int
    parameters: dict
    metric: str
    value: float
    wall_ns: int = 0
    ci_low: float = float("nan")
    ci_high: float = float("nan")


class TrialError(RuntimeError):
    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial}: {cause}")
        self.trial = trial
        self.cause = cause


def _detect_relative(p: dict, seed: int) -> tuple[str, float]:
    n, d = p["n"], p["d"]
    m = p.get("m") or detect.relative_sample_size(d, p["alpha"], p["p"], p.get("C", detect.SAMPLE_CONSTANT))
    noise = detect.NoiseModel(p["p"], "relative", p["epsilon"], p["strategy"])
    basis = detect.random_subspace(n, d, stream(seed, 1))
    if p["arm"] == "planted":
        spec = distributions.PlantedSpec("subspace", p["alpha"], n, subspace=basis)
        batch = distributions.sample_planted(spec, m, seed)
        want = True
    else:
        batch = distributions.sample_null(distributions.ScaleMixtureSpec(n), m, seed)
        want = False
    batch = detect.apply_noise(batch, noise, basis, seed)
    v = detect.detect_relative(batch, d, p.get("threshold", 0.5), want_subspace=False)
    return "success", float(v.planted == want)


def _detect_additive(p: dict, seed: int) -> tuple[str, float]:
    n, d, alpha, pp, delta = p["n"], p["d"], p["alpha"], p["p"], p["delta"]
    m = p.get("m") or detect.subsample_size(d, alpha, pp, delta)
    eta = p.get("eta")
    if eta is None:
        eta = detect.additive_budget(alpha, pp, n, d, delta, p.get("C", detect.C_THRESHOLD))
    noise = detect.NoiseModel(pp, "additive", eta, p["strategy"])
    basis = detect.random_subspace(n, d, stream(seed, 1))
    if p["arm"] == "planted":
        variant = "subspace" if d > 0 else "point_mass"
        spec = distributions.PlantedSpec(variant, alpha, n, subspace=basis if d > 0 else None)
        batch = distributions.sample_planted(spec, m, seed)
        want = True
    else:
        batch = distributions.sample_null(distributions.ScaleMixtureSpec(n), m, seed)
        want = False
    batch = detect.apply_noise(batch, noise, basis, seed)
    v = detect.detect_additive(batch, d, alpha, pp, delta, c_threshold=p.get("c_threshold", detect.C_THRESHOLD),
                               seed=seed, want_subspace=False)
    return "success", float(v.planted == want)


def _lda_curve(p: dict, seed: int, trial: int) -> tuple[str, float]:
    k = trial + 1
    return "lda_exact", lda.lda_single_pointmass(p["alpha"], k, n=p.get("n", 1)).value


def _moment_match(p: dict, seed: int) -> tuple[str, float]:
    grid = momentmatch.default_grid(p.get("n_lambda", 41), p.get("n_z", 81))
    mu1 = momentmatch.two_point_mu1(p["mu1_t"]) if p.get("mu1_t") else None
    theta = momentmatch.target_vector(p["k"], p["alpha"], mu1)
    mu2 = momentmatch.solve_mu2(grid, theta, p.get("residual_tol", 1e-8))
    return "residual", momentmatch.residual(mu2, theta)


def _tukey(p: dict, seed: int) -> tuple[str, float]:
    idx = momentmatch.MomentIndexSet(p["k"])
    feats = momentmatch.nu_feature_sampler(idx)(stream(seed, 2), p["samples"])
    theta = momentmatch.nu_mean(idx).values * (1 + p["delta"])
    lower, _ = momentmatch.tukey_depth(feats, theta, p["n_directions"], seed, p.get("level", 1e-3))
    return "depth_lower", lower


def _anticonc(p: dict, seed: int) -> tuple[str, float]:
    idx = momentmatch.MomentIndexSet(p["k"])
    pair = tuple(int(v) for v in p.get("beta", "2,0").split(","))
    beta = np.zeros(idx.D)
    beta[idx.position(pair)] = 1.0
    rep = momentmatch.anticonc_tail(momentmatch.MomentVector(idx, beta), p["delta"], trials=p["trials_mc"],
                                    seed=seed, C=p.get("C", 1.0))
    return "tail_estimate", rep.estimate


def _incoherence(p: dict, seed: int) -> tuple[str, float]:
    n, m, eps = p["n"], p["m"], p["epsilon"]
    batch = distributions.sample_null(distributions.ScaleMixtureSpec(n), m, seed)
    if eps > 0:
        batch = detect.apply_noise(batch, detect.NoiseModel(0.0, "relative", eps, "random_direction"), seed=seed)
    return "incoherence", detect.incoherence(batch)


_TRIALS = {
    "detect_relative": _detect_relative,
    "detect_additive": _detect_additive,
    "moment_match": _moment_match,
    "tukey": _tukey,
    "anticonc": _anticonc,
    "incoherence": _incoherence,
}

BINARY_METRICS = {"success"}


def run_trial(config: ExperimentConfig, trial: int) -> ResultRecord:
    seed = derive_seed(config.master_seed, trial)
    t0 = time.perf_counter_ns()
    try:
        if config.experiment == "lda_curve":
            metric, value = _lda_curve(config.parameters, seed, trial)
        else:
            metric, value = _TRIALS[config.experiment](config.parameters, seed)
    except Exception as exc:  # attach trial context, keep the original as cause
        raise TrialError(trial, exc) from exc
    return ResultRecord(config.experiment, trial, seed, dict(config.parameters), metric, float(value),
                        time.perf_counter_ns() - t0)


def aggregate(records: list[ResultRecord], master_seed: int | None = None) -> ResultRecord:
    """Mean over trials; binary metrics carry a Clopper-Pearson 95% interval."""
    first = records[0]
    values = np.array([r.value for r in records])
    lo = hi = float("nan")
    name = f"{first.metric}_mean"
    if first.metric in BINARY_METRICS:
        name = f"{first.metric}_rate"
        ci = binomtest(int(values.sum()), len(values)).proportion_ci(0.95, method="exact")
        lo, hi = float(ci.low), float(ci.high)
    seed = first.seed if master_seed is None else master_seed
    return ResultRecord(first.experiment, AGGREGATE, seed, first.parameters, name, float(values.mean()),
                        sum(r.wall_ns for r in records), lo, hi)


def n_trials(config: ExperimentConfig) -> int:
    return int(config.parameters["k_max"]) if config.experiment == "lda_curve" else config.trials


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)  # shortest exact round trip
    return str(v)


class RecordWriter:
    """CSV writer flushing one record at a time."""

    def __init__(self, stream_, param_keys: list[str], fmt: str = "csv"):
        self.stream = stream_
        self.keys = sorted(param_keys)
        self.fmt = fmt
        if fmt == "csv":
            self.writer = csv.writer(stream_, lineterminator="\n")
            self.writer.writerow(["experiment", "trial", "seed", *self.keys, "metric", "value", "ci_low",
                                  "ci_high", "wall_ns"])

    def write(self, r: ResultRecord) -> None:
        if self.fmt == "csv":
            self.writer.writerow([r.experiment, r.trial, r.seed, *[_fmt(r.parameters.get(k, "")) for k in self.keys],
                                  r.metric, _fmt(r.value), _fmt(r.ci_low), _fmt(r.ci_high), r.wall_ns])
        else:
            obj = {"experiment": r.experiment, "trial": r.trial, "seed": r.seed, "parameters": r.parameters,
                   "metric": r.metric, "value": r.value,
                   "ci_low": None if math.isnan(r.ci_low) else r.ci_low,
                   "ci_high": None if math.isnan(r.ci_high) else r.ci_high, "wall_ns": r.wall_ns}
            self.stream.write(json.dumps(obj, sort_keys=True) + "\n")
        self.stream.flush()


def run(config: ExperimentConfig, out=None, threads: int = 1, fmt: str = "csv") -> list[ResultRecord]:
    """Run every trial, stream records to ``out`` (path or file) and append the aggregate."""
    config.validate()
    total = n_trials(config)
    target = out if out is not None else (config.output_path or None)
    own = isinstance(target, (str, Path))
    if own:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
    fh = open(target, "w") if own else target
    try:
        writer = RecordWriter(fh, list(config.parameters), fmt) if fh is not None else None
        records = []
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = pool.map(run_trial, [config] * total, range(total))
                for r in results:
                    records.append(r)
                    if writer:
                        writer.write(r)
        else:
            for t in range(total):
                r = run_trial(config, t)
                records.append(r)
                if writer:
                    writer.write(r)
        agg = aggregate(records, config.master_seed)
        records.append(agg)
        if writer:
            writer.write(agg)
    finally:
        if own:
            fh.close()
    return records


def emit_curve(records: list[ResultRecord], x_key: str, y_key: str) -> str:
    """Sorted x, y, ci_low, ci_high table from per-trial records with metric ``y_key``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([x_key, y_key, "ci_low", "ci_high"])
    if not records:
        return buf.getvalue()
    if len({r.experiment for r in records}) > 1:
        raise ValueError("records come from more than one experiment")
    rows = []
    for r in records:
        if r.trial == AGGREGATE or r.metric != y_key:
            continue
        if x_key == "trial":
            x = r.trial
        elif x_key == "k" and r.experiment == "lda_curve":
            x = r.trial + 1
        elif x_key in r.parameters:
            x = r.parameters[x_key]
        else:
            raise KeyError(f"records have no key {x_key!r}")
        rows.append((x, r.value, r.ci_low, r.ci_high))
    if not rows:
        raise KeyError(f"records have no metric {y_key!r}")
    for x, y, lo, hi in sorted(rows, key=lambda t: t[0]):
        w.writerow([_fmt(x), _fmt(y), _fmt(lo), _fmt(hi)])
    return buf.getvalue()
