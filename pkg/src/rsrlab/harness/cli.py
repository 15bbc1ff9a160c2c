"""Command-line entry point: ``python -m rsrlab <command> ...``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 infeasible or
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import detect, distributions, lda, momentmatch, orthopoly
from ..distributions import SampleBatch
from ..rng import stream
from .config import ConfigError, ExperimentConfig
from .runner import TrialError, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _emit(args, obj) -> None:
    """Write a flat dict (or list of dicts) as one CSV row set or JSON lines."""
    rows = obj if isinstance(obj, list) else [obj]
    if args.format == "jsonl":
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    else:
        keys = list(rows[0])
        lines = [",".join(keys)] + [",".join(_cell(r[k]) for k in keys) for r in rows]
        text = "\n".join(lines) + "\n"
    _write(args, text)


def _cell(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_batch(path) -> SampleBatch:
    return SampleBatch.from_csv(Path(path).read_text())


def cmd_sample(args):
    if args.variant == "null":
        batch = distributions.sample_null(distributions.ScaleMixtureSpec(args.n), args.m, args.seed)
    else:
        basis = detect.random_subspace(args.n, args.d, stream(args.seed, 1)) if args.variant == "subspace" else None
        spec = distributions.PlantedSpec(args.variant, args.alpha, args.n, subspace=basis)
        batch = distributions.sample_planted(spec, args.m, args.seed)
    if args.epsilon > 0 or args.eta > 0:
        kind, budget = ("relative", args.epsilon) if args.epsilon > 0 else ("additive", args.eta)
        batch = detect.apply_noise(batch, detect.NoiseModel(args.p, kind, budget, "random_direction"), seed=args.seed)
    _write(args, batch.to_csv())


def cmd_detect_rel(args):
    v = detect.detect_relative(_load_batch(args.input), args.d, args.threshold)
    _emit(args, json.loads(v.to_json()) if args.format == "jsonl" else _verdict_row(v))


def cmd_detect_add(args):
    v = detect.detect_additive(_load_batch(args.input), args.d, args.alpha, args.p, args.delta, args.tau,
                               args.c_threshold, seed=args.seed)
    _emit(args, json.loads(v.to_json()) if args.format == "jsonl" else _verdict_row(v))


def _verdict_row(v) -> dict:
    return {"verdict": v.verdict, "sigma": v.sigma, "witness": " ".join(map(str, v.witness or ())),
            "tuples_scanned": v.tuple_count_scanned}


def cmd_lda(args):
    rows = []
    for k in range(1, args.k + 1):
        rows.append({"k": k, "alpha": args.alpha, "lda_exact": lda.lda_single_pointmass(args.alpha, k, n=args.n).value,
                     "theorem_bound": lda.theorem_bound(args.alpha, k, args.m, args.C)})
    _emit(args, rows)


def cmd_christoffel(args):
    oracle = orthopoly.product_normal_oracle if args.law == "product-normal" else orthopoly.gaussian_oracle
    basis = orthopoly.build_basis(oracle, args.k, args.law)
    if args.export:
        basis.to_csv(args.export)
    _emit(args, {"k": args.k, "x0": args.x0, "christoffel": orthopoly.christoffel_sum(basis, args.x0),
                 "gram_error": basis.gram_error})


def cmd_moment_match(args):
    grid = momentmatch.default_grid(args.n_lambda, args.n_z)
    mu1 = momentmatch.two_point_mu1(args.mu1_t) if args.mu1_t else None
    theta = momentmatch.target_vector(args.k, args.alpha, mu1)
    mu2 = momentmatch.solve_mu2(grid, theta)
    if args.measure_out:
        mu2.to_csv(args.measure_out)
    _emit(args, {"k": args.k, "alpha": args.alpha, "support": mu2.size, "residual": momentmatch.residual(mu2, theta)})


def cmd_tukey(args):
    idx = momentmatch.MomentIndexSet(args.k)
    feats = momentmatch.nu_feature_sampler(idx)(stream(args.seed, 2), args.samples)
    theta = momentmatch.nu_mean(idx).values * (1 + args.delta)
    lo, hi = momentmatch.tukey_depth(feats, theta, args.directions, args.seed)
    _emit(args, {"k": args.k, "delta": args.delta, "depth_lower": lo, "depth_upper": hi})


def cmd_anticonc(args):
    idx = momentmatch.MomentIndexSet(args.k)
    beta = np.zeros(idx.D)
    beta[idx.position(tuple(int(v) for v in args.beta.split(",")))] = 1.0
    rep = momentmatch.anticonc_tail(momentmatch.MomentVector(idx, beta), args.delta, trials=args.trials, seed=args.seed)
    _emit(args, {"k": args.k, "delta": args.delta, "estimate": rep.estimate, "se": rep.se,
                 "bound": rep.bound_lemma})


def cmd_incoherence(args):
    if args.input:
        batch = _load_batch(args.input)
    else:
        batch = distributions.sample_null(distributions.ScaleMixtureSpec(args.n), args.m, args.seed)
    _emit(args, {"m": batch.m, "n": batch.n, "incoherence": detect.incoherence(batch)})


def cmd_experiment(args):
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed_given:
        cfg = ExperimentConfig(cfg.experiment, cfg.parameters, args.seed, cfg.trials, cfg.output_path)
    out = args.out or cfg.output_path or sys.stdout
    records = run(cfg, out, threads=args.threads, fmt=args.format)
    agg = records[-1]
    logging.info("%s: %s = %.6g over %d trials", cfg.experiment, agg.metric, agg.value, len(records) - 1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    ap = _Parser(prog="rsrlab", description=__doc__.splitlines()[0], parents=[common])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        p.set_defaults(func=fn)
        return p

    p = add("sample", cmd_sample, help="draw a null or planted batch")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--variant", choices=("null", "point_mass", "general", "subspace"), default="null")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.0)

    p = add("detect-rel", cmd_detect_rel, help="tuple-scan detector under relative noise")
    p.add_argument("input")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("detect-add", cmd_detect_add, help="subsampled detector under additive noise")
    p.add_argument("input")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--c-threshold", type=float, default=detect.C_THRESHOLD)

    p = add("lda", cmd_lda, help="exact single-sample advantage and the m-sample bound")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--n", type=int, default=1)

    p = add("christoffel", cmd_christoffel, help="Christoffel sum of a one-dimensional law")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--law", choices=("normal", "product-normal"), default="product-normal")
    p.add_argument("--export", default=None, help="write basis coefficients to this CSV")

    p = add("moment-match", cmd_moment_match, help="solve for a grid measure matching moments")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu1-t", type=float, default=None)
    p.add_argument("--n-lambda", type=int, default=momentmatch.DEFAULT_NODES[0])
    p.add_argument("--n-z", type=int, default=momentmatch.DEFAULT_NODES[1])
    p.add_argument("--measure-out", default=None)

    p = add("tukey", cmd_tukey, help="Tukey depth of a perturbed mean")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--directions", type=int, default=1000)

    p = add("anticonc", cmd_anticonc, help="Monte Carlo small-ball probability of a polynomial")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--beta", default="2,0", help="monomial exponent pair, e.g. 2,0")
    p.add_argument("--trials", type=int, default=100_000)

    p = add("incoherence", cmd_incoherence, help="max normalized leverage of a batch")
    p.add_argument("--input", default=None)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, default=200)

    p = add("experiment", cmd_experiment, help="run an INI-configured experiment")
    p.add_argument("config")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except momentmatch.InfeasibleError as exc:
        cert = exc.certificate.to_json() if exc.certificate is not None else "null"
        print(f"infeasible: {exc}\ncertificate: {cert}", file=sys.stderr)
        return EXIT_NUMERIC
    except (orthopoly.BasisError, TrialError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK
