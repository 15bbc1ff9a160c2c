"""Sweep both detection arms over every adversary strategy and print success rates.

    python scripts/run_detection_grid.py --trials 200 --threads 4 --out results/
"""

import argparse
import dataclasses
from pathlib import Path

from rsrlab.harness import ExperimentConfig, run

RELATIVE = dict(n=200, d=1, alpha=0.05, p=0.2, epsilon=1 / 16, m=500)
ADDITIVE = dict(n=400, d=0, alpha=0.05, p=0.0, delta=0.1, c_threshold=64.0, C=64.0, m=148)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, base in (("detect_relative", RELATIVE), ("detect_additive", ADDITIVE)):
        for strategy in ("random_direction", "evade", "spoof"):
            for arm in ("planted", "null"):
                cfg = ExperimentConfig(name, dict(base, strategy=strategy, arm=arm), args.seed, args.trials)
                path = out / f"{name}_{strategy}_{arm}.csv"
                agg = run(dataclasses.replace(cfg, output_path=str(path)), threads=args.threads)[-1]
                print(f"{name:16s} {strategy:17s} {arm:8s} rate={agg.value:.3f} "
                      f"ci=[{agg.ci_low:.3f}, {agg.ci_high:.3f}]")


if __name__ == "__main__":
    main()
