"""Exact single-sample advantage against k, as a plottable CSV.

    python scripts/lda_curve.py --alpha 0.1 --k-max 20 > lda_curve.csv
"""

import argparse
import sys

from rsrlab.harness import ExperimentConfig, emit_curve, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--k-max", type=int, default=20)
    ap.add_argument("--n", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig("lda_curve", {"alpha": args.alpha, "k_max": args.k_max, "n": args.n})
    sys.stdout.write(emit_curve(run(cfg), "k", "lda_exact"))


if __name__ == "__main__":
    main()
