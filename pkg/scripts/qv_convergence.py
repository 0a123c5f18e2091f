"""Realized quadratic variation of Brownian paths as the partition is refined.

The mean absolute error against T should shrink like n^(-1/2).

    python scripts/qv_convergence.py --seeds 100
"""
import argparse
import math

import numpy as np

from pathgreeks import Path, make_grid, quadratic_variation
from pathgreeks.simulate import block_rng


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n", type=int, default=100_000, help="finest partition size")
    ap.add_argument("--levels", type=int, default=4, help="number of 4x coarsenings")
    args = ap.parse_args()

    factors = [4**k for k in range(args.levels)]
    errs = np.zeros((args.seeds, len(factors)))
    for s in range(args.seeds):
        g = make_grid(1.0, args.n)
        w = np.concatenate(([0.0], np.cumsum(block_rng(s, 0).standard_normal(args.n) * math.sqrt(g.dt))))
        for j, c in enumerate(factors):
            p = Path(make_grid(1.0, args.n // c), w[::c])
            errs[s, j] = abs(quadratic_variation(p).total - 1.0)

    mean = errs.mean(axis=0)
    print(f"{'n':>8}{'mean |QV-1|':>14}{'expected':>14}")
    for c, e in zip(factors, mean):
        n = args.n // c
        # E|QV - T| when the error is Gaussian with variance 2T^2/n
        print(f"{n:>8}{e:>14.4e}{math.sqrt(2 / n) * math.sqrt(2 / math.pi):>14.4e}")


if __name__ == "__main__":
    main()
