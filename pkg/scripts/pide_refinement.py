"""Residual of the closed-form digital price in the pricing PIDE, under grid refinement.

    python scripts/pide_refinement.py --sizes 100 200 400
"""
import argparse

from pathgreeks import black_scholes
from pathgreeks.oracles import DigitalClosedForm, pide_refinement


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--strike", type=float, default=100.0)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--t-max", type=float, default=0.9)
    args = ap.parse_args()

    m = black_scholes(100.0, args.sigma)
    fn = DigitalClosedForm(args.strike, args.sigma, 1.0).value
    print(f"{'n':>6}{'max |res| (n)':>16}{'max |res| (2n-1)':>19}{'order':>8}")
    for n in args.sizes:
        r = pide_refinement(fn, m, (0.0, args.t_max), (60.0, 160.0), n)
        print(f"{n:>6}{r.coarse_max:>16.4e}{r.fine_max:>19.4e}{r.order:>8.3f}")


if __name__ == "__main__":
    main()
