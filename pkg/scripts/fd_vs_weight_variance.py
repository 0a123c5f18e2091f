"""Standard error of FD Delta across bump sizes against the weight Delta.

Everything shares common random numbers. Small bumps on a digital blow up the
FD variance (roughly like 1/h); the weight estimator has no bump at all.

    python scripts/fd_vs_weight_variance.py --paths 100000 --jumps
"""
import argparse

from pathgreeks import JumpSpec, PayoffSpec, SimConfig, black_scholes, make_grid
from pathgreeks.greeks import fd_bump_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=252)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--bumps", type=float, nargs="+", default=[0.1, 0.3, 1.0, 3.0, 10.0])
    ap.add_argument("--jumps", action="store_true", help="add N(0,1) jumps at intensity 0.5")
    args = ap.parse_args()

    jump = JumpSpec(0.5, "normal", {"mu": 0.0, "s": 1.0}) if args.jumps else None
    m = black_scholes(100.0, 0.2, jump=jump)
    cfg = SimConfig(make_grid(1.0, args.steps), args.paths, seed=args.seed)
    weight, table = fd_bump_table(m, cfg, PayoffSpec("digital_call", 100.0), args.bumps)

    print(f"weight delta {weight.value:.6e}  stderr {weight.stderr:.2e}")
    print(f"{'bump':>8}{'FD delta':>14}{'stderr':>11}{'stderr ratio':>14}")
    for h, e in table:
        print(f"{h:>8g}{e.value:>14.6e}{e.stderr:>11.2e}{e.stderr / weight.stderr:>14.2f}")


if __name__ == "__main__":
    main()
