"""Command-line experiment runner.

    pathgreeks {price,greeks,convergence,classify,residuals} --config FILE
               [--out DIR] [--threads N]

Exit status: 0 on success, 2 when the config or model fails validation (no
files are written), 3 on a numerical abort during simulation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import funcalc, oracles
from .config import JOBS, ExperimentConfig
from .errors import ConfigError, InvalidArgumentError, NumericalError, PathGreeksError
from .greeks import (
    GreekEstimate,
    VegaDirection,
    check_ellipticity,
    compute_greeks,
    default_probe,
    estimate_price,
    weighted_samples,
)
from .pathspace import write_text_atomic
from .payoffs import as_functional
from .simulate import resolve_threads, simulate_batch, validate_model

log = logging.getLogger("pathgreeks")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


# -- report helpers -----------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def greeks_csv(estimates) -> str:
    return _csv_text(GreekEstimate.CSV_HEADER, [e.csv_row() for e in estimates])


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _oracle_row(greek: str, value: float, n_paths: int, seed: int) -> GreekEstimate:
    return GreekEstimate(greek, "oracle", float(value), 0.0, (float(value),) * 2, n_paths, seed)


def convergence_slope(ns, stderrs) -> float:
    """Least-squares slope of log(stderr) on log(n); NaN when undefined."""
    ns = np.asarray(ns, float)
    se = np.asarray(stderrs, float)
    if np.any(se <= 0) or not np.all(np.isfinite(se)):
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(se), 1)[0])


def report_convergence(results) -> str:
    """``results``: sequence of ``(n_paths, estimate, stderr)`` with >= 2 points."""
    results = list(results)
    if len(results) < 2:
        raise InvalidArgumentError("a convergence report needs at least two sweep points")
    slope = convergence_slope([r[0] for r in results], [r[2] for r in results])
    slope_s = "na" if math.isnan(slope) else f"{slope:.17g}"
    rows = [[str(int(n)), f"{est:.17g}", f"{se:.17g}", slope_s] for n, est, se in results]
    return _csv_text(("n_paths", "estimate", "stderr", "slope"), rows)


# -- jobs -----------------------------------------------------------------------

def _need_payoff(cfg: ExperimentConfig):
    if cfg.payoff is None:
        raise ConfigError("this job needs a [payoff] section")
    return cfg.payoff


def _direction(cfg: ExperimentConfig) -> VegaDirection:
    g = cfg.greeks
    if g.direction == "constant":
        return VegaDirection.constant(g.direction_c)
    return VegaDirection.relative(cfg.model)


def _oracle_rows(cfg: ExperimentConfig, n_paths: int) -> list[GreekEstimate]:
    """Deterministic reference rows; only for jump-free Black-Scholes terminal payoffs."""
    m, payoff = cfg.model, cfg.payoff
    if not (m.is_black_scholes and m.r == 0 and payoff.terminal_only):
        return []
    x0, sig, T, seed = m.x0, m.vol, cfg.run.T, cfg.run.seed
    if payoff.kind == "digital_call" and payoff.strike > 0:
        price = oracles.closed_form_digital_price(x0, payoff.strike, sig, T)
        delta, gamma, vsig = oracles.closed_form_digital_greeks(x0, payoff.strike, sig, T)
    else:
        price = oracles.quadrature_price(payoff, x0, sig, T)
        delta, gamma, vsig = oracles.quadrature_fd_greeks(payoff, x0, sig, T)
    rows = [
        _oracle_row("price", price, n_paths, seed),
        _oracle_row("delta", delta, n_paths, seed),
        _oracle_row("gamma", gamma, n_paths, seed),
    ]
    if cfg.greeks.direction == "relative":
        rows.append(_oracle_row("vega", 0.5 * sig * vsig, n_paths, seed))
    rows.append(_oracle_row("vega_sigma", vsig, n_paths, seed))
    return rows


def job_price(cfg: ExperimentConfig, threads: int) -> dict[str, str]:
    est = estimate_price(cfg.model, cfg.sim_config(), _need_payoff(cfg), threads)
    report = {"job": "price", "config": cfg.raw, "rows": [est.to_dict()]}
    return {"price.csv": greeks_csv([est]), "report.json": _json_text(report)}


def job_greeks(cfg: ExperimentConfig, threads: int) -> dict[str, str]:
    payoff = _need_payoff(cfg)
    m = cfg.model
    direction = _direction(cfg)
    if m.r == 0:
        check_ellipticity(m, direction)
    fd_bump = cfg.greeks.fd_bump or 0.01 * abs(m.x0)
    vega_bump = cfg.greeks.vega_bump
    if vega_bump is None and m.vol is not None:
        vega_bump = 0.01 * m.vol
    rows = compute_greeks(m, cfg.sim_config(), payoff, fd_bump, vega_bump, direction, threads)
    rows += _oracle_rows(cfg, cfg.run.paths)
    notes = []
    if m.r != 0:
        notes.append("gamma and vega weights are derived for r = 0 and were skipped")
    if not payoff.bounded:
        notes.append("unbounded payoff: weight formulas assume a bounded payoff; FD rows are the reference")
    report = {
        "job": "greeks",
        "config": cfg.raw,
        "fd_bump": fd_bump,
        "vega_bump": vega_bump,
        "vega_direction": direction.mode,
        "rows": [r.to_dict() for r in rows],
        "notes": notes,
    }
    return {"greeks.csv": greeks_csv(rows), "report.json": _json_text(report)}


def job_convergence(cfg: ExperimentConfig, threads: int) -> dict[str, str]:
    payoff = _need_payoff(cfg)
    conv = cfg.convergence
    # every sweep point is a prefix of one run at the largest size
    sim = cfg.sim_config(paths=conv.sizes[-1])
    samples = weighted_samples(cfg.model, sim, payoff, conv.estimator, _direction(cfg), threads)
    results = []
    for n in conv.sizes:
        est = GreekEstimate.from_samples(samples[:n], conv.estimator, "weight", cfg.run.seed)
        results.append((n, est.value, est.stderr))
    text = report_convergence(results)
    slope = convergence_slope([r[0] for r in results], [r[2] for r in results])
    report = {
        "job": "convergence",
        "config": cfg.raw,
        "estimator": conv.estimator,
        "points": [{"n_paths": n, "estimate": e, "stderr": s} for n, e, s in results],
        "slope": None if math.isnan(slope) else slope,
    }
    return {"convergence.csv": text, "report.json": _json_text(report)}


def job_classify(cfg: ExperimentConfig, threads: int) -> dict[str, str]:
    cl = cfg.classify
    if cl.functional == "payoff":
        F = as_functional(_need_payoff(cfg))
    elif cl.functional == "current_value":
        F = funcalc.current_value()
    else:
        F = funcalc.running_integral()
    sim = cfg.sim_config(paths=cl.sample)
    batch = simulate_batch(cfg.model, sim, threads)
    grid = sim.grid
    times = sorted({grid.time(grid.index_floor(f * grid.T)) for f in cl.times})
    report = funcalc.classify_path_dependence(F, [out.x for out in batch], times, cl.tol)
    return {"classify.json": report.to_json() + "\n"}


def job_residuals(cfg: ExperimentConfig, threads: int) -> dict[str, str]:
    payoff = _need_payoff(cfg)
    m = cfg.model
    if not (m.is_black_scholes and m.r == 0 and payoff.kind == "digital_call" and payoff.strike > 0):
        raise ConfigError(
            "residual checks need the closed-form surface: bs_multiplicative, r = 0, no jumps, digital_call"
        )
    res = cfg.residuals
    T = cfg.run.T
    closed = oracles.DigitalClosedForm(payoff.strike, m.vol, T)
    t_range = (0.0, res.t_max_frac * T)
    x_range = (res.x_min, res.x_max)
    ref = oracles.pide_refinement(closed.value, m, t_range, x_range, res.grid)
    mart = {}
    for steps in res.mart_steps:
        mean, var = oracles.martingale_residual(
            m, cfg.sim_config(paths=res.mart_paths, steps=steps), payoff, closed,
            res.horizon_frac, threads,
        )
        mart[str(steps)] = {"mean": mean, "var": var}
    v0, v1 = (mart[str(s)]["var"] for s in res.mart_steps)
    report = {
        "job": "residuals",
        "config": cfg.raw,
        "pide": {"grid": res.grid, "coarse_max": ref.coarse_max, "fine_max": ref.fine_max,
                 "order": ref.order},
        "martingale": {"horizon_frac": res.horizon_frac, "paths": res.mart_paths, "by_steps": mart,
                       "var_ratio": v0 / v1 if v1 > 0 else None},
    }
    files = {"residuals.json": _json_text(report)}
    if res.dump_csv:
        surface = oracles.SurfaceGrid.from_function(
            closed.value, np.linspace(*t_range, res.grid), np.linspace(*x_range, res.grid))
        files["pide_residual.csv"] = oracles.residual_to_csv(surface, oracles.pide_residual(surface, m))
    return files


JOB_FUNCS = {
    "price": job_price,
    "greeks": job_greeks,
    "convergence": job_convergence,
    "classify": job_classify,
    "residuals": job_residuals,
}


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathgreeks", description=__doc__.splitlines()[0])
    ap.add_argument("job", choices=JOBS)
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--out", default=None, help="output directory (default: config output_dir or ./out)")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: $PATHGREEKS_THREADS or 1)")
    return ap


def run(job: str, config_path, out_dir=None, threads: int | None = None) -> int:
    try:
        cfg = ExperimentConfig.from_file(config_path)
        if cfg.job is not None and cfg.job != job:
            raise ConfigError(f"config is for job {cfg.job!r}, not {job!r}")
        threads = resolve_threads(threads)
        validate_model(cfg.model, default_probe(cfg.model))
        files = JOB_FUNCS[job](cfg, threads)
    except NumericalError as exc:
        print(f"pathgreeks: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PathGreeksError, ValueError) as exc:
        print(f"pathgreeks: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = out_dir or cfg.output_dir or "out"
    for name, text in files.items():
        write_text_atomic(os.path.join(out, name), text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    return run(args.job, args.config, args.out, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
