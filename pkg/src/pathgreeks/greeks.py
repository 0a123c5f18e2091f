"""Monte-Carlo Greeks: tangent-process weights and finite-difference baselines.

Weight estimators multiply the payoff by a path functional built from the
simulated tangent ``z`` and weight integral ``pi``:

* Delta  ``g(X_T) (pi_T - pi_s) / ((T - s) z_s)``
* Gamma  ``g(X_T) piG_{s,T}`` with ``tau = T - s``, ``dpi = pi_T - pi_s`` and
  ``piG = dpi^2 / (tau z)^2 - (sigma'/sigma) dpi / (tau z) - 1 / (tau sigma^2)``
* Vega   ``g(X_T) * 1/2 * int u(X_t) piG_{t,T} dt`` along a direction ``u``.

For ``sigma(x) = sigma x`` without jumps these collapse to functions of the
terminal Brownian value ``w_T`` alone (the ``weight_bs`` method).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidDirectionError
from .pathspace import Path, TimeGrid
from .payoffs import PayoffSpec, payoff_values
from .simulate import (
    ModelSpec,
    SimBlock,
    SimConfig,
    SimOutput,
    map_blocks,
    simulate_block,
)

log = logging.getLogger(__name__)

Z95 = 1.96


class DegenerateEstimateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GreekEstimate:
    greek: str
    method: str
    value: float
    stderr: float
    ci95: tuple[float, float]
    n_paths: int
    seed: int
    notes: tuple[str, ...] = ()

    @classmethod
    def from_samples(cls, samples, greek, method, seed, notes=()) -> "GreekEstimate":
        samples = np.asarray(samples, float)
        n = samples.size
        if n < 2:
            raise InvalidArgumentError("an estimate needs at least two samples")
        mean = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(n))
        return cls(greek, method, mean, se, (mean - Z95 * se, mean + Z95 * se), n, int(seed), tuple(notes))

    def contains(self, target: float) -> bool:
        return self.ci95[0] <= target <= self.ci95[1]

    def zscore(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == target else math.inf
        return (self.value - target) / self.stderr

    CSV_HEADER = ("greek", "method", "value", "stderr", "ci_low", "ci_high", "n_paths", "seed")

    def csv_row(self) -> list[str]:
        return [
            self.greek,
            self.method,
            f"{self.value:.17g}",
            f"{self.stderr:.17g}",
            f"{self.ci95[0]:.17g}",
            f"{self.ci95[1]:.17g}",
            str(self.n_paths),
            str(self.seed),
        ]

    def to_dict(self) -> dict:
        return {
            "greek": self.greek,
            "method": self.method,
            "value": self.value,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "notes": list(self.notes),
        }


def combined_z(a: GreekEstimate, b: GreekEstimate, scale_b: float = 1.0) -> float:
    """Standardized difference ``(a - c b) / sqrt(se_a^2 + (c se_b)^2)``."""
    se = math.hypot(a.stderr, scale_b * b.stderr)
    diff = a.value - scale_b * b.value
    return 0.0 if se == 0 and diff == 0 else diff / se


# -- vega directions ------------------------------------------------------------

@dataclass(frozen=True)
class VegaDirection:
    """Direction ``u`` of the variance perturbation ``sigma^2 + eps * u``."""

    mode: str
    u_fn: Callable

    @classmethod
    def relative(cls, m: ModelSpec) -> "VegaDirection":
        return cls("relative", lambda x: m.sigma(x) ** 2)

    @classmethod
    def constant(cls, c: float) -> "VegaDirection":
        return cls("constant", lambda x: c + 0.0 * np.asarray(x, float))


def default_probe(m: ModelSpec) -> np.ndarray:
    if m.x0 > 0:
        return m.x0 * np.exp(np.linspace(-2.0, 2.0, 41))
    return m.x0 + np.linspace(-10.0, 10.0, 41)


def check_ellipticity(
    m: ModelSpec, direction: VegaDirection, probe=None, eps: float = 0.5
) -> float:
    """Smallest ``sigma^2 + e u`` over ``|e| <= eps`` on the probe; must be > 0."""
    x = default_probe(m) if probe is None else np.asarray(probe, float)
    v0 = m.sigma(x) ** 2
    u = direction.u_fn(x)
    eta = float(min(np.min(v0 - eps * u), np.min(v0 + eps * u)))
    if not (math.isfinite(eta) and eta > 0):
        raise InvalidDirectionError(
            f"direction {direction.mode!r} violates ellipticity (min variance {eta})"
        )
    return eta


# -- per-path weights -----------------------------------------------------------------

def _gamma_weight_arrays(m: ModelSpec, x_s, z_s, dpi, tau):
    s = m.sigma(x_s)
    ds = m.dsigma(x_s)
    return dpi**2 / (tau * z_s) ** 2 - (ds / s) * dpi / (tau * z_s) - 1.0 / (tau * s**2)


def gamma_weight(out: SimOutput, m: ModelSpec, s: float, T: float) -> float:
    """Gamma weight ``piG_{s,T}`` for a single simulated path."""
    grid = out.x.grid
    k = grid.index_exact(s)
    n = grid.index_exact(T)
    if k >= n:
        raise InvalidArgumentError("gamma weight needs s < T")
    tau = grid.time(n) - grid.time(k)
    dpi = out.pi[n] - out.pi[k]
    return float(_gamma_weight_arrays(m, out.x.values[k], out.z.values[k], dpi, tau))


def delta_weights(blk: SimBlock, k: int = 0) -> np.ndarray:
    tau = blk.grid.T - blk.grid.time(k)
    return (blk.pi[:, -1] - blk.pi[:, k]) / (tau * blk.z[:, k])


def gamma_weights(blk: SimBlock, m: ModelSpec, k: int = 0) -> np.ndarray:
    tau = blk.grid.T - blk.grid.time(k)
    return _gamma_weight_arrays(m, blk.x[:, k], blk.z[:, k], blk.pi[:, -1] - blk.pi[:, k], tau)


def vega_weights(blk: SimBlock, m: ModelSpec, direction: VegaDirection) -> np.ndarray:
    """``1/2 sum_i u(x_i) piG_{t_i,T} dt`` over ``t_i < T - dt``.

    The last cell is skipped: ``piG_{t,T}`` blows up like ``1/(T - t)``.
    """
    grid = blk.grid
    m_cols = grid.n - 1
    if m_cols < 1:
        return np.zeros(len(blk))
    X = blk.x[:, :m_cols]
    tau = grid.T - grid.times[:m_cols]
    dpi = blk.pi[:, -1:] - blk.pi[:, :m_cols]
    G = _gamma_weight_arrays(m, X, blk.z[:, :m_cols], dpi, tau[None, :])
    return 0.5 * grid.dt * np.sum(direction.u_fn(X) * G, axis=1)


def bs_weights(blk: SimBlock, m: ModelSpec) -> dict[str, np.ndarray]:
    """Closed weights for ``sigma(x) = sigma x`` in terms of ``w_T``."""
    sig, x0, T = m.vol, m.x0, blk.grid.T
    w = blk.w_T
    bracket = w**2 / (sig * T) - w - 1.0 / sig
    return {
        "delta": w / (x0 * sig * T),
        "gamma": bracket / (sig * x0**2 * T),
        "vega": 0.5 * sig * bracket,
    }


# -- sampling engine -------------------------------------------------------------------

@dataclass
class _Plan:
    """What to compute from each simulated block."""

    m: ModelSpec
    cfg: SimConfig
    payoff: PayoffSpec
    weights: dict = field(default_factory=dict)  # name -> fn(blk) -> weight array
    fd: dict = field(default_factory=dict)  # name -> (models, combine(list of g) -> samples)
    prefix: np.ndarray | None = None  # fixed history before the simulated segment
    full_grid: TimeGrid | None = None
    discount: float = 1.0

    def payoff_of(self, blk: SimBlock) -> np.ndarray:
        vals = blk.x
        grid = blk.grid
        if self.prefix is not None:
            head = np.broadcast_to(self.prefix, (len(blk), len(self.prefix)))
            vals = np.hstack((head, vals))
            grid = self.full_grid
        return self.discount * payoff_values(self.payoff, vals, grid)

    def run_block(self, b: int) -> dict[str, np.ndarray]:
        out = {}
        if self.weights:
            blk = simulate_block(self.m, self.cfg, b)
            g = self.payoff_of(blk)
            for name, fn in self.weights.items():
                out[name] = g * fn(blk)
            del blk
        cache = {}
        for name, (models, combine) in self.fd.items():
            gs = []
            for mod in models:
                key = id(mod)
                if key not in cache:
                    cache[key] = self.payoff_of(simulate_block(mod, self.cfg, b))
                gs.append(cache[key])
            out[name] = combine(gs)
        return out

    def run(self, threads: int | None = None) -> dict[str, np.ndarray]:
        parts = map_blocks(self.run_block, self.cfg.n_blocks, threads)
        names = list(self.weights) + list(self.fd)
        return {k: np.concatenate([p[k] for p in parts]) for k in names}


def _require_r0(m: ModelSpec, what: str):
    if m.r != 0:
        raise InvalidArgumentError(f"{what} weight is derived for r = 0; got r = {m.r}")


def _bounded_note(payoff: PayoffSpec) -> tuple[str, ...]:
    if payoff.bounded:
        return ()
    log.warning("payoff %s is unbounded; weight formulas assume a bounded payoff", payoff.label)
    return ("unbounded payoff",)


def _restart(m: ModelSpec, cfg: SimConfig, s: float, history: Path | None):
    """Resolve the start index and, for restarts, the shifted model and grid."""
    grid = cfg.grid
    k = grid.index_exact(s)
    if k >= grid.n:
        raise InvalidArgumentError("T - s must be positive")
    if history is None or k == 0:
        return m, cfg, k, None
    if history.grid != grid:
        raise InvalidArgumentError("history path must live on the simulation grid")
    sub = TimeGrid(grid.T - grid.time(k), grid.n - k)
    return m.with_x0(history.values[k]), replace(cfg, grid=sub), 0, history.values[:k].copy()


def estimate_price(m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, threads=None) -> GreekEstimate:
    plan = _Plan(m, cfg, payoff, weights={"price": lambda blk: 1.0})
    plan.discount = math.exp(-m.r * cfg.grid.T)
    res = plan.run(threads)
    return GreekEstimate.from_samples(res["price"], "price", "mc", cfg.seed)


def estimate_delta_weight(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, s: float = 0.0,
    history: Path | None = None, threads=None,
) -> GreekEstimate:
    """Delta at time ``s``.

    Without ``history`` the estimate is the unconditional mean of the
    conditional weight (the average Delta at ``s``). With ``history`` the
    simulation restarts from ``history`` stopped at ``s``.
    """
    notes = _bounded_note(payoff)
    sm, scfg, k, prefix = _restart(m, cfg, s, history)
    plan = _Plan(sm, scfg, payoff, weights={"delta": lambda blk: delta_weights(blk, k)},
                 prefix=prefix, full_grid=cfg.grid)
    plan.discount = math.exp(-m.r * scfg.grid.T)
    res = plan.run(threads)
    return GreekEstimate.from_samples(res["delta"], "delta", "weight", cfg.seed, notes)


def estimate_gamma_weight(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, s: float = 0.0,
    history: Path | None = None, threads=None,
) -> GreekEstimate:
    _require_r0(m, "gamma")
    notes = _bounded_note(payoff)
    sm, scfg, k, prefix = _restart(m, cfg, s, history)
    plan = _Plan(sm, scfg, payoff, weights={"gamma": lambda blk: gamma_weights(blk, sm, k)},
                 prefix=prefix, full_grid=cfg.grid)
    res = plan.run(threads)
    return GreekEstimate.from_samples(res["gamma"], "gamma", "weight", cfg.seed, notes)


def estimate_vega_weight(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec,
    direction: VegaDirection | None = None, probe=None, threads=None,
) -> GreekEstimate:
    _require_r0(m, "vega")
    direction = direction or VegaDirection.relative(m)
    check_ellipticity(m, direction, probe)
    notes = _bounded_note(payoff) + (f"direction={direction.mode}",)
    plan = _Plan(m, cfg, payoff, weights={"vega": lambda blk: vega_weights(blk, m, direction)})
    res = plan.run(threads)
    return GreekEstimate.from_samples(res["vega"], "vega", "weight", cfg.seed, notes)


def _require_bs(m: ModelSpec):
    if not m.is_black_scholes:
        raise InvalidArgumentError(
            "closed Black-Scholes weights need sigma(x) = sigma x and no jumps"
        )
    _require_r0(m, "Black-Scholes")


def estimate_bs_greeks(m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, threads=None) -> dict[str, GreekEstimate]:
    """Delta, Gamma and relative-direction Vega from the closed weights."""
    _require_bs(m)
    notes = _bounded_note(payoff)
    weights = {g: (lambda blk, g=g: bs_weights(blk, m)[g]) for g in ("delta", "gamma", "vega")}
    res = _Plan(m, cfg, payoff, weights=weights).run(threads)
    return {
        g: GreekEstimate.from_samples(res[g], g, "weight_bs", cfg.seed, notes) for g in weights
    }


# -- finite differences ----------------------------------------------------------------

FD_KINDS = ("delta", "gamma", "vega_sigma")


def _fd_spec(m: ModelSpec, which: str, bump: float):
    if not (math.isfinite(bump) and bump > 0):
        raise InvalidArgumentError(f"finite-difference bump must be positive, got {bump}")
    h = float(bump)
    if which == "delta":
        models = [m.with_x0(m.x0 + h), m.with_x0(m.x0 - h)]
        return models, lambda g: (g[0] - g[1]) / (2 * h)
    if which == "gamma":
        models = [m.with_x0(m.x0 + h), m, m.with_x0(m.x0 - h)]
        return models, lambda g: (g[0] - 2 * g[1] + g[2]) / (h * h)
    if which == "vega_sigma":
        if m.vol is None or m.vol <= 0:
            raise InvalidArgumentError("vega_sigma needs a model with a positive vol parameter")
        if h >= m.vol:
            raise InvalidArgumentError("vega bump must be smaller than the vol parameter")
        models = [m.with_sigma_scale((m.vol + h) / m.vol), m.with_sigma_scale((m.vol - h) / m.vol)]
        return models, lambda g: (g[0] - g[1]) / (2 * h)
    raise InvalidArgumentError(f"unknown finite-difference greek {which!r}")


def _fd_estimate(samples, which, seed) -> GreekEstimate:
    notes = ()
    if not np.any(samples):
        warnings.warn(
            f"finite-difference {which}: differenced payoff is zero on every path",
            DegenerateEstimateWarning,
            stacklevel=3,
        )
        notes = ("degenerate: all differences zero",)
    return GreekEstimate.from_samples(samples, which, "fd", seed, notes)


def estimate_fd_greek(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, which: str, bump: float, threads=None
) -> GreekEstimate:
    """Central finite difference with common random numbers.

    ``bump`` is absolute: asset units for delta/gamma, vol units for
    ``vega_sigma`` (reported as dP/dvol).
    """
    plan = _Plan(m, cfg, payoff, fd={which: _fd_spec(m, which, bump)})
    plan.discount = math.exp(-m.r * cfg.grid.T)
    return _fd_estimate(plan.run(threads)[which], which, cfg.seed)


def weighted_samples(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, which: str,
    direction: VegaDirection | None = None, threads=None,
) -> np.ndarray:
    """Per-path samples ``g(X_T) * weight`` whose mean is the chosen estimate."""
    if which == "price":
        fn = lambda blk: 1.0  # noqa: E731
    elif which == "delta":
        fn = delta_weights
    elif which in ("gamma", "vega"):
        _require_r0(m, which)
        if which == "gamma":
            fn = lambda blk: gamma_weights(blk, m, 0)  # noqa: E731
        else:
            direction = direction or VegaDirection.relative(m)
            check_ellipticity(m, direction)
            fn = lambda blk: vega_weights(blk, m, direction)  # noqa: E731
    else:
        raise InvalidArgumentError(f"unknown estimator {which!r}")
    plan = _Plan(m, cfg, payoff, weights={which: fn})
    plan.discount = math.exp(-m.r * cfg.grid.T) if which in ("price", "delta") else 1.0
    return plan.run(threads)[which]


def fd_bump_table(
    m: ModelSpec, cfg: SimConfig, payoff: PayoffSpec, bumps: Sequence[float], threads=None
) -> tuple[GreekEstimate, list[tuple[float, GreekEstimate]]]:
    """Weight Delta plus FD Delta at each bump, all on common random numbers."""
    fd = {f"fd_{i}": _fd_spec(m, "delta", b) for i, b in enumerate(bumps)}
    plan = _Plan(m, cfg, payoff, weights={"delta": delta_weights}, fd=fd)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEstimateWarning)
        res = plan.run(threads)
        rows = [(float(b), _fd_estimate(res[f"fd_{i}"], "delta", cfg.seed)) for i, b in enumerate(bumps)]
    weight = GreekEstimate.from_samples(res["delta"], "delta", "weight", cfg.seed)
    return weight, rows


def compute_greeks(
    m: ModelSpec,
    cfg: SimConfig,
    payoff: PayoffSpec,
    fd_bump: float,
    vega_bump: float | None = None,
    direction: VegaDirection | None = None,
    threads=None,
) -> list[GreekEstimate]:
    """Every estimator the model supports, from one pass over the blocks.

    Rows: price; weight delta/gamma/vega; weight_bs trio when the model is
    plain Black-Scholes; FD delta/gamma and, when the model has a vol
    parameter, FD vega as dP/dvol (relative-direction vega is vol/2 times it).
    """
    weights: dict[str, Callable] = {"price": lambda blk: 1.0, "delta": delta_weights}
    r0 = m.r == 0
    notes = _bounded_note(payoff)
    if r0:
        direction = direction or VegaDirection.relative(m)
        check_ellipticity(m, direction)
        weights["gamma"] = lambda blk: gamma_weights(blk, m, 0)
        weights["vega"] = lambda blk: vega_weights(blk, m, direction)
        if m.is_black_scholes:
            for g in ("delta", "gamma", "vega"):
                weights[f"bs_{g}"] = lambda blk, g=g: bs_weights(blk, m)[g]
    fd = {"fd_delta": _fd_spec(m, "delta", fd_bump), "fd_gamma": _fd_spec(m, "gamma", fd_bump)}
    has_vol = m.vol is not None and vega_bump is not None
    if has_vol:
        fd["fd_vega"] = _fd_spec(m, "vega_sigma", vega_bump)
    plan = _Plan(m, cfg, payoff, weights=weights, fd=fd)
    res = plan.run(threads)
    disc = math.exp(-m.r * cfg.grid.T)
    seed = cfg.seed
    out = [GreekEstimate.from_samples(res["price"] * disc, "price", "mc", seed)]
    out.append(GreekEstimate.from_samples(res["delta"] * disc, "delta", "weight", seed, notes))
    if r0:
        out.append(GreekEstimate.from_samples(res["gamma"], "gamma", "weight", seed, notes))
        out.append(GreekEstimate.from_samples(
            res["vega"], "vega", "weight", seed, notes + (f"direction={direction.mode}",)))
        if m.is_black_scholes:
            for g in ("delta", "gamma", "vega"):
                out.append(GreekEstimate.from_samples(res[f"bs_{g}"], g, "weight_bs", seed, notes))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEstimateWarning)
        out.append(_fd_estimate(res["fd_delta"] * disc, "delta", seed))
        out.append(_fd_estimate(res["fd_gamma"] * disc, "gamma", seed))
        if has_vol:
            fdv = _fd_estimate(res["fd_vega"] * disc, "vega_sigma", seed)
            out.append(replace(fdv, notes=fdv.notes + ("dP/dvol",)))
    return out
