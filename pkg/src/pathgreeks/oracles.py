"""Independent references for the Monte-Carlo estimators.

Everything here is deterministic: lognormal quadrature prices, closed-form
digital Greeks, residuals of the pricing PIDE on a tabulated surface, and the
martingale-representation residual along simulated paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

from .errors import InvalidArgumentError
from .payoffs import PayoffSpec, payoff_values
from .simulate import ModelSpec, SimConfig, map_blocks, simulate_block

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _phi(y):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(y))


# -- lognormal quadrature -----------------------------------------------------

@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 128
    halfwidth: float = 10.0  # in standard deviations

    def __post_init__(self):
        if self.nodes < 32:
            raise InvalidArgumentError("quadrature needs at least 32 nodes")
        if not self.halfwidth >= 8:
            raise InvalidArgumentError("quadrature halfwidth must be >= 8 standard deviations")


def _terminal_fn(payoff) -> tuple[Callable, float | None]:
    if callable(payoff) and not isinstance(payoff, PayoffSpec):
        return payoff, None
    if not payoff.terminal_only:
        raise InvalidArgumentError(f"quadrature pricing needs a terminal payoff, got {payoff.kind}")
    K = payoff.strike
    if payoff.kind == "digital_call":
        return (lambda x: (x > K).astype(float)), K
    return (lambda x: np.maximum(x - K, 0.0)), K


def quadrature_price(
    payoff, x0: float, sigma: float, T: float, cfg: QuadratureConfig = QuadratureConfig(),
    breakpoint: float | None = None,
) -> float:
    """``E g(x0 exp(sigma sqrt(T) Y - sigma^2 T / 2))`` for standard normal ``Y``.

    ``payoff`` is a terminal :class:`PayoffSpec` or a vectorized callable of
    ``x_T``. Gauss-Legendre panels are split at the strike (or at
    ``breakpoint`` for callables) so the kink or jump sits on a panel edge.
    """
    if not (x0 > 0 and sigma > 0 and T > 0):
        raise InvalidArgumentError("quadrature pricing needs x0, sigma, T > 0")
    g, K = _terminal_fn(payoff)
    if breakpoint is not None:
        K = breakpoint
    sd = sigma * math.sqrt(T)
    H = cfg.halfwidth
    edges = [-H, H]
    if K is not None and K > 0:
        y_star = (math.log(K / x0) + 0.5 * sd * sd) / sd
        if -H < y_star < H:
            edges = [-H, y_star, H]
    u, w = leggauss(cfg.nodes)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        y = 0.5 * (b - a) * u + 0.5 * (a + b)
        x = x0 * np.exp(sd * y - 0.5 * sd * sd)
        total += 0.5 * (b - a) * float(np.dot(w, g(x) * _phi(y)))
    return total


# -- closed-form digital ------------------------------------------------------

def _d2(x, K, sigma, tau):
    return (np.log(x / K) - 0.5 * sigma * sigma * tau) / (sigma * np.sqrt(tau))


def closed_form_digital_price(x0: float, K: float, sigma: float, T: float) -> float:
    return float(ndtr(_d2(x0, K, sigma, T)))


def closed_form_digital_greeks(x0: float, K: float, sigma: float, T: float) -> tuple[float, float, float]:
    """``(delta, gamma, dP/dsigma)`` of the cash-or-nothing call at ``r = 0``."""
    if not (x0 > 0 and K > 0 and sigma > 0 and T > 0):
        raise InvalidArgumentError("closed form needs positive x0, K, sigma, T")
    sd = sigma * math.sqrt(T)
    d2 = float(_d2(x0, K, sigma, T))
    dens = float(_phi(d2))
    delta = dens / (x0 * sd)
    gamma = -dens * (d2 + sd) / (x0 * x0 * sd * sd)
    vega = dens * (-math.log(x0 / K) / (sigma * sd) - 0.5 * math.sqrt(T))
    return delta, gamma, vega


def quadrature_fd_greeks(
    payoff, x0: float, sigma: float, T: float, rel_bump: float = 1e-5,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> tuple[float, float, float]:
    """Central differences of :func:`quadrature_price` in ``x0`` and ``sigma``."""
    hx, hs = rel_bump * x0, rel_bump * sigma
    p = lambda x, s: quadrature_price(payoff, x, s, T, cfg)  # noqa: E731
    up, mid, dn = p(x0 + hx, sigma), p(x0, sigma), p(x0 - hx, sigma)
    delta = (up - dn) / (2 * hx)
    # second differences lose digits at 1e-5; use a wider bump for gamma
    hg = 100 * hx
    gamma = (p(x0 + hg, sigma) - 2 * mid + p(x0 - hg, sigma)) / (hg * hg)
    vega = (p(x0, sigma + hs) - p(x0, sigma - hs)) / (2 * hs)
    return delta, gamma, vega


@dataclass(frozen=True)
class DigitalClosedForm:
    """Price surface ``f(t, x) = Phi(d2)`` of the digital call, and its delta."""

    K: float
    sigma: float
    T: float

    def value(self, t, x):
        x = np.asarray(x, float)
        tau = self.T - np.asarray(t, float)
        live = tau > 0
        if not np.any(live):
            return (x > self.K).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = ndtr(_d2(x, self.K, self.sigma, np.where(live, tau, 1.0)))
        return np.where(live, v, (x > self.K).astype(float))

    def delta(self, t, x):
        x = np.asarray(x, float)
        tau = self.T - np.asarray(t, float)
        if np.any(tau <= 0):
            raise InvalidArgumentError("digital delta is undefined at expiry")
        sd = self.sigma * np.sqrt(tau)
        return _phi(_d2(x, self.K, self.sigma, tau)) / (x * sd)


@dataclass(frozen=True)
class ConstantClosedForm:
    c: float

    def value(self, t, x):
        return np.full(np.shape(x), float(self.c))

    def delta(self, t, x):
        return np.zeros(np.shape(x))


# -- PIDE residual ------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceGrid:
    """Values ``f(t_i, x_j)`` on a rectangular grid.

    ``fn`` optionally evaluates the surface off-grid; the jump integral uses it
    when present and linear interpolation otherwise.
    """

    ts: np.ndarray
    xs: np.ndarray
    values: np.ndarray  # (len(ts), len(xs))
    fn: Callable | None = None

    def __post_init__(self):
        ts = np.asarray(self.ts, float)
        xs = np.asarray(self.xs, float)
        v = np.asarray(self.values, float)
        if v.shape != (len(ts), len(xs)):
            raise InvalidArgumentError(f"surface values shape {v.shape} != ({len(ts)}, {len(xs)})")
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(xs) <= 0):
            raise InvalidArgumentError("surface grids must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("surface values must be finite")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn: Callable, ts, xs) -> "SurfaceGrid":
        ts = np.asarray(ts, float)
        xs = np.asarray(xs, float)
        values = fn(ts[:, None], xs[None, :]) + np.zeros((len(ts), len(xs)))
        return cls(ts, xs, values, fn)


def digital_surface(K: float, sigma: float, T: float, ts, xs) -> SurfaceGrid:
    return SurfaceGrid.from_function(DigitalClosedForm(K, sigma, T).value, ts, xs)


def _shifted(surface: SurfaceGrid, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    if surface.fn is not None:
        return surface.fn(t, x)
    xs, v = surface.xs, surface.values
    out = np.empty(np.broadcast(t, x).shape)
    xb = np.broadcast_to(x, out.shape)
    for i in range(len(surface.ts) - 1):
        row = v[i]
        # linear inside, linear extrapolation from the end segments outside
        y = np.interp(xb[i], xs, row)
        lo, hi = xb[i] < xs[0], xb[i] > xs[-1]
        y[lo] = row[0] + (xb[i][lo] - xs[0]) * (row[1] - row[0]) / (xs[1] - xs[0])
        y[hi] = row[-1] + (xb[i][hi] - xs[-1]) * (row[-1] - row[-2]) / (xs[-1] - xs[-2])
        out[i] = y
    return out


def pide_residual(surface: SurfaceGrid, m: ModelSpec, nodes: int = 128) -> np.ndarray:
    """Residual of ``Df + r x f_x + sigma^2/2 f_xx + jump term - r f``.

    Forward differences in ``t`` and central differences in ``x``; the
    result has shape ``(len(ts) - 1, len(xs) - 2)``, row ``i`` at ``ts[i]``
    and column ``j`` at ``xs[j + 1]``.
    """
    ts, xs, f = surface.ts, surface.xs, surface.values
    if len(ts) < 3 or len(xs) < 3:
        raise InvalidArgumentError("residual needs at least a 3x3 surface")
    if np.ptp(np.diff(xs)) > 1e-9 * (xs[-1] - xs[0]):
        raise InvalidArgumentError("residual needs a uniform x grid")
    dx = xs[1] - xs[0]
    dt = np.diff(ts)[:, None]
    f0 = f[:-1]
    x = xs[1:-1][None, :]
    mid = f0[:, 1:-1]
    f_t = (f[1:, 1:-1] - mid) / dt
    f_x = (f0[:, 2:] - f0[:, :-2]) / (2 * dx)
    f_xx = (f0[:, 2:] - 2 * mid + f0[:, :-2]) / (dx * dx)
    s = np.asarray(m.sigma(xs[1:-1]), float)[None, :] + 0.0 * mid
    res = f_t + m.r * x * f_x + 0.5 * s * s * f_xx - m.r * mid
    if m.jump.active:
        zq, wq = m.jump.quadrature(nodes)
        t_col = ts[:-1, None]
        acc = np.zeros_like(mid)
        for zk, wk in zip(zq, wq):
            gam = np.asarray(m.gamma_fn(zk, x), float) + 0.0 * mid
            acc += wk * (_shifted(surface, t_col, x + gam) - mid - gam * f_x)
        res = res + m.jump.intensity * acc
    return res


@dataclass(frozen=True)
class RefinementResult:
    coarse_max: float
    fine_max: float
    order: float


def pide_refinement(
    fn: Callable, m: ModelSpec, t_range: tuple[float, float], x_range: tuple[float, float],
    n: int = 400,
) -> RefinementResult:
    """Max residual on an ``n x n`` grid versus its halved-spacing refinement.

    Both maxima are taken over the coarse nodes only, which the refined grid
    contains, so the ratio compares errors at the same points.
    """
    if n < 3:
        raise InvalidArgumentError("refinement needs n >= 3")
    tc = np.linspace(*t_range, n)
    xc = np.linspace(*x_range, n)
    tf = np.linspace(*t_range, 2 * n - 1)
    xf = np.linspace(*x_range, 2 * n - 1)
    rc = pide_residual(SurfaceGrid.from_function(fn, tc, xc), m)
    rf = pide_residual(SurfaceGrid.from_function(fn, tf, xf), m)
    # fine row 2i sits at coarse row i; fine column 2j+1 at coarse column j
    rf_shared = rf[0::2, 1::2][: rc.shape[0], : rc.shape[1]]
    coarse, fine = float(np.max(np.abs(rc))), float(np.max(np.abs(rf_shared)))
    order = math.log2(coarse / fine) if fine > 0 and coarse > 0 else math.inf
    return RefinementResult(coarse, fine, order)


def residual_to_csv(surface: SurfaceGrid, res: np.ndarray) -> str:
    lines = ["t,x,residual"]
    for i, t in enumerate(surface.ts[: res.shape[0]]):
        for j, x in enumerate(surface.xs[1 : res.shape[1] + 1]):
            lines.append(f"{t:.17g},{x:.17g},{res[i, j]:.17g}")
    return "\n".join(lines) + "\n"


# -- martingale representation ------------------------------------------------

def martingale_residual(
    m: ModelSpec,
    cfg: SimConfig,
    payoff: PayoffSpec | None,
    closed_form,
    horizon_frac: float = 1.0,
    threads: int | None = None,
) -> tuple[float, float]:
    """Mean and variance of ``f(t_k, x_k) - f(0, x0) - sum sigma f_x dW``.

    ``t_k`` is ``horizon_frac * T`` floored to the grid. At the full horizon
    the terminal value is the payoff itself (or ``closed_form`` at ``T`` when
    ``payoff`` is None). The stochastic integral uses left-point values.
    """
    if not 0 < horizon_frac <= 1:
        raise InvalidArgumentError("horizon_frac must lie in (0, 1]")
    grid = cfg.grid
    k = grid.index_floor(horizon_frac * grid.T)
    if k == 0:
        raise InvalidArgumentError("horizon is shorter than one grid step")
    times = grid.times
    f0 = float(closed_form.value(0.0, m.x0))

    def block(b):
        blk = simulate_block(m, cfg, b)
        x = blk.x
        if k == grid.n and payoff is not None:
            end = payoff_values(payoff, x, grid)
        else:
            end = closed_form.value(times[k], x[:, k])
        integral = np.zeros(len(blk))
        for i in range(k):
            xi = x[:, i]
            integral += m.sigma(xi) * closed_form.delta(times[i], xi) * blk.dW[:, i]
        return end - f0 - integral

    R = np.concatenate(map_blocks(block, cfg.n_blocks, threads))
    var = float(np.var(R, ddof=1)) if len(R) > 1 else 0.0
    return float(np.mean(R)), var
