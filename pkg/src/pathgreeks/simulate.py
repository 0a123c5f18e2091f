"""Euler simulation of the jump-diffusion with its tangent and weight integral.

Each simulated path carries three co-evolving series on the time grid:

* ``x``  the asset, ``dx = r x dt + sigma(x) dW + compensated jumps``;
* ``z``  the first-variation (tangent) process, ``z_0 = 1``;
* ``pi`` the running weight integral ``sum z_k / sigma(x_k) dW_k``.

Random numbers come from counter-based Philox streams keyed by
``(seed, block index)`` with a fixed block size, so a given path index always
sees the same draws no matter how many worker threads are used.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss

from .errors import (
    DiffusionDegeneracyError,
    InvalidArgumentError,
    ModelInvalidError,
    SimulationOverflowError,
)
from .pathspace import Path, TimeGrid, path_to_csv, write_text_atomic

BLOCK_SIZE = 8192
SIGMA_FLOOR = 1e-12
THREADS_ENV = "PATHGREEKS_THREADS"

JUMP_LAWS = ("none", "constant", "normal", "double_exponential")
_LAW_PARAMS = {
    "none": (),
    "constant": ("z0",),
    "normal": ("mu", "s"),
    "double_exponential": ("p", "eta_up", "eta_down"),
}


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson jump law: ``intensity`` jumps per year, sizes iid."""

    intensity: float = 0.0
    law: str = "none"
    params: Mapping[str, float] = field(default_factory=dict)
    mean_gamma: Callable | None = None
    mean_dgamma: Callable | None = None

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ModelInvalidError(f"jump intensity must be >= 0, got {self.intensity}")
        if self.law not in JUMP_LAWS:
            raise ModelInvalidError(f"unknown jump law {self.law!r}")
        expected = set(_LAW_PARAMS[self.law])
        if set(self.params) != expected:
            raise ModelInvalidError(
                f"jump law {self.law!r} takes parameters {sorted(expected)}, got {sorted(self.params)}"
            )
        if self.law == "none" and self.intensity > 0:
            raise ModelInvalidError("positive jump intensity needs a size law")
        p = self.params
        if self.law == "normal" and not p["s"] >= 0:
            raise ModelInvalidError("normal jump scale must be >= 0")
        if self.law == "double_exponential":
            if not (0 <= p["p"] <= 1 and p["eta_up"] > 0 and p["eta_down"] > 0):
                raise ModelInvalidError("double exponential needs 0<=p<=1 and positive rates")
        object.__setattr__(self, "params", dict(self.params))

    @property
    def active(self) -> bool:
        return self.intensity > 0 and self.law != "none"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p = self.params
        if self.law == "constant":
            return np.full(size, float(p["z0"]))
        if self.law == "normal":
            return p["mu"] + p["s"] * rng.standard_normal(size)
        if self.law == "double_exponential":
            up = rng.random(size) < p["p"]
            e = rng.standard_exponential(size)
            return np.where(up, e / p["eta_up"], -e / p["eta_down"])
        return np.zeros(size)

    def quadrature(self, nodes: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and probability weights for expectations over the size law."""
        p = self.params
        if self.law == "constant":
            return np.array([float(p["z0"])]), np.array([1.0])
        if self.law == "normal":
            y, w = hermegauss(nodes)
            return p["mu"] + p["s"] * y, w / math.sqrt(2 * math.pi)
        if self.law == "double_exponential":
            y, w = laggauss(nodes)
            z = np.concatenate((y / p["eta_up"], -y / p["eta_down"]))
            return z, np.concatenate((p["p"] * w, (1 - p["p"]) * w))
        return np.array([0.0]), np.array([0.0])

    def expect(self, fn: Callable, x, nodes: int = 64) -> np.ndarray:
        """``E[fn(Z, x)]`` over the size law, vectorized over ``x``."""
        z, w = self.quadrature(nodes)
        x = np.asarray(x, float)
        vals = fn(z.reshape((-1,) + (1,) * x.ndim), x[None, ...])
        return np.tensordot(w, np.broadcast_to(vals, (len(z),) + x.shape), axes=1)

    def mean_size(self) -> float:
        p = self.params
        if self.law == "constant":
            return float(p["z0"])
        if self.law == "normal":
            return float(p["mu"])
        if self.law == "double_exponential":
            return p["p"] / p["eta_up"] - (1 - p["p"]) / p["eta_down"]
        return 0.0


def _additive_gamma(z, x):
    return z + 0.0 * x


def _zero_dgamma(z, x):
    return 0.0 * (z + x)


@dataclass(frozen=True)
class ModelSpec:
    """Coefficients of ``dx = r x dt + sigma(x) dW + gamma(z, x-) dN~``.

    Coefficient callables must accept numpy arrays. ``vol`` is the scalar
    volatility parameter the diffusion is proportional to; finite-difference
    vega bumps it and the Black-Scholes fast path reads it.
    """

    x0: float
    sigma_fn: Callable
    dsigma_fn: Callable
    r: float = 0.0
    jump: JumpSpec = field(default_factory=JumpSpec)
    gamma_fn: Callable = _additive_gamma
    dgamma_fn: Callable = _zero_dgamma
    vol: float | None = None
    kind: str = "custom"

    def __post_init__(self):
        if not math.isfinite(self.x0):
            raise ModelInvalidError("x0 must be finite")
        if not math.isfinite(self.r):
            raise ModelInvalidError("r must be finite")

    def sigma(self, x):
        return self.sigma_fn(np.asarray(x, float))

    def dsigma(self, x):
        return self.dsigma_fn(np.asarray(x, float)) + 0.0 * np.asarray(x, float)

    def mean_gamma(self, x):
        if self.jump.mean_gamma is not None:
            return self.jump.mean_gamma(x) + 0.0 * np.asarray(x, float)
        return self.jump.expect(self.gamma_fn, x)

    def mean_dgamma(self, x):
        if self.jump.mean_dgamma is not None:
            return self.jump.mean_dgamma(x) + 0.0 * np.asarray(x, float)
        return self.jump.expect(self.dgamma_fn, x)

    def with_x0(self, x0: float) -> "ModelSpec":
        return replace(self, x0=float(x0))

    def with_sigma_scale(self, c: float) -> "ModelSpec":
        """Multiply the diffusion coefficient (and ``vol``) by ``c``."""
        s, ds = self.sigma_fn, self.dsigma_fn
        return replace(
            self,
            sigma_fn=lambda x: c * s(x),
            dsigma_fn=lambda x: c * ds(x),
            vol=None if self.vol is None else c * self.vol,
        )

    @property
    def is_black_scholes(self) -> bool:
        return self.kind == "bs_multiplicative" and not self.jump.active


def _jump_block(jump: JumpSpec, amplitude: str):
    if amplitude == "additive":
        m = jump.mean_size()
        return dict(
            gamma_fn=_additive_gamma,
            dgamma_fn=_zero_dgamma,
            jump=replace(jump, mean_gamma=lambda x: m + 0.0 * x, mean_dgamma=lambda x: 0.0 * x),
        )
    if amplitude == "proportional":
        m = jump.mean_size()
        return dict(
            gamma_fn=lambda z, x: z * x,
            dgamma_fn=lambda z, x: z + 0.0 * x,
            jump=replace(jump, mean_gamma=lambda x: m * x, mean_dgamma=lambda x: m + 0.0 * x),
        )
    raise ModelInvalidError(f"unknown jump amplitude {amplitude!r}")


def black_scholes(
    x0: float, sigma: float, r: float = 0.0, jump: JumpSpec | None = None, amplitude: str = "additive"
) -> ModelSpec:
    """``sigma(x) = sigma * x`` with optional compound-Poisson jumps.

    ``amplitude='additive'`` gives ``gamma(z, x) = z``; ``'proportional'``
    gives ``gamma(z, x) = z * x``.
    """
    return ModelSpec(
        x0=float(x0),
        sigma_fn=lambda x: sigma * x,
        dsigma_fn=lambda x: sigma + 0.0 * x,
        r=float(r),
        vol=float(sigma),
        kind="bs_multiplicative",
        **_jump_block(jump or JumpSpec(), amplitude),
    )


def additive_model(
    x0: float, sigma: float, r: float = 0.0, jump: JumpSpec | None = None, amplitude: str = "additive"
) -> ModelSpec:
    """``sigma(x) = sigma`` (the ``sqrt(v0)`` model)."""
    return ModelSpec(
        x0=float(x0),
        sigma_fn=lambda x: sigma + 0.0 * x,
        dsigma_fn=lambda x: 0.0 * x,
        r=float(r),
        vol=float(sigma),
        kind="additive_sqrt_v0",
        **_jump_block(jump or JumpSpec(), amplitude),
    )


def table_model(
    x0: float,
    xs: Sequence[float],
    sigmas: Sequence[float],
    r: float = 0.0,
    jump: JumpSpec | None = None,
    amplitude: str = "additive",
) -> ModelSpec:
    """Piecewise-linear local volatility through ``(xs, sigmas)``, flat outside."""
    xs = np.asarray(xs, float)
    sg = np.asarray(sigmas, float)
    if xs.ndim != 1 or xs.shape != sg.shape or len(xs) < 2 or np.any(np.diff(xs) <= 0):
        raise ModelInvalidError("sigma table needs >= 2 strictly increasing nodes")
    slopes = np.diff(sg) / np.diff(xs)

    def dsig(x):
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
        inside = (x >= xs[0]) & (x < xs[-1])
        return np.where(inside, slopes[i], 0.0)

    return ModelSpec(
        x0=float(x0),
        sigma_fn=lambda x: np.interp(x, xs, sg),
        dsigma_fn=dsig,
        r=float(r),
        vol=1.0,
        kind="custom_table",
        **_jump_block(jump or JumpSpec(), amplitude),
    )


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelReport:
    growth_ratio: float
    lipschitz_ratio: float
    min_sigma: float
    passed: bool


def validate_model(m: ModelSpec, probe: Sequence[float]) -> ModelReport:
    """Probe the linear-growth and Lipschitz conditions on sample points."""
    x = np.asarray(probe, float)
    if x.size == 0:
        raise InvalidArgumentError("probe must be nonempty")
    b = m.r * x
    s = np.asarray(m.sigma(x), float) + 0.0 * x
    lam = m.jump.intensity
    with np.errstate(over="ignore", invalid="ignore"):
        g2 = lam * m.jump.expect(lambda z, xx: m.gamma_fn(z, xx) ** 2, x) if m.jump.active else 0.0 * x
    values = np.concatenate((b, s, np.atleast_1d(g2)))
    if not np.all(np.isfinite(values)):
        raise ModelInvalidError("non-finite coefficient at a probe point")
    if np.any(s <= 0):
        bad = x[s <= 0][0]
        raise ModelInvalidError(f"diffusion coefficient not positive at x={bad}")
    growth = float(np.max((b**2 + s**2 + g2) / (1 + x**2)))
    lip = 0.0
    if x.size > 1:
        i, j = np.triu_indices(x.size, k=1)
        dx2 = (x[i] - x[j]) ** 2
        keep = dx2 > 0
        i, j, dx2 = i[keep], j[keep], dx2[keep]
        if i.size:
            dg2 = 0.0
            if m.jump.active:
                z, w = m.jump.quadrature()
                G = m.gamma_fn(z[:, None], x[None, :]) + 0.0 * x[None, :]
                dg2 = lam * (w @ (G[:, i] - G[:, j]) ** 2)
            ratio = ((b[i] - b[j]) ** 2 + (s[i] - s[j]) ** 2 + dg2) / dx2
            lip = float(np.max(ratio))
    passed = math.isfinite(growth) and math.isfinite(lip)
    if not passed:
        raise ModelInvalidError("growth or Lipschitz estimate is not finite")
    return ModelReport(growth, lip, float(np.min(s)), passed)


# -- simulation ---------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    grid: TimeGrid
    n_paths: int
    seed: int
    antithetic: bool = False
    scheme: str = "euler"
    zero_noise: bool = False  # test hook: dW = 0 and no jump arrivals

    def __post_init__(self):
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 1):
            raise InvalidArgumentError("n_paths must be a positive integer")
        if self.scheme != "euler":
            raise InvalidArgumentError(f"unsupported scheme {self.scheme!r}")
        if self.antithetic and self.n_paths % 2:
            raise InvalidArgumentError("antithetic sampling needs an even path count")
        if not isinstance(self.seed, (int, np.integer)):
            raise InvalidArgumentError("seed must be an integer")

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // BLOCK_SIZE)

    def block_range(self, b: int) -> tuple[int, int]:
        lo = b * BLOCK_SIZE
        return lo, min(self.n_paths, lo + BLOCK_SIZE)

    def with_paths(self, n_paths: int) -> "SimConfig":
        return replace(self, n_paths=n_paths)


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SimBlock:
    """Arrays for a contiguous run of paths ``[start, start + len)``."""

    grid: TimeGrid
    start: int
    x: np.ndarray  # (N, n+1)
    z: np.ndarray  # (N, n+1)
    pi: np.ndarray  # (N, n+1)
    dW: np.ndarray  # (N, n)
    jump_path: np.ndarray  # local path index of each jump
    jump_step: np.ndarray  # step i: jump lands at grid index i+1
    jump_size: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    @property
    def w_T(self) -> np.ndarray:
        return self.dW.sum(axis=1)


def _draw_noise(m: ModelSpec, cfg: SimConfig, rng, nb: int):
    n = cfg.grid.n
    sq = math.sqrt(cfg.grid.dt)
    if cfg.zero_noise:
        dW = np.zeros((nb, n))
    elif cfg.antithetic:
        g = rng.standard_normal((nb // 2, n)) * sq
        dW = np.empty((nb, n))
        dW[0::2] = g
        dW[1::2] = -g
    else:
        dW = rng.standard_normal((nb, n)) * sq
    empty = np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    if cfg.zero_noise or not m.jump.active:
        return dW, empty
    lam_dt = m.jump.intensity * cfg.grid.dt
    if cfg.antithetic:
        counts = np.repeat(rng.poisson(lam_dt, (nb // 2, n)), 2, axis=0)
    else:
        counts = rng.poisson(lam_dt, (nb, n))
    # one entry per jump, ordered by (step, path)
    steps, paths = np.nonzero(counts.T)
    reps = counts.T[steps, paths]
    steps, paths = np.repeat(steps, reps), np.repeat(paths, reps)
    if cfg.antithetic:
        # partner paths share their jump sizes
        lead = paths % 2 == 0
        sizes_lead = m.jump.sample(rng, int(lead.sum()))
        sizes = np.empty(len(paths))
        sizes[lead] = sizes_lead
        # within a step, jumps of path 2k+1 mirror those of path 2k in order
        sizes[~lead] = sizes_lead
    else:
        sizes = m.jump.sample(rng, len(paths))
    return dW, (paths, steps, sizes)


def simulate_block(m: ModelSpec, cfg: SimConfig, b: int) -> SimBlock:
    lo, hi = cfg.block_range(b)
    nb = hi - lo
    grid = cfg.grid
    n, dt = grid.n, grid.dt
    rng = block_rng(cfg.seed, b)
    dW, (jp, js, jz) = _draw_noise(m, cfg, rng, nb)
    # time-major buffers keep every step's slice contiguous
    dWt = np.ascontiguousarray(dW.T)
    x = np.empty((n + 1, nb))
    z = np.empty((n + 1, nb))
    pi = np.empty((n + 1, nb))
    x[0] = m.x0
    z[0] = 1.0
    pi[0] = 0.0
    lam = m.jump.intensity if m.jump.active else 0.0
    # jump entries are sorted by step; bounds[i]:bounds[i+1] belong to step i
    bounds = np.searchsorted(js, np.arange(n + 1))
    r = m.r
    buf = np.empty(nb)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(n):
            xi, zi, dw = x[i], z[i], dWt[i]
            s = m.sigma(xi)
            if not np.isfinite(s).all():
                k = int(np.argmin(np.isfinite(s)))
                raise SimulationOverflowError(f"non-finite state at step {i}", lo + k)
            if not (s >= SIGMA_FLOOR).all():
                k = int(np.argmax(~(s >= SIGMA_FLOOR)))
                raise DiffusionDegeneracyError(
                    f"sigma(x)={float(s[k])!r} below floor at step {i}", lo + k
                )
            xn, zn = x[i + 1], z[i + 1]
            np.multiply(s, dw, out=xn)
            xn += xi
            np.multiply(m.dsigma(xi), dw, out=buf)
            buf += 1.0
            np.multiply(zi, buf, out=zn)
            if r:
                xn += r * xi * dt
                zn += r * zi * dt
            if lam:
                xn -= lam * m.mean_gamma(xi) * dt
                zn -= lam * m.mean_dgamma(xi) * zi * dt
                a, e = bounds[i], bounds[i + 1]
                if e > a:
                    p, zz = jp[a:e], jz[a:e]
                    xn += np.bincount(p, m.gamma_fn(zz, xi[p]), minlength=nb)
                    zn += np.bincount(p, m.dgamma_fn(zz, xi[p]) * zi[p], minlength=nb)
            np.divide(zi, s, out=buf)
            buf *= dw
            np.add(pi[i], buf, out=pi[i + 1])
    x, z, pi = x.T, z.T, pi.T
    finite = np.isfinite(x).all(axis=1) & np.isfinite(z).all(axis=1) & np.isfinite(pi).all(axis=1)
    if not finite.all():
        k = int(np.argmin(finite))
        raise SimulationOverflowError("non-finite state during simulation", lo + k)
    return SimBlock(grid, lo, x, z, pi, dW, jp, js, jz)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    if threads < 1:
        raise InvalidArgumentError("thread count must be >= 1")
    return threads


def map_blocks(fn: Callable[[int], object], n_blocks: int, threads: int | None = None) -> list:
    """Apply ``fn`` to every block index; results come back in block order."""
    threads = resolve_threads(threads)
    if threads == 1 or n_blocks == 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n_blocks)))


@dataclass(frozen=True)
class SimOutput:
    x: Path
    z: Path
    dW: np.ndarray
    pi: np.ndarray
    jumps: list  # (grid index where the jump landed, size draw)


@dataclass
class SimBatch:
    """Whole-batch arrays; indexing yields per-path :class:`SimOutput`."""

    grid: TimeGrid
    x: np.ndarray
    z: np.ndarray
    pi: np.ndarray
    dW: np.ndarray
    jump_path: np.ndarray
    jump_step: np.ndarray
    jump_size: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, i: int) -> SimOutput:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        sel = self.jump_path == i
        steps, sizes = self.jump_step[sel], self.jump_size[sel]
        flags = np.zeros(self.grid.n + 1, bool)
        flags[steps + 1] = True
        return SimOutput(
            x=Path(self.grid, self.x[i], flags),
            z=Path(self.grid, self.z[i]),
            dW=self.dW[i].copy(),
            pi=self.pi[i].copy(),
            jumps=[(int(s) + 1, float(v)) for s, v in zip(steps, sizes)],
        )

    def __iter__(self) -> Iterator[SimOutput]:
        return (self[i] for i in range(len(self)))


def simulate_batch(m: ModelSpec, cfg: SimConfig, threads: int | None = None) -> SimBatch:
    blocks = map_blocks(lambda b: simulate_block(m, cfg, b), cfg.n_blocks, threads)
    return SimBatch(
        cfg.grid,
        np.concatenate([b.x for b in blocks]),
        np.concatenate([b.z for b in blocks]),
        np.concatenate([b.pi for b in blocks]),
        np.concatenate([b.dW for b in blocks]),
        np.concatenate([b.jump_path + b.start for b in blocks]),
        np.concatenate([b.jump_step for b in blocks]),
        np.concatenate([b.jump_size for b in blocks]),
    )


def dump_paths(batch: SimBatch, directory, limit: int = 100) -> list[str]:
    """Write up to ``limit`` asset paths as ``path_00000.csv`` files."""
    written = []
    for i in range(min(limit, len(batch))):
        name = os.path.join(os.fspath(directory), f"path_{i:05d}.csv")
        write_text_atomic(name, path_to_csv(batch[i].x))
        written.append(name)
    return written
