"""Discrete paths on uniform grids and the basic path operators.

A :class:`Path` is the grid stand-in for a cadlag trajectory: asset values at
``t_i = i * T / n`` plus a flag per grid point marking where a jump landed.
Operators never mutate their inputs; arrays are frozen on construction.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# relative slack used when snapping times onto the grid
_SNAP_EPS = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise InvalidArgumentError(f"grid needs n >= 1 steps, got {self.n!r}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidArgumentError(f"grid horizon must be positive, got {self.T!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n + 1) * self.dt
        t[-1] = self.T
        return t

    def index_floor(self, t: float) -> int:
        """Index of the last grid point at or below ``t``."""
        if not (-_SNAP_EPS * self.T <= t <= self.T * (1 + _SNAP_EPS)):
            raise InvalidArgumentError(f"time {t} outside [0, {self.T}]")
        return min(self.n, int(math.floor(t / self.dt + _SNAP_EPS * self.n)))

    def index_exact(self, t: float) -> int:
        """Index of ``t`` when it sits on the grid; raises otherwise."""
        k = self.index_floor(t)
        if abs(k * self.dt - t) > _SNAP_EPS * max(1.0, self.T):
            raise InvalidArgumentError(f"time {t} is not a grid point (dt={self.dt})")
        return k

    def time(self, k: int) -> float:
        return self.T if k == self.n else k * self.dt


def make_grid(T: float, n: int) -> TimeGrid:
    return TimeGrid(float(T), n)


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Path:
    grid: TimeGrid
    values: np.ndarray
    jump_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        values = _frozen(self.values, float)
        if values.shape != (self.grid.n + 1,):
            raise InvalidArgumentError(
                f"path needs {self.grid.n + 1} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("path values must be finite")
        flags = self.jump_flags
        flags = np.zeros(values.shape, bool) if flags is None else _frozen(flags, bool)
        if flags.shape != values.shape:
            raise InvalidArgumentError("jump_flags must match values in length")
        flags.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jump_flags", flags)

    def __call__(self, t: float) -> float:
        return float(self.values[self.grid.index_floor(t)])

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.jump_flags, other.jump_flags)
        )

    __hash__ = None


def stop_path(p: Path, t: float) -> Path:
    """Freeze ``p`` at its value at ``t`` (snapped down to the grid)."""
    k = p.grid.index_floor(t)
    values = p.values.copy()
    values[k + 1:] = values[k]
    flags = p.jump_flags.copy()
    flags[k + 1:] = False
    return Path(p.grid, values, flags)


def vertical_perturb(p: Path, t: float, h: float) -> Path:
    """Shift the path by ``h`` on ``[t, T]``; ``t`` must be a grid point."""
    k = p.grid.index_exact(t)
    values = p.values.copy()
    values[k:] += h
    return Path(p.grid, values, p.jump_flags)


@dataclass(frozen=True)
class QVSeries:
    grid: TimeGrid
    cumulative: np.ndarray
    continuous_part: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])


def quadratic_variation(p: Path) -> QVSeries:
    """Realized quadratic variation along the path's own grid.

    ``continuous_part`` drops the squared increments that end on a flagged
    jump point, so ``cumulative - continuous_part`` is the jump contribution.
    """
    sq = np.diff(p.values) ** 2
    cont = np.where(p.jump_flags[1:], 0.0, sq)
    cumulative = np.concatenate(([0.0], np.cumsum(sq)))
    continuous = np.concatenate(([0.0], np.cumsum(cont)))
    return QVSeries(p.grid, _frozen(cumulative, float), _frozen(continuous, float))


def realized_qv(values: np.ndarray) -> np.ndarray:
    """Total squared-increment sum along the last axis, for batches of paths."""
    return np.sum(np.diff(values, axis=-1) ** 2, axis=-1)


# -- CSV -------------------------------------------------------------------

def path_to_csv(p: Path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "value", "jump"])
    for t, v, j in zip(p.grid.times, p.values, p.jump_flags):
        w.writerow([f"{t:.17g}", f"{v:.17g}", int(j)])
    return buf.getvalue()


def path_from_csv(text: str) -> Path:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", "value", "jump"]:
        raise InvalidArgumentError("path CSV must start with header t,value,jump")
    body = rows[1:]
    if len(body) < 2:
        raise InvalidArgumentError("path CSV needs at least two grid points")
    times = np.array([float(r[0]) for r in body])
    grid = make_grid(times[-1], len(body) - 1)
    if not np.allclose(times, grid.times, rtol=0, atol=1e-12 * max(1.0, grid.T)):
        raise InvalidArgumentError("path CSV times are not a uniform grid from 0")
    values = [float(r[1]) for r in body]
    flags = [bool(int(r[2])) for r in body]
    return Path(grid, values, flags)


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
