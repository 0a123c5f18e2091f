"""Finite-difference functional derivatives on discrete paths.

Horizontal derivative: extend the stopped path in time and forward-difference.
Vertical derivative: bump the stopped path from ``t`` onward and difference.
The Lie bracket nests the two in both orders; its size separates functionals
that only see the current value from genuinely path-dependent ones.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .pathspace import Path, stop_path, vertical_perturb


@dataclass(frozen=True)
class FunctionalHandle:
    """A non-anticipative functional ``F(t, p)``.

    ``eval`` must only look at ``p`` on ``[0, t]``; see
    :func:`check_non_anticipative` for a spot check.
    """

    eval: Callable[[float, Path], float]
    label: str = "F"

    def __call__(self, t: float, p: Path) -> float:
        return float(self.eval(t, p))


@dataclass(frozen=True)
class DerivativeConfig:
    h_time: float | None = None  # None -> one grid step
    h_space: float | None = None  # None -> 1e-4 * max(1, |p(t)|)
    scheme: str = "central"

    def __post_init__(self):
        if self.h_time is not None and not self.h_time > 0:
            raise InvalidArgumentError("h_time must be positive")
        if self.h_space is not None and not self.h_space > 0:
            raise InvalidArgumentError("h_space must be positive")
        if self.scheme not in ("central", "forward"):
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")

    def time_step(self, p: Path) -> float:
        if self.h_time is None:
            return p.grid.dt
        ratio = self.h_time / p.grid.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise InvalidArgumentError("h_time must be a positive multiple of the grid spacing")
        return round(ratio) * p.grid.dt

    def space_step(self, p: Path, t: float) -> float:
        if self.h_space is not None:
            return self.h_space
        return 1e-4 * max(1.0, abs(p(t)))


DEFAULT_CONFIG = DerivativeConfig()


def horizontal_derivative(
    F: FunctionalHandle, p: Path, t: float, cfg: DerivativeConfig = DEFAULT_CONFIG
) -> float:
    k = p.grid.index_exact(t)
    t = p.grid.time(k)
    h = cfg.time_step(p)
    if t + h > p.grid.T * (1 + 1e-12):
        raise InvalidArgumentError(f"t + h = {t + h} runs past the horizon {p.grid.T}")
    stopped = stop_path(p, t)
    return (F(t + h, stopped) - F(t, stopped)) / h


def vertical_derivative(
    F: FunctionalHandle,
    p: Path,
    t: float,
    order: int = 1,
    cfg: DerivativeConfig = DEFAULT_CONFIG,
) -> float:
    if order not in (1, 2):
        raise InvalidArgumentError("vertical derivative order must be 1 or 2")
    k = p.grid.index_exact(t)
    t = p.grid.time(k)
    h = cfg.space_step(p, t)
    base = stop_path(p, t)
    up = F(t, vertical_perturb(base, t, h))
    if order == 1 and cfg.scheme == "forward":
        return (up - F(t, base)) / h
    down = F(t, vertical_perturb(base, t, -h))
    if order == 1:
        return (up - down) / (2 * h)
    return (up - 2 * F(t, base) + down) / (h * h)


def horizontal_of(F: FunctionalHandle, cfg: DerivativeConfig = DEFAULT_CONFIG) -> FunctionalHandle:
    """The functional ``(t, p) -> DF(t, p)``."""
    return FunctionalHandle(lambda t, p: horizontal_derivative(F, p, t, cfg), f"D({F.label})")


def vertical_of(F: FunctionalHandle, cfg: DerivativeConfig = DEFAULT_CONFIG) -> FunctionalHandle:
    """The functional ``(t, p) -> grad F(t, p)`` (first order)."""
    return FunctionalHandle(lambda t, p: vertical_derivative(F, p, t, 1, cfg), f"V({F.label})")


def lie_bracket(F: FunctionalHandle, p: Path, t: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> float:
    """``grad(DF) - D(grad F)`` at ``(t, p)``."""
    p_t = stop_path(p, t)
    vd = vertical_derivative(horizontal_of(F, cfg), p_t, t, 1, cfg)
    # the inner vertical step is frozen at p(t) so both nestings share it
    inner = DerivativeConfig(cfg.h_time, cfg.space_step(p, t), cfg.scheme)
    dv = horizontal_derivative(vertical_of(F, inner), p_t, t, cfg)
    return vd - dv


class PathDependence(str, enum.Enum):
    LOCALLY_WEAK = "LocallyWeak"
    STRONG = "Strong"


@dataclass(frozen=True)
class ClassificationReport:
    functional: str
    times: list
    bracket_values: list
    verdict: PathDependence

    def to_json(self) -> str:
        return json.dumps(
            {
                "functional": self.functional,
                "times": [float(t) for t in self.times],
                "bracket_values": [float(b) for b in self.bracket_values],
                "verdict": self.verdict.value,
            },
            indent=2,
        )


def classify_path_dependence(
    F: FunctionalHandle,
    sample: Sequence[Path],
    times: Sequence[float],
    tol: float = 1e-2,
    cfg: DerivativeConfig = DEFAULT_CONFIG,
) -> ClassificationReport:
    if len(sample) == 0 or len(times) == 0:
        raise InvalidArgumentError("classification needs at least one path and one time")
    brackets = [lie_bracket(F, p, t, cfg) for p in sample for t in times]
    verdict = (
        PathDependence.LOCALLY_WEAK
        if all(math.isfinite(b) and abs(b) <= tol for b in brackets)
        else PathDependence.STRONG
    )
    return ClassificationReport(F.label, list(times), brackets, verdict)


def check_non_anticipative(
    F: FunctionalHandle, pairs: Sequence[tuple[float, Path]], atol: float = 0.0
) -> bool:
    return all(abs(F(t, p) - F(t, stop_path(p, t))) <= atol for t, p in pairs)


# -- reference functionals --------------------------------------------------

def current_value() -> FunctionalHandle:
    return FunctionalHandle(lambda t, p: p(t), "current_value")


def running_integral() -> FunctionalHandle:
    """Left-endpoint integral of the path over ``[0, t]``.

    Left weights make a bump at ``t`` contribute nothing, so the vertical
    derivative is exactly zero, as for the continuous-time integral.
    """

    def ev(t, p):
        k = p.grid.index_floor(t)
        return float(np.sum(p.values[:k]) * p.grid.dt)

    return FunctionalHandle(ev, "running_integral")


def trapezoid_integral() -> FunctionalHandle:
    """Trapezoid version of :func:`running_integral`, kept for comparison.

    Its vertical derivative is ``dt / 2`` rather than zero.
    """

    def ev(t, p):
        k = p.grid.index_floor(t)
        v = p.values[: k + 1]
        return float((np.sum(v) - 0.5 * (v[0] + v[-1])) * p.grid.dt) if k else 0.0

    return FunctionalHandle(ev, "trapezoid_integral")


def smooth_function(phi: Callable[[float, float], float], label: str = "phi") -> FunctionalHandle:
    """``F(t, p) = phi(t, p(t))``."""
    return FunctionalHandle(lambda t, p: phi(t, p(t)), label)


def linear_combination(terms: Sequence[tuple[float, FunctionalHandle]]) -> FunctionalHandle:
    label = " + ".join(f"{a:g}*{F.label}" for a, F in terms)
    return FunctionalHandle(lambda t, p: sum(a * F(t, p) for a, F in terms), label)
