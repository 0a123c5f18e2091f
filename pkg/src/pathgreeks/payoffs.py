"""Payoff functionals on full-horizon paths."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .funcalc import FunctionalHandle
from .pathspace import Path, TimeGrid, stop_path

PAYOFF_KINDS = ("digital_call", "vanilla_call", "asian_arith_call", "qv_contract")
BOUNDED_KINDS = ("digital_call",)


@dataclass(frozen=True)
class PayoffSpec:
    kind: str
    strike: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise InvalidArgumentError(f"unknown payoff kind {self.kind!r}")
        if self.kind != "qv_contract":
            if self.strike is None:
                raise InvalidArgumentError(f"{self.kind} needs a strike")
            if not (math.isfinite(self.strike) and self.strike >= 0):
                raise InvalidArgumentError(f"strike must be finite and >= 0, got {self.strike}")
        if not self.label:
            tag = self.kind if self.strike is None else f"{self.kind}(K={self.strike:g})"
            object.__setattr__(self, "label", tag)

    @property
    def bounded(self) -> bool:
        return self.kind in BOUNDED_KINDS

    @property
    def terminal_only(self) -> bool:
        return self.kind in ("digital_call", "vanilla_call")


def payoff_values(spec: PayoffSpec, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Vectorized payoff over the last axis of ``values`` (paths x grid points)."""
    values = np.asarray(values, float)
    K = spec.strike
    if spec.kind == "digital_call":
        return (values[..., -1] > K).astype(float)
    if spec.kind == "vanilla_call":
        return np.maximum(values[..., -1] - K, 0.0)
    if spec.kind == "asian_arith_call":
        total = values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1])
        return np.maximum(total * grid.dt / grid.T - K, 0.0)
    return np.sum(np.diff(values, axis=-1) ** 2, axis=-1)


def evaluate_payoff(spec: PayoffSpec, p: Path) -> float:
    return float(payoff_values(spec, p.values, p.grid))


def as_functional(spec: PayoffSpec) -> FunctionalHandle:
    """``F(t, p) = g(p stopped at t)``, the payoff read on the stopped path."""
    return FunctionalHandle(lambda t, p: evaluate_payoff(spec, stop_path(p, t)), spec.label)
