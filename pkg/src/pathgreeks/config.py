"""Experiment configuration: a strict TOML schema mapped onto dataclasses.

Unknown keys anywhere are an error. The schema is documented in the README;
``ExperimentConfig.from_file`` is the single entry point.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError, PathGreeksError
from .pathspace import make_grid
from .payoffs import PayoffSpec
from .simulate import JumpSpec, ModelSpec, SimConfig, additive_model, black_scholes, table_model

JOBS = ("price", "greeks", "convergence", "classify", "residuals")
SIGMA_KINDS = ("bs_multiplicative", "additive_sqrt_v0", "custom_table")
JUMP_PARAM_KEYS = ("z0", "mu", "s", "p", "eta_up", "eta_down")


def _take(table: Mapping[str, Any], where: str, required=(), optional: Mapping[str, Any] = None) -> dict:
    """Check ``table`` against allowed keys and fill defaults."""
    optional = optional or {}
    if not isinstance(table, Mapping):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(table) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    missing = [k for k in required if k not in table]
    if missing:
        raise ConfigError(f"missing key(s) in [{where}]: {', '.join(missing)}")
    out = dict(optional)
    out.update(table)
    return out


def _num(v, name: str, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{name} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{name} must be >= 0")
    return v


def _int(v, name: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}")
    return v


def _choice(v, name: str, options) -> str:
    if v not in options:
        raise ConfigError(f"{name} must be one of {', '.join(options)}; got {v!r}")
    return v


@dataclass(frozen=True)
class RunSection:
    T: float
    steps: int
    paths: int
    seed: int
    antithetic: bool = False


@dataclass(frozen=True)
class GreeksSection:
    fd_bump: float | None = None  # default 1% of x0
    vega_bump: float | None = None  # default 1% of the vol parameter
    direction: str = "relative"
    direction_c: float | None = None


@dataclass(frozen=True)
class ConvergenceSection:
    sizes: tuple = (1_000, 10_000, 100_000, 1_000_000)
    estimator: str = "delta"


@dataclass(frozen=True)
class ClassifySection:
    functional: str = "payoff"
    sample: int = 20
    times: tuple = (0.25, 0.5, 0.75)  # fractions of T, floored to the grid
    tol: float = 1e-2


@dataclass(frozen=True)
class ResidualsSection:
    grid: int = 400
    t_max_frac: float = 0.9
    x_min: float = 60.0
    x_max: float = 160.0
    mart_steps: tuple = (256, 1024)
    mart_paths: int = 10_000
    horizon_frac: float = 0.9
    dump_csv: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    raw: dict
    payoff: PayoffSpec | None
    run: RunSection
    job: str | None = None
    output_dir: str | None = None
    greeks: GreeksSection = field(default_factory=GreeksSection)
    convergence: ConvergenceSection = field(default_factory=ConvergenceSection)
    classify: ClassifySection = field(default_factory=ClassifySection)
    residuals: ResidualsSection = field(default_factory=ResidualsSection)

    def sim_config(self, paths: int | None = None, steps: int | None = None) -> SimConfig:
        r = self.run
        return SimConfig(
            make_grid(r.T, steps or r.steps), paths or r.paths, r.seed, antithetic=r.antithetic
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        top = _take(
            data, "top level", required=("model", "run"),
            optional={"job": None, "output_dir": None, "payoff": None, "greeks": {},
                      "convergence": {}, "classify": {}, "residuals": {}},
        )
        job = top["job"]
        if job is not None:
            _choice(job, "job", JOBS)
        out_dir = top["output_dir"]
        if out_dir is not None and not isinstance(out_dir, str):
            raise ConfigError("output_dir must be a string")
        try:
            model = _model(top["model"])
            payoff = _payoff(top["payoff"]) if top["payoff"] is not None else None
            run = _run(top["run"])
        except ConfigError:
            raise
        except PathGreeksError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            model=model,
            raw=dict(data),
            payoff=payoff,
            run=run,
            job=job,
            output_dir=out_dir,
            greeks=_greeks(top["greeks"]),
            convergence=_convergence(top["convergence"]),
            classify=_classify(top["classify"]),
            residuals=_residuals(top["residuals"]),
        )


def _jump(t: Mapping) -> tuple[JumpSpec, str]:
    d = _take(t, "model.jump", required=("intensity", "law"),
              optional={"amplitude": "additive", **{k: None for k in JUMP_PARAM_KEYS}})
    params = {k: _num(d[k], f"model.jump.{k}") for k in JUMP_PARAM_KEYS if d[k] is not None}
    amp = _choice(d["amplitude"], "model.jump.amplitude", ("additive", "proportional"))
    return JumpSpec(_num(d["intensity"], "model.jump.intensity", nonneg=True), d["law"], params), amp


def _model(t: Mapping) -> ModelSpec:
    d = _take(t, "model", required=("x0", "sigma_kind"),
              optional={"r": 0.0, "sigma": None, "table_x": None, "table_sigma": None, "jump": None})
    kind = _choice(d["sigma_kind"], "model.sigma_kind", SIGMA_KINDS)
    x0 = _num(d["x0"], "model.x0")
    r = _num(d["r"], "model.r")
    jump, amp = _jump(d["jump"]) if d["jump"] is not None else (None, "additive")
    if kind == "custom_table":
        if d["table_x"] is None or d["table_sigma"] is None:
            raise ConfigError("custom_table needs model.table_x and model.table_sigma")
        if d["sigma"] is not None:
            raise ConfigError("model.sigma is not used with custom_table")
        xs = [_num(v, "model.table_x") for v in d["table_x"]]
        ss = [_num(v, "model.table_sigma", positive=True) for v in d["table_sigma"]]
        return table_model(x0, xs, ss, r=r, jump=jump, amplitude=amp)
    if d["sigma"] is None:
        raise ConfigError(f"{kind} needs model.sigma")
    if d["table_x"] is not None or d["table_sigma"] is not None:
        raise ConfigError("model.table_x/table_sigma only apply to custom_table")
    sigma = _num(d["sigma"], "model.sigma", positive=True)
    build = black_scholes if kind == "bs_multiplicative" else additive_model
    return build(x0, sigma, r=r, jump=jump, amplitude=amp)


def _payoff(t: Mapping) -> PayoffSpec:
    d = _take(t, "payoff", required=("kind",), optional={"strike": None})
    strike = None if d["strike"] is None else _num(d["strike"], "payoff.strike")
    return PayoffSpec(d["kind"], strike)


def _run(t: Mapping) -> RunSection:
    d = _take(t, "run", required=("T", "steps", "paths", "seed"), optional={"antithetic": False})
    if not isinstance(d["antithetic"], bool):
        raise ConfigError("run.antithetic must be true or false")
    seed = d["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("run.seed must be an explicit integer")
    run = RunSection(
        _num(d["T"], "run.T", positive=True),
        _int(d["steps"], "run.steps"),
        _int(d["paths"], "run.paths", minimum=2),
        seed,
        d["antithetic"],
    )
    if run.antithetic and run.paths % 2:
        raise ConfigError("run.paths must be even with antithetic sampling")
    return run


def _greeks(t: Mapping) -> GreeksSection:
    d = _take(t, "greeks", optional={"fd_bump": None, "vega_bump": None,
                                     "direction": "relative", "direction_c": None})
    direction = _choice(d["direction"], "greeks.direction", ("relative", "constant"))
    c = d["direction_c"]
    if direction == "constant" and c is None:
        raise ConfigError("constant vega direction needs greeks.direction_c")
    return GreeksSection(
        None if d["fd_bump"] is None else _num(d["fd_bump"], "greeks.fd_bump", positive=True),
        None if d["vega_bump"] is None else _num(d["vega_bump"], "greeks.vega_bump", positive=True),
        direction,
        None if c is None else _num(c, "greeks.direction_c"),
    )


def _convergence(t: Mapping) -> ConvergenceSection:
    d = _take(t, "convergence", optional={"sizes": list(ConvergenceSection.sizes), "estimator": "delta"})
    sizes = tuple(_int(v, "convergence.sizes", minimum=2) for v in d["sizes"])
    if len(sizes) < 2 or list(sizes) != sorted(set(sizes)):
        raise ConfigError("convergence.sizes needs >= 2 strictly increasing entries")
    est = _choice(d["estimator"], "convergence.estimator", ("price", "delta", "gamma", "vega"))
    return ConvergenceSection(sizes, est)


def _classify(t: Mapping) -> ClassifySection:
    d = _take(t, "classify", optional={"functional": "payoff", "sample": 20,
                                       "times": list(ClassifySection.times), "tol": 1e-2})
    fn = _choice(d["functional"], "classify.functional",
                 ("payoff", "current_value", "running_integral"))
    times = tuple(_num(v, "classify.times") for v in d["times"])
    if not times or not all(0 <= v < 1 for v in times):
        raise ConfigError("classify.times must be nonempty fractions of T in [0, 1)")
    return ClassifySection(fn, _int(d["sample"], "classify.sample"), times,
                           _num(d["tol"], "classify.tol", positive=True))


def _residuals(t: Mapping) -> ResidualsSection:
    dflt = ResidualsSection()
    d = _take(t, "residuals", optional={
        "grid": dflt.grid, "t_max_frac": dflt.t_max_frac, "x_min": dflt.x_min, "x_max": dflt.x_max,
        "mart_steps": list(dflt.mart_steps), "mart_paths": dflt.mart_paths,
        "horizon_frac": dflt.horizon_frac, "dump_csv": dflt.dump_csv,
    })
    steps = tuple(_int(v, "residuals.mart_steps") for v in d["mart_steps"])
    if len(steps) != 2:
        raise ConfigError("residuals.mart_steps needs exactly two step counts")
    x_min = _num(d["x_min"], "residuals.x_min", positive=True)
    x_max = _num(d["x_max"], "residuals.x_max", positive=True)
    if x_max <= x_min:
        raise ConfigError("residuals.x_max must exceed x_min")
    tmax = _num(d["t_max_frac"], "residuals.t_max_frac", positive=True)
    hf = _num(d["horizon_frac"], "residuals.horizon_frac", positive=True)
    if tmax >= 1 or hf > 1:
        raise ConfigError("residuals.t_max_frac must be < 1 and horizon_frac <= 1")
    if not isinstance(d["dump_csv"], bool):
        raise ConfigError("residuals.dump_csv must be true or false")
    return ResidualsSection(_int(d["grid"], "residuals.grid", minimum=3), tmax, x_min, x_max,
                            steps, _int(d["mart_paths"], "residuals.mart_paths", minimum=2),
                            hf, d["dump_csv"])
