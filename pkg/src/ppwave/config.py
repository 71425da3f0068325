"""Experiment configuration: a nested JSON document with validation by field path."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .delta_nets import EpsSchedule, _MODEL_RHO
from .errors import ConfigurationError
from .geodesics import MIN_STEPS_PER_EPS
from .profiles import BUILTIN_PROFILES


def _tuple(v):
    return tuple(_tuple(x) for x in v) if isinstance(v, (list, tuple)) else v


@dataclass(frozen=True)
class EpsConfig:
    start: float = 0.1
    ratio: float = 0.5
    count: int = 4

    def schedule(self) -> EpsSchedule:
        return EpsSchedule.geometric(self.start, self.ratio, self.count)


@dataclass(frozen=True)
class GeodesicConfig:
    x0: tuple = (1.0, 1.0)
    xdot0: tuple = (0.0, 0.0)
    v0: float = 0.0
    vdot0: float = 0.0
    u_end: float = 1.0


@dataclass(frozen=True)
class TransformConfig:
    points: tuple = ((1.0, 2.0, 3.0, 0.0),)
    jacobian: bool = True
    random_points: int = 0
    random_box: tuple = ((-0.5, 0.5),) * 4


@dataclass(frozen=True)
class InjectivityConfig:
    K: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    delta: float = 0.5
    b_cap: Optional[float] = None
    alpha_search: tuple = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
    n_grid: int = 25
    collision_U: Optional[float] = None


@dataclass(frozen=True)
class InversionConfig:
    p: tuple = (0.0, 1.0, 1.0, 0.0)
    R: tuple = ((0.0, 2.0), (0.0, 2.0))
    beta: float = 1.0
    I: tuple = (-4.0, 4.0)
    n_random: int = 200


@dataclass(frozen=True)
class Tolerances:
    delta_mass: float = 1e-10
    l1_ratio: float = 1e-8
    jacobian_rel: float = 1e-4
    convergence_final: float = 1e-2
    monotone_slack: float = 0.1
    round_trip: float = 1e-6
    composition: float = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "quadratic_saddle"
    net: str = "bump"
    eps: EpsConfig = field(default_factory=EpsConfig)
    steps_per_eps: int = 64
    region: tuple = ((-1.0, 1.0),) * 4
    u_gap: float = 0.1
    grid_n: int = 33
    geodesic: GeodesicConfig = field(default_factory=GeodesicConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    injectivity: InjectivityConfig = field(default_factory=InjectivityConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    pullback_p: tuple = (0.5, 0.3, 0.4, 0.0)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def schedule(self) -> EpsSchedule:
        return self.eps.schedule()


_SECTIONS = {
    "eps": EpsConfig, "geodesic": GeodesicConfig, "transform": TransformConfig,
    "injectivity": InjectivityConfig, "inversion": InversionConfig, "tolerances": Tolerances,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", field=path or None)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigurationError("unknown key", field=where)
    kwargs = {}
    for k, v in data.items():
        sub = f"{path}.{k}" if path else k
        if k in _SECTIONS and cls is ExperimentConfig:
            kwargs[k] = _build(_SECTIONS[k], v, sub)
        else:
            kwargs[k] = _tuple(v)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc), field=path or None) from None


def _box(v, n, path):
    try:
        ok = len(v) == n and all(len(s) == 2 and float(s[0]) <= float(s[1]) for s in v)
    except TypeError:
        ok = False
    if not ok:
        raise ConfigurationError(f"expected {n} intervals [lo, hi] with lo <= hi", field=path)


def _positive(v, path, allow_zero=False):
    if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigurationError("must be a positive finite number", field=path)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.profile not in BUILTIN_PROFILES:
        raise ConfigurationError(f"unknown profile {cfg.profile!r}", field="profile")
    if cfg.net not in _MODEL_RHO:
        raise ConfigurationError(f"unknown net {cfg.net!r}", field="net")
    e = cfg.eps
    if not (isinstance(e.ratio, (int, float)) and 0.0 < e.ratio < 1.0):
        raise ConfigurationError("ratio must lie in (0, 1) so that the schedule decreases", field="eps.ratio")
    _positive(e.start, "eps.start")
    if not isinstance(e.count, int) or e.count < 3:
        raise ConfigurationError("at least 3 schedule points are required", field="eps.count")
    if not isinstance(cfg.steps_per_eps, int) or cfg.steps_per_eps < MIN_STEPS_PER_EPS:
        raise ConfigurationError(f"must be an integer >= {MIN_STEPS_PER_EPS}", field="steps_per_eps")
    _box(cfg.region, 4, "region")
    _positive(cfg.u_gap, "u_gap")
    if not isinstance(cfg.grid_n, int) or cfg.grid_n < 3:
        raise ConfigurationError("must be an integer >= 3", field="grid_n")
    g = cfg.geodesic
    if len(g.x0) != 2 or len(g.xdot0) != 2:
        raise ConfigurationError("x0 and xdot0 need two components", field="geodesic.x0")
    if not g.u_end > e.start:
        raise ConfigurationError("u_end must exceed the largest eps", field="geodesic.u_end")
    for k, pt in enumerate(cfg.transform.points):
        if len(pt) != 4:
            raise ConfigurationError("points need 4 components (U, X, Y, V)", field=f"transform.points[{k}]")
    _box(cfg.transform.random_box, 4, "transform.random_box")
    inj = cfg.injectivity
    _box(inj.K, 2, "injectivity.K")
    if not 0.0 < inj.delta < 1.0:
        raise ConfigurationError("must lie in (0, 1)", field="injectivity.delta")
    inv = cfg.inversion
    if len(inv.p) != 4 or inv.p[0] != 0:
        raise ConfigurationError("anchor must be a point (0, X, Y, V)", field="inversion.p")
    _box(inv.R, 2, "inversion.R")
    _positive(inv.beta, "inversion.beta")
    _box((inv.I,), 1, "inversion.I")
    for f in fields(cfg.tolerances):
        _positive(getattr(cfg.tolerances, f.name), f"tolerances.{f.name}")
    if len(cfg.pullback_p) != 4:
        raise ConfigurationError("need 4 components", field="pullback_p")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigurationError("must be a non-negative integer", field="seed")
    return cfg


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    return validate(_build(ExperimentConfig, data, ""))


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return validate(ExperimentConfig())
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", field="config") from None
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", field="config") from None
    return config_from_dict(data)
