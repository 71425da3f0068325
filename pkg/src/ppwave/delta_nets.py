"""Strict delta nets generated by scaling a single mollifier."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, QuadratureError

QUAD_EPSABS = 1e-12


def _bump(x):
    x = np.asarray(x, float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, x, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe * safe)), 0.0)


def _cosine_squared(x):
    x = np.asarray(x, float)
    return np.where(np.abs(x) < 1.0, np.cos(0.5 * np.pi * x) ** 2, 0.0)


def _asymmetric_bump(x):
    # bump recentred at 0.3 with half-width 0.5: support [-0.2, 0.8]
    return _bump((np.asarray(x, float) - 0.3) / 0.5)


@dataclass(frozen=True)
class Mollifier:
    """A smooth function supported in [-1, 1] together with its mass and L1 norm."""

    rho: Callable[[np.ndarray], np.ndarray]
    mass: float
    l1: float
    name: str = "custom"
    support: tuple[float, float] = (-1.0, 1.0)

    @classmethod
    def from_function(cls, rho, name="custom", support=(-1.0, 1.0)) -> "Mollifier":
        lo, hi = support
        if lo < -1.0 or hi > 1.0:
            raise ConfigurationError(f"mollifier support {support} exceeds [-1, 1]", field="net")
        mass, _ = integrate.quad(lambda s: float(rho(s)), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
        l1, _ = integrate.quad(lambda s: abs(float(rho(s))), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
        if mass == 0.0:
            raise ConfigurationError("mollifier has zero mass", field="net")
        return cls(rho=rho, mass=mass, l1=l1, name=name, support=(lo, hi))


@dataclass(frozen=True)
class StrictDeltaNet:
    """``delta_eps(x) = scale * rho(x / eps) / (eps * mass)``.

    ``scale = 1`` gives the model (mass-normalized) net. ``C`` is the exact
    L1 bound, independent of eps because of the scaling construction.
    """

    mollifier: Mollifier
    scale: float = 1.0

    @property
    def C(self) -> float:
        return abs(self.scale) * self.mollifier.l1 / abs(self.mollifier.mass)

    @property
    def name(self) -> str:
        return self.mollifier.name

    def delta(self, eps: float, u):
        m = self.mollifier
        return (self.scale / (eps * m.mass)) * m.rho(np.asarray(u, float) / eps)

    def support(self, eps: float) -> tuple[float, float]:
        lo, hi = self.mollifier.support
        return lo * eps, hi * eps

    def scaled(self, factor: float) -> "StrictDeltaNet":
        return StrictDeltaNet(self.mollifier, self.scale * factor)


_MODEL_RHO = {
    "bump": (_bump, (-1.0, 1.0)),
    "cosine_squared": (_cosine_squared, (-1.0, 1.0)),
    "asymmetric_bump": (_asymmetric_bump, (-0.2, 0.8)),
}
_MODEL_CACHE: dict[str, Mollifier] = {}


def model_net(kind: str) -> StrictDeltaNet:
    if kind not in _MODEL_RHO:
        raise ConfigurationError(f"unknown net {kind!r}; expected one of {sorted(_MODEL_RHO)}", field="net")
    if kind not in _MODEL_CACHE:
        rho, support = _MODEL_RHO[kind]
        _MODEL_CACHE[kind] = Mollifier.from_function(rho, name=kind, support=support)
    return StrictDeltaNet(_MODEL_CACHE[kind])


@dataclass(frozen=True)
class EpsSchedule:
    values: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(e) for e in self.values)
        if not v:
            raise ConfigurationError("empty schedule", field="eps")
        if any(not np.isfinite(e) or e <= 0 for e in v):
            raise ConfigurationError("schedule values must be positive and finite", field="eps")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ConfigurationError("schedule must be strictly decreasing", field="eps")
        object.__setattr__(self, "values", v)

    @classmethod
    def geometric(cls, start: float = 0.1, ratio: float = 0.5, count: int = 4) -> "EpsSchedule":
        if not 0.0 < ratio < 1.0:
            raise ConfigurationError("ratio must lie in (0, 1) for a decreasing schedule", field="eps.ratio")
        if start <= 0.0:
            raise ConfigurationError("start must be positive", field="eps.start")
        if count < 1:
            raise ConfigurationError("count must be positive", field="eps.count")
        return cls(tuple(start * ratio**k for k in range(count)))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def below(self, eps0: float) -> tuple[float, ...]:
        return tuple(e for e in self.values if e <= eps0 * (1 + 1e-12))


DEFAULT_SCHEDULE = EpsSchedule((0.1, 0.05, 0.025, 0.0125))


@dataclass
class DeltaCheckReport:
    support_ok: bool
    eps: list[float]
    mass_errors: list[float]
    l1: list[float]
    l1_bound: float
    support_violations: int = 0
    tol: float = 1e-10
    rows: list = field(default_factory=list)

    @property
    def mass_ok(self) -> bool:
        return all(e < self.tol for e in self.mass_errors)

    @property
    def l1_ratio(self) -> float:
        return max(self.l1) / min(self.l1)


def _quad(func, lo, hi, eps):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, lo, hi, epsabs=QUAD_EPSABS, epsrel=0.0, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}", eps) from exc
    if not np.isfinite(val):
        raise QuadratureError("quadrature returned a non-finite value", eps)
    return val


def _outside_probes(eps: float, n: int = 64) -> np.ndarray:
    half = n // 2
    near = eps * np.linspace(1.0, 3.0, half // 2)
    far = np.geomspace(3.0 * eps, 10.0, half - half // 2)
    right = np.concatenate([near, far])
    return np.concatenate([-right, right])


def check_strict_delta(net: StrictDeltaNet, sched: Sequence[float] | EpsSchedule, tol: float = 1e-10) -> DeltaCheckReport:
    """Numerically verify the three strict-delta-net conditions along ``sched``.

    Support is probed at 64 points outside ``[-eps, eps]`` (including the
    endpoints), mass and L1 norm by adaptive Gauss-Kronrod quadrature.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive", field="tol")
    eps_list = [float(e) for e in sched]
    violations = 0
    mass_errors, l1s = [], []
    for eps in eps_list:
        probes = _outside_probes(eps)
        violations += int(np.count_nonzero(net.delta(eps, probes)))
        lo, hi = net.support(eps)
        mass = _quad(lambda s: float(net.delta(eps, s)), lo, hi, eps)
        l1 = _quad(lambda s: abs(float(net.delta(eps, s))), lo, hi, eps)
        mass_errors.append(abs(mass - 1.0))
        l1s.append(l1)
    return DeltaCheckReport(
        support_ok=violations == 0,
        eps=eps_list,
        mass_errors=mass_errors,
        l1=l1s,
        l1_bound=max(l1s),
        support_violations=violations,
        tol=tol,
    )
