"""Wave profiles f(X, Y) and the two metric forms of an impulsive pp-wave.

All profile callables are vectorized: ``X`` and ``Y`` broadcast against each
other and derivative arrays carry the extra index axes last, i.e. ``grad``
returns shape ``(..., 2)``, ``hess`` ``(..., 2, 2)`` and ``third``
``(..., 2, 2, 2)``.

Coordinates are ordered ``(U, X, Y, V)`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray

COORDS = ("U", "X", "Y", "V")


class SpacetimePoint(NamedTuple):
    U: float
    X: float
    Y: float
    V: float


@dataclass(frozen=True)
class WaveProfile:
    """A smooth profile with analytic derivatives through order three.

    ``envelope`` optionally gives the closed form of
    ``r -> sup_{|z| <= r} ||Hess f(z) / 2||`` as a function of ``(X, Y)``
    (with ``r = |(X, Y)|``); it is used by the injectivity module when present.
    """

    eval: Callable[[Array, Array], Array]
    grad: Callable[[Array, Array], Array]
    hess: Callable[[Array, Array], Array]
    third: Callable[[Array, Array], Array]
    name: str = "custom"
    envelope: Optional[Callable[[Array, Array], Array]] = None

    def laplacian(self, X, Y):
        h = self.hess(X, Y)
        return h[..., 0, 0] + h[..., 1, 1]


def _stack2(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    return np.stack([a, b], axis=-1)


def _diag2(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.zeros(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def _diag3(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.zeros(a.shape + (2, 2, 2))
    out[..., 0, 0, 0] = a
    out[..., 1, 1, 1] = b
    return out


def _quadratic_saddle() -> WaveProfile:
    return WaveProfile(
        eval=lambda X, Y: np.asarray(X, float) ** 2 - np.asarray(Y, float) ** 2,
        grad=lambda X, Y: _stack2(2.0 * np.asarray(X, float), -2.0 * np.asarray(Y, float)),
        hess=lambda X, Y: _diag2(np.full(np.broadcast(X, Y).shape, 2.0),
                                 np.full(np.broadcast(X, Y).shape, -2.0)),
        third=lambda X, Y: np.zeros(np.broadcast(X, Y).shape + (2, 2, 2)),
        name="quadratic_saddle",
        envelope=lambda X, Y: np.ones(np.broadcast(X, Y).shape),
    )


def _quartic_negative() -> WaveProfile:
    def f(X, Y):
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        return -0.5 * (X**4 + Y**4)

    return WaveProfile(
        eval=f,
        grad=lambda X, Y: _stack2(-2.0 * np.asarray(X, float) ** 3, -2.0 * np.asarray(Y, float) ** 3),
        hess=lambda X, Y: _diag2(-6.0 * np.asarray(X, float) ** 2, -6.0 * np.asarray(Y, float) ** 2),
        third=lambda X, Y: _diag3(-12.0 * np.asarray(X, float), -12.0 * np.asarray(Y, float)),
        name="quartic_negative",
        # ||diag(-3X^2, -3Y^2)|| = 3 max(X^2, Y^2); its sup over the disc of radius r is 3 r^2
        envelope=lambda X, Y: 3.0 * (np.asarray(X, float) ** 2 + np.asarray(Y, float) ** 2),
    )


BUILTIN_PROFILES = {
    "quadratic_saddle": _quadratic_saddle,
    "quartic_negative": _quartic_negative,
}


def builtin_profile(name: str) -> WaveProfile:
    """Return ``X^2 - Y^2`` (``quadratic_saddle``) or ``-(X^4 + Y^4)/2`` (``quartic_negative``)."""
    try:
        return BUILTIN_PROFILES[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown profile {name!r}; expected one of {sorted(BUILTIN_PROFILES)}", field="profile"
        ) from None


def flat_profile() -> WaveProfile:
    """The profile f = 0, for which every transformation is the identity."""
    zeros = lambda X, Y: np.zeros(np.broadcast(X, Y).shape)  # noqa: E731
    return WaveProfile(
        eval=zeros,
        grad=lambda X, Y: np.zeros(np.broadcast(X, Y).shape + (2,)),
        hess=lambda X, Y: np.zeros(np.broadcast(X, Y).shape + (2, 2)),
        third=lambda X, Y: np.zeros(np.broadcast(X, Y).shape + (2, 2, 2)),
        name="flat",
        envelope=zeros,
    )


@dataclass(frozen=True)
class MetricComponents:
    """Symmetric 4x4 metric matrix in coordinate order (U, X, Y, V)."""

    g: Array

    def __getitem__(self, key: str) -> float:
        a, b = key
        return float(self.g[COORDS.index(a), COORDS.index(b)])

    def is_symmetric(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.g - self.g.T) <= atol))


def _flat_metric() -> Array:
    g = np.zeros((4, 4))
    g[0, 3] = g[3, 0] = -0.5
    g[1, 1] = g[2, 2] = 1.0
    return g


def metric_continuous(f: WaveProfile, p) -> MetricComponents:
    """Continuous form of the metric at ``p = (U, X, Y, V)``.

    The coefficient of ``dX dY`` in the line element is split evenly over the
    two off-diagonal entries.
    """
    U, X, Y, _ = (float(c) for c in p)
    up = max(U, 0.0)
    h = f.hess(X, Y)
    f11, f12, f22 = float(h[0, 0]), float(h[0, 1]), float(h[1, 1])
    lap = f11 + f22
    g = _flat_metric()
    g[1, 1] = (1.0 + 0.5 * f11 * up) ** 2 + 0.25 * f12**2 * up**2
    g[2, 2] = (1.0 + 0.5 * f22 * up) ** 2 + 0.25 * f12**2 * up**2
    g[1, 2] = g[2, 1] = 0.5 * (0.5 * f12 * lap * up**2 + 2.0 * up * f12)
    return MetricComponents(g)


def metric_regularized(f: WaveProfile, net, eps: float, p) -> MetricComponents:
    """Regularized distributional metric ``f(X,Y) delta_eps(U) dU^2 - dU dV + dX^2 + dY^2``."""
    U, X, Y, _ = (float(c) for c in p)
    g = _flat_metric()
    g[0, 0] = float(f.eval(X, Y)) * float(net.delta(eps, U))
    return MetricComponents(g)
