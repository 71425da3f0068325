"""Regularized pp-wave geodesics with initial data at u = -1.

The spatial equations ``x''^i = (1/2) d_i f(x) delta_eps(u)`` are integrated by
classical RK4 with a fixed step ``eps / steps_per_eps`` across the layer
``[-eps, eps]``; outside it the solution is affine and assembled in closed
form. ``v`` is obtained from the twice-integrated form

    v(u) = v0 + vdot0 (u + 1) + A(u) + B(u),
    A(u) = int f(x) delta_eps,      B'' = sum_i d_i f(x) xdot^i delta_eps,

whose integrals are carried as extra RK4 state, so the derivative of the
mollifier is never evaluated. The first-order variational system (derivatives
with respect to the initial position) rides along in the same sweep.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .delta_nets import StrictDeltaNet
from .errors import BlowUpError, DomainError, PreconditionError
from .profiles import WaveProfile

MIN_STEPS_PER_EPS = 64
DEFAULT_STEPS_PER_EPS = 64

# state layout
_X = slice(0, 2)
_P = slice(2, 4)
_A, _B, _Bd = 4, 5, 6
_J = slice(7, 11)
_JD = slice(11, 15)
_AJ = slice(15, 17)
_BJ = slice(17, 19)
_BJD = slice(19, 21)
STATE_DIM = 21


def spectral_norm_2x2(M):
    """Largest singular value of a stack of 2x2 matrices."""
    M = np.asarray(M, float)
    s = np.sum(M * M, axis=(-2, -1))
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))
    return np.sqrt(0.5 * (s + disc))


def _rhs(f: WaveProfile, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    x = y[:, _X]
    p = y[:, _P]
    fv = f.eval(x[:, 0], x[:, 1])
    g = f.grad(x[:, 0], x[:, 1])
    H = f.hess(x[:, 0], x[:, 1])
    J = y[:, _J].reshape(-1, 2, 2)
    Jd = y[:, _JD].reshape(-1, 2, 2)
    HJ = H @ J
    d1 = d[:, None]
    out = np.empty_like(y)
    out[:, _X] = p
    out[:, _P] = 0.5 * g * d1
    out[:, _A] = fv * d
    out[:, _B] = y[:, _Bd]
    out[:, _Bd] = np.einsum("ni,ni->n", g, p) * d
    out[:, _J] = y[:, _JD]
    out[:, _JD] = (0.5 * HJ).reshape(-1, 4) * d1
    out[:, _AJ] = np.einsum("ni,nij->nj", g, J) * d1
    out[:, _BJ] = y[:, _BJD]
    out[:, _BJD] = (np.einsum("ni,nij->nj", p, HJ) + np.einsum("ni,nij->nj", g, Jd)) * d1
    return out


def _rk4_step(f, y, h, d0, dm, d1):
    """One RK4 step; ``h`` and the delta samples may be scalars or per-row arrays."""
    h = np.asarray(h, float)
    hc = h[:, None] if h.ndim else h
    k1 = _rhs(f, y, d0)
    k2 = _rhs(f, y + 0.5 * hc * k1, dm)
    k3 = _rhs(f, y + 0.5 * hc * k2, dm)
    k4 = _rhs(f, y + hc * k3, d1)
    return y + (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def initial_state(x0, xdot0, eps: float) -> np.ndarray:
    """State at ``u = -eps`` for initial data posed at ``u = -1``."""
    x0 = np.atleast_2d(np.asarray(x0, float))
    xdot0 = np.broadcast_to(np.atleast_2d(np.asarray(xdot0, float)), x0.shape)
    y = np.zeros((x0.shape[0], STATE_DIM))
    y[:, _X] = x0 + xdot0 * (1.0 - eps)
    y[:, _P] = xdot0
    y[:, 7] = y[:, 10] = 1.0
    return y


class GeodesicState(NamedTuple):
    """Geodesic quantities at one parameter value per row."""

    x: np.ndarray      # (N, 2)
    p: np.ndarray      # (N, 2) = xdot
    A: np.ndarray      # (N,) int f(x) delta
    B: np.ndarray      # (N,) double integral
    Bdot: np.ndarray   # (N,)
    J: np.ndarray      # (N, 2, 2) dx^i / dx0^j
    Jdot: np.ndarray   # (N, 2, 2)
    AJ: np.ndarray     # (N, 2) dA / dx0^j
    BJ: np.ndarray     # (N, 2) dB / dx0^j
    delta: np.ndarray  # (N,) delta_eps(u)

    @classmethod
    def from_array(cls, y: np.ndarray, delta: np.ndarray) -> "GeodesicState":
        return cls(
            x=y[:, _X], p=y[:, _P], A=y[:, _A], B=y[:, _B], Bdot=y[:, _Bd],
            J=y[:, _J].reshape(-1, 2, 2), Jdot=y[:, _JD].reshape(-1, 2, 2),
            AJ=y[:, _AJ], BJ=y[:, _BJ], delta=delta,
        )


class LayerSweep:
    """RK4 node states across ``[-eps, eps]`` for a batch of initial data."""

    def __init__(self, f: WaveProfile, net: StrictDeltaNet, eps: float, steps_per_eps: int,
                 x0, xdot0=None):
        if eps <= 0:
            raise PreconditionError("eps must be positive")
        if steps_per_eps < MIN_STEPS_PER_EPS:
            raise PreconditionError(f"steps_per_eps must be >= {MIN_STEPS_PER_EPS}")
        self.f, self.net, self.eps, self.n = f, net, float(eps), int(steps_per_eps)
        self.h = self.eps / self.n
        x0 = np.atleast_2d(np.asarray(x0, float))
        xdot0 = np.zeros_like(x0) if xdot0 is None else np.broadcast_to(
            np.atleast_2d(np.asarray(xdot0, float)), x0.shape).copy()
        self.x0, self.xdot0 = x0, xdot0
        self.start = initial_state(x0, xdot0, self.eps)
        self.u_nodes = -self.eps + self.h * np.arange(2 * self.n + 1)
        self.u_nodes[-1] = self.eps
        self.nodes = self._sweep()

    @classmethod
    def from_nodes(cls, f, net, eps: float, steps_per_eps: int, nodes: np.ndarray) -> "LayerSweep":
        """Rebuild a sweep from stored node states of shape ``(2n + 1, N, STATE_DIM)``."""
        obj = cls.__new__(cls)
        obj.f, obj.net, obj.eps, obj.n = f, net, float(eps), int(steps_per_eps)
        obj.h = obj.eps / obj.n
        obj.start = nodes[0]
        obj.x0 = obj.xdot0 = None
        obj.u_nodes = -obj.eps + obj.h * np.arange(2 * obj.n + 1)
        obj.u_nodes[-1] = obj.eps
        obj.nodes = nodes
        return obj

    def _sweep(self) -> np.ndarray:
        nsteps = 2 * self.n
        nodes = np.empty((nsteps + 1,) + self.start.shape)
        nodes[0] = self.start
        dn = self.net.delta(self.eps, self.u_nodes)
        dm = self.net.delta(self.eps, self.u_nodes[:-1] + 0.5 * self.h)
        y = self.start
        rows = y.shape[0]
        for k in range(nsteps):
            y = _rk4_step(self.f, y, self.h,
                          np.full(rows, dn[k]), np.full(rows, dm[k]), np.full(rows, dn[k + 1]))
            if not np.all(np.isfinite(y)):
                raise BlowUpError(float(self.u_nodes[k + 1]))
            nodes[k + 1] = y
        return nodes

    def state_array(self, u, rows=None) -> np.ndarray:
        """Full state at parameter ``u`` (per row) for sweep rows ``rows``."""
        rows = np.arange(self.start.shape[0]) if rows is None else np.asarray(rows, int)
        u = np.broadcast_to(np.asarray(u, float), rows.shape).copy()
        eps = self.eps
        out = np.empty((rows.size, STATE_DIM))

        before = u <= -eps
        if np.any(before):
            y = self.start[rows[before]].copy()
            y[:, _X] += y[:, _P] * (u[before] + eps)[:, None]
            out[before] = y

        after = u >= eps
        if np.any(after):
            y = self.nodes[-1][rows[after]].copy()
            s = (u[after] - eps)[:, None]
            y[:, _X] += y[:, _P] * s
            y[:, _B] += y[:, _Bd] * s[:, 0]
            y[:, _J] += y[:, _JD] * s
            y[:, _BJ] += y[:, _BJD] * s
            out[after] = y

        inside = ~(before | after)
        if np.any(inside):
            ui = u[inside]
            k = np.clip(np.floor((ui + eps) / self.h).astype(int), 0, 2 * self.n - 1)
            tau = ui - self.u_nodes[k]
            y0 = self.nodes[k, rows[inside]]
            uk = self.u_nodes[k]
            d = self.net.delta
            y = _rk4_step(self.f, y0, tau, d(eps, uk), d(eps, uk + 0.5 * tau), d(eps, ui))
            exact = tau == 0.0
            y[exact] = y0[exact]
            out[inside] = y
        return out

    def state(self, u, rows=None) -> GeodesicState:
        y = self.state_array(u, rows)
        u = np.broadcast_to(np.asarray(u, float), (y.shape[0],))
        return GeodesicState.from_array(y, self.net.delta(self.eps, u))


# ----------------------------------------------------------------------------
# existence bound


@dataclass(frozen=True)
class ExistenceBound:
    b: float
    I_radius: float
    L: float
    alpha: float
    Q: float = 0.0
    g_sup: float = 0.0

    @property
    def eps_threshold(self) -> float:
        return 0.5 * self.alpha


def existence_bound(g_sup: float, g_lip: float, xdot0_norm: float, b: float, C: float,
                    Q: float = 0.0) -> ExistenceBound:
    """Existence interval parameter ``alpha`` for ``x'' = g(x) delta_eps``.

    ``alpha = min(b / (C |g|_I + |xdot0|), 1 / (2 L C), 1)``; a vanishing
    denominator makes the corresponding candidate infinite.
    """
    if b <= 0 or C <= 0 or g_lip < 0:
        raise PreconditionError("existence_bound needs b > 0, C > 0, g_lip >= 0")
    denom = C * g_sup + xdot0_norm
    first = b / denom if denom > 0 else math.inf
    second = 1.0 / (2.0 * g_lip * C) if g_lip > 0 else math.inf
    alpha = min(first, second, 1.0)
    return ExistenceBound(b=b, I_radius=b + xdot0_norm + Q, L=g_lip, alpha=alpha, Q=Q, g_sup=g_sup)


def _rounded_box_samples(box, r: float, n_edge: int = 129, n_arc: int = 65, n_inner: int = 41):
    """Points of ``box + closed disc(r)``: straight edges, corner arcs and an interior grid."""
    (x0, x1), (y0, y1) = box
    t = np.linspace(0.0, 1.0, n_edge)
    xs = x0 + (x1 - x0) * t
    ys = y0 + (y1 - y0) * t
    pts = [
        np.column_stack([xs, np.full_like(xs, y0 - r)]),
        np.column_stack([xs, np.full_like(xs, y1 + r)]),
        np.column_stack([np.full_like(ys, x0 - r), ys]),
        np.column_stack([np.full_like(ys, x1 + r), ys]),
    ]
    th = np.linspace(0.0, 0.5 * np.pi, n_arc)
    for (cx, cy), start in (((x1, y1), 0.0), ((x0, y1), 0.5 * np.pi),
                            ((x0, y0), np.pi), ((x1, y0), 1.5 * np.pi)):
        a = start + th
        pts.append(np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)]))
    gx, gy = np.meshgrid(np.linspace(x0 - r, x1 + r, n_inner), np.linspace(y0 - r, y1 + r, n_inner))
    g = np.column_stack([gx.ravel(), gy.ravel()])
    dx = np.maximum(np.maximum(x0 - g[:, 0], g[:, 0] - x1), 0.0)
    dy = np.maximum(np.maximum(y0 - g[:, 1], g[:, 1] - y1), 0.0)
    pts.append(g[np.hypot(dx, dy) <= r])
    return np.concatenate(pts)


def _as_box(box) -> tuple[tuple[float, float], tuple[float, float]]:
    (a, b), (c, d) = box
    a, b, c, d = float(a), float(b), float(c), float(d)
    if b < a or d < c:
        raise PreconditionError(f"malformed box {box!r}")
    return (a, b), (c, d)


@functools.lru_cache(maxsize=256)
def _threshold_cached(f: WaveProfile, C: float, box, xdot_norm: float, Q: float) -> ExistenceBound:
    best = None
    for b in np.geomspace(1e-3, 1e3, 121):
        r = b + xdot_norm + Q
        pts = _rounded_box_samples(box, r)
        g = 0.5 * f.grad(pts[:, 0], pts[:, 1])
        g_sup = float(np.max(np.hypot(g[:, 0], g[:, 1])))
        L = float(np.max(spectral_norm_2x2(0.5 * f.hess(pts[:, 0], pts[:, 1]))))
        eb = existence_bound(g_sup, L, xdot_norm, float(b), C, Q)
        if best is None or eb.alpha > best.alpha:
            best = eb
    return best


def existence_threshold(f: WaveProfile, net: StrictDeltaNet, box, xdot_norm: float = 0.0,
                        Q: float = 0.0) -> ExistenceBound:
    """Compact-uniform existence bound for initial positions in ``box``.

    ``box = ((x_lo, x_hi), (y_lo, y_hi))``; ``sup |g|`` and the Lipschitz
    constant of ``g = grad f / 2`` are sampled on the enlarged set
    ``box + closed disc(b + xdot_norm + Q)``, and the free radius ``b`` is
    chosen to maximize ``alpha``. ``eps_K = alpha / 2``.
    """
    return _threshold_cached(f, float(net.C), _as_box(box), float(xdot_norm), float(Q))


def check_eps(f: WaveProfile, net: StrictDeltaNet, eps: float, box, xdot_norm: float = 0.0) -> ExistenceBound:
    bound = existence_threshold(f, net, box, xdot_norm)
    if eps > bound.eps_threshold * (1 + 1e-12):
        raise DomainError(
            f"eps={eps!r} exceeds the existence threshold eps_K={bound.eps_threshold:.6g} "
            f"for initial positions in {box}"
        )
    return bound


# ----------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class InitialData:
    x0: tuple[float, float]
    xdot0: tuple[float, float] = (0.0, 0.0)
    v0: float = 0.0
    vdot0: float = 0.0

    def __post_init__(self):
        vals = list(self.x0) + list(self.xdot0) + [self.v0, self.vdot0]
        if len(self.x0) != 2 or len(self.xdot0) != 2 or not all(np.isfinite(vals)):
            raise PreconditionError("initial data must be finite with two spatial components")


@dataclass(frozen=True)
class GeodesicTrajectory:
    u_grid: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    eps: float
    segment_markers: tuple[int, int]

    def rows(self):
        for k in range(self.u_grid.size):
            yield (self.u_grid[k], self.x[k, 0], self.x[k, 1], self.v[k], self.xdot[k, 0], self.xdot[k, 1])


def geodesic_state(f, net, eps, init: InitialData, u, steps_per_eps=DEFAULT_STEPS_PER_EPS):
    """Geodesic quantities ``(x, xdot, v, vdot)`` at the parameter values ``u``."""
    sweep = LayerSweep(f, net, eps, steps_per_eps, [init.x0], [init.xdot0])
    u = np.atleast_1d(np.asarray(u, float))
    st = sweep.state(u, np.zeros(u.size, int))
    v = init.v0 + init.vdot0 * (u + 1.0) + st.A + st.B
    fx = f.eval(st.x[:, 0], st.x[:, 1])
    vdot = init.vdot0 + fx * st.delta + st.Bdot
    return st.x, st.p, v, vdot


def integrate_geodesic(f: WaveProfile, net: StrictDeltaNet, eps: float, init: InitialData,
                       u_end: float = 1.0, steps_per_eps: int = DEFAULT_STEPS_PER_EPS,
                       box=None, n_flat: int = 65) -> GeodesicTrajectory:
    """Sample the regularized geodesic on ``[-1, u_end]``.

    The grid holds ``n_flat`` points on each flat segment and every RK4 node
    in ``[-eps, eps]``. ``box`` is the compact set of initial positions used for
    the existence threshold (default: the single point ``x0``).
    """
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if u_end <= eps:
        raise PreconditionError("u_end must exceed eps")
    if steps_per_eps < MIN_STEPS_PER_EPS:
        raise PreconditionError(f"steps_per_eps must be >= {MIN_STEPS_PER_EPS}")
    if box is None:
        box = ((init.x0[0], init.x0[0]), (init.x0[1], init.x0[1]))
    check_eps(f, net, eps, box, float(np.hypot(*init.xdot0)))

    sweep = LayerSweep(f, net, eps, steps_per_eps, [init.x0], [init.xdot0])
    pre = np.linspace(-1.0, -eps, n_flat)
    post = np.linspace(eps, u_end, n_flat)
    u = np.concatenate([pre, sweep.u_nodes[1:-1], post])
    markers = (n_flat - 1, n_flat - 1 + sweep.u_nodes.size - 1)

    y = sweep.state_array(u, np.zeros(u.size, int))
    # flat region in closed form, identical to the affine formula
    y[: n_flat, _X] = np.asarray(init.x0) + np.outer(pre + 1.0, init.xdot0)
    y[n_flat: markers[1], :] = sweep.nodes[1:-1, 0, :]
    st = GeodesicState.from_array(y, net.delta(eps, u))
    v = init.v0 + init.vdot0 * (u + 1.0) + st.A + st.B
    vdot = init.vdot0 + f.eval(st.x[:, 0], st.x[:, 1]) * st.delta + st.Bdot
    return GeodesicTrajectory(u_grid=u, x=st.x.copy(), xdot=st.p.copy(), v=v, vdot=vdot,
                              eps=float(eps), segment_markers=markers)


def geodesic_limit(f: WaveProfile, init: InitialData, u):
    """Distributional limit of the regularized geodesic, with ``H(0) = 0``.

    Returns ``(x, v)`` where ``x`` has shape ``u.shape + (2,)``.
    """
    u = np.asarray(u, float)
    up = np.maximum(u, 0.0)
    H = (u > 0).astype(float)
    x0 = np.asarray(init.x0, float)
    xd0 = np.asarray(init.xdot0, float)
    a = x0 + xd0
    g = f.grad(a[0], a[1])
    fa = float(f.eval(a[0], a[1]))
    x = x0 + np.multiply.outer(1.0 + u, xd0) + 0.5 * np.multiply.outer(up, g)
    v = (init.v0 + init.vdot0 * (1.0 + u) + fa * H
         + float(np.dot(g, xd0 + 0.25 * g)) * up)
    return x, v


def batch_states(f: WaveProfile, net: StrictDeltaNet, eps: float, x0s, xdot0s, u: Sequence[float],
                 steps_per_eps: int = DEFAULT_STEPS_PER_EPS):
    """Positions ``x`` of many geodesics at the common parameter values ``u``.

    Returns an array of shape ``(len(x0s), len(u), 2)``.
    """
    sweep = LayerSweep(f, net, eps, steps_per_eps, x0s, xdot0s)
    m = sweep.start.shape[0]
    u = np.asarray(u, float)
    rows = np.repeat(np.arange(m), u.size)
    uu = np.tile(u, m)
    y = sweep.state_array(uu, rows)
    return y[:, _X].reshape(m, u.size, 2)
