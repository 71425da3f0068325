"""The regularized coordinate transformation ``t_eps`` and its distributional shadow.

``t_eps(U, X, Y, V)`` follows the zero-initial-speed geodesic that starts at
``(X, Y, V)`` for ``u = -1`` and reads it off at ``u = U``:

    t_eps = (U, x_eps(U), v_eps(U)),   v_eps = V + A_eps + B_eps,

with ``A_eps = int f(x) delta_eps`` and ``B_eps`` the double integral. The
auxiliary map ``s_eps`` keeps only ``B_eps`` in the last slot. The closed forms

    t = (U, X + grad f U_+ / 2, V + f H(U) + |grad f|^2 U_+ / 4)
    s = (U, X + grad f U_+ / 2, V + |grad f|^2 U_+ / 4)

are their limits. Batched methods take ``(N, 4)`` arrays in the order
``(U, X, Y, V)``; the point-wise wrappers accept a single point.
"""

from __future__ import annotations

import itertools
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .delta_nets import DEFAULT_SCHEDULE, EpsSchedule, StrictDeltaNet
from .errors import DomainError, PreconditionError
from .geodesics import (DEFAULT_STEPS_PER_EPS, MIN_STEPS_PER_EPS, GeodesicState, LayerSweep,
                        existence_threshold)
from .profiles import SpacetimePoint, WaveProfile

BOX_QUANTUM = 0.5


def _as_points(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 4:
        raise PreconditionError(f"expected points with 4 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("points must be finite")
    return arr, single


def _wrap(out: np.ndarray, single: bool):
    return SpacetimePoint(*map(float, out[0])) if single else out


def bounding_box(XY: np.ndarray, quantum: float = BOX_QUANTUM):
    """Bounding box of ``XY`` rounded outward to multiples of ``quantum``."""
    lo = np.floor(XY.min(axis=0) / quantum) * quantum
    hi = np.ceil(XY.max(axis=0) / quantum) * quantum
    return (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))


# ----------------------------------------------------------------------------
# closed forms


def t_closed_batch(f: WaveProfile, P) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, float))
    U, X, Y, V = P.T
    up = np.maximum(U, 0.0)
    H = (U > 0).astype(float)
    g = f.grad(X, Y)
    out = P.copy()
    out[:, 1:3] += 0.5 * g * up[:, None]
    out[:, 3] += f.eval(X, Y) * H + 0.25 * np.sum(g * g, axis=1) * up
    return out


def s_closed_batch(f: WaveProfile, P) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, float))
    U, X, Y, _ = P.T
    up = np.maximum(U, 0.0)
    g = f.grad(X, Y)
    out = P.copy()
    out[:, 1:3] += 0.5 * g * up[:, None]
    out[:, 3] += 0.25 * np.sum(g * g, axis=1) * up
    return out


def t_closed(f: WaveProfile, p):
    arr, single = _as_points(p)
    return _wrap(t_closed_batch(f, arr), single)


def s_closed(f: WaveProfile, p):
    arr, single = _as_points(p)
    return _wrap(s_closed_batch(f, arr), single)


def dU_t_closed_batch(f: WaveProfile, P) -> np.ndarray:
    """``d t / dU`` of the closed form off ``U = 0`` (zero derivative of H and U_+ at 0)."""
    P = np.atleast_2d(np.asarray(P, float))
    U, X, Y, _ = P.T
    pos = (U > 0).astype(float)
    g = f.grad(X, Y)
    out = np.zeros_like(P)
    out[:, 0] = 1.0
    out[:, 1:3] = 0.5 * g * pos[:, None]
    out[:, 3] = 0.25 * np.sum(g * g, axis=1) * pos
    return out


def s_closed_jacobian_batch(f: WaveProfile, P) -> np.ndarray:
    """Full 4x4 Jacobian of the closed-form ``s`` (one-sided derivative 0 in U at U = 0)."""
    P = np.atleast_2d(np.asarray(P, float))
    U, X, Y, _ = P.T
    up = np.maximum(U, 0.0)
    pos = (U > 0).astype(float)
    g = f.grad(X, Y)
    Hs = f.hess(X, Y)
    J = np.zeros((P.shape[0], 4, 4))
    J[:, 0, 0] = 1.0
    J[:, 1:3, 0] = 0.5 * g * pos[:, None]
    J[:, 1:3, 1:3] = np.eye(2) + 0.5 * Hs * up[:, None, None]
    J[:, 3, 0] = 0.25 * np.sum(g * g, axis=1) * pos
    J[:, 3, 1:3] = 0.5 * np.einsum("ni,nij->nj", g, Hs) * up[:, None]
    J[:, 3, 3] = 1.0
    return J


def spatial_closed(f: WaveProfile, U, XY) -> np.ndarray:
    """Spatial part ``X + grad f(X) U_+ / 2`` of the closed forms."""
    XY = np.atleast_2d(np.asarray(XY, float))
    up = np.maximum(np.broadcast_to(np.asarray(U, float), XY.shape[:1]), 0.0)
    return XY + 0.5 * f.grad(XY[:, 0], XY[:, 1]) * up[:, None]


# ----------------------------------------------------------------------------
# Jacobian samples

_PRINCIPAL_SETS = [c for k in range(1, 5) for c in itertools.combinations(range(4), k)]


def principal_minors(J: np.ndarray) -> np.ndarray:
    """All 15 principal minors of a stack of 4x4 matrices, shape ``(N, 15)``."""
    J = np.atleast_3d(J) if J.ndim == 2 else J
    cols = []
    for idx in _PRINCIPAL_SETS:
        sub = J[:, idx][:, :, idx]
        cols.append(np.linalg.det(sub) if len(idx) > 1 else sub[:, 0, 0])
    return np.stack(cols, axis=1)


def leading_minors(J: np.ndarray) -> np.ndarray:
    J = J[None] if J.ndim == 2 else J
    return np.stack([J[:, 0, 0]] + [np.linalg.det(J[:, :k, :k]) for k in (2, 3, 4)], axis=1)


@dataclass(frozen=True)
class JacobianSample:
    J: np.ndarray
    minors: tuple[float, float, float, float]
    principal: tuple[float, ...]

    @property
    def det(self) -> float:
        return self.minors[3]

    @property
    def spatial_det(self) -> float:
        return float(self.J[1, 1] * self.J[2, 2] - self.J[1, 2] * self.J[2, 1])


# ----------------------------------------------------------------------------
# evaluator


class TransformEvaluator:
    """Evaluates ``t_eps``, ``s_eps`` and ``D t_eps`` for one ``eps``.

    Sweeps are memoized per initial position ``(X, Y)`` in a bounded,
    lock-protected LRU cache, so evaluating many ``U`` along one line costs a
    single sweep. ``box`` fixes the compact set of admissible initial
    positions; without it each call uses the bounding box of its points,
    rounded outward to multiples of 0.5. ``eps`` above the existence
    threshold of that box raises ``DomainError``.
    """

    def __init__(self, f: WaveProfile, net: StrictDeltaNet, eps: float,
                 steps_per_eps: int = DEFAULT_STEPS_PER_EPS, box=None, cache_size: int = 2048):
        if eps <= 0:
            raise PreconditionError("eps must be positive")
        if steps_per_eps < MIN_STEPS_PER_EPS:
            raise PreconditionError(f"steps_per_eps must be >= {MIN_STEPS_PER_EPS}")
        self.f, self.net, self.eps, self.steps_per_eps = f, net, float(eps), int(steps_per_eps)
        self.box = None if box is None else tuple(tuple(float(c) for c in side) for side in box)
        self.cache_size = int(cache_size)
        self._cache: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self._checked_boxes: set = set()
        if self.box is not None:
            self._check_box(self.box)

    # -- admissibility -------------------------------------------------------

    def _check_box(self, box):
        if box in self._checked_boxes:
            return
        bound = existence_threshold(self.f, self.net, box)
        if self.eps > bound.eps_threshold * (1 + 1e-12):
            raise DomainError(
                f"eps={self.eps!r} exceeds the existence threshold eps_K={bound.eps_threshold:.6g} "
                f"for initial positions in {box}"
            )
        self._checked_boxes.add(box)

    def threshold(self, box=None) -> float:
        return existence_threshold(self.f, self.net, box or self.box).eps_threshold

    def inside(self, XY) -> np.ndarray:
        """Mask of initial positions inside the evaluator box (all True without a box)."""
        XY = np.atleast_2d(np.asarray(XY, float))
        if self.box is None:
            return np.ones(len(XY), bool)
        (x0, x1), (y0, y1) = self.box
        tol = 1e-12
        return ((XY[:, 0] >= x0 - tol) & (XY[:, 0] <= x1 + tol)
                & (XY[:, 1] >= y0 - tol) & (XY[:, 1] <= y1 + tol))

    def _admit(self, XY: np.ndarray):
        if self.box is None:
            self._check_box(bounding_box(XY))
            return
        outside = ~self.inside(XY)
        if np.any(outside):
            bad = XY[np.argmax(outside)]
            raise DomainError(f"initial position {tuple(bad)} lies outside the evaluator box {self.box}")

    # -- sweeps ------------------------------------------------------------------

    def cache_info(self) -> int:
        with self._lock:
            return len(self._cache)

    def _sweep_for(self, XY: np.ndarray, use_cache: bool) -> tuple[LayerSweep, np.ndarray]:
        uniq, inverse = np.unique(XY, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        if not use_cache:
            return LayerSweep(self.f, self.net, self.eps, self.steps_per_eps, uniq), inverse
        keys = [(float(a), float(b)) for a, b in uniq]
        found: dict = {}
        with self._lock:
            for k in keys:
                if k in self._cache:
                    self._cache.move_to_end(k)
                    found[k] = self._cache[k]
        missing = [i for i, k in enumerate(keys) if k not in found]
        if missing:
            fresh = LayerSweep(self.f, self.net, self.eps, self.steps_per_eps, uniq[missing])
            with self._lock:
                for j, i in enumerate(missing):
                    arr = fresh.nodes[:, j, :].copy()
                    found[keys[i]] = arr
                    self._cache[keys[i]] = arr
                    self._cache.move_to_end(keys[i])
                while len(self._cache) > self.cache_size:
                    self._cache.popitem(last=False)
        nodes = np.stack([found[k] for k in keys], axis=1)
        return LayerSweep.from_nodes(self.f, self.net, self.eps, self.steps_per_eps, nodes), inverse

    def states(self, P, use_cache: bool = True) -> GeodesicState:
        P = np.atleast_2d(np.asarray(P, float))
        XY = P[:, 1:3]
        self._admit(XY)
        out_x = np.empty((P.shape[0], 21))
        flat = P[:, 0] <= -self.eps
        # flat region: identity, no sweep needed
        if np.all(flat):
            y = np.zeros((P.shape[0], 21))
            y[:, 0:2] = XY
            y[:, 7] = y[:, 10] = 1.0
            return GeodesicState.from_array(y, np.zeros(P.shape[0]))
        sweep, rows = self._sweep_for(XY, use_cache)
        out_x[:] = sweep.state_array(P[:, 0], rows)
        out_x[flat, 0:2] = XY[flat]
        return GeodesicState.from_array(out_x, self.net.delta(self.eps, P[:, 0]))

    # -- maps --------------------------------------------------------------------

    def t_batch(self, P, use_cache: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        st = self.states(P, use_cache)
        out = P.copy()
        out[:, 1:3] = st.x
        out[:, 3] = P[:, 3] + st.A + st.B
        return out

    def s_batch(self, P, use_cache: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        st = self.states(P, use_cache)
        out = P.copy()
        out[:, 1:3] = st.x
        out[:, 3] = P[:, 3] + st.B
        return out

    def w_parts_batch(self, P, use_cache: bool = True):
        """``(w_eps, A_eps)`` with ``v_eps = w_eps + A_eps``."""
        P = np.atleast_2d(np.asarray(P, float))
        st = self.states(P, use_cache)
        return P[:, 3] + st.B, st.A.copy()

    def dU_batch(self, P, use_cache: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        st = self.states(P, use_cache)
        fx = self.f.eval(st.x[:, 0], st.x[:, 1])
        out = np.zeros_like(P)
        out[:, 0] = 1.0
        out[:, 1:3] = st.p
        out[:, 3] = fx * st.delta + st.Bdot
        return out

    def jacobian_batch(self, P, use_cache: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        st = self.states(P, use_cache)
        fx = self.f.eval(st.x[:, 0], st.x[:, 1])
        J = np.zeros((P.shape[0], 4, 4))
        J[:, 0, 0] = 1.0
        J[:, 1:3, 0] = st.p
        J[:, 1:3, 1:3] = st.J
        J[:, 3, 0] = fx * st.delta + st.Bdot
        J[:, 3, 1:3] = st.AJ + st.BJ
        J[:, 3, 3] = 1.0
        return J

    def t_eps(self, p):
        arr, single = _as_points(p)
        return _wrap(self.t_batch(arr), single)

    def s_eps(self, p):
        arr, single = _as_points(p)
        return _wrap(self.s_batch(arr), single)

    def w_parts(self, p):
        arr, single = _as_points(p)
        w, a = self.w_parts_batch(arr)
        return (float(w[0]), float(a[0])) if single else (w, a)

    def jacobian(self, p) -> JacobianSample:
        arr, _ = _as_points(p)
        J = self.jacobian_batch(arr[:1])
        return JacobianSample(J=J[0], minors=tuple(map(float, leading_minors(J)[0])),
                              principal=tuple(map(float, principal_minors(J)[0])))

    def __repr__(self):
        return (f"TransformEvaluator(f={self.f.name!r}, net={self.net.name!r}, eps={self.eps!r}, "
                f"steps_per_eps={self.steps_per_eps})")


def t_eps(ev: TransformEvaluator, p):
    return ev.t_eps(p)


def s_eps(ev: TransformEvaluator, p):
    return ev.s_eps(p)


def w_parts(ev: TransformEvaluator, p):
    return ev.w_parts(p)


def jacobian(ev: TransformEvaluator, p) -> JacobianSample:
    return ev.jacobian(p)


class TransformFamily:
    """Evaluators for every ``eps`` of a schedule, created lazily and kept."""

    def __init__(self, f: WaveProfile, net: StrictDeltaNet,
                 schedule: EpsSchedule | Sequence[float] = DEFAULT_SCHEDULE,
                 steps_per_eps: int = DEFAULT_STEPS_PER_EPS, box=None):
        self.f, self.net = f, net
        self.schedule = schedule if isinstance(schedule, EpsSchedule) else EpsSchedule(tuple(schedule))
        self.steps_per_eps = steps_per_eps
        self.box = box
        self._evs: dict[float, TransformEvaluator] = {}
        self._lock = threading.Lock()

    def evaluator(self, eps: float) -> TransformEvaluator:
        with self._lock:
            ev = self._evs.get(eps)
            if ev is None:
                ev = TransformEvaluator(self.f, self.net, eps, self.steps_per_eps, self.box)
                self._evs[eps] = ev
            return ev

    def admissible(self, box) -> tuple[float, ...]:
        """Scheduled eps values below the existence threshold of ``box``."""
        thr = existence_threshold(self.f, self.net, box).eps_threshold
        return tuple(e for e in self.schedule if e <= thr * (1 + 1e-12))

    def __iter__(self) -> Iterator[tuple[float, TransformEvaluator]]:
        for eps in self.schedule:
            yield eps, self.evaluator(eps)

    def __len__(self):
        return len(self.schedule)

