"""Constructive local inversion of ``t_eps`` around points of the shock hyperplane.

Regions are small classes with a signed ``margin`` (positive exactly in the
interior) and deterministic ``closed_samples``. Cylinders ``B^Z_{d,h}(c)``
are ``B_d(c_hat) x (c_n - h, c_n + h)``, the hat dropping the last component.

``build_inversion_data`` follows the neighbourhood construction for
``P = (-beta, gamma) x R x I`` and the cylinder ``Q`` around ``q = s(p)``, and
only claims ``Q-bar in t_eps(P)`` once a sampled stability check with
``(s, t_eps)`` as base and perturbed map passes and every sample of
``Q-bar`` has been inverted into ``P`` by Newton's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InversionFailure, NonConvergenceError
from .injectivity import check_property_E, injectivity_region
from .profiles import SpacetimePoint, WaveProfile
from .transform import TransformEvaluator, TransformFamily, s_closed_batch

NEWTON_MAX_ITER = 40
SINGULAR_DET = 1e-8
DEFAULT_DELTA_GRID = (0.2, 0.15, 0.1, 0.075, 0.05, 0.025, 0.01)


# ----------------------------------------------------------------------------
# regions


def _ball_samples(dim: int, m: int) -> np.ndarray:
    """Unit closed ball samples: interior tensor grid plus points projected onto the sphere."""
    ax = np.linspace(-1.0, 1.0, m)
    cube = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    norms = np.linalg.norm(cube, axis=1)
    inner = cube[norms <= 1.0]
    shell = cube[np.max(np.abs(cube), axis=1) == 1.0]
    shell = shell / np.linalg.norm(shell, axis=1, keepdims=True)
    pts = np.concatenate([inner, shell])
    return np.unique(np.round(pts, 15), axis=0)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def margin(self, z):
        z = np.atleast_2d(np.asarray(z, float))
        return self.radius - np.linalg.norm(z - np.asarray(self.center), axis=1)

    def contains(self, z):
        return self.margin(z) > 0

    def closed_samples(self, m: int = 9) -> np.ndarray:
        c = np.asarray(self.center, float)
        return c + self.radius * _ball_samples(c.size, m)

    def expanded(self, delta: float, eta: float) -> "ExpandedBall":
        return ExpandedBall(self, delta, eta)


@dataclass(frozen=True)
class ExpandedBall:
    """``ball + B^Z_{delta,eta}(0)``, tested in closed form."""

    ball: Ball
    delta: float
    eta: float

    def margin(self, z):
        z = np.atleast_2d(np.asarray(z, float))
        c = np.asarray(self.ball.center, float)
        r = self.ball.radius
        dn = np.maximum(np.abs(z[:, -1] - c[-1]) - self.eta, 0.0)
        reach = np.sqrt(np.maximum(r * r - dn * dn, 0.0))
        dhat = np.linalg.norm(z[:, :-1] - c[:-1], axis=1)
        m_hat = self.delta + reach - dhat
        m_n = r + self.eta - np.abs(z[:, -1] - c[-1])
        return np.minimum(m_hat, m_n)

    def contains(self, z):
        return self.margin(z) > 0

    def closed_samples(self, m: int = 9) -> np.ndarray:
        c = np.asarray(self.ball.center, float)
        R = self.ball.radius + max(self.delta, self.eta)
        pts = c + R * _ball_samples(c.size, 2 * m - 1)
        return pts[self.margin(pts) >= -1e-12]


@dataclass(frozen=True)
class CylinderSet:
    """``B^Z_{radius_spatial, half_height}(center)``."""

    center: np.ndarray
    radius_spatial: float
    half_height: float

    def __post_init__(self):
        if not (self.radius_spatial > 0 and self.half_height > 0):
            raise ValueError("cylinder radius and half height must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, float))

    def margin(self, z):
        z = np.atleast_2d(np.asarray(z, float))
        c = self.center
        return np.minimum(self.radius_spatial - np.linalg.norm(z[:, :-1] - c[:-1], axis=1),
                          self.half_height - np.abs(z[:, -1] - c[-1]))

    def contains(self, z):
        return self.margin(z) > 0

    def closed_samples(self, m: int = 7, m_h: int = 5) -> np.ndarray:
        c = self.center
        base = c[:-1] + self.radius_spatial * _ball_samples(c.size - 1, m)
        hs = c[-1] + np.linspace(-self.half_height, self.half_height, m_h)
        return np.column_stack([np.repeat(base, hs.size, axis=0), np.tile(hs, len(base))])

    def expanded(self, delta: float, eta: float) -> "CylinderSet":
        return CylinderSet(self.center, self.radius_spatial + delta, self.half_height + eta)

    def as_dict(self) -> dict:
        return {"center": [float(v) for v in self.center], "radius_spatial": self.radius_spatial,
                "half_height": self.half_height}


@dataclass(frozen=True)
class OpenBox:
    """Product of open intervals; infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def margin(self, z):
        z = np.atleast_2d(np.asarray(z, float))
        return np.min(np.minimum(z - np.asarray(self.lo), np.asarray(self.hi) - z), axis=1)

    def contains(self, z):
        return self.margin(z) > 0

    def violated(self, z, names=("U", "X", "Y", "V")) -> list[str]:
        z = np.atleast_2d(np.asarray(z, float))
        m = np.minimum(z - np.asarray(self.lo), np.asarray(self.hi) - z)
        return [names[k] for k in range(z.shape[1]) if np.any(m[:, k] <= 0)]


@dataclass(frozen=True)
class PreimageRegion:
    """``f^{-1}(region)``, measured through the image: ``margin(x) = region.margin(f(x))``."""

    f: Callable
    region: object
    f_inv: Callable

    def margin(self, x):
        return self.region.margin(self.f(np.atleast_2d(np.asarray(x, float))))

    def contains(self, x):
        return self.margin(x) > 0

    def closed_samples(self, *args, **kw) -> np.ndarray:
        return self.f_inv(self.region.closed_samples(*args, **kw))


# ----------------------------------------------------------------------------
# stability check


@dataclass
class StabilityInstance:
    """Data for the perturbation-stability statement: base map ``f``, perturbation ``g``, target ``W``.

    Maps act on ``(N, n)`` batches. ``A`` is the sampled preimage region on
    which the sup-norm hypotheses are tested; ``f_inv`` seeds the solves of
    ``g(x) = w``, and ``g_solve(targets, seeds) -> (x, residual)`` may
    replace the generic finite-difference Newton solver.
    """

    f: Callable
    g: Callable
    W: object
    y: np.ndarray
    delta: float
    eta: float
    A: object
    f_inv: Callable
    g_solve: Optional[Callable] = None
    sample_args: tuple = ()


@dataclass
class StabilityReport:
    hypotheses_ok: bool
    inclusion_ok: Optional[bool]
    margin: float
    sup_hat: float
    sup_last: float
    y_ok: bool = True
    witness: Optional[np.ndarray] = None
    max_residual: float = 0.0


def _fd_jacobian(g, x, h=1e-7):
    n = x.shape[1]
    J = np.empty((x.shape[0], n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        J[:, :, k] = (g(x + e) - g(x - e)) / (2 * h)
    return J


def generic_newton(g, targets, seeds, tol=1e-12, max_iter=NEWTON_MAX_ITER):
    """Damped Newton for ``g(x) = target`` with a central-difference Jacobian."""
    x = np.array(seeds, float)
    r = g(x) - targets
    res = np.linalg.norm(r, axis=1)
    for _ in range(max_iter):
        act = res >= tol
        if not np.any(act):
            break
        J = _fd_jacobian(g, x[act])
        step = -np.linalg.solve(J, r[act][..., None])[..., 0]
        lam = np.ones(step.shape[0])
        xa = x[act]
        for _ in range(30):
            cand = xa + lam[:, None] * step
            rc = g(cand) - targets[act]
            nc = np.linalg.norm(rc, axis=1)
            worse = nc >= res[act]
            if not np.any(worse):
                break
            lam[worse] *= 0.5
        idx = np.flatnonzero(act)
        better = nc < res[act]
        x[idx[better]], r[idx[better]], res[idx[better]] = cand[better], rc[better], nc[better]
        if not np.any(better):
            break
    return x, res


def stability_check(inst: StabilityInstance, residual_tol: float = 1e-10) -> StabilityReport:
    """Sampled verification of hypotheses and conclusion of the perturbation-stability statement.

    Hypotheses: ``sup_A |g_hat - f_hat| < delta`` and ``sup_A |g_n - f_n| < eta``.
    Only when they hold is the conclusion tested: every sample of the closed
    ``W`` must be hit by ``g`` from the interior of ``A`` (Newton residual
    below ``residual_tol``). Failures are reported, never raised.
    """
    args = inst.sample_args
    A_pts = inst.A.closed_samples(*args)
    fa, ga = inst.f(A_pts), inst.g(A_pts)
    sup_hat = float(np.max(np.linalg.norm(ga[:, :-1] - fa[:, :-1], axis=1)))
    sup_last = float(np.max(np.abs(ga[:, -1] - fa[:, -1])))
    hyp = sup_hat < inst.delta and sup_last < inst.eta
    y = np.atleast_2d(np.asarray(inst.y, float))
    y_ok = bool(inst.W.contains(y)[0])
    if not hyp:
        return StabilityReport(False, None, math.nan, sup_hat, sup_last, y_ok)
    targets = inst.W.closed_samples(*args)
    seeds = inst.f_inv(targets)
    if inst.g_solve is not None:
        x, res = inst.g_solve(targets, seeds)
    else:
        x, res = generic_newton(inst.g, targets, seeds)
    margins = inst.A.margin(x)
    bad = (res >= residual_tol) | ~(margins > 0) | ~np.isfinite(res)
    witness = targets[np.argmax(bad)] if np.any(bad) else None
    return StabilityReport(True, not bool(np.any(bad)), float(np.min(margins)), sup_hat, sup_last,
                           y_ok, witness, float(np.max(res)))


def translation_instance(delta: float = 0.5, shift: float | None = None, eta: float = 0.5) -> StabilityInstance:
    """Identity on R^2 perturbed by the translation ``(shift, 0)``, ``W`` the unit disc."""
    shift = 0.3 * delta if shift is None else shift
    s = np.array([shift, 0.0])
    W = Ball(np.zeros(2), 1.0)
    ident = lambda x: np.asarray(x, float)  # noqa: E731
    A = PreimageRegion(ident, W.expanded(delta, eta), ident)
    return StabilityInstance(
        f=ident, g=lambda x: np.asarray(x, float) + s, W=W, y=np.zeros(2), delta=delta, eta=eta,
        A=A, f_inv=ident, sample_args=(21,),
    )


# ----------------------------------------------------------------------------
# closed-form and regularized inverses


def s_closed_inverse(f: WaveProfile, Z, seed=None, tol: float = 1e-13, max_iter: int = 60):
    """Invert the closed-form ``s`` on ``(N, 4)`` targets; returns ``(P, residual)``.

    ``U`` is copied, the spatial part solved by damped Newton from ``seed``
    (default: the target itself) and ``V`` recovered exactly.
    """
    Z = np.atleast_2d(np.asarray(Z, float))
    up = np.maximum(Z[:, 0], 0.0)
    xy = Z[:, 1:3].copy() if seed is None else np.atleast_2d(np.asarray(seed, float))[:, 1:3].copy()

    def F(xy):
        return xy + 0.5 * f.grad(xy[:, 0], xy[:, 1]) * up[:, None]

    r = F(xy) - Z[:, 1:3]
    res = np.linalg.norm(r, axis=1)
    for _ in range(max_iter):
        act = res >= tol
        if not np.any(act):
            break
        J = np.eye(2) + 0.5 * f.hess(xy[act, 0], xy[act, 1]) * up[act, None, None]
        step = -np.linalg.solve(J, r[act][..., None])[..., 0]
        lam = np.ones(step.shape[0])
        base = xy[act]
        upa = up[act]
        for _ in range(30):
            cand = base + lam[:, None] * step
            rc = cand + 0.5 * f.grad(cand[:, 0], cand[:, 1]) * upa[:, None] - Z[act, 1:3]
            nc = np.linalg.norm(rc, axis=1)
            worse = nc >= res[act]
            if not np.any(worse):
                break
            lam[worse] *= 0.5
        idx = np.flatnonzero(act)
        better = nc < res[act]
        xy[idx[better]], r[idx[better]], res[idx[better]] = cand[better], rc[better], nc[better]
        if not np.any(better):
            break
    g = f.grad(xy[:, 0], xy[:, 1])
    P = np.column_stack([Z[:, 0], xy, Z[:, 3] - 0.25 * np.sum(g * g, axis=1) * up])
    return P, res


def newton_invert_batch(ev: TransformEvaluator, Q, seed=None, tol: float = 1e-12,
                        max_iter: int = NEWTON_MAX_ITER):
    """Solve ``t_eps(p) = q`` row-wise; returns ``(P, residual, converged)``.

    ``U`` is fixed to ``q_U``; the spatial block is solved by damped Newton
    (the step is halved while the residual fails to decrease); ``V`` then
    follows exactly from the affine dependence. Rows whose spatial Jacobian
    has ``|det| < 1e-8`` or that exhaust ``max_iter`` are marked unconverged.
    Sweeps bypass the evaluator cache.
    """
    Q = np.atleast_2d(np.asarray(Q, float))
    n = Q.shape[0]
    P = Q.copy() if seed is None else np.atleast_2d(np.asarray(seed, float)).copy()
    P[:, 0] = Q[:, 0]
    P[:, 3] = 0.0
    flat = Q[:, 0] <= -ev.eps
    P[flat] = Q[flat]
    res = np.zeros(n)
    singular = np.zeros(n, bool)
    act_rows = np.flatnonzero(~flat)
    if act_rows.size:
        st = ev.states(P[act_rows], use_cache=False)
        x, J = st.x, st.J
        r = x - Q[act_rows, 1:3]
        res_a = np.linalg.norm(r, axis=1)
        active = np.ones(act_rows.size, bool)
        for _ in range(max_iter):
            active &= res_a >= tol
            if not np.any(active):
                break
            idx = np.flatnonzero(active)
            det = np.linalg.det(J[idx])
            sing = np.abs(det) < SINGULAR_DET
            singular[act_rows[idx[sing]]] = True
            active[idx[sing]] = False
            idx = idx[~sing]
            if idx.size == 0:
                break
            step = -np.linalg.solve(J[idx], r[idx][..., None])[..., 0]
            lam = np.ones(idx.size)
            base = P[act_rows[idx]].copy()
            for _ in range(30):
                cand = base.copy()
                cand[:, 1:3] += lam[:, None] * step
                # trial points outside the evaluator box count as no improvement
                ok_box = ev.inside(cand[:, 1:3])
                probe = np.where(ok_box[:, None], cand, base)
                sc = ev.states(probe, use_cache=False)
                rc = sc.x - Q[act_rows[idx], 1:3]
                nc = np.where(ok_box, np.linalg.norm(rc, axis=1), np.inf)
                worse = nc >= res_a[idx]
                if not np.any(worse):
                    break
                lam[worse] *= 0.5
            better = nc < res_a[idx]
            sel = idx[better]
            P[act_rows[sel]] = cand[better]
            x[sel], J[sel], r[sel], res_a[sel] = sc.x[better], sc.J[better], rc[better], nc[better]
            active[idx[~better]] = False
        st = ev.states(P[act_rows], use_cache=False)
        P[act_rows, 3] = Q[act_rows, 3] - st.A - st.B
        res[act_rows] = res_a
    t = ev.t_batch(P, use_cache=False)
    res = np.max(np.abs(t - Q), axis=1)
    converged = (res < max(tol, 1e-10)) & ~singular & np.all(np.isfinite(P), axis=1)
    return P, res, converged


def newton_invert(ev: TransformEvaluator, q, seed=None, tol: float = 1e-10,
                  max_iter: int = NEWTON_MAX_ITER) -> SpacetimePoint:
    """Invert ``t_eps`` at a single point; raises ``NonConvergenceError`` on failure."""
    q = np.asarray(q, float).reshape(1, 4)
    s = None if seed is None else np.asarray(seed, float).reshape(1, 4)
    P, res, ok = newton_invert_batch(ev, q, s, tol=min(tol, 1e-12), max_iter=max_iter)
    if not (ok[0] and res[0] < tol):
        raise NonConvergenceError(
            f"Newton inversion failed at q={tuple(map(float, q[0]))} (residual {res[0]:.3g})",
            last_iterate=SpacetimePoint(*map(float, P[0])), failed=[tuple(map(float, q[0]))],
        )
    return SpacetimePoint(*map(float, P[0]))


# ----------------------------------------------------------------------------
# inversion data


@dataclass(frozen=True)
class PSet:
    """``P = (-beta, gamma) x R x I`` with ``R`` an open box and ``I`` an open interval."""

    beta: float
    gamma: float
    R: tuple
    I: tuple

    @property
    def box(self) -> OpenBox:
        (x0, x1), (y0, y1) = self.R
        return OpenBox(np.array([-self.beta, x0, y0, self.I[0]]), np.array([self.gamma, x1, y1, self.I[1]]))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        b = self.box
        return rng.uniform(b.lo, b.hi, size=(n, 4))

    def as_dict(self) -> dict:
        return {"beta": self.beta, "gamma": self.gamma, "R": [list(s) for s in self.R], "I": list(self.I)}


@dataclass
class InversionData:
    P: PSet
    Q: CylinderSet
    eps0: float
    anchor_p: SpacetimePoint
    anchor_q: SpacetimePoint
    delta: float
    eta: float
    alpha: float
    h_sup: float
    certified_eps: tuple
    reports: dict = field(default_factory=dict)
    family: Optional[TransformFamily] = None

    def as_dict(self) -> dict:
        return {
            "P": self.P.as_dict(), "Q": self.Q.as_dict(), "eps0": self.eps0,
            "anchor_p": list(self.anchor_p), "anchor_q": list(self.anchor_q),
            "delta": self.delta, "eta": self.eta, "alpha": self.alpha, "h_sup": self.h_sup,
            "certified_eps": list(self.certified_eps),
            "reports": {repr(e): r for e, r in self.reports.items()},
        }


def _box_samples(box, n):
    (x0, x1), (y0, y1) = box
    gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _ball_in_image(f, center_hat, radius, beta, gamma, R, m=9) -> bool:
    """Whether the closed ball ``B_radius(center_hat)`` lies in ``s_hat((-beta, gamma) x R)``."""
    pts = Ball(np.asarray(center_hat, float), radius).closed_samples(m)
    Z = np.column_stack([pts, np.zeros(len(pts))])
    if np.any(Z[:, 0] <= -beta) or np.any(Z[:, 0] >= gamma):
        return False
    P, res = s_closed_inverse(f, Z)
    box = OpenBox(np.array([R[0][0], R[1][0]]), np.array([R[0][1], R[1][1]]))
    return bool(np.all(res < 1e-10) and np.all(box.contains(P[:, 1:3])))


def build_inversion_data(family: TransformFamily, f: WaveProfile, p, R_box, beta: float, I,
                         delta_grid: Sequence[float] = DEFAULT_DELTA_GRID, lam: float = 0.25,
                         alpha_search: Sequence[float] | None = None, a: float = 2.0,
                         m: int = 7, m_h: int = 5) -> InversionData:
    """Inversion data ``(P, Q, eps0)`` for ``t_eps`` around ``p`` on ``U = 0``.

    ``gamma`` is half the largest ``alpha`` certified both by property (E)
    scans of the family on ``R_lambda`` and by ``0.9 / max h`` of the
    injectivity region there. ``delta`` is the largest grid value with
    ``B_{3 delta}(q_hat)`` inside ``s_hat((-beta, gamma) x R)``; ``eta`` exceeds
    by ``delta`` the sampled sup of ``|t_eps - s_eps|`` on the preimage of that
    ball. ``eps0`` is the largest scheduled eps at which (with every smaller
    one) the stability check passes and ``Q-bar`` inverts into ``P``.
    """
    p = np.asarray(p, float)
    if p.shape != (4,) or p[0] != 0.0:
        raise ValueError("anchor point must lie on the hyperplane U = 0")
    R_box = tuple((float(lo), float(hi)) for lo, hi in R_box)
    I = (float(I[0]), float(I[1]))
    (rx0, rx1), (ry0, ry1) = R_box
    if not (rx0 < p[1] < rx1 and ry0 < p[2] < ry1):
        raise InversionFailure("R_box does not contain the anchor point", inclusion="p in P")
    if not 0 < beta < a:
        raise InversionFailure(f"beta must lie in (0, {a})", inclusion="beta < a")
    K_lam = ((rx0 - lam, rx1 + lam), (ry0 - lam, ry1 + lam))

    # injectivity of the closed form on (-a, alpha] x R_lambda
    region = injectivity_region(f)
    XY = _box_samples(K_lam, 33)
    alpha_w = 0.9 * float(np.min(region.upper(XY[:, 0], XY[:, 1])))
    alpha_w = min(alpha_w, 0.95)
    if alpha_search is None:
        alpha_search = [x for x in np.round(np.arange(0.95, 0.0, -0.05), 10) if x <= alpha_w]
    prop_e = check_property_E(family, K_lam, alpha_search=alpha_search, n_grid=17, n_u=8)
    if not prop_e.certified:
        raise InversionFailure("property (E) could not be certified on R_lambda", inclusion="(E)")
    alpha = min(prop_e.alpha, alpha_w)
    gamma = 0.5 * alpha
    eps1 = prop_e.eps0
    if beta < gamma:
        raise InversionFailure(f"beta={beta} is smaller than gamma={gamma}", inclusion="beta >= gamma")

    q = s_closed_batch(f, p[None])[0]
    q_hat = q[:3]
    eps_list = [e for e in family.admissible(K_lam) if e <= eps1 * (1 + 1e-12)]
    P = PSet(beta=float(beta), gamma=float(gamma), R=R_box, I=I)

    # largest delta for which every inclusion of the construction holds
    failure = None
    for delta in sorted(delta_grid, reverse=True):
        if not _ball_in_image(f, q_hat, 3 * delta, beta, gamma, R_box):
            failure = failure or InversionFailure(
                "no delta with B_3delta(q_hat) inside s_hat((-beta, gamma) x R)",
                inclusion="B_3delta(q_hat) in s_hat((-beta,gamma) x R)")
            continue
        # |t_eps - s_eps| = |A_eps| over the spatial preimage of the 3 delta ball
        ball_pts = Ball(q_hat, 3 * delta).closed_samples(m + 2)
        pre, _ = s_closed_inverse(f, np.column_stack([ball_pts, np.zeros(len(ball_pts))]))
        h_sup = 0.0
        for e in eps_list:
            _, A = family.evaluator(e).w_parts_batch(pre)
            h_sup = max(h_sup, float(np.max(np.abs(A))))
        eta = max(delta, h_sup + delta)
        big = CylinderSet(q, 3 * delta, 2 * eta + delta)
        big_pre, res = s_closed_inverse(f, big.closed_samples(m, m_h))
        if np.any(res >= 1e-10) or not np.all(P.box.contains(big_pre)):
            names = P.box.violated(big_pre)
            which = "I" if "V" in names else "R" if ("X" in names or "Y" in names) else "(-beta,gamma)"
            failure = InversionFailure(
                f"s^-1 of the closed cylinder B^Z_(3delta,2eta+delta)(q) leaves P (component {which})",
                inclusion=f"s^-1(cyl) in P: {which}")
            continue
        break
    else:
        raise failure
    Qset = CylinderSet(q, delta, eta)

    s_f = lambda X: s_closed_batch(f, X)  # noqa: E731
    s_inv = lambda Z: s_closed_inverse(f, Z)[0]  # noqa: E731
    reports = {}
    passed = {}
    for e in sorted(eps_list, reverse=True):
        ev = family.evaluator(e)

        def g_solve(targets, seeds, ev=ev):
            X, res, ok = newton_invert_batch(ev, targets, seeds)
            return X, np.where(ok, res, np.inf)

        inst = StabilityInstance(
            f=s_f, g=lambda X, ev=ev: ev.t_batch(X, use_cache=False), W=Qset, y=q,
            delta=delta, eta=eta, A=PreimageRegion(s_f, Qset.expanded(delta, eta), s_inv),
            f_inv=s_inv, g_solve=g_solve, sample_args=(m, m_h),
        )
        rep = stability_check(inst)
        targets = Qset.closed_samples(m, m_h)
        X, res, ok = newton_invert_batch(ev, targets, s_inv(targets))
        in_P = P.box.contains(X)
        inv_ok = bool(np.all(ok) and np.all(res < 1e-8) and np.all(in_P))
        reports[e] = {
            "hypotheses_ok": rep.hypotheses_ok, "inclusion_ok": rep.inclusion_ok,
            "sup_hat": rep.sup_hat, "sup_last": rep.sup_last, "margin": rep.margin,
            "inverse_in_P": inv_ok, "max_residual": float(np.max(res)),
            "min_P_margin": float(np.min(P.box.margin(X))),
        }
        passed[e] = bool(rep.hypotheses_ok and rep.inclusion_ok and inv_ok)
    eps0 = None
    for e in sorted(eps_list):
        if not passed.get(e, False):
            break
        eps0 = e
    if eps0 is None:
        raise InversionFailure("no scheduled eps passes the inclusion Q-bar in t_eps(P)",
                               inclusion="Q-bar in t_eps(P)")
    certified = tuple(e for e in sorted(eps_list, reverse=True) if e <= eps0)
    return InversionData(P=P, Q=Qset, eps0=eps0, anchor_p=SpacetimePoint(*map(float, p)),
                         anchor_q=SpacetimePoint(*map(float, q)), delta=delta, eta=eta,
                         alpha=alpha, h_sup=h_sup, certified_eps=certified, reports=reports,
                         family=family)


@dataclass
class CompositionReport:
    eps: tuple
    on_Q: tuple
    on_A: tuple

    @property
    def max_on_Q(self) -> float:
        return max(self.on_Q) if self.on_Q else 0.0

    @property
    def max_on_A(self) -> float:
        return max(self.on_A) if self.on_A else 0.0


def composition_residuals(data: InversionData, f: WaveProfile, family: TransformFamily | None = None,
                          m: int = 7, m_h: int = 5) -> CompositionReport:
    """``max |t(t^-1(q)) - q|`` over samples of ``Q-bar`` and ``max |t^-1(t(x)) - x|`` over
    samples ``x`` of ``A = s^-1(Q-bar)``, per certified eps."""
    family = family or data.family
    Qs = data.Q.closed_samples(m, m_h)
    A_pts, _ = s_closed_inverse(f, Qs)
    eps_l, onq, ona = [], [], []
    for e in data.certified_eps:
        ev = family.evaluator(e)
        X, _, ok = newton_invert_batch(ev, Qs, A_pts)
        if not np.all(ok):
            raise DomainError(f"inverse undefined at some sample of Q-bar for eps={e}")
        rq = float(np.max(np.abs(ev.t_batch(X, use_cache=False) - Qs)))
        T = ev.t_batch(A_pts, use_cache=False)
        seeds, _ = s_closed_inverse(f, T)
        Y, _, ok2 = newton_invert_batch(ev, T, seeds)
        ra = float(np.max(np.abs(Y - A_pts))) if np.all(ok2) else math.inf
        eps_l.append(e)
        onq.append(rq)
        ona.append(ra)
    return CompositionReport(tuple(eps_l), tuple(onq), tuple(ona))


def round_trip(data: InversionData, f: WaveProfile, rng: np.random.Generator, n: int = 200,
               family: TransformFamily | None = None) -> dict:
    """``max |t_eps^-1(t_eps(p')) - p'|`` for ``n`` random ``p'`` in ``P`` per certified eps."""
    family = family or data.family
    pts = data.P.sample(rng, n)
    out = {}
    for e in data.certified_eps:
        ev = family.evaluator(e)
        T = ev.t_batch(pts)
        seeds, _ = s_closed_inverse(f, T)
        X, _, ok = newton_invert_batch(ev, T, seeds)
        out[e] = float(np.max(np.abs(X - pts))) if np.all(ok) else math.inf
    return out
