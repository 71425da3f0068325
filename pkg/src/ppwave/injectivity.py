"""Injectivity regions, principal-minor certificates and collision scans.

Every result here is finite-sample evidence: collisions are searched on
uniform grids and refined by Newton's method, minors are sampled on slabs.
Since ``V`` enters ``t_eps`` only as an additive shift of the last component,
injectivity on ``(-a, alpha] x K x R`` reduces to the spatial map
``(U, X, Y) -> (U, x_eps)`` on the slice ``V = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geodesics import spectral_norm_2x2
from .profiles import WaveProfile
from .transform import TransformEvaluator, TransformFamily, principal_minors, spatial_closed

U_FAR = 2.0
DEFAULT_ETA_GRID = tuple(np.round(np.arange(0.95, 0.0, -0.05), 10))


# ----------------------------------------------------------------------------
# injectivity region


def sampled_envelope(f: WaveProfile, X, Y, n_r: int = 33, n_theta: int = 128) -> np.ndarray:
    """``sup_{|z| <= |(X, Y)|} ||Hess f(z) / 2||`` by polar sampling plus one local refinement."""
    X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
    shape = X.shape
    r = np.hypot(X, Y).ravel()
    rr = np.linspace(0.0, 1.0, n_r)
    th = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(rr, th, indexing="ij")
    unit = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])

    def norms(pts):
        return spectral_norm_2x2(0.5 * f.hess(pts[..., 0], pts[..., 1]))

    pts = r[:, None, None] * unit[None]
    vals = norms(pts)
    best = vals.max(axis=1)
    k = vals.argmax(axis=1)
    # refine in a polar cell around each maximizer
    ri, ti = np.unravel_index(k, R.shape)
    dr, dt = 1.0 / (n_r - 1), 2.0 * np.pi / n_theta
    off = np.linspace(-1.0, 1.0, 9)
    orr, ott = np.meshgrid(off, off, indexing="ij")
    loc_r = np.clip(rr[ri][:, None] + dr * orr.ravel()[None], 0.0, 1.0)
    loc_t = th[ti][:, None] + dt * ott.ravel()[None]
    loc = np.stack([loc_r * np.cos(loc_t), loc_r * np.sin(loc_t)], axis=-1) * r[:, None, None]
    best = np.maximum(best, norms(loc).max(axis=1))
    return best.reshape(shape)


@dataclass(frozen=True)
class InjectivityRegion:
    """``W = {(U, X, Y): -a < U < min(b_cap, 1 / h(X, Y))}`` with ``1 / 0 = inf``."""

    h_eval: Callable
    b_cap: float = math.inf
    a: float = U_FAR
    analytic: bool = False

    def upper(self, X, Y):
        h = np.asarray(self.h_eval(X, Y), float)
        with np.errstate(divide="ignore"):
            inv = np.where(h > 0, 1.0 / np.where(h > 0, h, 1.0), np.inf)
        return np.minimum(self.b_cap, inv)

    def contains(self, U, X, Y):
        U = np.asarray(U, float)
        return (U > -self.a) & (U < self.upper(X, Y))


def injectivity_region(f: WaveProfile, b_cap: float = math.inf, a: float = U_FAR,
                       prefer_analytic: bool = True) -> InjectivityRegion:
    """Region on which the closed-form spatial map is injective.

    ``h`` is the envelope of ``||Hess f / 2||`` over centred closed discs; the
    profile's analytic envelope is used when present and ``prefer_analytic``.
    """
    if prefer_analytic and f.envelope is not None:
        return InjectivityRegion(f.envelope, b_cap, a, analytic=True)
    return InjectivityRegion(lambda X, Y: sampled_envelope(f, X, Y), b_cap, a, analytic=False)


# ----------------------------------------------------------------------------
# collision scans


@dataclass(frozen=True)
class Collision:
    U: float
    a: tuple[float, float]
    b: tuple[float, float]
    image_gap: float
    eps: float | None = None


def _grid(K, n):
    (x0, x1), (y0, y1) = K
    gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _spatial(ev, U, XY, use_cache=True):
    P = np.column_stack([np.full(len(XY), U), XY, np.zeros(len(XY))])
    if isinstance(ev, TransformEvaluator):
        st = ev.states(P, use_cache)
        return st.x, st.J
    f = ev  # closed form on a profile
    x = spatial_closed(f, U, XY)
    J = np.eye(2) + 0.5 * f.hess(XY[:, 0], XY[:, 1]) * max(U, 0.0)
    return x, J


def _refine(ev, U, a, b, K, iters: int = 30):
    """Solve ``x(a) = x(b)`` for ``a`` with ``b`` fixed, by damped Newton clipped to ``K``."""
    lo = np.array([K[0][0], K[1][0]])
    hi = np.array([K[0][1], K[1][1]])
    target, _ = _spatial(ev, U, b, use_cache=False)
    xa, Ja = _spatial(ev, U, a, use_cache=False)
    res = np.linalg.norm(xa - target, axis=1)
    active = np.ones(len(a), bool)
    for _ in range(iters):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        det = np.linalg.det(Ja[idx])
        ok = np.abs(det) > 1e-12
        step = np.zeros((idx.size, 2))
        if np.any(ok):
            step[ok] = np.linalg.solve(Ja[idx][ok], (target[idx] - xa[idx])[ok][..., None])[..., 0]
        lam = np.ones(idx.size)
        cand = np.clip(a[idx] + step, lo, hi)
        for _ in range(6):
            xc, Jc = _spatial(ev, U, cand, use_cache=False)
            rc = np.linalg.norm(xc - target[idx], axis=1)
            worse = rc >= res[idx]
            if not np.any(worse):
                break
            lam[worse] *= 0.5
            cand[worse] = np.clip(a[idx][worse] + lam[worse, None] * step[worse], lo, hi)
        improved = (rc < res[idx]) & ok
        sel = idx[improved]
        a[sel], xa[sel], Ja[sel], res[sel] = cand[improved], xc[improved], Jc[improved], rc[improved]
        active[idx[~improved]] = False
        active[res < 1e-13] = False
    return a, res


def find_collisions(ev, U: float, K, n_grid: int = 33, min_sep: float | None = None,
                    image_tol: float = 1e-9, max_candidates: int = 48,
                    anchors=None, seeds=None) -> list[Collision]:
    """Collisions of the spatial map at parameter ``U`` on the box ``K``.

    ``ev`` is a ``TransformEvaluator`` or, for the closed form, a profile.
    Image-space nearest neighbours (k-d tree) among grid points at least
    ``min_sep`` apart in the domain give candidates; each is refined by
    solving ``x(a) = x(b)``. A collision is reported when the refined ``a``
    stays ``min_sep / 2`` away from ``b`` and the image gap is below
    ``image_tol``. With ``anchors`` the search is restricted to partners
    of the given points: each anchor is paired with the far grid point whose
    image is nearest to its own, or with the matching entry of ``seeds``
    when starting points for the partners are known.
    """
    XY = _grid(K, n_grid)
    spacing = max((K[0][1] - K[0][0]), (K[1][1] - K[1][0])) / (n_grid - 1)
    if min_sep is None:
        min_sep = 3.0 * spacing
    img, _ = _spatial(ev, U, XY)
    tree = cKDTree(img)
    if anchors is not None:
        B = np.atleast_2d(np.asarray(anchors, float))
        if seeds is not None:
            pa = np.atleast_2d(np.asarray(seeds, float)).copy()
            if pa.shape != B.shape:
                raise ValueError("seeds must match anchors in shape")
            return _collect(ev, U, K, pa, B.copy(), min_sep, image_tol)
        bimg, _ = _spatial(ev, U, B)
        dist, nbr = tree.query(bimg, k=min(64, len(XY)))
        far = np.linalg.norm(XY[nbr] - B[:, None, :], axis=-1) >= min_sep
        first = np.argmax(far, axis=1)
        rows = np.flatnonzero(far.any(axis=1))
        pa = XY[nbr[rows, first[rows]]].copy()
        pb = B[rows]
        return _collect(ev, U, K, pa, pb, min_sep, image_tol)
    k = min(16, len(XY))
    dist, nbr = tree.query(img, k=k)
    i = np.repeat(np.arange(len(XY)), k)
    j = nbr.ravel()
    d = dist.ravel()
    sep = np.linalg.norm(XY[i] - XY[j], axis=1)
    keep = (sep >= min_sep) & (i < j)
    if not np.any(keep):
        return []
    i, j, d = i[keep], j[keep], d[keep]
    order = np.argsort(d)[:max_candidates]
    i, j, d = i[order], j[order], d[order]
    return _collect(ev, U, K, XY[i].copy(), XY[j].copy(), min_sep, image_tol)


def _collect(ev, U, K, a, b, min_sep, image_tol) -> list[Collision]:
    a, res = _refine(ev, U, a, b, K)
    out = []
    eps = getattr(ev, "eps", None)
    for m in range(len(a)):
        if res[m] < image_tol and np.linalg.norm(a[m] - b[m]) >= 0.5 * min_sep:
            out.append(Collision(float(U), (float(a[m, 0]), float(a[m, 1])),
                                 (float(b[m, 0]), float(b[m, 1])), float(res[m]), eps))
    return out


def _largest_eps0(admissible: Sequence[float], ok: Callable[[float], bool]):
    """Largest ``e`` in ``admissible`` such that ``ok`` holds for it and every smaller value."""
    best = None
    for e in sorted(admissible):
        if not ok(e):
            break
        best = e
    return best


@dataclass
class PropertyEReport:
    alpha: Optional[float]
    eps0: Optional[float]
    collisions: list = field(default_factory=list)
    first_collision_U: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.alpha is not None


def check_property_E(family: TransformFamily, K, alpha_search: Sequence[float] = DEFAULT_ETA_GRID,
                     n_grid: int = 25, n_u: int = 12, u_far: float = U_FAR,
                     image_tol: float = 1e-9) -> PropertyEReport:
    """Largest ``alpha`` (and ``eps0``) with no collisions on ``(-u_far, alpha] x K x {0}``.

    U-slices below ``-eps`` are skipped past the first one, the map being
    the identity there.
    """
    alphas = sorted({float(a) for a in alpha_search}, reverse=True)
    admissible = family.admissible(K)
    first_bad: dict[float, float] = {}
    collisions: list[Collision] = []
    amax = alphas[0]
    for eps in admissible:
        ev = family.evaluator(eps)
        slices = np.unique(np.concatenate([[-u_far], np.linspace(-eps, amax, n_u), alphas]))
        first_bad[eps] = math.inf
        for U in slices:
            if U > amax:
                break
            hits = find_collisions(ev, float(U), K, n_grid=n_grid, image_tol=image_tol)
            if hits:
                first_bad[eps] = float(U)
                collisions.extend(hits)
                break
    for alpha in alphas:
        eps0 = _largest_eps0(admissible, lambda e: alpha < first_bad[e])
        if eps0 is not None:
            return PropertyEReport(alpha, eps0, collisions, first_bad)
    return PropertyEReport(None, None, collisions, first_bad)


# ----------------------------------------------------------------------------
# minor certificate


@dataclass(frozen=True)
class MinorCertificate:
    K: tuple
    delta: float
    eta: Optional[float]
    eps0: Optional[float]
    worst_minor_deviation: float
    per_eps_deviation: tuple = ()

    @property
    def certified(self) -> bool:
        return self.eta is not None


def minor_deviation_profile(ev: TransformEvaluator, K, U_values: Sequence[float], n_grid: int = 17) -> np.ndarray:
    """Max over the ``K`` grid of ``|minor - 1|`` (all principal minors) per U value."""
    XY = _grid(K, n_grid)
    out = []
    for U in U_values:
        P = np.column_stack([np.full(len(XY), U), XY, np.zeros(len(XY))])
        out.append(float(np.max(np.abs(principal_minors(ev.jacobian_batch(P)) - 1.0))))
    return np.array(out)


def minor_certificate(family: TransformFamily, K, delta: float,
                      eta_grid: Sequence[float] = DEFAULT_ETA_GRID, n_grid: int = 17, n_u: int = 24,
                      u_far: float = U_FAR) -> MinorCertificate:
    """Largest ``(eta, eps0)`` with every principal minor of ``D t_eps`` in ``(1 - delta, 1 + delta)``.

    The slab ``(-u_far, eta] x K x {0}`` is sampled on U-slices; the
    condition must hold for every admissible scheduled eps up to ``eps0``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    etas = sorted({float(e) for e in eta_grid}, reverse=True)
    admissible = family.admissible(K)
    slabs = {}
    for eps in admissible:
        ev = family.evaluator(eps)
        U = np.unique(np.concatenate([[-u_far], np.linspace(-eps, etas[0], n_u), etas]))
        dev = minor_deviation_profile(ev, K, U, n_grid)
        slabs[eps] = (U, np.maximum.accumulate(dev))

    def worst(eps, eta):
        U, cum = slabs[eps]
        return float(cum[np.searchsorted(U, eta, side="right") - 1])

    for eta in etas:
        eps0 = _largest_eps0(admissible, lambda e: worst(e, eta) < delta)
        if eps0 is not None:
            used = [e for e in admissible if e <= eps0]
            per = tuple((e, worst(e, eta)) for e in used)
            return MinorCertificate(tuple(map(tuple, K)), delta, eta, eps0, max(w for _, w in per), per)
    return MinorCertificate(tuple(map(tuple, K)), delta, None, None, math.inf)
