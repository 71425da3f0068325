"""Uniform convergence tables for ``s_eps -> s`` and ``dt_eps/dU -> dt/dU``, the
hypothesis checks of the compact-convergence criterion, and the metric pullback check.

No rate is asserted anywhere: tables carry a fitted log-log slope for
information, and the checks are monotone decrease plus a final threshold.
Sup-norms are grid maxima (33 points per axis; 3 along ``V``, on which the
differences do not depend) followed by one refinement pass around the
maximizer.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .eps_nets import BOUNDED_EXPONENT, fit_loglog
from .errors import PreconditionError
from .profiles import MetricComponents, WaveProfile, metric_continuous, metric_regularized
from .transform import (TransformEvaluator, TransformFamily, dU_t_closed_batch, s_closed_batch)

GRID_N = 33
V_N = 3


@dataclass
class ConvergenceTable:
    """Per-eps sup-norms of a monitored difference over ``region``."""

    region: tuple
    eps: tuple
    sup_norms: tuple
    u_gap: float = 0.0
    monitor: str = ""
    argmax: tuple = ()
    fitted_slope: float = math.nan

    def monotone(self, slack: float = 0.1) -> bool:
        """Each sup-norm is at most ``(1 + slack)`` times its predecessor."""
        s = self.sup_norms
        return all(b <= (1.0 + slack) * a for a, b in zip(s, s[1:]))

    @property
    def final(self) -> float:
        return self.sup_norms[-1]

    def rows(self):
        return list(zip(self.eps, self.sup_norms))

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "sup_norm"])
        for e, s in self.rows():
            w.writerow([f"{e:.17g}", f"{s:.17g}"])
        text = buf.getvalue()
        if out is not None:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        return text


def _slope(eps, sups) -> float:
    eps = np.asarray(eps, float)
    sups = np.asarray(sups, float)
    keep = sups > 0
    if keep.sum() < 2:
        return math.nan
    return fit_loglog(eps[keep], sups[keep])[0]


def _axes(region, n, u_values=None):
    axes = []
    for k, (lo, hi) in enumerate(region):
        if k == 0 and u_values is not None:
            axes.append(np.asarray(u_values, float))
        elif k == 3:
            axes.append(np.linspace(lo, hi, V_N))
        else:
            axes.append(np.linspace(lo, hi, n))
    return axes


def _grid(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _sup_with_refinement(diff: Callable[[np.ndarray], np.ndarray], region, n, u_values=None,
                         allowed: Callable[[np.ndarray], np.ndarray] | None = None):
    axes = _axes(region, n, u_values)
    pts = _grid(axes)
    vals = diff(pts)
    k = int(np.argmax(vals))
    best, where = float(vals[k]), pts[k]
    # one refinement pass in the grid cell around the maximizer (U, X, Y)
    local = []
    for j in range(3):
        ax = axes[j]
        step = (ax[-1] - ax[0]) / max(len(ax) - 1, 1) if len(ax) > 1 else 0.0
        lo = max(where[j] - step, region[j][0])
        hi = min(where[j] + step, region[j][1])
        local.append(np.linspace(lo, hi, 9))
    local.append(np.array([where[3]]))
    lp = _grid(local)
    if allowed is not None:
        lp = lp[allowed(lp)]
    if len(lp):
        lv = diff(lp)
        j = int(np.argmax(lv))
        if lv[j] > best:
            best, where = float(lv[j]), lp[j]
    return best, tuple(map(float, where))


def _check_region(region):
    region = tuple((float(lo), float(hi)) for lo, hi in region)
    if len(region) != 4 or any(hi < lo for lo, hi in region):
        raise PreconditionError("region must be a compact box in R^4 ordered (U, X, Y, V)")
    return region


def converge_s(family: TransformFamily, f: WaveProfile, region=((-1, 1),) * 4, n: int = GRID_N) -> ConvergenceTable:
    """``sup |s_eps - s|`` (Euclidean norm of the 4-vector) over ``region`` per eps."""
    region = _check_region(region)
    eps_l, sups, arg = [], [], []
    for eps, ev in family:
        def diff(P, ev=ev):
            return np.linalg.norm(ev.s_batch(P) - s_closed_batch(f, P), axis=1)
        s, w = _sup_with_refinement(diff, region, n)
        eps_l.append(eps)
        sups.append(s)
        arg.append(w)
    return ConvergenceTable(region, tuple(eps_l), tuple(sups), 0.0, "s", tuple(arg), _slope(eps_l, sups))


def converge_derivatives(family: TransformFamily, f: WaveProfile, region=((-1, 1),) * 4, u_gap: float = 0.1,
                         n: int = GRID_N) -> ConvergenceTable:
    """``sup |dt_eps/dU - dt/dU|`` over ``region`` minus the slab ``|U| < u_gap``."""
    region = _check_region(region)
    if not u_gap > 0:
        raise PreconditionError("u_gap must be positive: the derivative of t jumps at U = 0")
    lo, hi = region[0]
    halves = []
    if lo <= -u_gap:
        halves.append(np.linspace(lo, min(hi, -u_gap), (n + 1) // 2))
    if hi >= u_gap:
        halves.append(np.linspace(max(lo, u_gap), hi, (n + 1) // 2))
    if not halves:
        raise PreconditionError("region lies entirely inside the excluded slab |U| < u_gap")
    u_values = np.unique(np.concatenate(halves))
    allowed = lambda P: np.abs(P[:, 0]) >= u_gap  # noqa: E731
    eps_l, sups, arg = [], [], []
    for eps, ev in family:
        def diff(P, ev=ev):
            return np.linalg.norm(ev.dU_batch(P) - dU_t_closed_batch(f, P), axis=1)
        s, w = _sup_with_refinement(diff, region, n, u_values, allowed)
        eps_l.append(eps)
        sups.append(s)
        arg.append(w)
    return ConvergenceTable(region, tuple(eps_l), tuple(sups), u_gap, "dU t", tuple(arg), _slope(eps_l, sups))


# ----------------------------------------------------------------------------
# hypotheses of the compact-convergence criterion


@dataclass
class HypothesisReport:
    c: float
    d: float
    eps: tuple
    cond1: tuple
    cond2: tuple
    cond3: tuple
    ok1: bool
    ok2: bool
    ok3: bool
    cond3_exponent: float = math.nan

    @property
    def ok(self) -> bool:
        return self.ok1 and self.ok2 and self.ok3


def _decreasing_to(values, tol, slack=0.1) -> bool:
    return all(b <= (1 + slack) * a for a, b in zip(values, values[1:])) and values[-1] < tol


def check_glm_konv_hypotheses(family: Callable, family_dt: Callable, limit: Callable, limit_dt: Callable,
                              K, eps: Sequence[float], c: float = -1.0, d: float = 0.5,
                              u_gap: float = 0.1, t_max: float = 1.0, n: int = 17,
                              tol: float = 1e-2) -> HypothesisReport:
    """Sampled check of the three hypotheses that upgrade convergence to all compacts.

    Maps take ``(eps, pts)`` (limits just ``pts``) with ``pts`` of shape
    ``(N, k + 1)``, the last column being the distinguished variable ``t``.
    ``K`` is a box in the first ``k`` coordinates.

    1. ``sup_K |f_eps(., c) - f(., c)|`` decreases to below ``tol``;
    2. ``sup |d_t f_eps - d_t f|`` on ``K x ([-t_max, -u_gap] u [u_gap, t_max])``
       decreases to below ``tol``;
    3. the same gap on ``K x ([-d, d] minus {0})`` stays bounded (fitted
       exponent at least -0.1). Layer-scale samples ``t = +-k eps / 8`` are
       included so that ``eps``-concentrated spikes are seen.
    """
    if not c < 0:
        raise PreconditionError("c must be negative")
    K = tuple((float(lo), float(hi)) for lo, hi in K)
    axes = [np.linspace(lo, hi, n) if hi > lo else np.array([lo]) for lo, hi in K]
    base = np.column_stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")])

    def with_t(ts):
        ts = np.asarray(ts, float)
        return np.column_stack([np.repeat(base, ts.size, axis=0), np.tile(ts, len(base))])

    eps = tuple(float(e) for e in eps)
    p1 = with_t([c])
    t_off = np.concatenate([np.linspace(-t_max, -u_gap, n), np.linspace(u_gap, t_max, n)])
    p2 = with_t(t_off)
    c1, c2, c3 = [], [], []
    lim1, lim2 = limit(p1), limit_dt(p2)
    for e in eps:
        c1.append(float(np.max(np.abs(family(e, p1) - lim1))))
        c2.append(float(np.max(np.abs(family_dt(e, p2) - lim2))))
        tg = np.linspace(-d, d, 2 * n + 1)
        tg = np.concatenate([tg, e * np.arange(-8, 9) / 8.0])
        tg = tg[(tg != 0.0) & (np.abs(tg) <= d)]
        p3 = with_t(np.unique(tg))
        c3.append(float(np.max(np.abs(family_dt(e, p3) - limit_dt(p3)))))
    ok1 = _decreasing_to(c1, tol) or max(c1) == 0.0
    ok2 = _decreasing_to(c2, tol) or max(c2) == 0.0
    s3 = np.asarray(c3)
    if np.all(s3 == 0.0):
        expo, ok3 = math.inf, True
    elif np.any(s3 == 0.0) or len(eps) < 2:
        expo, ok3 = math.nan, bool(np.all(np.isfinite(s3)))
    else:
        expo = fit_loglog(eps, s3)[0]
        ok3 = expo >= BOUNDED_EXPONENT
    return HypothesisReport(c, d, eps, tuple(c1), tuple(c2), tuple(c3), ok1, ok2, ok3, expo)


def w_family(family: TransformFamily, f: WaveProfile, XY_fixed_V: float = 0.0):
    """The ``(w_eps, w)`` pair in the form expected by :func:`check_glm_konv_hypotheses`.

    Points are ``(X, Y, V, U)`` with ``U`` last.
    """
    def to_P(pts):
        return np.column_stack([pts[:, 3], pts[:, 0], pts[:, 1], pts[:, 2]])

    def fam(e, pts):
        return family.evaluator(e).w_parts_batch(to_P(pts))[0]

    def fam_dt(e, pts):
        ev = family.evaluator(e)
        st = ev.states(to_P(pts))
        return st.Bdot

    def lim(pts):
        return s_closed_batch(f, to_P(pts))[:, 3]

    def lim_dt(pts):
        return dU_t_closed_batch(f, to_P(pts))[:, 3]

    return fam, fam_dt, lim, lim_dt


# ----------------------------------------------------------------------------
# pullback


@dataclass(frozen=True)
class PullbackResult:
    pulled: MetricComponents
    target: MetricComponents
    max_abs_gap: float
    eps: float


def pullback_check(ev: TransformEvaluator, f: WaveProfile, p) -> PullbackResult:
    """Pull the regularized metric at ``t_eps(p)`` back by ``D t_eps`` and compare with the
    continuous form at ``p``. Requires ``|U| > eps`` so that the delta term vanishes."""
    p = np.asarray(p, float)
    if not abs(p[0]) > ev.eps:
        raise PreconditionError(f"pullback needs |U| > eps (U={p[0]!r}, eps={ev.eps!r})")
    J = ev.jacobian(p).J
    M = metric_regularized(f, ev.net, ev.eps, ev.t_eps(p)).g
    pulled = J.T @ M @ J
    pulled = 0.5 * (pulled + pulled.T)
    target = metric_continuous(f, p).g
    return PullbackResult(MetricComponents(pulled), MetricComponents(target),
                          float(np.max(np.abs(pulled - target))), ev.eps)


PULLBACK_ENTRIES = ("UU", "UX", "UY", "UV", "XX", "XY", "YY", "XV", "YV", "VV")


def pullback_table(family: TransformFamily, f: WaveProfile, p) -> list[tuple]:
    """Rows ``(eps, entry, pulled, target, gap)`` over the schedule."""
    rows = []
    for eps, ev in family:
        r = pullback_check(ev, f, p)
        for key in PULLBACK_ENTRIES:
            a, b = r.pulled[key], r.target[key]
            rows.append((eps, key, a, b, abs(a - b)))
    return rows
