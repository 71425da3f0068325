"""Sampled eps-families of functions and empirical asymptotic probes.

Membership in the moderate or negligible classes cannot be decided from
finitely many eps. Everything here is a fitted-slope report over the
schedule, meant as evidence rather than proof.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, PreconditionError

BOUNDED_EXPONENT = -0.1
DECAYING_EXPONENT = 0.9

Alpha = tuple


def tensor_grid(box: Sequence[tuple[float, float]], n: int) -> np.ndarray:
    """Points of an ``n``-per-axis tensor grid on ``box``, shape ``(n**k, k)``."""
    axes = [np.linspace(lo, hi, n) if hi > lo else np.array([lo]) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass
class SampledNet:
    """Values of a family ``(u_eps)`` on a coarse and a refined grid of ``domain_box``.

    ``values[alpha][k]`` holds samples of the ``alpha`` derivative at
    ``eps[k]``; ``fine`` is the same on the refined grid (``2n - 1`` per axis)
    and feeds the Richardson guard on sup-norms.
    """

    eps: tuple[float, ...]
    domain_box: tuple
    n: int
    values: dict = field(default_factory=dict)
    fine: dict = field(default_factory=dict)

    @classmethod
    def from_callable(cls, fn: Callable[[float, np.ndarray], np.ndarray], eps: Sequence[float],
                      box, n: int = 33, derivatives: Mapping[Alpha, Callable] | None = None,
                      refine: bool = True) -> "SampledNet":
        """Sample ``fn(eps, points)`` (and optional derivative callables) over the schedule."""
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        funcs = {(0,) * len(box): fn}
        funcs.update(derivatives or {})
        coarse = tensor_grid(box, n)
        fine_pts = tensor_grid(box, 2 * n - 1) if refine else None
        net = cls(eps=tuple(float(e) for e in eps), domain_box=box, n=n)
        for alpha, g in funcs.items():
            net.values[tuple(alpha)] = [np.asarray(g(e, coarse), float) for e in net.eps]
            if refine:
                net.fine[tuple(alpha)] = [np.asarray(g(e, fine_pts), float) for e in net.eps]
        return net

    @classmethod
    def from_arrays(cls, eps: Sequence[float], arrays: Sequence[np.ndarray], box=((0.0, 1.0),),
                    alpha: Alpha | None = None) -> "SampledNet":
        box = tuple(tuple(b) for b in box)
        alpha = (0,) * len(box) if alpha is None else tuple(alpha)
        net = cls(eps=tuple(float(e) for e in eps), domain_box=box, n=len(arrays[0]))
        net.values[alpha] = [np.asarray(a, float) for a in arrays]
        return net

    def default_alpha(self) -> Alpha:
        return (0,) * len(self.domain_box)

    def _arrays(self, alpha):
        alpha = self.default_alpha() if alpha is None else tuple(alpha)
        if alpha not in self.values:
            raise PreconditionError(f"no derivative samples of order {alpha}")
        if len(self.values[alpha]) != len(self.eps):
            raise PreconditionError("incomplete samples for the schedule")
        return alpha, self.values[alpha], self.fine.get(alpha)

    def sup_norms(self, alpha=None) -> np.ndarray:
        """Grid sup-norms with one Richardson step ``M_f + max(0, (M_f - M_c) / 3)``."""
        _, coarse, fine = self._arrays(alpha)
        out = []
        for k, arr in enumerate(coarse):
            mc = _absmax(arr)
            if fine is None:
                out.append(mc)
                continue
            mf = _absmax(fine[k])
            out.append(mf + max(0.0, (mf - mc) / 3.0))
        return np.array(out)

    def infima(self, alpha=None) -> np.ndarray:
        _, coarse, fine = self._arrays(alpha)
        arrays = fine if fine is not None else coarse
        return np.array([float(np.min(np.abs(a))) for a in arrays])


def _absmax(a: np.ndarray) -> float:
    a = np.asarray(a, float)
    if a.ndim > 1:
        a = np.linalg.norm(a, axis=-1)
    return float(np.max(np.abs(a)))


def fit_loglog(eps: Sequence[float], vals: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit ``log vals = slope log eps + intercept``; returns (slope, intercept, rms residual)."""
    x = np.log(np.asarray(eps, float))
    y = np.log(np.asarray(vals, float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def classify_exponent(e: float) -> str:
    if e >= DECAYING_EXPONENT:
        return f"decaying_order_{int(math.floor(e + 0.1)) if math.isfinite(e) else 'inf'}"
    if e >= BOUNDED_EXPONENT:
        return "bounded"
    return f"moderate_order_{int(math.ceil(-e - 0.1))}"


@dataclass(frozen=True)
class GrowthReport:
    fitted_exponent: float
    residual: float
    classification: str
    eps: tuple[float, ...]
    sup_norms: tuple[float, ...]
    intercept: float = 0.0
    grid_resolution: int = 0

    @property
    def bounded(self) -> bool:
        return self.fitted_exponent >= BOUNDED_EXPONENT


def estimate_growth_order(net: SampledNet, alpha=None) -> GrowthReport:
    """Fit the slope of ``log sup_K |d^alpha u_eps|`` against ``log eps``.

    A family that vanishes identically on the grid is reported with an
    infinite exponent (negligible on the sample).
    """
    if len(net.eps) < 3:
        raise InsufficientDataError(f"need at least 3 schedule points, got {len(net.eps)}")
    sups = net.sup_norms(alpha)
    if np.all(sups == 0.0):
        return GrowthReport(math.inf, 0.0, classify_exponent(math.inf), net.eps, tuple(sups), 0.0, net.n)
    if np.any(sups == 0.0):
        # zero sup at some eps: fit over the nonzero ones only when enough remain
        keep = sups > 0
        if keep.sum() < 3:
            raise InsufficientDataError("fewer than 3 nonzero sup-norms")
        slope, icpt, res = fit_loglog(np.array(net.eps)[keep], sups[keep])
    else:
        slope, icpt, res = fit_loglog(net.eps, sups)
    return GrowthReport(slope, res, classify_exponent(slope), net.eps, tuple(map(float, sups)), icpt, net.n)


@dataclass(frozen=True)
class CBoundedReport:
    ok: bool
    witness: tuple[np.ndarray, np.ndarray]
    threshold_eps: float | None
    hulls: tuple
    growth_exponent: float | None = None

    def __bool__(self):
        return self.ok


def check_cbounded(net: SampledNet, target_box, alpha=None) -> CBoundedReport:
    """Empirical c-boundedness of a vector-valued family into ``target_box``.

    The tail of the schedule whose sample hulls lie strictly inside
    ``target_box`` is detected; the check passes if that tail is nonempty, its
    combined hull (the witness) is a compact sub-box of the target, and the
    sup-norm along the tail does not grow (fitted exponent at least -0.1 when
    three or more tail points exist). On failure the witness is the hull at
    the first escaping eps, scanning from the smallest.
    """
    _, arrays, _ = net._arrays(alpha)
    lo_t = np.array([b[0] for b in target_box], float)
    hi_t = np.array([b[1] for b in target_box], float)
    hulls = []
    for a in arrays:
        a = np.asarray(a, float).reshape(len(a), -1) if np.ndim(a) > 1 else np.asarray(a, float)[:, None]
        hulls.append((a.min(axis=0), a.max(axis=0)))
    inside = [bool(np.all(lo > lo_t) and np.all(hi < hi_t)) for lo, hi in hulls]

    order = np.argsort(net.eps)  # smallest first
    tail = []
    for k in order:
        if not inside[k]:
            break
        tail.append(int(k))
    if not tail:
        k = int(order[0])
        return CBoundedReport(False, hulls[k], None, tuple(hulls))
    lo = np.min([hulls[k][0] for k in tail], axis=0)
    hi = np.max([hulls[k][1] for k in tail], axis=0)
    growth = None
    ok = True
    if len(tail) >= 3:
        sups = np.array([max(np.max(np.abs(hulls[k][0])), np.max(np.abs(hulls[k][1]))) for k in tail])
        if np.all(sups > 0):
            growth, _, _ = fit_loglog(np.array(net.eps)[tail], sups)
            ok = growth >= BOUNDED_EXPONENT
    # escapes at eps above the detected threshold are allowed
    thr = float(max(net.eps[k] for k in tail))
    witness = (lo, hi) if ok else hulls[tail[0]]
    return CBoundedReport(ok, witness, thr, tuple(hulls), growth)


@dataclass(frozen=True)
class NonzeroReport:
    eps: tuple[float, ...]
    inf: tuple[float, ...]
    fitted_lower_exponent: float
    C: float
    ok: bool


def check_strictly_nonzero(net: SampledNet, alpha=None) -> NonzeroReport:
    """Per-eps infima of ``|u_eps|`` and the lower bound ``inf >= C eps^N``.

    ``N`` is the fitted slope of ``log inf`` against ``log eps`` and ``C`` the
    largest constant with ``inf_k >= C eps_k^N`` at every scheduled eps.
    """
    infs = net.infima(alpha)
    eps = np.asarray(net.eps, float)
    if np.any(infs <= 0.0):
        return NonzeroReport(net.eps, tuple(map(float, infs)), math.nan, 0.0, False)
    if len(eps) >= 2:
        slope, _, _ = fit_loglog(eps, infs)
    else:
        slope = 0.0
    C = float(np.min(infs / eps**slope))
    return NonzeroReport(net.eps, tuple(map(float, infs)), slope, C, C > 0.0)


def growth_csv(report: GrowthReport, out=None) -> str:
    """CSV with columns (eps, sup_norm, log_eps, log_sup, fitted_log_sup)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "sup_norm", "log_eps", "log_sup", "fitted_log_sup"])
    for e, s in zip(report.eps, report.sup_norms):
        le = math.log(e)
        ls = math.log(s) if s > 0 else float("-inf")
        w.writerow([f"{v:.17g}" for v in (e, s, le, ls, report.fitted_exponent * le + report.intercept)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def nonzero_csv(report: NonzeroReport, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "inf", "lower_bound"])
    for e, v in zip(report.eps, report.inf):
        w.writerow([f"{x:.17g}" for x in (e, v, report.C * e**report.fitted_lower_exponent
                                            if math.isfinite(report.fitted_lower_exponent) else 0.0)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text
