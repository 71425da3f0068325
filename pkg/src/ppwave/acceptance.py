"""The ten acceptance criteria as plain functions returning structured results.

Each function computes its evidence and a pass flag against the stated
tolerance; the test suite re-asserts the same numbers and the CLI ``accept``
subcommand prints and stores them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .convergence import converge_derivatives, converge_s, pullback_check
from .delta_nets import DEFAULT_SCHEDULE, check_strict_delta, model_net
from .eps_nets import SampledNet, estimate_growth_order
from .geodesics import InitialData, geodesic_state
from .injectivity import find_collisions, minor_certificate, sampled_envelope
from .inversion import build_inversion_data, composition_residuals, round_trip, stability_check, translation_instance
from .profiles import builtin_profile
from .transform import TransformEvaluator, TransformFamily, leading_minors


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every random probe."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    elapsed: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} ({self.elapsed:.2f} s)"


def _timed(fn: Callable[[], tuple[bool, dict]], number: int, name: str) -> CriterionResult:
    t0 = time.perf_counter()
    ok, details = fn()
    return CriterionResult(number, name, bool(ok), time.perf_counter() - t0, details)


def _decreasing(seq) -> bool:
    return all(b < a for a, b in zip(seq, seq[1:]))


def criterion_1(seed: int = 0) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        out = {}
        ok = True
        for kind in ("bump", "cosine_squared"):
            rep = check_strict_delta(model_net(kind), DEFAULT_SCHEDULE)
            out[kind] = {"support_violations": rep.support_violations, "mass_errors": rep.mass_errors,
                         "l1": rep.l1, "l1_ratio_minus_1": rep.l1_ratio - 1.0}
            ok &= rep.support_violations == 0 and max(rep.mass_errors) < 1e-10 and rep.l1_ratio - 1.0 < 1e-8
        runtime = time.perf_counter() - t0
        out["runtime"] = runtime
        return ok and runtime < 1.0, out
    return _timed(run, 1, "strict delta net suite")


def criterion_2(seed: int = 0, steps_per_eps: int = 64) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        f = builtin_profile("quadratic_saddle")
        net = model_net("bump")
        init = InitialData((1.0, 1.0))
        ex, ev_ = [], []
        for eps in DEFAULT_SCHEDULE:
            x, _, v, _ = geodesic_state(f, net, eps, init, [1.0], steps_per_eps)
            ex.append(float(np.linalg.norm(x[0] - [2.0, 0.0])))
            ev_.append(float(abs(v[0] - 2.0)))
        runtime = time.perf_counter() - t0
        ok = (_decreasing(ex) and _decreasing(ev_) and ex[-1] < 1e-2 and ev_[-1] < 1e-2 and runtime < 5.0)
        return ok, {"x_errors": ex, "v_errors": ev_, "runtime": runtime}
    return _timed(run, 2, "geodesic limit oracle")


def jacobian_fd_errors(ev: TransformEvaluator, P: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Per-point relative max-entry error between the variational Jacobian and central differences."""
    J = ev.jacobian_batch(P)
    fd = np.empty_like(J)
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd[:, :, k] = (ev.t_batch(P + e, use_cache=False) - ev.t_batch(P - e, use_cache=False)) / (2 * h)
    return np.max(np.abs(J - fd), axis=(1, 2)) / np.max(np.abs(J), axis=(1, 2))


def criterion_3(seed: int = 0, eps: float = 0.05) -> CriterionResult:
    def run():
        f = builtin_profile("quadratic_saddle")
        ev = TransformEvaluator(f, model_net("bump"), eps)
        P = make_rng(seed).uniform(-0.5, 0.5, size=(100, 4))
        rel = jacobian_fd_errors(ev, P)
        J = ev.jacobian_batch(P)
        lm = leading_minors(J)
        spatial = J[:, 1, 1] * J[:, 2, 2] - J[:, 1, 2] * J[:, 2, 1]
        det_gap = float(np.max(np.abs(lm[:, 3] - spatial)))
        first_exact = bool(np.all(lm[:, 0] == 1.0))
        ok = float(rel.max()) < 1e-4 and first_exact and det_gap < 1e-12
        return ok, {"eps": eps, "max_rel_error": float(rel.max()), "first_minor_exact": first_exact,
                    "det_vs_spatial": det_gap, "n_points": len(P), "seed": seed}
    return _timed(run, 3, "Jacobian consistency")


def criterion_4(seed: int = 0) -> CriterionResult:
    def run():
        f = builtin_profile("quadratic_saddle")
        fam = TransformFamily(f, model_net("bump"), DEFAULT_SCHEDULE)
        cert = minor_certificate(fam, ((-1.0, 1.0), (-1.0, 1.0)), 0.5)
        ok = (cert.eta is not None and cert.eta >= 0.2 and cert.eps0 >= 0.0125
              and cert.worst_minor_deviation < 0.5)
        return ok, {"eta": cert.eta, "eps0": cert.eps0, "worst_minor_deviation": cert.worst_minor_deviation}
    return _timed(run, 4, "minor certificate")


def criterion_5(seed: int = 0) -> CriterionResult:
    def run():
        r = np.linspace(0.05, 2.0, 40)
        th = np.array([0.0, 0.4, np.pi / 4, 1.1, np.pi / 2, 2.5, 4.0])
        X, Y = np.outer(r, np.cos(th)), np.outer(r, np.sin(th))
        rel = {}
        for name in ("quadratic_saddle", "quartic_negative"):
            f = builtin_profile(name)
            hs, ha = sampled_envelope(f, X, Y), f.envelope(X, Y)
            rel[name] = float(np.max(np.abs(hs - ha) / ha))
        q = builtin_profile("quartic_negative")
        K = ((-2.0, 2.0), (-2.0, 2.0))
        eps = DEFAULT_SCHEDULE[-1]
        ev = TransformEvaluator(q, model_net("bump"), eps, box=K)
        eta = 0.25
        s = 1.0 / math.sqrt(eta)
        anchors = [(s, s), (-s, -s)]
        hits = find_collisions(ev, eta, K, n_grid=33, image_tol=1e-2, anchors=anchors,
                               seeds=[(0.0, 0.0), (0.0, 0.0)])
        near_origin = [c for c in hits if math.hypot(*c.a) < 0.25 and c.image_gap < 1e-2]
        anchors_hit = {c.b for c in near_origin}
        img = ev.t_batch(np.array([[eta, 0.0, 0.0, 0.0], [eta, s, s, 0.0], [eta, -s, -s, 0.0]]))[:, 1:3]
        raw_gap = float(max(np.linalg.norm(img[1] - img[0]), np.linalg.norm(img[2] - img[0])))
        ok = max(rel.values()) < 1e-3 and len(anchors_hit) == 2
        return ok, {"envelope_rel_error": rel, "eps": eps,
                    "collisions": [(c.a, c.b, c.image_gap) for c in near_origin],
                    "raw_image_gap_to_origin": raw_gap}
    return _timed(run, 5, "injectivity regions and collapsing triple")


def criterion_6(seed: int = 0) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        f = builtin_profile("quadratic_saddle")
        fam = TransformFamily(f, model_net("bump"), DEFAULT_SCHEDULE)
        a = converge_s(fam, f, ((-1.0, 1.0),) * 4)
        b = converge_derivatives(fam, f, ((-1.0, 1.0),) * 4, u_gap=0.1)
        runtime = time.perf_counter() - t0
        ok = (a.monotone(0.1) and b.monotone(0.1) and a.final < 1e-2 and b.final < 1e-2 and runtime < 60.0)
        return ok, {"s_sup": a.sup_norms, "dU_sup": b.sup_norms, "runtime": runtime}
    return _timed(run, 6, "convergence tables")


def criterion_7(seed: int = 0) -> CriterionResult:
    def run():
        f = builtin_profile("quadratic_saddle")
        fam = TransformFamily(f, model_net("bump"), DEFAULT_SCHEDULE)
        p = (0.5, 0.3, 0.4, 0.0)
        target = {"XX": 2.25, "YY": 0.25, "XY": 0.0, "UV": -0.5}
        rows = []
        for eps, ev in fam:
            r = pullback_check(ev, f, p)
            rows.append({"eps": eps, "gap": r.max_abs_gap,
                         **{k: r.pulled[k] for k in ("XX", "YY", "XY", "UV", "UU", "UX", "UY")}})
        last = rows[-1]
        entry_gap = max(abs(last[k] - v) for k, v in target.items())
        du_row = max(abs(last[k]) for k in ("UU", "UX", "UY"))
        ok = last["gap"] < 1e-2 and entry_gap < 1e-2 and du_row < 1e-2
        return ok, {"rows": rows, "entry_gap": entry_gap, "dU_row_max": du_row}
    return _timed(run, 7, "pullback equivalence")


def criterion_8(seed: int = 0) -> CriterionResult:
    def run():
        f = builtin_profile("quadratic_saddle")
        fam = TransformFamily(f, model_net("bump"), DEFAULT_SCHEDULE)
        data = build_inversion_data(fam, f, (0.0, 1.0, 1.0, 0.0), ((0.0, 2.0), (0.0, 2.0)), 1.0, (-4.0, 4.0))
        rt = round_trip(data, f, make_rng(seed), 200)
        comp = composition_residuals(data, f)
        nonempty = data.Q.radius_spatial > 0 and data.Q.half_height > 0
        ok = (nonempty and max(rt.values()) < 1e-6 and comp.max_on_Q < 1e-8 and comp.max_on_A < 1e-8)
        return ok, {"eps0": data.eps0, "gamma": data.P.gamma, "delta": data.delta, "eta": data.eta,
                    "round_trip": rt, "composition_Q": comp.on_Q, "composition_A": comp.on_A, "seed": seed}
    return _timed(run, 8, "inversion round trip")


def criterion_9(seed: int = 0) -> CriterionResult:
    def run():
        delta = 0.5
        good = stability_check(translation_instance(delta))
        bad = stability_check(translation_instance(delta, shift=2.0 * delta))
        ok = (good.hypotheses_ok and good.inclusion_ok is True
              and bad.hypotheses_ok is False and bad.inclusion_ok is None)
        return ok, {"base": {"sup_hat": good.sup_hat, "margin": good.margin},
                    "doubled_past_delta": {"sup_hat": bad.sup_hat, "hypotheses_ok": bad.hypotheses_ok}}
    return _timed(run, 9, "stability instance")


def criterion_10(seed: int = 0) -> CriterionResult:
    def run():
        net = model_net("bump")
        box = ((-1.0, 1.0),)
        fams = {
            "one": (lambda e, x: np.ones(len(x)), 0.0),
            "delta": (lambda e, x: net.delta(e, x[:, 0]), -1.0),
            "eps_squared": (lambda e, x: np.full(len(x), e * e), 2.0),
        }
        out = {}
        ok = True
        for name, (fn, expect) in fams.items():
            rep = estimate_growth_order(SampledNet.from_callable(fn, DEFAULT_SCHEDULE, box))
            out[name] = rep.fitted_exponent
            ok &= abs(rep.fitted_exponent - expect) < 0.05
        return ok, out
    return _timed(run, 10, "growth-order estimator")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(seed: int = 0, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    results = []
    for crit in CRITERIA:
        r = crit(seed)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
