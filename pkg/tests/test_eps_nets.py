from __future__ import annotations

import numpy as np
import pytest

from ppwave.delta_nets import DEFAULT_SCHEDULE
from ppwave.eps_nets import (SampledNet, check_cbounded, check_strictly_nonzero, classify_exponent,
                             estimate_growth_order, fit_loglog, growth_csv, nonzero_csv)
from ppwave.errors import InsufficientDataError
from ppwave.geodesics import batch_states

BOX = ((-1.0, 1.0),)


def _net(fn, box=BOX, n=33):
    return SampledNet.from_callable(fn, DEFAULT_SCHEDULE, box, n=n)


@pytest.mark.parametrize("fn,expect,label", [
    (lambda e, x: np.sin(x[:, 0]), 0.0, "bounded"),
    (lambda e, x: e * e * np.sin(x[:, 0]), 2.0, "decaying"),
])
def test_growth_exponents(fn, expect, label):
    rep = estimate_growth_order(_net(fn))
    assert rep.fitted_exponent == pytest.approx(expect, abs=0.05)
    assert rep.classification.startswith(label)


def test_delta_growth(bump):
    rep = estimate_growth_order(_net(lambda e, x: bump.delta(e, x[:, 0])))
    assert rep.fitted_exponent == pytest.approx(-1.0, abs=0.05)
    assert rep.classification.startswith("moderate")


def test_fit_loglog_exact():
    eps = np.array([0.1, 0.05, 0.025])
    slope, icpt, res = fit_loglog(eps, 3.0 * eps**1.5)
    assert slope == pytest.approx(1.5) and np.exp(icpt) == pytest.approx(3.0) and res < 1e-12


def test_classify_thresholds():
    assert classify_exponent(1.0).startswith("decaying")
    assert classify_exponent(0.0) == "bounded"
    assert classify_exponent(-2.0).startswith("moderate")


def test_needs_three_points():
    with pytest.raises(InsufficientDataError):
        estimate_growth_order(SampledNet.from_callable(lambda e, x: np.ones(len(x)), (0.1, 0.05), BOX))


def test_cbounded_constant_and_escaping():
    const = _net(lambda e, x: np.full(len(x), 0.5), box=((0.0, 1.0),))
    assert check_cbounded(const, ((0.0, 1.0),)).ok
    esc = _net(lambda e, x: x[:, 0] / e, box=((0.0, 1.0),))
    rep = check_cbounded(esc, ((0.0, 10.0),))
    assert not rep.ok
    assert rep.witness[1][0] >= 10.0


def test_geodesic_net_is_cbounded(saddle, bump):
    # 5 x 5 x 5 grid of (x0 component 1, x0 component 2, common speed)
    g = np.linspace(-1.0, 1.0, 5)
    A, B, S = (m.ravel() for m in np.meshgrid(g, g, g, indexing="ij"))
    x0s, xd = np.column_stack([A, B]), np.column_stack([S, S])
    u = np.linspace(-1.0, 1.0, 21)
    arrays = [batch_states(saddle, bump, e, x0s, xd, u).reshape(-1, 2) for e in DEFAULT_SCHEDULE]
    net = SampledNet.from_arrays(DEFAULT_SCHEDULE, arrays, box=((-1, 1),) * 3)
    assert check_cbounded(net, ((-20.0, 20.0), (-20.0, 20.0))).ok
    assert estimate_growth_order(SampledNet.from_arrays(
        DEFAULT_SCHEDULE, [np.abs(a).max(axis=1) for a in arrays], box=((-1, 1),) * 3)).fitted_exponent >= -0.05


def test_strictly_nonzero():
    one = check_strictly_nonzero(_net(lambda e, x: np.ones(len(x))))
    assert one.ok and one.inf == pytest.approx((1.0,) * 4)
    lin = check_strictly_nonzero(_net(lambda e, x: np.full(len(x), e)))
    assert lin.fitted_lower_exponent == pytest.approx(1.0, abs=1e-9)
    assert not check_strictly_nonzero(_net(lambda e, x: x[:, 0])).ok


def test_csv_helpers_use_17_digits():
    rep = estimate_growth_order(_net(lambda e, x: np.full(len(x), e)))
    text = growth_csv(rep)
    assert text.splitlines()[0] == "eps,sup_norm,log_eps,log_sup,fitted_log_sup"
    assert "0.10000000000000001" in text
    assert nonzero_csv(check_strictly_nonzero(_net(lambda e, x: np.ones(len(x))))).startswith("eps,inf")
