from __future__ import annotations

import numpy as np
import pytest

from ppwave.delta_nets import DEFAULT_SCHEDULE, model_net
from ppwave.profiles import WaveProfile, builtin_profile
from ppwave.transform import TransformFamily


def polynomial_profile_xy_plus_x2() -> WaveProfile:
    """f = XY + X^2: mixed second derivative and nonzero Laplacian."""
    def shape(X, Y):
        return np.broadcast(np.asarray(X, float), np.asarray(Y, float)).shape

    def grad(X, Y):
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        return np.stack([Y + 2.0 * X, X], axis=-1)

    def hess(X, Y):
        H = np.zeros(shape(X, Y) + (2, 2))
        H[..., 0, 0] = 2.0
        H[..., 0, 1] = H[..., 1, 0] = 1.0
        return H

    return WaveProfile(
        eval=lambda X, Y: np.asarray(X, float) * np.asarray(Y, float) + np.asarray(X, float) ** 2,
        grad=grad, hess=hess,
        third=lambda X, Y: np.zeros(shape(X, Y) + (2, 2, 2)),
        name="xy_plus_x2",
    )


@pytest.fixture(scope="session")
def saddle():
    return builtin_profile("quadratic_saddle")


@pytest.fixture(scope="session")
def quartic():
    return builtin_profile("quartic_negative")


@pytest.fixture(scope="session")
def bump():
    return model_net("bump")


@pytest.fixture(scope="session")
def saddle_family(saddle, bump):
    return TransformFamily(saddle, bump, DEFAULT_SCHEDULE)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
    terminalreporter.write_line(f"{sum('[PASS]' in v for v in results.values())}/{len(results)} criteria passed")
