import sys

import numpy as np
import pytest

from mlswe.energy import quasilinear_matrix
from mlswe.model import LayerSystem, to_conserved

RHO = {1: (1.0,), 2: (0.8, 1.0), 3: (0.7, 0.85, 1.0), 4: (0.6, 0.7, 0.85, 1.0), 5: (0.5, 0.6, 0.7, 0.85, 1.0)}


def layer_system(M, g=9.81):
    return LayerSystem(RHO[M], g)


def random_state(rng, M, shape=(), umax=1.0, hmin=0.2, hmax=2.0):
    h = rng.uniform(hmin, hmax, (M,) + shape)
    u = rng.uniform(-umax, umax, (M,) + shape)
    v = rng.uniform(-umax, umax, (M,) + shape)
    return to_conserved(h, u, v)


def hyperbolic_states(rng, sys, count, direction=1):
    """Random states whose quasi-linear matrix has real eigenvalues."""
    out = []
    while len(out) < count:
        U = random_state(rng, sys.M, (4 * count,), umax=0.3)
        A = quasilinear_matrix(U, sys, direction)
        lam = np.linalg.eigvals(A)
        ok = np.all(np.abs(lam.imag) < 1e-10, axis=-1)
        out.extend(U[:, ok].T)
    return np.array(out[:count]).T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
