import warnings

import numpy as np
import pytest

from conftest import hyperbolic_states, layer_system, random_state
from mlswe.energy import quasilinear_matrix
from mlswe.model import LayerSystem, to_conserved
from mlswe.wavespeed import (HyperbolicityWarning, charpoly, charpoly_m2, charpoly_m3, lagrange_bounds,
                             max_wave_speed, numeric_speed)


def reduced_matrix(U, sys, direction=1):
    """(h, normal momentum) block of the quasi-linear matrix; its eigenvalues are the polynomial's roots."""
    A = quasilinear_matrix(U, sys, direction)
    idx = [3 * m + k for m in range(sys.M) for k in (0, direction)]
    return A[np.ix_(idx, idx)]


def test_two_layer_examples():
    assert np.allclose(charpoly_m2(1.0, 1.0, 0.0, 0.0, 0.0, 1.0), (0, -2, 0, 1))
    assert np.allclose(charpoly_m2(1.0, 1.0, 0.0, 0.0, 0.5, 1.0), (0, -2, 0, 0.5))


@pytest.mark.parametrize("M", [2, 3])
def test_coefficients_match_eigen_oracle(rng, M):
    sys = layer_system(M)
    for _ in range(50):
        U = random_state(rng, M)
        for d in (1, 2):
            ref = np.poly(reduced_matrix(U, sys, d))[1:]
            c = charpoly(U, sys, d)
            assert np.allclose(c, ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())


@pytest.mark.parametrize("M", [2, 3])
def test_polynomial_vanishes_at_eigenvalues(rng, M):
    sys = layer_system(M)
    for _ in range(50):
        U = random_state(rng, M)
        c = charpoly(U, sys)
        lam = np.linalg.eigvals(reduced_matrix(U, sys))
        val = np.polyval(np.concatenate([[1.0], c]), lam)
        scale = np.polyval(np.concatenate([[1.0], np.abs(c)]), np.abs(lam))
        assert np.all(np.abs(val) <= 1e-8 * scale)


def test_three_layer_examples():
    c = charpoly_m3(np.array([1.0, 2.0, 0.5]), np.zeros(3), 0.8, 0.64, 0.8, 2.0)
    assert c[0] == 0 and c[2] == 0 and c[4] == 0
    assert c[1] == pytest.approx(-2.0 * 3.5)
    c = charpoly_m3(np.ones(3), np.zeros(3), 0.8, 0.64, 0.8, 1.0)
    assert c[5] == pytest.approx(-0.04)


def test_lagrange_bound_examples():
    lo, hi = lagrange_bounds(np.array([0.0, -2.0, 0.0, 1.0]))
    assert hi == pytest.approx(np.sqrt(2.0))
    assert lo == pytest.approx(-np.sqrt(2.0))
    assert lagrange_bounds(np.array([1.0, 2.0, 0.5, 3.0]))[1] == 0.0
    c = np.array([0.0, -3.0, 0.0, 0.7, 0.0, -0.1])
    lo, hi = lagrange_bounds(c)
    assert lo == -hi


def test_lagrange_bounds_contain_roots(rng):
    for _ in range(200):
        n = rng.integers(2, 7)
        roots = rng.normal(size=n) * rng.uniform(0.1, 5)
        c = np.poly(roots)[1:]
        lo, hi = lagrange_bounds(c)
        assert lo <= roots.min() + 1e-12 and hi >= roots.max() - 1e-12


def test_rest_state_bound_dominates():
    c = charpoly_m2(1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    assert lagrange_bounds(c)[1] == pytest.approx(np.sqrt(2.0))
    assert np.max(np.roots(np.concatenate([[1.0], c])).real) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("M", [2, 3])
@pytest.mark.parametrize("direction", [1, 2])
def test_dominance(rng, M, direction):
    sys = layer_system(M)
    U = hyperbolic_states(rng, sys, 1000, direction)
    alpha = max_wave_speed(U, sys, direction, "lagrange")
    lam = np.linalg.eigvals(quasilinear_matrix(U, sys, direction))
    assert np.all(alpha >= np.abs(lam).max(axis=-1) * (1 - 1e-12))


def test_shifted_velocity(rng):
    sys = layer_system(2)
    U = hyperbolic_states(rng, sys, 50)
    h = U[0::3]
    shifted = U.copy()
    shifted[1::3] += 0.7 * h
    alpha = max_wave_speed(shifted, sys)
    lam = np.linalg.eigvals(quasilinear_matrix(shifted, sys))
    assert np.all(alpha >= np.abs(lam).max(axis=-1) * (1 - 1e-12))


def test_single_layer():
    sys = LayerSystem((1.0,), 9.81)
    U = to_conserved(np.array([[2.0, 0.5]]), np.array([[1.0, -3.0]]), 0.0)
    ref = np.abs([1.0, -3.0]) + np.sqrt(9.81 * np.array([2.0, 0.5]))
    assert np.allclose(max_wave_speed(U, sys), ref, rtol=1e-15)
    assert np.allclose(numeric_speed(U, sys), ref, rtol=1e-12)


def test_many_layers_numeric(rng):
    sys = layer_system(4)
    U = hyperbolic_states(rng, sys, 20)
    lam = np.linalg.eigvals(quasilinear_matrix(U, sys))
    assert np.allclose(max_wave_speed(U, sys), np.abs(lam).max(axis=-1), rtol=1e-10)


def test_complex_speeds_warn():
    sys = LayerSystem((0.99, 1.0), 1.0)
    U = to_conserved(np.array([1.0, 1.0]), np.array([0.1, -0.1]), 0.0)
    with pytest.warns(HyperbolicityWarning):
        numeric_speed(U, sys)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        max_wave_speed(U, sys)
