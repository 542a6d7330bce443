import numpy as np
import pytest

from conftest import layer_system, random_state
from mlswe.ecflux import (central_flux, coefficients, ec_flux, ec_residual, ec_residual_layers, high_order_flux,
                          source_two_point)
from mlswe.energy import entropy_variables, flux, potential_flux
from mlswe.model import ConfigError, LayerSystem, layer_z, to_conserved, to_primitive


def residual_scale(UL, UR, bL, bR, sys, F):
    """Magnitude of the individual terms entering the EC condition."""
    dV = entropy_variables(UR, bR, sys) - entropy_variables(UL, bL, sys)
    s = np.sum(np.abs(dV * F), axis=0)
    s = s + np.abs(potential_flux(UR, sys)) + np.abs(potential_flux(UL, sys))
    for U, b in ((UL, bL), (UR, bR)):
        h, u, _ = to_primitive(U)
        z = layer_z(h, b, sys)
        s = s + np.sum(sys.g * np.array(sys.rho)[:, None] * np.abs(h * u) * (np.abs(z) + np.abs(z)), axis=0)
    return s


def test_consistency_example():
    sys = LayerSystem((0.5, 1.0), 1.0)
    U = to_conserved(np.ones(2), 0.0, 0.0)
    F = ec_flux(U, U, 0.0, 0.0, sys)
    assert np.allclose(F, (0, 0.5, 0, 0, 0.5, 0))


def test_consistency_random(rng):
    sys = layer_system(3)
    U = random_state(rng, 3, (20,))
    for d in (1, 2):
        assert np.allclose(ec_flux(U, U, 0.3, 0.3, sys, d), flux(U, sys, d), rtol=1e-14)


def test_single_layer_example():
    sys = LayerSystem((1.0,), 1.0)
    UL = to_conserved(np.array([1.0]), 2.0, 0.0)
    UR = to_conserved(np.array([3.0]), 2.0, 0.0)
    F = ec_flux(UL, UR, 0.0, 0.0, sys)
    assert F[0] == pytest.approx(4.0)
    assert F[1] == pytest.approx(10.5)


def test_symmetry(rng):
    sys = layer_system(2)
    UL, UR = random_state(rng, 2, (10,)), random_state(rng, 2, (10,))
    bL, bR = rng.uniform(-1, 1, 10), rng.uniform(-1, 1, 10)
    assert np.allclose(ec_flux(UL, UR, bL, bR, sys), ec_flux(UR, UL, bR, bL, sys), rtol=1e-15)


@pytest.mark.parametrize("M", [2, 3])
@pytest.mark.parametrize("direction", [1, 2])
def test_ec_condition_random_pairs(rng, M, direction):
    sys = layer_system(M)
    n = 1000
    UL, UR = random_state(rng, M, (n,)), random_state(rng, M, (n,))
    bL, bR = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    F = ec_flux(UL, UR, bL, bR, sys, direction)
    r = ec_residual(UL, UR, bL, bR, sys, F, direction)
    assert np.all(np.abs(r) <= 1e-12 * residual_scale(UL, UR, bL, bR, sys, F))
    layers = ec_residual_layers(UL, UR, bL, bR, sys, F, direction)
    assert np.all(np.abs(layers.sum(axis=0) - r) <= 1e-13 * residual_scale(UL, UR, bL, bR, sys, F))


def test_residual_vanishes_for_equal_states(rng):
    sys = layer_system(2)
    U = random_state(rng, 2, (5,))
    assert np.all(ec_residual(U, U, 0.2, 0.2, sys) == 0.0)


def test_central_flux_is_not_ec():
    sys = layer_system(2)
    UL = to_conserved(np.array([1.0, 1.0]), 0.5, 0.0)
    UR = to_conserved(np.array([2.0, 1.5]), np.array([-0.2, 0.1]), 0.0)
    r = ec_residual(UL, UR, 0.0, 0.0, sys, central_flux(UL, UR, sys))
    assert abs(r) > 1e-6


def test_source_two_point():
    sys = LayerSystem((0.5, 1.0), 1.0)
    UL = to_conserved(np.array([1.0, 2.0]), 0.0, 0.0)
    B = source_two_point(UL, UL, 3.0, 3.0, sys)
    z = layer_z(UL[0::3], 3.0, sys)
    assert np.allclose(B[1::3], z) and np.all(B[0::3] == 0) and np.all(B[2::3] == 0)
    # z_1 = 6 on the left and 4 on the right
    B = source_two_point(UL, UL, 4.0, 2.0, sys)
    assert B[1] == pytest.approx(5.0)


def test_coefficients():
    assert coefficients(3) == pytest.approx((1.5, -0.3, 1.0 / 30.0))
    assert coefficients(2) == pytest.approx((4.0 / 3.0, -1.0 / 6.0))
    for p in (1, 2, 3):
        assert sum(q * a for q, a in enumerate(coefficients(p), 1)) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        coefficients(4)


def test_high_order_constant_stencil(rng):
    sys = layer_system(2)
    U = random_state(rng, 2)
    stencil = np.repeat(U[:, None], 6, axis=1)
    F, _ = high_order_flux(stencil, np.full(6, 0.4), sys, 3)
    assert np.allclose(F, flux(U, sys), rtol=1e-14)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_high_order_flux_order(p):
    """Interface differences of the combined flux approximate dF/dx at order 2p."""
    sys = LayerSystem((0.8, 1.0), 1.0)

    def fields(x):
        h = np.stack([1.0 + 0.2 * np.sin(x), 1.5 + 0.1 * np.cos(x)])
        u = np.stack([0.3 * np.cos(x), 0.2 * np.sin(2 * x)])
        return to_conserved(h, u, 0.0 * h)

    def exact_derivative(x, e=1e-5):
        # fourth-order central difference of the physical flux
        f = [flux(fields(np.array([x + k * e])), sys)[:, 0] for k in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * e)

    xc = 0.7
    errs = []
    for dx in (0.2, 0.1):
        x = xc + dx * np.arange(-p, p + 1)
        U = fields(x)
        b = np.zeros(x.size)
        Fp, _ = high_order_flux(U[:, 1:], b[1:], sys, p)
        Fm, _ = high_order_flux(U[:, :-1], b[:-1], sys, p)
        errs.append(np.abs((Fp - Fm) / dx - exact_derivative(xc)).max())
    assert np.log2(errs[0] / errs[1]) >= 2 * p - 0.5
