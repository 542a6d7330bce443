import numpy as np
import pytest

from conftest import layer_system, random_state
from mlswe.cases import Monitor, get_case
from mlswe.energy import extended_energy, extended_entropy_variables, extended_potential
from mlswe.model import ConfigError, LayerSystem, StructuredGrid, surface_levels, to_primitive
from mlswe.movingmesh import (MeshTanglingError, MovingSolver, alpha_hat, check_mesh, coordinate_jacobian,
                              identity_mesh, metrics, monitor_omega, pad_coords, pad_velocity, quadrature_weights,
                              relax_mesh, scl_residual, smooth)
from mlswe.solver_fixed import FixedSolver, Scheme


def deformed(grid, t, amp=0.02):
    """Smooth mesh deformation that vanishes on outflow boundaries."""
    xi = identity_mesh(grid)
    s = np.sin(2 * np.pi * (xi[0] - grid.lo[0]) / (grid.hi[0] - grid.lo[0]))
    c = np.sin(2 * np.pi * (xi[1] - grid.lo[1]) / max(grid.hi[1] - grid.lo[1], 1e-300))
    if grid.dim == 1:
        c = 1.0
    x = xi.copy()
    x[0] += amp * np.sin(t) * s * c
    if grid.dim == 2:
        x[1] += 0.7 * amp * np.sin(1.3 * t) * s * c
    return x


def velocity(grid, t, e=1e-6):
    return (deformed(grid, t + e) - deformed(grid, t - e)) / (2 * e)


def uniform_state(grid, M):
    rng = np.random.default_rng(3)
    U = random_state(rng, M, umax=0.3)
    b = -1.5
    Uh = np.concatenate([U, [b]])
    return Uh[:, None, None] * np.ones((1,) + grid.n)


def test_identity_metrics():
    grid = StructuredGrid((0, 0), (1, 2), (16, 20), "outflow")
    x = identity_mesh(grid)
    G = 6
    met = metrics(pad_coords(x, grid, G), np.zeros((2, 16 + 2 * G, 20 + 2 * G)), grid, 3, G)
    assert np.all(met.m[0][0] == 1.0) and np.all(met.m[0][1] == 0)
    assert np.all(met.m[1][0] == 0) and np.all(met.m[1][1] == 1.0)
    assert np.all(met.J == 1.0)


def test_translating_mesh():
    grid = StructuredGrid((0, 0), (1, 1), (16, 16), "periodic")
    x = pad_coords(identity_mesh(grid), grid, 3)
    xd = np.zeros_like(x)
    xd[0] = 0.8
    met = metrics(x, xd, grid, 3, 3)
    assert np.all(met.jt[0] == -0.8) and np.all(met.jt[1] == 0.0)
    g1 = StructuredGrid((0, 0), (1, 0), (16, 1), "periodic")
    x1 = pad_coords(identity_mesh(g1), g1, 3)
    met = metrics(x1, np.full_like(x1, 0.5), g1, 3, 3)
    assert np.all(met.jt[0] == -0.5) and np.all(met.J == 1.0)


def test_alpha_hat_hand_evaluation():
    # mesh translating with velocity (0.3, -0.1) and metric row (2, 1); alpha = 1.5
    m = np.array([2.0, 1.0])
    xdot = np.array([0.3, -0.1])
    jt = -xdot @ m
    assert alpha_hat(jt, np.hypot(*m), 1.5) == pytest.approx(abs(-0.5 + np.sqrt(5.0) * 1.5))


@pytest.mark.parametrize("bc", ["periodic", "outflow"])
@pytest.mark.parametrize("n2", [1, 24])
def test_scl_residual(bc, n2):
    grid = StructuredGrid((0, 0), (1, 1), (28, n2), bc)
    for t in (0.4, 1.1):
        for r in scl_residual(deformed(grid, t, 0.04), grid):
            assert np.abs(r).max() <= 1e-13


def test_coordinate_padding():
    grid = StructuredGrid((0, 0), (1, 1), (10, 10), ("periodic", "outflow"))
    x = deformed(grid, 0.5)
    xp = pad_coords(x, grid, 2)
    assert np.allclose(xp[0, 0, 2:-2], x[0, -2] - 1.0)
    assert np.allclose(xp[1, 2:-2, 1], 2 * x[1, :, 0] - x[1, :, 1])
    vp = pad_velocity(x, grid, 2)
    assert np.allclose(vp[0, 0, 2:-2], x[0, -2])


def test_monitor_trivial_cases():
    grid = StructuredGrid((0, 0), (1, 0), (40, 1), "outflow")
    x = identity_mesh(grid)
    om = monitor_omega(np.full(grid.n, 2.0), Monitor(100.0), grid)
    assert np.all(om == 1.0)
    assert np.abs(relax_mesh(x, om, grid) - x).max() <= 1e-14
    step = np.where(x[0] > 0.5, 1.0, 0.0)
    assert np.all(monitor_omega(step, Monitor(0.0), grid) == 1.0)


def test_monitor_concentrates_nodes():
    grid = StructuredGrid((0, 0), (1, 0), (50, 1), "outflow")
    x = identity_mesh(grid)
    sigma = np.where(x[0] > 0.5, 1.0, 0.0)
    om = smooth(monitor_omega(sigma, Monitor(100.0), grid), grid)
    xn = relax_mesh(x, om, grid, sweeps=10)
    dx = np.diff(xn[0][:, 0])
    assert dx.min() < 0.5 * grid.spacing[0]
    assert xn[0][0, 0] == x[0][0, 0] and xn[0][-1, 0] == x[0][-1, 0]


def test_relaxation_keeps_boundary_2d():
    grid = StructuredGrid((0, 0), (1, 1), (30, 30), "outflow")
    x = identity_mesh(grid)
    sigma = np.exp(-50 * ((x[0] - 0.6) ** 2 + (x[1] - 0.4) ** 2))
    xn = relax_mesh(x, smooth(monitor_omega(sigma, Monitor(100.0), grid), grid), grid)
    assert np.all(xn[0][0] == 0) and np.all(xn[0][-1] == 1) and np.all(xn[1][:, 0] == 0)
    assert xn[1][0, 0] == 0 and xn[1][-1, -1] == 1
    check_mesh(xn, grid)


def test_mesh_folding_detected():
    grid = StructuredGrid((0, 0), (1, 1), (10, 10), "outflow")
    x = identity_mesh(grid)
    x[0][4, 4] = x[0][6, 4]
    with pytest.raises(MeshTanglingError):
        check_mesh(x, grid)


@pytest.mark.parametrize("M", [2, 3])
def test_two_point_mesh_flux_identity(rng, M):
    sys = layer_system(M)
    gam = 0.8
    for _ in range(50):
        UL, UR = random_state(rng, M), random_state(rng, M)
        bL, bR = rng.uniform(-1, 1, 2)
        hL, uL, vL = to_primitive(UL)
        hR, uR, vR = to_primitive(UR)
        hm = 0.5 * (hL + hR)
        Ut = np.empty(3 * M + 1)
        Ut[0:-1:3] = hm
        Ut[1:-1:3] = hm * 0.5 * (uL + uR)
        Ut[2:-1:3] = hm * 0.5 * (vL + vR)
        Ut[-1] = 0.5 * (bL + bR)
        lhs = (extended_entropy_variables(UR, bR, sys, gam) - extended_entropy_variables(UL, bL, sys, gam)) @ Ut
        rhs = extended_potential(UR, bR, sys, gam) - extended_potential(UL, bL, sys, gam)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@pytest.mark.parametrize("name", ["accuracy-1d", "dambreak-1d", "accuracy-2d", "interface-2d", "circledam-2d"])
def test_static_mesh_matches_fixed_solver(name):
    case = get_case(name, 2)
    grid = case.grid(60, 24) if case.dim == 1 else case.grid(24, 24)
    U, b = case.setup(grid)
    fs = FixedSolver(case.sys, grid, b, source=case.source)
    ms = MovingSolver(case.sys, grid, gamma=3.0, source=case.source, adapt=False)
    x = identity_mesh(grid)
    J = coordinate_jacobian(x, grid)
    Uc = np.concatenate([U, b[None]]) * J
    dU, dJ = ms.rhs(Uc, J, x, np.zeros_like(x), 0.02)
    r = fs.rhs(U, 0.02)
    assert np.all(dJ == 0) and np.all(dU[-1] == 0)
    assert np.all(J == 1.0)
    assert np.abs(dU[:-1] - r).max() <= 1e-13 * max(1.0, np.abs(r).max())
    xdot, t = np.zeros_like(x), 0.0
    for _ in range(10):
        dt = fs.cfl_dt(U)
        U = fs.step(U, t, dt)
        Uc, J, x = ms.step(Uc, J, x, xdot, t, dt)
        t += dt
        assert np.abs(Uc[:-1] / J - U).max() <= 1e-13
    assert np.all(J == 1.0) and np.array_equal(x, identity_mesh(grid))


@pytest.mark.parametrize("bc", ["periodic", "outflow"])
@pytest.mark.parametrize("n2", [1, 24])
def test_free_stream(bc, n2):
    grid = StructuredGrid((0, 0), (1, 1), (24, n2), bc)
    sys = layer_system(2)
    ms = MovingSolver(sys, grid, adapt=False)
    Uh = uniform_state(grid, 2)
    x = deformed(grid, 0.0)
    J = coordinate_jacobian(x, grid)
    Uc = Uh * J
    dU, dJ = ms.rhs(Uc, J, deformed(grid, 0.3), velocity(grid, 0.3))
    assert np.abs(dU - Uh * dJ).max() <= 1e-12 * max(1.0, np.abs(dJ).max())
    t, dt = 0.0, 2e-3
    for _ in range(100):
        Uc, J, x = ms.step(Uc, J, x, velocity(grid, t), t, dt)
        t += dt
    assert np.abs(Uc / J - Uh).max() <= 1e-12
    # the evolved Jacobian stays close to the geometric one
    assert np.abs(J - coordinate_jacobian(x, grid)).max() <= 1e-10


def test_volume_conserved_with_quadrature_weights():
    grid = StructuredGrid((0, 0), (1, 1), (24, 24), "outflow")
    ms = MovingSolver(layer_system(2), grid, adapt=False)
    Uh = uniform_state(grid, 2)
    x = deformed(grid, 0.0)
    J = coordinate_jacobian(x, grid)
    w = quadrature_weights(grid)
    V0 = np.sum(w * J)
    Uc, t = Uh * J, 0.0
    for _ in range(20):
        Uc, J, x = ms.step(Uc, J, x, velocity(grid, t), t, 5e-3)
        t += 5e-3
    assert abs(np.sum(w * J) - V0) <= 1e-12 * V0


@pytest.mark.parametrize("n2", [1, 24])
def test_semi_discrete_energy_rate(rng, n2):
    """Periodic domain: the EC scheme conserves and the ES scheme dissipates energy."""
    sys = layer_system(2)
    grid = StructuredGrid((0, 0), (1, 1), (32, n2), "periodic")
    x = deformed(grid, 0.7, 0.03)
    xd = velocity(grid, 0.7)
    X1, X2 = x
    k = 2 * np.pi
    Uh = np.empty((7,) + grid.n)
    Uh[6] = -2.0 + 0.1 * np.sin(k * X1)
    Uh[0] = 1.0 + 0.2 * np.sin(k * X1)
    Uh[3] = 1.0 + 0.1 * np.cos(k * (X1 + X2))
    Uh[1] = Uh[0] * 0.2 * np.cos(k * X2)
    Uh[2] = Uh[0] * 0.1
    Uh[4] = -0.1 * Uh[3] * np.sin(k * X1)
    Uh[5] = 0.05 * Uh[3]
    J = coordinate_jacobian(x, grid)
    for diss in (False, True):
        ms = MovingSolver(sys, grid, Scheme(dissipation=diss), adapt=False)
        dU, dJ = ms.rhs(Uh * J, J, x, xd)
        U, b = Uh[:-1], Uh[-1]
        Vh = extended_entropy_variables(U, b, sys, ms.gamma)
        phi = np.sum(Vh * Uh, axis=0) - extended_energy(U, b, sys, ms.gamma)
        rate = np.sum(np.sum(Vh * dU, axis=0) - phi * dJ)
        scale = np.sum(np.abs(Vh * dU))
        if diss:
            assert rate < 0
        else:
            assert abs(rate) <= 1e-12 * scale


@pytest.mark.parametrize("name", ["wb-1d-step", "wb-2d-step"])
def test_lake_at_rest_moving(name):
    case = get_case(name, 2)
    grid = case.grid(40, 30)
    ms = MovingSolver(case.sys, grid, monitor=case.monitor)
    Uc, J, x = ms.initialize(case.initial, case.bathymetry)
    assert np.abs(x - identity_mesh(grid)).max() > 1e-3
    Uc, J, x, t = ms.run(Uc, J, x, 10.0, max_steps=50)
    U, b = ms.split(Uc, J)
    s = surface_levels(U, b, case.sys)
    for m in range(case.sys.M):
        assert np.ptp(s[m]) <= 1e-11
    assert np.abs(U[1::3]).max() <= 1e-11 and np.abs(U[2::3]).max() <= 1e-11


def test_moving_energy_decays():
    case = get_case("dambreak-1d", 2)
    grid = case.grid(150)
    ms = MovingSolver(case.sys, grid, monitor=case.monitor)
    Uc, J, x = ms.initialize(case.initial, case.bathymetry)
    E = [ms.total_energy(Uc, J)]
    ms.run(Uc, J, x, 0.3, callback=lambda k, t, dt, Uc, J, x: E.append(ms.total_energy(Uc, J)))
    assert np.all(np.diff(E) <= 1e-8 * E[0])


def test_configuration_errors():
    grid = StructuredGrid((0, 0), (1, 1), (20, 20), "periodic")
    sys = LayerSystem((0.5, 1.0), 1.0)
    with pytest.raises(ConfigError):
        MovingSolver(sys, grid, gamma=0.5)
    ms = MovingSolver(sys, grid, adapt=False)
    x = identity_mesh(grid)
    with pytest.raises(MeshTanglingError):
        ms.rhs(np.ones((7, 20, 20)), -np.ones((20, 20)), x, np.zeros_like(x))
