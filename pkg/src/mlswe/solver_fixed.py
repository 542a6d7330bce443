"""Well-balanced energy-stable finite differences on fixed uniform meshes."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dissipation as dis
from .ecflux import coefficients, ec_flux_prim, mean, pair_sum
from .energy import energy, entropy_variables
from .model import GHOSTS, ConfigError, layer_z, pad, to_primitive
from .wavespeed import max_wave_speed


@dataclass
class Scheme:
    p: int = 3
    cfl: float = 0.4
    dissipation: bool = True
    dt_policy: str = "standard"  # or "accuracy": dt = cfl * (min dx)^(5/3)
    wave: str = "auto"
    workers: int = 1

    def __post_init__(self):
        coefficients(self.p)
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.dt_policy not in ("standard", "accuracy"):
            raise ConfigError(f"unknown dt policy {self.dt_policy!r}")


def momentum_swap(M):
    """Component permutation exchanging x- and y-momentum in every layer."""
    perm = np.arange(3 * M)
    perm[1::3], perm[2::3] = perm[2::3].copy(), perm[1::3].copy()
    return perm


def sweep_axes(a, d, G, dim):
    """View of a padded field with the sweep direction on axis 1.

    The transverse direction is trimmed to interior nodes; for d = 1 the two
    spatial axes are swapped.
    """
    if dim == 1:
        return a
    if d == 0:
        return a[..., G:-G]
    return np.swapaxes(a[..., G:-G, :], -1, -2)


def unsweep(a, d):
    return a if d == 0 else np.swapaxes(a, -1, -2)


class FixedSolver:
    """Semi-discrete operator and SSP-RK3 driver on a fixed uniform mesh.

    source, when given, is a callable (x1, x2, t) -> (3M, N1, N2) added to the
    tendency.
    """

    def __init__(self, sys, grid, b, scheme=None, source=None):
        self.sys = sys
        self.grid = grid
        self.scheme = scheme or Scheme()
        if self.scheme.dissipation:
            grid.check_stencil(self.scheme.p)
        self.b = np.asarray(b, dtype=float).reshape(grid.n)
        self.source = source
        self.x1, self.x2 = grid.nodes()
        self.G = GHOSTS
        self._bp = pad(self.b, grid.bc, self.G, grid.dim)
        self.nrhs = 0

    # ------------------------------------------------------------------
    def _sweep(self, Up, bp, dx):
        """Flux difference and source for one direction, sweep axis 1."""
        sys, G, p = self.sys, self.G, self.scheme.p
        g = sys.g
        n = Up.shape[1] - 2 * G
        lo, nI = G - 1, n + 1
        h, u, v = to_primitive(Up)
        z = layer_z(h, bp, sys)
        F = pair_sum(lambda L, R: ec_flux_prim(*L, *R, g, 1), [h, u, v, z], p, lo, nI)
        Zb = pair_sum(lambda L, R: mean(L[0], R[0]), [z], p, lo, nI)
        if self.scheme.dissipation:
            F = F - self._dissipation(Up, bp, lo, nI)
        out = -(F[:, 1:] - F[:, :-1]) / dx
        out[1::3] -= g * h[:, G:G + n] * (Zb[:, 1:] - Zb[:, :-1]) / dx
        return out

    def _dissipation(self, Up, bp, lo, nI):
        sys = self.sys

        def sh(a, k):
            return a[:, lo + k: lo + k + nI]

        UL, UR = sh(Up, 0), sh(Up, 1)
        Ub = 0.5 * (UL + UR)
        V = entropy_variables(Up, bp, sys)
        R, wj, raw = dis.scaled_jumps(Ub, [sh(V, k) for k in range(-2, 4)], sys)
        Y = dis.sign_mask(wj, raw)
        ws = self.scheme.wave
        alpha = np.maximum(np.maximum(max_wave_speed(UL, sys, 1, ws), max_wave_speed(UR, sys, 1, ws)),
                           max_wave_speed(Ub, sys, 1, ws))
        return dis.fixed_mesh_D(alpha, R, Y, wj)

    def _direction(self, Up, d):
        grid = self.grid
        perm = momentum_swap(self.sys.M)
        A = sweep_axes(Up, d, self.G, grid.dim)
        B = sweep_axes(self._bp, d, self.G, grid.dim)
        if d == 1:
            A = A[perm]
        r = self._sweep(A, B, grid.spacing[d])
        if d == 1:
            r = r[perm]
        return unsweep(r, d)

    def rhs(self, U, t=0.0):
        """dU/dt for the conserved field U of shape (3M, N1, N2)."""
        self.nrhs += 1
        grid = self.grid
        Up = pad(U, grid.bc, self.G, grid.dim)
        dims = range(grid.dim)
        if self.scheme.workers > 1 and grid.dim == 2:
            with ThreadPoolExecutor(max_workers=2) as ex:
                parts = list(ex.map(lambda d: self._direction(Up, d), dims))
        else:
            parts = [self._direction(Up, d) for d in dims]
        dU = parts[0]
        for q in parts[1:]:
            dU = dU + q
        if self.source is not None:
            dU = dU + self.source(self.x1, self.x2, t)
        if not np.all(np.isfinite(dU)):
            loc = tuple(int(i[0]) for i in np.nonzero(~np.isfinite(dU)))
            raise FloatingPointError(f"non-finite tendency at index {loc}")
        return dU

    # ------------------------------------------------------------------
    def max_speeds(self, U):
        return [float(np.max(max_wave_speed(U, self.sys, d + 1, self.scheme.wave)))
                for d in range(self.grid.dim)]

    def cfl_dt(self, U):
        sch, grid = self.scheme, self.grid
        if sch.dt_policy == "accuracy":
            return sch.cfl * min(grid.spacing[: grid.dim]) ** (5.0 / 3.0)
        s = sum(a / dx for a, dx in zip(self.max_speeds(U), grid.spacing))
        if s <= 0:
            raise FloatingPointError("zero wave speed everywhere")
        return sch.cfl / s

    def step(self, U, t, dt):
        """One SSP-RK3 step."""
        U1 = U + dt * self.rhs(U, t)
        U2 = 0.75 * U + 0.25 * (U1 + dt * self.rhs(U1, t + dt))
        return U / 3.0 + 2.0 / 3.0 * (U2 + dt * self.rhs(U2, t + 0.5 * dt))

    def total_energy(self, U):
        e = energy(U, self.b, self.sys)
        return math.fsum(e.ravel()) * self.grid.cell_measure

    def run(self, U, t_end, t0=0.0, callback=None, max_steps=10 ** 7):
        """Advance to t_end; callback(step, t, dt, U) after every step."""
        t, k = t0, 0
        U = np.array(U, dtype=float)
        while t < t_end - 1e-14 * max(1.0, abs(t_end)):
            dt = min(self.cfl_dt(U), t_end - t)
            U = self.step(U, t, dt)
            t += dt
            k += 1
            if callback is not None:
                callback(k, t, dt, U)
            if k >= max_steps:
                break
        return U, t
