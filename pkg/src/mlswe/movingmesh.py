"""Energy-stable well-balanced schemes on adaptive moving meshes.

The bathymetry is carried as an extra unknown, so the state is
(J h_1, J h_1 u_1, J h_1 v_1, ..., J b) on a fixed computational lattice.
Metric terms are built from the node coordinates with the same central
differences as the fluxes, which makes the discrete geometric conservation
laws hold to roundoff.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import dissipation as dis
from .cases import Monitor, monitor_field
from .ecflux import coefficients, ec_flux_prim, mean, pair_sum
from .energy import check_gamma, default_gamma, entropy_variables, extended_energy, extended_entropy_variables
from .model import GHOSTS, ConfigError, check_wet, layer_z, pad, to_primitive
from .solver_fixed import Scheme
from .wavespeed import max_wave_speed

DAMPING = 0.7


class MeshTanglingError(RuntimeError):
    """Raised when the mesh folds (non-positive Jacobian)."""


# ------------------------------------------------------------------ geometry

def pad_coords(x, grid, g):
    """Extend node coordinates (2, N1, N2) by g ghost layers.

    Periodic directions wrap with a shift of one period; outflow directions
    use odd reflection about the boundary node.
    """
    out = x
    for d in range(grid.dim):
        w = [(0, 0)] * 3
        w[1 + d] = (g, g)
        if grid.bc[d] == "periodic":
            out = np.pad(out, w, mode="wrap")
            L = grid.hi[d] - grid.lo[d]
            idx = [slice(None)] * 3
            idx[0] = d
            idx[1 + d] = slice(0, g)
            out[tuple(idx)] -= L
            idx[1 + d] = slice(-g, None)
            out[tuple(idx)] += L
        else:
            out = np.pad(out, w, mode="reflect", reflect_type="odd")
    return out


def pad_velocity(xd, grid, g):
    out = xd
    for d in range(grid.dim):
        w = [(0, 0)] * 3
        w[1 + d] = (g, g)
        if grid.bc[d] == "periodic":
            out = np.pad(out, w, mode="wrap")
        else:
            out = np.pad(out, w, mode="reflect", reflect_type="odd")
    return out


def central_diff(a, axis, p, dxi, trim):
    """sum_q alpha_q (a_{i+q} - a_{i-q}) / (2 dxi), dropping `trim` nodes per side."""
    n = a.shape[axis] - 2 * trim
    out = 0.0
    for q, al in enumerate(coefficients(p), 1):
        hi = [slice(None)] * a.ndim
        lo = [slice(None)] * a.ndim
        hi[axis] = slice(trim + q, trim + q + n)
        lo[axis] = slice(trim - q, trim - q + n)
        out = out + al * (a[tuple(hi)] - a[tuple(lo)])
    return out / (2.0 * dxi)


@dataclass
class Metrics:
    """Metric terms on the node lattice (possibly ghost-padded).

    m[l][k] = J d(xi_l)/d(x_k); jt[l] = J d(xi_l)/dt; J = coordinate Jacobian.
    """
    m: list
    jt: list
    J: np.ndarray


def metrics(x, xdot, grid, p=3, trim=0):
    """Metric terms from coordinates padded by `trim` ghost layers.

    The result covers all nodes of x except `trim` per side (and per
    spatial direction in use). Derivatives act on the displacement from the
    uniform lattice, so an undeformed mesh yields exactly unit metrics.
    """
    dxi = grid.spacing
    g = (x.shape[1] - grid.n[0]) // 2
    d = x - pad_coords(identity_mesh(grid), grid, g)
    if grid.dim == 1:
        dx1 = 1.0 + central_diff(d[0], 0, p, dxi[0], trim)
        one = np.ones_like(dx1)
        zero = np.zeros_like(dx1)
        xd = xdot[0][trim:x.shape[1] - trim] if trim else xdot[0]
        m = [[one, zero], [zero, one]]
        return Metrics(m, [-xd, zero], dx1)
    d1, d2 = d[0], d[1]
    s = slice(trim, x.shape[1] - trim), slice(trim, x.shape[2] - trim)
    # derivatives along xi_1 (axis 0) and xi_2 (axis 1), trimmed in both
    d1x1 = 1.0 + central_diff(d1[:, s[1]], 0, p, dxi[0], trim)
    d1x2 = central_diff(d2[:, s[1]], 0, p, dxi[0], trim)
    d2x1 = central_diff(d1[s[0], :], 1, p, dxi[1], trim)
    d2x2 = 1.0 + central_diff(d2[s[0], :], 1, p, dxi[1], trim)
    m11, m12 = d2x2, -d2x1
    m21, m22 = -d1x2, d1x1
    xd1, xd2 = xdot[0][s], xdot[1][s]
    jt1 = -(xd1 * m11 + xd2 * m12)
    jt2 = -(xd1 * m21 + xd2 * m22)
    return Metrics([[m11, m12], [m21, m22]], [jt1, jt2], m11 * m22 - m12 * m21)


def identity_mesh(grid):
    x1, x2 = grid.nodes()
    return np.stack([x1, x2])


def coordinate_jacobian(x, grid, p=3):
    G = 2 * GHOSTS
    xp = pad_coords(x, grid, G)
    return metrics(xp, np.zeros_like(xp), grid, p, trim=G).J


def scl_residual(x, grid, p=3):
    """Discrete surface conservation residuals, one array per physical axis."""
    G = GHOSTS
    xp = pad_coords(x, grid, 2 * G)
    met = metrics(xp, np.zeros_like(xp), grid, p, trim=G)
    res = []
    for k in range(grid.dim):
        r = 0.0
        for l in range(grid.dim):
            a = met.m[l][k]
            r = r + _interface_divergence(a, l, p, grid.spacing[l], G, grid.dim)
        res.append(r)
    return res


def _interface_divergence(a, axis, p, dxi, G, dim):
    """Difference of the 2p-order interface combination of a along axis."""
    if dim == 2:
        other = 1 - axis
        idx = [slice(None)] * 2
        idx[other] = slice(G, a.shape[other] - G)
        a = a[tuple(idx)]
    a = np.moveaxis(a, axis, 0)[None]
    n = a.shape[1] - 2 * G
    f = pair_sum(lambda L, R: mean(L[0], R[0]), [a], p, G - 1, n + 1)
    return np.moveaxis((f[0, 1:] - f[0, :-1]) / dxi, 0, axis)


def quadrature_weights(grid):
    """Trapezoidal node weights: outflow boundary nodes count half.

    With odd mesh reflection the discrete volume sum_i w_i J_i is then
    conserved exactly, so domain integrals on moving meshes are not polluted
    by a spurious boundary volume flux.
    """
    w = np.ones(grid.n)
    for d in range(grid.dim):
        if grid.bc[d] == "outflow":
            idx = [slice(None)] * 2
            for e in (0, grid.n[d] - 1):
                idx[d] = e
                w[tuple(idx)] *= 0.5
    return w


def check_mesh(x, grid):
    """Raise if any cell is inverted."""
    if grid.dim == 1:
        dx = np.diff(x[0][:, 0])
        bad = np.nonzero(dx <= 0)[0]
        if bad.size:
            raise MeshTanglingError(f"mesh folded at node {int(bad[0])}")
        return
    x1, x2 = x
    a = (x1[1:, :-1] - x1[:-1, :-1]) * (x2[:-1, 1:] - x2[:-1, :-1]) - \
        (x2[1:, :-1] - x2[:-1, :-1]) * (x1[:-1, 1:] - x1[:-1, :-1])
    c = (x1[1:, 1:] - x1[:-1, 1:]) * (x2[1:, 1:] - x2[1:, :-1]) - \
        (x2[1:, 1:] - x2[:-1, 1:]) * (x1[1:, 1:] - x1[1:, :-1])
    bad = np.argwhere((a <= 0) | (c <= 0))
    if bad.size:
        raise MeshTanglingError(f"mesh folded at cell {tuple(int(i) for i in bad[0])}")


def alpha_hat(jt, metric_norm, alpha):
    """Interface dissipation speed |J xi_t + |grad xi| alpha|."""
    return np.abs(jt + metric_norm * alpha)


# ----------------------------------------------------------- mesh adaptation

def _pad_field(a, grid, g=1):
    return pad(a, grid.bc, g, grid.dim)


def monitor_omega(sigma, mon, grid):
    """omega = sqrt(1 + theta |grad s|^2/max^2 + w |lap s|^2/max^2) on the lattice."""
    sp = _pad_field(sigma, grid)
    n1, n2 = sigma.shape
    grad2 = np.zeros_like(sigma)
    lap = np.zeros_like(sigma)
    for d in range(grid.dim):
        dx = grid.spacing[d]
        if d == 0:
            ap, a0, am = sp[2:, 1:-1] if grid.dim == 2 else sp[2:], sigma, sp[:-2, 1:-1] if grid.dim == 2 else sp[:-2]
        else:
            ap, a0, am = sp[1:-1, 2:], sigma, sp[1:-1, :-2]
        grad2 = grad2 + ((ap - am) / (2.0 * dx)) ** 2
        lap = lap + (ap - 2.0 * a0 + am) / dx ** 2
    om2 = np.ones_like(sigma)
    gmax = np.sqrt(grad2.max())
    if gmax > 0 and mon.theta > 0:
        om2 = om2 + mon.theta * grad2 / gmax ** 2
    lmax = np.abs(lap).max()
    if mon.lap_weight > 0 and lmax > 0:
        om2 = om2 + mon.lap_weight * (lap / lmax) ** 2
    return np.sqrt(om2)


def smooth(w, grid, passes=1):
    """[1 2 1]/4 low-pass filter in every direction."""
    for _ in range(passes):
        for d in range(grid.dim):
            wp = _pad_field(w, grid)
            if d == 0:
                c = wp[:, 1:-1] if grid.dim == 2 else wp
                w = 0.25 * c[:-2] + 0.5 * c[1:-1] + 0.25 * c[2:]
            else:
                c = wp[1:-1]
                w = 0.25 * c[:, :-2] + 0.5 * c[:, 1:-1] + 0.25 * c[:, 2:]
    return w


def relax_mesh(x, omega, grid, sweeps=10, damping=DAMPING):
    """Damped Jacobi sweeps for sum_l d/dxi_l (omega dx/dxi_l) = 0.

    Edge weights are harmonic means of nodal omega. Outflow boundary nodes
    keep their normal coordinate and slide along the boundary.
    """
    x = np.array(x, dtype=float)
    dim = grid.dim
    n = omega.shape
    # edge weights and neighbour access per direction
    wts = []
    for d in range(dim):
        op = np.roll(omega, -1, axis=d)
        we = 2.0 * omega * op / (omega + op) / grid.spacing[d] ** 2  # edge i+1/2
        wm = np.roll(we, 1, axis=d)  # edge i-1/2
        if grid.bc[d] == "outflow":
            idx = [slice(None)] * 2
            idx[d] = n[d] - 1
            we[tuple(idx)] = 0.0
            idx[d] = 0
            wm[tuple(idx)] = 0.0
        wts.append((we, wm))
    on_face = []
    for d in range(dim):
        f = np.zeros(n, dtype=bool)
        if grid.bc[d] == "outflow":
            idx = [slice(None)] * 2
            idx[d] = 0
            f[tuple(idx)] = True
            idx[d] = n[d] - 1
            f[tuple(idx)] = True
        on_face.append(f)
    for _ in range(sweeps):
        new = x.copy()
        for k in range(dim):
            num = np.zeros(n)
            den = np.zeros(n)
            for d in range(dim):
                we, wm = wts[d]
                keep = ~on_face[d]
                xp = np.roll(x[k], -1, axis=d)
                xm = np.roll(x[k], 1, axis=d)
                if grid.bc[d] == "periodic" and k == d:
                    L = grid.hi[d] - grid.lo[d]
                    idx = [slice(None)] * 2
                    idx[d] = n[d] - 1
                    xp[tuple(idx)] += L
                    idx[d] = 0
                    xm[tuple(idx)] -= L
                num = num + np.where(keep, we * xp + wm * xm, 0.0)
                den = den + np.where(keep, we + wm, 0.0)
            fixed = on_face[k] | (den <= 0)
            jac = np.where(fixed, x[k], num / np.where(den > 0, den, 1.0))
            new[k] = x[k] + damping * (jac - x[k])
        x = new
    return x


# ------------------------------------------------------------------- solver

class MovingSolver:
    """Coupled update of (J U^, J, x) on an adaptive mesh.

    The lattice is `grid` (computational coordinates coincide with the uniform
    physical mesh). bathymetry is the analytic b(x1, x2); it is sampled once at
    the initial nodes and evolved afterwards.
    """

    def __init__(self, sys, grid, scheme=None, gamma=None, monitor=None, source=None, adapt=True):
        self.sys = sys
        self.grid = grid
        self.scheme = scheme or Scheme()
        if self.scheme.p > 3:
            raise ConfigError("moving meshes support p <= 3")
        grid.check_stencil(self.scheme.p)
        self.gamma = default_gamma(sys) if gamma is None else float(gamma)
        check_gamma(sys, self.gamma)
        self.monitor = monitor or Monitor(theta=0.0)
        self.source = source
        self.adapt = adapt
        self.G = GHOSTS
        self.nrhs = 0
        self.weights = quadrature_weights(grid)

    # -------------------------------------------------------------- setup
    def initialize(self, initial, bathymetry, rounds=10):
        """Adapt the mesh to the initial data, then sample it.

        initial(x1, x2, b) -> U and bathymetry(x1, x2) -> b are evaluated at
        the physical node positions. Returns (Uc, J, x).
        """
        x = identity_mesh(self.grid)
        if self.adapt:
            for _ in range(rounds):
                U, b = self._sample(initial, bathymetry, x)
                x = self.adapt_mesh(U, b, x)
        U, b = self._sample(initial, bathymetry, x)
        J = coordinate_jacobian(x, self.grid, self.scheme.p)
        if np.any(J <= 0):
            raise MeshTanglingError("non-positive Jacobian in the initial mesh")
        Uh = np.concatenate([U, b[None]], axis=0)
        return Uh * J, J, x

    def _sample(self, initial, bathymetry, x):
        b = np.asarray(bathymetry(x[0], x[1]), dtype=float) + np.zeros_like(x[0])
        return np.asarray(initial(x[0], x[1], b), dtype=float), b

    def adapt_mesh(self, U, b, x):
        mon = self.monitor
        sigma = monitor_field(mon.sigma, U, b, self.sys.M)
        om = smooth(monitor_omega(sigma, mon, self.grid), self.grid, mon.smoothing)
        xn = relax_mesh(x, om, self.grid, mon.sweeps)
        check_mesh(xn, self.grid)
        return xn

    # ---------------------------------------------------------- operators
    def split(self, Uc, J):
        Uh = Uc / J
        check_wet(Uh[0:3 * self.sys.M:3])
        return Uh[:-1], Uh[-1]

    def _geometry(self, x, xdot):
        G, grid = self.G, self.grid
        xp = pad_coords(x, grid, 2 * G)
        xdp = pad_velocity(xdot, grid, 2 * G)
        return metrics(xp, xdp, grid, self.scheme.p, trim=G)

    def _sweep(self, Uh, V, Vh, met, l, dxi):
        """Flux/source differences along lattice axis 1 for direction l."""
        sys, G, p = self.sys, self.G, self.scheme.p
        M, g = sys.M, sys.g
        n = Uh.shape[1] - 2 * G
        lo, nI = G - 1, n + 1
        U, b = Uh[:-1], Uh[-1:]
        h, u, v = to_primitive(U)
        z = layer_z(h, b, sys)
        mx, my, jt = (a[None] for a in met)

        def flux(L, R):
            hL, uL, vL, zL, bL, jL, xL, yL = L
            hR, uR, vR, zR, bR, jR, xR, yR = R
            hm = mean(hL, hR)
            jm, xm, ym = mean(jL, jR), mean(xL, xR), mean(yL, yR)
            F = np.empty((3 * M + 1,) + hm.shape[1:])
            F1 = ec_flux_prim(hL, uL, vL, zL, hR, uR, vR, zR, g, 1)
            F2 = ec_flux_prim(hL, uL, vL, zL, hR, uR, vR, zR, g, 2)
            F[:-1] = xm * F1 + ym * F2
            F[0:-1:3] += jm * hm
            F[1:-1:3] += jm * hm * mean(uL, uR)
            F[2:-1:3] += jm * hm * mean(vL, vR)
            F[-1:] = jm * mean(bL, bR)
            return F

        fields = [h, u, v, z, b, jt, mx, my]
        F = pair_sum(flux, fields, p, lo, nI)
        Bx = pair_sum(lambda L, R: 0.25 * (L[1] + R[1]) * (L[0] + R[0]), [z, mx], p, lo, nI)
        By = pair_sum(lambda L, R: 0.25 * (L[1] + R[1]) * (L[0] + R[0]), [z, my], p, lo, nI)
        Jf = pair_sum(lambda L, R: mean(L[0], R[0]), [jt], p, lo, nI)[0]
        if self.scheme.dissipation:
            F = F - self._dissipation(Uh, V, Vh, (mx, my, jt), lo, nI)
        out = -(F[:, 1:] - F[:, :-1]) / dxi
        hi = h[:, G:G + n]
        out[1:-1:3] -= g * hi * (Bx[:, 1:] - Bx[:, :-1]) / dxi
        out[2:-1:3] -= g * hi * (By[:, 1:] - By[:, :-1]) / dxi
        dJ = -(Jf[1:] - Jf[:-1]) / dxi
        return out, dJ

    def _dissipation(self, Uh, V, Vh, met, lo, nI):
        sys = self.sys

        def sh(a, k):
            return a[:, lo + k: lo + k + nI]

        def sh0(a, k):
            return a[0, lo + k: lo + k + nI]

        mx, my, jt = met
        nx = 0.5 * (sh0(mx, 0) + sh0(mx, 1))
        ny = 0.5 * (sh0(my, 0) + sh0(my, 1))
        jti = 0.5 * (sh0(jt, 0) + sh0(jt, 1))
        Lt = np.hypot(nx, ny)
        if np.any(Lt == 0):
            raise MeshTanglingError("degenerate metric terms at an interface")
        c, s = nx / Lt, ny / Lt
        U = Uh[:-1]
        UL, UR = sh(U, 0), sh(U, 1)
        Ub = 0.5 * (UL + UR)
        ws = self.scheme.wave
        a = np.maximum(np.maximum(max_wave_speed(dis.rotate(UL, c, s), sys, 1, ws),
                                  max_wave_speed(dis.rotate(UR, c, s), sys, 1, ws)),
                       max_wave_speed(dis.rotate(Ub, c, s), sys, 1, ws))
        ahat = alpha_hat(jti, Lt, a)
        D = np.zeros((U.shape[0] + 1,) + Ub.shape[1:])
        D[:-1] = dis.moving_mesh_D_hat(ahat, c, s, Ub, [sh(V, k) for k in range(-2, 4)], sys)
        D = D + dis.moving_mesh_D_ring(jti, [sh(Uh, k) for k in range(-2, 4)], sh(Vh, 0), sh(Vh, 1), sys.M)
        return D

    def rhs(self, Uc, J, x, xdot, t=0.0):
        """Tendencies (dUc/dt, dJ/dt)."""
        self.nrhs += 1
        if np.any(J <= 0):
            bad = tuple(int(i[0]) for i in np.nonzero(J <= 0))
            raise MeshTanglingError(f"non-positive Jacobian at node {bad}")
        grid, G = self.grid, self.G
        U, b = self.split(Uc, J)
        Uh = np.concatenate([U, b[None]], axis=0)
        Up = pad(Uh, grid.bc, G, grid.dim)
        met = self._geometry(x, xdot)
        V = entropy_variables(Up[:-1], Up[-1], self.sys)
        Vh = extended_entropy_variables(Up[:-1], Up[-1], self.sys, self.gamma)
        dU = np.zeros_like(Uc)
        dJ = np.zeros_like(J)
        for l in range(grid.dim):
            ml = (met.m[l][0], met.m[l][1], met.jt[l])
            if grid.dim == 1:
                r, j = self._sweep(Up, V, Vh, ml, l, grid.spacing[0])
            else:
                def cut(a):
                    # keep interior nodes across the sweep, sweep axis first
                    if l == 0:
                        return a[..., G:-G]
                    return np.swapaxes(a[..., G:-G, :], -1, -2)
                r, j = self._sweep(cut(Up), cut(V), cut(Vh), tuple(cut(a) for a in ml), l, grid.spacing[l])
                if l == 1:
                    r, j = np.swapaxes(r, -1, -2), np.swapaxes(j, -1, -2)
            dU += r
            dJ += j
        if self.source is not None:
            S = self.source(x[0], x[1], t)
            dU[:-1] += J * S
        if not np.all(np.isfinite(dU)):
            loc = tuple(int(i[0]) for i in np.nonzero(~np.isfinite(dU)))
            raise FloatingPointError(f"non-finite tendency at index {loc}")
        return dU, dJ

    # ----------------------------------------------------------- stepping
    def node_speeds(self, Uc, J, x, xdot):
        """max over nodes of |J xi_t| + |grad xi| alpha(T U) per direction."""
        U, _ = self.split(Uc, J)
        G = self.G
        met = self._geometry(x, xdot)
        out = []
        for l in range(self.grid.dim):
            s = (slice(G, -G), slice(G, -G)) if self.grid.dim == 2 else (slice(G, -G), slice(None))
            mx, my, jt = met.m[l][0][s], met.m[l][1][s], met.jt[l][s]
            Lt = np.hypot(mx, my)
            a = max_wave_speed(dis.rotate(U, mx / Lt, my / Lt), self.sys, 1, self.scheme.wave)
            out.append(float(np.max(np.abs(jt) + Lt * a)))
        return out

    def cfl_dt(self, Uc, J, x, xdot):
        sch = self.scheme
        if sch.dt_policy == "accuracy":
            return sch.cfl * min(self.grid.spacing[: self.grid.dim]) ** (5.0 / 3.0)
        s = sum(a / d for a, d in zip(self.node_speeds(Uc, J, x, xdot), self.grid.spacing))
        if s <= 0:
            raise FloatingPointError("zero wave speed everywhere")
        return sch.cfl / s

    def step(self, Uc, J, x, xdot, t, dt):
        """One coupled SSP-RK3 step with the mesh velocity frozen.

        The flow rows use the usual convex stage form. J, J b and x are
        advanced in the equivalent increment form, so they stay bitwise
        constant whenever their tendencies vanish (static meshes).
        """
        dU1, dJ1 = self.rhs(Uc, J, x, xdot, t)
        U1, J1, x1 = Uc + dt * dU1, J + dt * dJ1, x + dt * xdot
        dU2, dJ2 = self.rhs(U1, J1, x1, xdot, t + dt)
        U2 = 0.75 * Uc + 0.25 * (U1 + dt * dU2)
        U2[-1] = Uc[-1] + 0.25 * dt * (dU1[-1] + dU2[-1])
        J2 = J + 0.25 * dt * (dJ1 + dJ2)
        x2 = x + 0.5 * dt * xdot
        dU3, dJ3 = self.rhs(U2, J2, x2, xdot, t + 0.5 * dt)
        Un = Uc / 3.0 + 2.0 / 3.0 * (U2 + dt * dU3)
        Un[-1] = Uc[-1] + dt / 6.0 * (dU1[-1] + dU2[-1] + 4.0 * dU3[-1])
        Jn = J + dt / 6.0 * (dJ1 + dJ2 + 4.0 * dJ3)
        xn = x + dt * xdot
        return Un, Jn, xn

    def mesh_velocity(self, Uc, J, x, t, t_end):
        """Target mesh from the monitor, its velocity and the admissible step."""
        if not self.adapt:
            xdot = np.zeros_like(x)
            return xdot, min(self.cfl_dt(Uc, J, x, xdot), t_end - t)
        dt0 = self.cfl_dt(Uc, J, x, np.zeros_like(x))
        U, b = self.split(Uc, J)
        xt = self.adapt_mesh(U, b, x)
        xdot = (xt - x) / dt0
        dt = min(dt0, self.cfl_dt(Uc, J, x, xdot), t_end - t)
        return xdot, dt

    def total_energy(self, Uc, J):
        U, b = self.split(Uc, J)
        e = self.weights * J * extended_energy(U, b, self.sys, self.gamma)
        return math.fsum(e.ravel()) * self.grid.cell_measure

    def run(self, Uc, J, x, t_end, t0=0.0, callback=None, max_steps=10 ** 7):
        t, k = t0, 0
        while t < t_end - 1e-14 * max(1.0, abs(t_end)):
            xdot, dt = self.mesh_velocity(Uc, J, x, t, t_end)
            Uc, J, x = self.step(Uc, J, x, xdot, t, dt)
            t += dt
            k += 1
            if callback is not None:
                callback(k, t, dt, Uc, J, x)
            if k >= max_steps:
                break
        return Uc, J, x, t
