"""Energy algebra: energy and its fluxes, entropy variables, potentials,
Hessian, convexity identities and the scaling matrix R.

Node-wise functions take conserved data U of shape (3M, ...) and return
arrays over the trailing shape. Matrix-valued results put the two matrix
axes last, i.e. shape (..., 3M, 3M).
"""
import numpy as np

from .model import ConfigError, layer_z, to_primitive


def _vel(U, direction):
    h, u, v = to_primitive(U)
    return h, u, v, (u if direction == 1 else v)


def energy(U, b, sys):
    """Total energy density summed over layers."""
    h, u, v = to_primitive(U)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (h.ndim - 1))
    g = sys.g
    eta = np.sum(0.5 * rho * (h * u * u + h * v * v + g * h * h), axis=0)
    eta = eta + g * np.sum(rho * h, axis=0) * b
    for m in range(sys.M):
        for k in range(m):
            eta = eta + g * sys.rho[k] * h[k] * h[m]
    return eta


def energy_flux(U, b, sys, direction=1):
    """Energy flux q_1 (direction 1) or q_2 (direction 2)."""
    h, u, v, w = _vel(U, direction)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (h.ndim - 1))
    g = sys.g
    z = layer_z(h, b, sys)
    q = 0.5 * rho * w * (h * u * u + h * v * v) + g * rho * h * h * w + g * rho * h * w * z
    return np.sum(q, axis=0)


def flux(U, sys, direction=1):
    """Physical flux F_1 or F_2 (the coupling terms are kept separate)."""
    h, u, v, w = _vel(U, direction)
    F = np.empty_like(np.asarray(U, dtype=float))
    F[0::3] = h * w
    F[1::3] = h * u * w
    F[2::3] = h * v * w
    F[direction::3] += 0.5 * sys.g * h * h
    return F


def entropy_variables(U, b, sys):
    """V = d(eta)/dU, shape (3M, ...)."""
    h, u, v = to_primitive(U)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (h.ndim - 1))
    z = layer_z(h, b, sys)
    V = np.empty_like(np.asarray(U, dtype=float))
    V[0::3] = sys.g * rho * (h + z) - 0.5 * rho * (u * u + v * v)
    V[1::3] = rho * u
    V[2::3] = rho * v
    return V


def potential(U, sys):
    """phi = V^T U - eta, in closed form."""
    h = np.asarray(U)[0::3]
    phi = 0.0
    for m in range(sys.M):
        below = np.sum(h[m + 1:], axis=0) if m + 1 < sys.M else 0.0
        phi = phi + 0.5 * sys.g * sys.rho[m] * h[m] * (h[m] + 2.0 * below)
    return phi


def potential_flux(U, sys, direction=1):
    """psi_l = V^T F_l - q_l, in closed form."""
    h, u, v, w = _vel(U, direction)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (h.ndim - 1))
    return np.sum(0.5 * sys.g * rho * h * h * w, axis=0)


def coupling_matrix(U, sys, direction=1):
    """Non-conservative matrix N_l = g sum_m h_m dB_{l,m}/dU, shape (..., 3M, 3M)."""
    h = np.asarray(U, dtype=float)[0::3]
    M = sys.M
    C = sys.coupling()
    N = np.zeros(h.shape[1:] + (3 * M, 3 * M))
    for m in range(M):
        for k in range(M):
            if C[m, k] != 0.0:
                N[..., 3 * m + direction, 3 * k] = sys.g * h[m] * C[m, k]
    return N


def flux_jacobian(U, sys, direction=1):
    """dF_l/dU, block diagonal over layers, shape (..., 3M, 3M)."""
    h, u, v, w = _vel(U, direction)
    M = sys.M
    A = np.zeros(h.shape[1:] + (3 * M, 3 * M))
    t = 3 - direction  # the transverse momentum slot
    for m in range(M):
        s = 3 * m
        A[..., s, s + direction] = 1.0
        A[..., s + direction, s] = -w[m] * w[m] + sys.g * h[m]
        A[..., s + direction, s + direction] = 2.0 * w[m]
        A[..., s + t, s] = -u[m] * v[m]
        A[..., s + t, s + t] = w[m]
        A[..., s + t, s + direction] = (v[m] if direction == 1 else u[m])
    return A


def quasilinear_matrix(U, sys, direction=1):
    return flux_jacobian(U, sys, direction) + coupling_matrix(U, sys, direction)


def hessian(U, sys):
    """dV/dU assembled layer by layer, shape (..., 3M, 3M)."""
    h, u, v = to_primitive(U)
    M, g = sys.M, sys.g
    H = np.zeros(h.shape[1:] + (3 * M, 3 * M))
    for m in range(M):
        s, r = 3 * m, sys.rho[m] / h[m]
        H[..., s, s] = r * (u[m] ** 2 + v[m] ** 2 + g * h[m])
        H[..., s, s + 1] = H[..., s + 1, s] = -r * u[m]
        H[..., s, s + 2] = H[..., s + 2, s] = -r * v[m]
        H[..., s + 1, s + 1] = r
        H[..., s + 2, s + 2] = r
        for k in range(m):
            H[..., 3 * k, s] = H[..., s, 3 * k] = g * sys.rho[k]
    return H


def hessian_det(U, sys):
    """Closed-form determinant of the Hessian."""
    h = np.asarray(U, dtype=float)[0::3]
    rho = sys.rho
    d = sys.g ** sys.M * rho[0] ** 3
    for m in range(1, sys.M):
        d *= rho[m] ** 2 * (rho[m] - rho[m - 1])
    return d / np.prod(h * h, axis=0)


def quadratic_form(U, beta, sys):
    """beta^T H beta written as a sum of squares."""
    h, u, v = to_primitive(U)
    beta = np.asarray(beta, dtype=float)
    bd = beta[0::3]
    g, rho = sys.g, sys.rho
    tail = np.cumsum(bd[::-1], axis=0)[::-1]  # tail[m] = sum_{l>=m} beta_depth_l
    Q = g * rho[0] * tail[0] ** 2
    for m in range(1, sys.M):
        Q = Q + g * (rho[m] - rho[m - 1]) * tail[m] ** 2
    for m in range(sys.M):
        Q = Q + rho[m] / h[m] * ((u[m] * bd[m] - beta[3 * m + 1]) ** 2
                                 + (v[m] * bd[m] - beta[3 * m + 2]) ** 2)
    return Q


def scaling_matrix(U, sys):
    """R with R R^T = dU/dV; nonzeros on the diagonal and depth columns."""
    h, u, v = to_primitive(U)
    M, g, rho = sys.M, sys.g, sys.rho
    R = np.zeros(h.shape[1:] + (3 * M, 3 * M))
    for m in range(M):
        s = 3 * m
        if m < M - 1:
            drho = rho[m + 1] - rho[m]
            if drho <= 0:
                raise ConfigError("adjacent densities must differ")
            a = np.sqrt(rho[m + 1] / (g * drho * rho[m]))
            c = np.sqrt(rho[m] / (g * drho * rho[m + 1]))
            R[..., s, s] = a
            R[..., s + 1, s] = a * u[m]
            R[..., s + 2, s] = a * v[m]
            R[..., s + 3, s] = -c
            R[..., s + 4, s] = -c * u[m + 1]
            R[..., s + 5, s] = -c * v[m + 1]
        else:
            a = 1.0 / np.sqrt(g * rho[m])
            R[..., s, s] = a
            R[..., s + 1, s] = a * u[m]
            R[..., s + 2, s] = a * v[m]
        R[..., s + 1, s + 1] = np.sqrt(h[m] / rho[m])
        R[..., s + 2, s + 2] = np.sqrt(h[m] / rho[m])
    return R


# moving-mesh energy with bathymetry as an unknown

def default_gamma(sys):
    return sys.rho[-1]


def check_gamma(sys, gamma):
    if not gamma > 0.5 * sys.rho[-1]:
        raise ConfigError(f"gamma must exceed rho_M/2 = {0.5 * sys.rho[-1]:g}, got {gamma:g}")


def extended_energy(U, b, sys, gamma):
    check_gamma(sys, gamma)
    return energy(U, b, sys) + gamma * sys.g * np.asarray(b) ** 2


def extended_entropy_variables(U, b, sys, gamma):
    """Gradient of the extended energy w.r.t. (U, b), shape (3M+1, ...)."""
    check_gamma(sys, gamma)
    V = entropy_variables(U, b, sys)
    h = np.asarray(U, dtype=float)[0::3]
    rho = np.reshape(sys.rho, (-1,) + (1,) * (h.ndim - 1))
    last = sys.g * np.sum(rho * h, axis=0) + 2.0 * gamma * sys.g * np.asarray(b)
    return np.concatenate([V, np.asarray(last)[None]], axis=0)


def extended_potential(U, b, sys, gamma):
    """V^T (U, b) - extended energy; reduces to phi + g b sum(rho h) + gamma g b^2."""
    Vh = extended_entropy_variables(U, b, sys, gamma)
    Uh = np.concatenate([np.asarray(U, dtype=float), np.asarray(b, dtype=float)[None]], axis=0)
    return np.sum(Vh * Uh, axis=0) - extended_energy(U, b, sys, gamma)


def extended_hessian(U, b, sys, gamma):
    check_gamma(sys, gamma)
    H = hessian(U, sys)
    n = 3 * sys.M
    E = np.zeros(H.shape[:-2] + (n + 1, n + 1))
    E[..., :n, :n] = H
    for m in range(sys.M):
        E[..., 3 * m, n] = E[..., n, 3 * m] = sys.g * sys.rho[m]
    E[..., n, n] = 2.0 * gamma * sys.g
    return E


def extended_hessian_det(U, sys, gamma):
    check_gamma(sys, gamma)
    return hessian_det(U, sys) * sys.g * (2.0 * gamma - sys.rho[-1])
