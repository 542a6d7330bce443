"""Maximal wave speeds: characteristic polynomials for two and three layers
with Lagrange root bounds, plus a numerical eigenvalue fallback."""
import warnings

import numpy as np

from .energy import quasilinear_matrix
from .model import to_primitive


class HyperbolicityWarning(RuntimeWarning):
    """Complex characteristic speeds were found by the numerical fallback."""


def charpoly_m2(h1, h2, u1, u2, r12, g):
    """Coefficients c1..c4 of the monic quartic for two layers."""
    c1 = -2.0 * (u1 + u2)
    c2 = (u1 + u2) ** 2 + 2.0 * u1 * u2 - g * (h1 + h2)
    c3 = -2.0 * u1 * u1 * u2 - 2.0 * u1 * u2 * u2 + 2.0 * g * h2 * u1 + 2.0 * g * h1 * u2
    c4 = u1 * u1 * u2 * u2 - g * h1 * u2 * u2 - g * h2 * u1 * u1 + g * g * h1 * h2 * (1.0 - r12)
    return np.stack(np.broadcast_arrays(c1, c2, c3, c4))


def charpoly_m3(h, u, r12, r13, r23, g):
    """Coefficients c1..c6 of the monic sextic for three layers."""
    h1, h2, h3 = h
    u1, u2, u3 = u
    s23 = u2 * u2 + 4.0 * u2 * u3 + u3 * u3
    s13 = u1 * u1 + 4.0 * u1 * u3 + u3 * u3
    s12 = u1 * u1 + 4.0 * u1 * u2 + u2 * u2
    c1 = -2.0 * (u1 + u2 + u3)
    c2 = u1 * u1 + u2 * u2 + u3 * u3 + 4.0 * (u1 * u2 + u1 * u3 + u2 * u3) - g * (h1 + h2 + h3)
    c3 = (2.0 * g * (h1 * (u2 + u3) + h2 * (u1 + u3) + h3 * (u1 + u2))
          - 2.0 * (u1 * u1 * (u2 + u3) + u1 * s23 + u2 * u3 * (u2 + u3)))
    c4 = (g * g * (h1 * h2 * (1.0 - r12) + h1 * h3 * (1.0 - r13) + h2 * h3 * (1.0 - r23))
          - g * (h1 * s23 + h2 * s13 + h3 * s12)
          + u1 * u1 * s23 + 4.0 * u1 * u2 * u3 * (u2 + u3) + u2 * u2 * u3 * u3)
    c5 = 2.0 * (g * g * (h1 * h2 * (r12 - 1.0) * u3 + h1 * h3 * (r13 - 1.0) * u2 + h2 * h3 * (r23 - 1.0) * u1)
                + g * (h1 * u2 * u3 * (u2 + u3) + h2 * u1 * u3 * (u1 + u3) + h3 * u1 * u2 * (u1 + u2))
                - u1 * u2 * u3 * (u1 * (u2 + u3) + u2 * u3))
    c6 = (g ** 3 * h1 * h2 * h3 * (r12 + r23 - r12 * r23 - 1.0)
          - g * g * (h1 * h2 * (r12 - 1.0) * u3 * u3 + h1 * h3 * (r13 - 1.0) * u2 * u2
                     + h2 * h3 * (r23 - 1.0) * u1 * u1)
          - g * (u3 * u3 * (h1 * u2 * u2 + h2 * u1 * u1) + h3 * u1 * u1 * u2 * u2)
          + u1 * u1 * u2 * u2 * u3 * u3)
    return np.stack(np.broadcast_arrays(c1, c2, c3, c4, c5, c6))


def _upper(c):
    """Sum of the two largest |c_j|^(1/j) over negative c_j (axis 0 is j)."""
    n = c.shape[0]
    j = np.arange(1, n + 1).reshape((-1,) + (1,) * (c.ndim - 1))
    with np.errstate(divide="ignore"):
        vals = np.where(c < 0, np.exp(np.log(np.abs(np.where(c < 0, c, 1.0))) / j), 0.0)
    if n == 1:
        return vals[0]
    top = -np.partition(-vals, 1, axis=0)[:2]
    return top[0] + top[1]


def lagrange_bounds(c):
    """(lambda_min, lambda_max) bounds for the real roots of a monic polynomial."""
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise FloatingPointError("non-finite characteristic coefficients")
    sign = (-1.0) ** np.arange(1, c.shape[0] + 1)
    d = c * sign.reshape((-1,) + (1,) * (c.ndim - 1))
    return -_upper(d), _upper(c)


def charpoly(U, sys, direction=1):
    h, u, v = to_primitive(U)
    w = u if direction == 1 else v
    rho = sys.rho
    if sys.M == 2:
        return charpoly_m2(h[0], h[1], w[0], w[1], rho[0] / rho[1], sys.g)
    if sys.M == 3:
        return charpoly_m3(h, w, rho[0] / rho[1], rho[0] / rho[2], rho[1] / rho[2], sys.g)
    raise ValueError("closed-form coefficients exist for two and three layers only")


def numeric_speed(U, sys, direction=1, warn=True):
    """max |Re l| + |Im l| over eigenvalues of the quasi-linear matrix."""
    U = np.asarray(U, dtype=float)
    A = quasilinear_matrix(U, sys, direction)
    lam = np.linalg.eigvals(A)
    if warn and np.any(np.abs(lam.imag) > 1e-12 * (1.0 + np.abs(lam.real))):
        warnings.warn("complex characteristic speeds (loss of hyperbolicity)", HyperbolicityWarning)
    return np.max(np.abs(lam.real) + np.abs(lam.imag), axis=-1)


def max_wave_speed(U, sys, direction=1, method="auto"):
    """Per-node bound on the characteristic speeds in one direction."""
    U = np.asarray(U, dtype=float)
    h, u, v = to_primitive(U)
    w = u if direction == 1 else v
    if method == "numeric" or (method == "auto" and sys.M > 3):
        return numeric_speed(U, sys, direction)
    if sys.M == 1:
        return np.abs(w[0]) + np.sqrt(sys.g * h[0])
    lo, hi = lagrange_bounds(charpoly(U, sys, direction))
    return np.maximum(np.maximum(hi, -lo), np.max(np.abs(w), axis=0))
