"""WENO-Z based dissipation operators that respect the sign property.

All stencil routines take a sequence of arrays (one per stencil node) and
work elementwise, so they apply unchanged to single values or whole grids.
"""
import numpy as np

from .energy import scaling_matrix

EPS = 1e-12
POWER = 2
IDEAL = (0.1, 0.6, 0.3)


def _candidates(a, b, c, d, e):
    q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0
    q1 = (-b + 5.0 * c + 2.0 * d) / 6.0
    q2 = (2.0 * c + 5.0 * d - e) / 6.0
    return q0, q1, q2


def smoothness(a, b, c, d, e):
    """Jiang-Shu indicators of the three quadratic substencils."""
    b0 = 13.0 / 12.0 * (a - 2.0 * b + c) ** 2 + 0.25 * (a - 4.0 * b + 3.0 * c) ** 2
    b1 = 13.0 / 12.0 * (b - 2.0 * c + d) ** 2 + 0.25 * (b - d) ** 2
    b2 = 13.0 / 12.0 * (c - 2.0 * d + e) ** 2 + 0.25 * (3.0 * c - 4.0 * d + e) ** 2
    return b0, b1, b2


def weno_z5_weights(beta):
    b0, b1, b2 = beta
    tau = np.abs(b0 - b2)
    a = [d * (1.0 + (tau / (bk + EPS)) ** POWER) for d, bk in zip(IDEAL, beta)]
    s = a[0] + a[1] + a[2]
    return a[0] / s, a[1] / s, a[2] / s


def weno_z5(a, b, c, d, e, weights=None):
    """Left-biased value at the interface between c and d from nodes a..e.

    For the right limit pass the mirrored stencil (values from the other side).
    """
    if weights is None:
        weights = weno_z5_weights(smoothness(a, b, c, d, e))
    q = _candidates(a, b, c, d, e)
    return weights[0] * q[0] + weights[1] * q[1] + weights[2] * q[2]


def weno_jump(S, shared=None):
    """Right limit minus left limit at x_{i+1/2} from values S[k] at i-2+k, k=0..5.

    shared optionally gives a pair of (left, right) weight triples to use
    instead of the data's own weights.
    """
    wl = wr = None
    if shared is not None:
        wl, wr = shared
    left = weno_z5(S[0], S[1], S[2], S[3], S[4], wl)
    right = weno_z5(S[5], S[4], S[3], S[2], S[1], wr)
    return right - left


def shared_weights(S1, S2):
    """Common weights for two fields, built from their summed indicators."""
    out = []
    for idx in ((0, 1, 2, 3, 4), (5, 4, 3, 2, 1)):
        b1 = smoothness(*[S1[i] for i in idx])
        b2 = smoothness(*[S2[i] for i in idx])
        out.append(weno_z5_weights(tuple(x + y for x, y in zip(b1, b2))))
    return tuple(out)


def sign_mask(recon_jump, raw_jump):
    """1 where the reconstructed and raw jumps do not disagree in sign."""
    return (np.sign(recon_jump) * np.sign(raw_jump) >= 0).astype(float)


def apply_T(R, a):
    """R^T a for R of shape (..., n, n) and a of shape (n, ...)."""
    return np.einsum("...ji,j...->i...", R, a)


def apply(R, a):
    """R a for R of shape (..., n, n) and a of shape (n, ...)."""
    return np.einsum("...ij,j...->i...", R, a)


def scaled_jumps(Ubar, V, sys):
    """Scaled variables R(Ubar)^T V on a 6-node stencil.

    V is a sequence of six entropy-variable arrays (nodes i-2..i+3). Returns
    R, the WENO jump and the raw jump of the scaled variables.
    """
    R = scaling_matrix(Ubar, sys)
    Vt = [apply_T(R, Vk) for Vk in V]
    return R, weno_jump(Vt), Vt[3] - Vt[2]


def fixed_mesh_D(alpha, R, Y, jump):
    """0.5 alpha R Y <<V~>>."""
    return 0.5 * alpha * apply(R, Y * jump)


def rotation_angle(m1, m2):
    if np.any((m1 == 0) & (m2 == 0)):
        raise FloatingPointError("degenerate metric terms: mesh quality error")
    return np.arctan2(m2, m1)


def rotation_T(m1, m2, M):
    """Block rotation matrix aligning layer velocities with the normal (m1, m2)."""
    phi = rotation_angle(np.asarray(m1, dtype=float), np.asarray(m2, dtype=float))
    c, s = np.cos(phi), np.sin(phi)
    T = np.zeros(np.shape(phi) + (3 * M, 3 * M))
    for m in range(M):
        k = 3 * m
        T[..., k, k] = 1.0
        T[..., k + 1, k + 1] = c
        T[..., k + 1, k + 2] = s
        T[..., k + 2, k + 1] = -s
        T[..., k + 2, k + 2] = c
    return T, phi


def rotate(a, c, s, inverse=False):
    """Apply T (or T^{-1} = T^T) to the velocity pairs of a (3M, ...) array."""
    a = np.asarray(a, dtype=float)
    out = a.copy()
    x, y = a[1::3], a[2::3]
    if inverse:
        out[1::3] = c * x - s * y
        out[2::3] = s * x + c * y
    else:
        out[1::3] = c * x + s * y
        out[2::3] = -s * x + c * y
    return out


def moving_mesh_D_hat(alpha_hat, c, s, Ubar, V, sys):
    """0.5 alpha_hat T^{-1} R(T Ubar) Y <<V~>> with V~ = R(T Ubar)^T T V."""
    R, wj, raw = scaled_jumps(rotate(Ubar, c, s), [rotate(Vk, c, s) for Vk in V], sys)
    D = fixed_mesh_D(alpha_hat, R, sign_mask(wj, raw), wj)
    return rotate(D, c, s, inverse=True)


def moving_mesh_D_ring(jxt, Uh, Vh_left, Vh_right, M):
    """0.5 |J xi_t| Y <<U^>> for the (3M+1)-component moving-mesh state.

    Uh holds six stencil arrays of shape (3M+1, ...); h_M and b share one set
    of WENO weights and one sign flag.
    """
    iM, ib = 3 * M - 3, 3 * M
    jump = weno_jump(Uh)
    w = shared_weights([S[iM] for S in Uh], [S[ib] for S in Uh])
    jump[iM] = weno_jump([S[iM] for S in Uh], w)
    jump[ib] = weno_jump([S[ib] for S in Uh], w)
    Y = sign_mask(jump, Vh_right - Vh_left)
    pair = Y[iM] * Y[ib]
    Y[iM] = pair
    Y[ib] = pair
    return 0.5 * np.abs(jxt) * Y * jump
