"""Two-point energy-conservative fluxes, matching source averages and their
high-order linear combinations."""
import numpy as np

from .energy import entropy_variables, potential_flux
from .model import ConfigError, layer_z, to_primitive

# alpha_{p,q}: sum_q q a_q = 1 and sum_q q^(2s-1) a_q = 0 for s = 2..p
ALPHA = {
    1: (1.0,),
    2: (4.0 / 3.0, -1.0 / 6.0),
    3: (1.5, -0.3, 1.0 / 30.0),
}


def coefficients(p):
    if p not in ALPHA:
        raise ConfigError(f"order parameter p must be 1, 2 or 3, got {p}")
    return ALPHA[p]


def mean(a, b):
    return 0.5 * (a + b)


def jump(a, b):
    """Right minus left."""
    return b - a


def ec_flux_prim(hL, uL, vL, zL, hR, uR, vR, zR, g, direction=1):
    """Per-layer EC flux from primitive data of shape (M, ...); returns (3M, ...)."""
    hm = mean(hL, hR)
    um = mean(uL, uR)
    vm = mean(vL, vR)
    pres = 0.5 * g * mean(hL * hL, hR * hR) + g * (mean(hL * zL, hR * zR) - hm * mean(zL, zR))
    F = np.empty((3 * hm.shape[0],) + hm.shape[1:])
    if direction == 1:
        F[0::3] = hm * um
        F[1::3] = hm * um * um + pres
        F[2::3] = hm * um * vm
    else:
        F[0::3] = hm * vm
        F[1::3] = hm * vm * um  # mirrors direction 1 under the u, v swap
        F[2::3] = hm * vm * vm + pres
    return F


def ec_flux(UL, UR, bL, bR, sys, direction=1):
    """Two-point EC flux between two states (3M, ...) with bathymetry bL, bR."""
    hL, uL, vL = to_primitive(UL)
    hR, uR, vR = to_primitive(UR)
    zL = layer_z(hL, bL, sys)
    zR = layer_z(hR, bR, sys)
    return ec_flux_prim(hL, uL, vL, zL, hR, uR, vR, zR, sys.g, direction)


def central_flux(UL, UR, sys, direction=1):
    """Plain average of physical fluxes; not EC, used as a negative control."""
    from .energy import flux
    return mean(flux(UL, sys, direction), flux(UR, sys, direction))


def source_two_point(UL, UR, bL, bR, sys, direction=1):
    """Mean of the source vectors B_{l,m}: z_m averaged in layer m's momentum slot."""
    zL = layer_z(np.asarray(UL)[0::3], bL, sys)
    zR = layer_z(np.asarray(UR)[0::3], bR, sys)
    B = np.zeros((sys.ncomp,) + np.shape(zL)[1:])
    B[direction::3] = mean(zL, zR)
    return B


def _layer_terms(UL, UR, bL, bR, sys, F, direction):
    hL, uL, vL = to_primitive(UL)
    hR, uR, vR = to_primitive(UR)
    wL, wR = (uL, uR) if direction == 1 else (vL, vR)
    zL = layer_z(hL, bL, sys)
    zR = layer_z(hR, bR, sys)
    dV = entropy_variables(UR, bR, sys) - entropy_variables(UL, bL, sys)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (hL.ndim - 1))
    g = sys.g
    vf = dV * F
    per = (vf[0::3] + vf[1::3] + vf[2::3]
           - 0.5 * g * rho * (hR * hR * wR - hL * hL * wL)
           - g * rho * (hR * zR * wR - hL * zL * wL)
           + 0.5 * g * rho * (hR * wR - hL * wL) * (zL + zR))
    return per


def ec_residual(UL, UR, bL, bR, sys, F=None, direction=1):
    """Residual of the sufficient EC condition for flux F between two states.

    Vanishes for an entropy-conservative pair; computed from the jump of V, the
    jump of the potential flux and the source-coupling terms.
    """
    if F is None:
        F = ec_flux(UL, UR, bL, bR, sys, direction)
    dV = entropy_variables(UR, bR, sys) - entropy_variables(UL, bL, sys)
    hL, uL, vL = to_primitive(UL)
    hR, uR, vR = to_primitive(UR)
    wL, wR = (uL, uR) if direction == 1 else (vL, vR)
    zL = layer_z(hL, bL, sys)
    zR = layer_z(hR, bR, sys)
    rho = np.reshape(sys.rho, (-1,) + (1,) * (hL.ndim - 1))
    g = sys.g
    dpsi = potential_flux(UR, sys, direction) - potential_flux(UL, sys, direction)
    r = np.sum(dV * F, axis=0) - dpsi
    r = r - np.sum(g * rho * (hR * zR * wR - hL * zL * wL), axis=0)
    r = r + np.sum(0.5 * g * rho * (hR * wR - hL * wL) * (zL + zR), axis=0)
    return r


def ec_residual_layers(UL, UR, bL, bR, sys, F=None, direction=1):
    """The same residual split into one term per layer, shape (M, ...)."""
    if F is None:
        F = ec_flux(UL, UR, bL, bR, sys, direction)
    return _layer_terms(UL, UR, bL, bR, sys, F, direction)


def pair_sum(pairfun, fields, p, lo, n, axis=1):
    """sum_q alpha_q sum_{s<q} pairfun(left, right) over interfaces i+1/2.

    fields are arrays indexed along `axis`; interface k (0..n-1) sits between
    entries lo+k and lo+k+1. left/right are lists of the fields at i-s and i-s+q.
    """
    def take(f, start):
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(start, start + n)
        return f[tuple(idx)]

    out = 0.0
    for q, a in enumerate(coefficients(p), 1):
        acc = 0.0
        for s in range(q):
            acc = acc + pairfun([take(f, lo - s) for f in fields],
                                [take(f, lo - s + q) for f in fields])
        out = out + a * acc
    return out


def high_order_flux(U, b, sys, p=3, direction=1):
    """High-order flux and source average at the centre interface of a stencil.

    U has shape (3M, 2p, ...) holding nodes i-p+1..i+p, b has shape (2p, ...).
    Returns (F, B) at x_{i+1/2}; B holds the combined z_m averages, shape (M, ...).
    """
    U = np.asarray(U, dtype=float)
    if U.shape[1] < 2 * p:
        raise ConfigError(f"stencil needs {2 * p} nodes, got {U.shape[1]}")
    h, u, v = to_primitive(U)
    z = layer_z(h, b, sys)
    g = sys.g
    F = pair_sum(lambda L, R: ec_flux_prim(*L, *R, g, direction), [h, u, v, z], p, p - 1, 1)
    B = pair_sum(lambda L, R: mean(L[0], R[0]), [z], p, p - 1, 1)
    return F[:, 0], B[:, 0]
