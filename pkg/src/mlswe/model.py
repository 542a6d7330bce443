"""Layer stack, structured grids and conserved-field containers.

Conserved data is stored as one array of shape (3M, N1, N2) with component
index 3m + c (c = 0 depth, 1 x-momentum, 2 y-momentum). A 1D run uses N2 = 1.
"""
from dataclasses import dataclass, field

import numpy as np

H_MIN = 1e-10
GHOSTS = 3


class DryStateError(RuntimeError):
    """Raised when a layer depth drops below the dry-state floor."""


class ConfigError(ValueError):
    """Raised for physically or numerically inadmissible configurations."""


@dataclass(frozen=True)
class LayerSystem:
    """Densities (top to bottom, strictly increasing) and gravity."""
    rho: tuple
    g: float = 9.812

    def __post_init__(self):
        rho = tuple(float(r) for r in np.atleast_1d(self.rho))
        object.__setattr__(self, "rho", rho)
        if len(rho) < 1:
            raise ConfigError("need at least one layer")
        if rho[0] <= 0 or any(b <= a for a, b in zip(rho, rho[1:])):
            raise ConfigError(f"densities must satisfy 0 < rho_1 < ... < rho_M, got {rho}")
        if not self.g > 0:
            raise ConfigError("gravity must be positive")

    @property
    def M(self):
        return len(self.rho)

    @property
    def ncomp(self):
        return 3 * len(self.rho)

    def ratio(self, k, m):
        """rho_k / rho_m (0-based layer indices)."""
        return self.rho[k] / self.rho[m]

    def coupling(self):
        """Matrix C with z_m = b + sum_k C[m, k] h_k."""
        M = self.M
        C = np.zeros((M, M))
        for m in range(M):
            for k in range(M):
                if k > m:
                    C[m, k] = 1.0
                elif k < m:
                    C[m, k] = self.rho[k] / self.rho[m]
        return C


@dataclass
class StructuredGrid:
    """Uniform node lattice on a box.

    Outflow directions place nodes on both ends (spacing L/(N-1)); periodic
    directions hold N distinct nodes with spacing L/N.
    """
    lo: tuple
    hi: tuple
    n: tuple
    bc: tuple = ("outflow", "outflow")
    spacing: tuple = field(init=False)

    def __post_init__(self):
        self.lo = tuple(float(a) for a in self.lo)
        self.hi = tuple(float(a) for a in self.hi)
        self.n = tuple(int(a) for a in self.n)
        if isinstance(self.bc, str):
            self.bc = (self.bc, self.bc)
        self.bc = tuple(self.bc)
        for b in self.bc:
            if b not in ("periodic", "outflow"):
                raise ConfigError(f"unknown boundary kind {b!r}")
        sp = []
        for d in range(2):
            L = self.hi[d] - self.lo[d]
            if self.n[d] == 1:
                sp.append(1.0)
                continue
            if L <= 0:
                raise ConfigError("domain extents must be positive")
            sp.append(L / self.n[d] if self.bc[d] == "periodic" else L / (self.n[d] - 1))
        self.spacing = tuple(sp)

    @property
    def dim(self):
        return 1 if self.n[1] == 1 else 2

    @property
    def shape(self):
        return self.n

    @property
    def cell_measure(self):
        return self.spacing[0] * (self.spacing[1] if self.dim == 2 else 1.0)

    def axis_nodes(self, d):
        if self.n[d] == 1:
            return np.array([0.5 * (self.lo[d] + self.hi[d])]) if self.dim == 2 else np.zeros(1)
        return self.lo[d] + self.spacing[d] * np.arange(self.n[d])

    def nodes(self):
        """Node coordinates x1, x2 as (N1, N2) arrays."""
        return np.meshgrid(self.axis_nodes(0), self.axis_nodes(1), indexing="ij")

    def check_stencil(self, p=3):
        for d in range(self.dim):
            if self.n[d] < 2 * p + 5:
                raise ConfigError(f"need at least {2 * p + 5} nodes per direction, got {self.n[d]}")


def layer_z(h, b, sys, m=None):
    """Interface elevations z_m = b + sum_{k>m} h_k + sum_{k<m} (rho_k/rho_m) h_k.

    h has shape (M, ...). With m given (0-based) only that layer is returned.
    """
    h = np.asarray(h)
    b = np.asarray(b)
    M = sys.M
    if m is not None:
        if not 0 <= m < M:
            raise ConfigError(f"layer index {m} out of range for M={M}")
        z = b + np.zeros_like(h[0])
        for k in range(M):
            if k > m:
                z = z + h[k]
            elif k < m:
                z = z + sys.rho[k] / sys.rho[m] * h[k]
        return z
    return b + np.tensordot(sys.coupling(), h, axes=(1, 0))


def check_wet(h, h_min=H_MIN):
    h = np.asarray(h)
    bad = ~(h >= h_min)
    if np.any(bad):
        loc = tuple(int(i[0]) for i in np.nonzero(bad))
        raise DryStateError(f"layer depth below {h_min:g} at index {loc} (value {h[loc]!r})")


def to_primitive(U, h_min=H_MIN):
    """Split conserved data (3M, ...) into h, u, v of shape (M, ...)."""
    U = np.asarray(U, dtype=float)
    h = U[0::3]
    check_wet(h, h_min)
    return h, U[1::3] / h, U[2::3] / h


def to_conserved(h, u, v):
    h = np.asarray(h, dtype=float)
    u = np.broadcast_to(u, h.shape)
    v = np.broadcast_to(v, h.shape)
    U = np.empty((3 * h.shape[0],) + h.shape[1:])
    U[0::3] = h
    U[1::3] = h * u
    U[2::3] = h * v
    return U


def lake_at_rest(sys, b, levels):
    """Depths with h_m + z_m = levels[m] at every node and zero velocity."""
    b = np.asarray(b, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if levels.shape != (sys.M,):
        raise ConfigError("need one surface constant per layer")
    A = np.eye(sys.M) + sys.coupling()
    rhs = levels.reshape((-1,) + (1,) * b.ndim) - b[None]
    h = np.linalg.solve(A, rhs.reshape(sys.M, -1)).reshape((sys.M,) + b.shape)
    if np.any(h <= 0):
        raise ConfigError("lake-at-rest constants give non-positive depth")
    return to_conserved(h, 0.0, 0.0)


def lake_at_rest_from_tops(sys, b, tops):
    """Lake at rest given the elevation of the upper surface of each layer.

    tops[m] = b + sum_{k>=m} h_k, so h_M = tops[M-1] - b and the upper layers
    have constant thickness.
    """
    b = np.asarray(b, dtype=float)
    tops = np.asarray(tops, dtype=float)
    h = np.empty((sys.M,) + b.shape)
    h[-1] = tops[-1] - b
    for m in range(sys.M - 1):
        h[m] = tops[m] - tops[m + 1]
    if np.any(h <= 0):
        raise ConfigError("lake-at-rest constants give non-positive depth")
    return to_conserved(h, 0.0, 0.0)


def surface_levels(U, b, sys):
    """h_m + z_m for every layer, shape (M, ...)."""
    h = np.asarray(U)[0::3]
    return h + layer_z(h, b, sys)


def pad(a, bc, g=GHOSTS, dim=2):
    """Ghost extension of a field (..., N1, N2) along its last two axes.

    Outflow copies the boundary value; periodic wraps around.
    """
    a = np.asarray(a)
    lead = a.ndim - 2
    out = a
    for d in range(dim):
        widths = [(0, 0)] * a.ndim
        widths[lead + d] = (g, g)
        out = np.pad(out, widths, mode="wrap" if bc[d] == "periodic" else "edge")
    return out
