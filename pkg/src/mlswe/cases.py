"""Benchmark catalogue: initial data, bathymetry, densities, domains and
manufactured solutions with their source terms."""
from dataclasses import dataclass, field

import numpy as np

from .model import ConfigError, LayerSystem, StructuredGrid, lake_at_rest_from_tops, layer_z, to_conserved

PI = np.pi


@dataclass
class Monitor:
    """omega = sqrt(1 + theta g^2 + lap_weight l^2) with normalised gradient g
    and normalised Laplacian l of the field named by sigma."""
    theta: float = 100.0
    sigma: str = "h2"
    lap_weight: float = 0.0
    sweeps: int = 10
    smoothing: int = 1


def monitor_field(expr, U, b, M):
    """Evaluate a sum such as 'h1+h2+b+5' on a conserved field."""
    out = np.zeros(np.shape(b))
    for term in expr.replace(" ", "").split("+"):
        if term == "b":
            out = out + b
        elif term.startswith("h"):
            k = int(term[1:])
            if not 1 <= k <= M:
                raise ConfigError(f"monitor field refers to missing layer {k}")
            out = out + U[3 * (k - 1)]
        else:
            out = out + float(term)
    return out


@dataclass
class Case:
    name: str
    dim: int
    sys: LayerSystem
    lo: tuple
    hi: tuple
    bc: str
    t_end: float
    n: tuple
    bathymetry: object
    initial: object  # (x1, x2, b) -> U
    monitor: Monitor
    kind: str = "demo"  # wb | accuracy | energy | demo
    exact: object = None  # (x1, x2, t) -> (h, u, v), complex-safe
    source: object = None  # (x1, x2, t) -> (3M, ...)
    snapshots: tuple = ()
    reference_n: tuple = None
    notes: str = ""
    convergence_n: tuple = field(default_factory=tuple)
    order_var: str = "u2"  # variable whose finest-pair order is checked

    def grid(self, n1=None, n2=None):
        n = (n1 or self.n[0], (n2 or self.n[1]) if self.dim == 2 else 1)
        return StructuredGrid(self.lo, self.hi, n, self.bc)

    def setup(self, grid):
        x1, x2 = grid.nodes()
        b = np.asarray(self.bathymetry(x1, x2), dtype=float) + np.zeros_like(x1)
        return self.initial(x1, x2, b), b

    def exact_state(self, x1, x2, t):
        h, u, v = self.exact(x1, x2, t)
        return to_conserved(h, u, v)


# ----------------------------------------------------------------- sources

def residual_source(exact, bath, sys, dim, step=1e-30):
    """Source S = U_t + F1_x + F2_y + g h z_x making `exact` a solution.

    Derivatives come from complex-step differentiation of the exact solution,
    which is accurate to machine precision for analytic data.
    """
    g = sys.g

    def parts(x1, x2, t):
        h, u, v = exact(x1, x2, t)
        h = np.asarray(h)
        u, v = np.broadcast_to(u, h.shape), np.broadcast_to(v, h.shape)
        z = layer_z(h, bath(x1, x2) + 0.0 * x1, sys)
        hu, hv = h * u, h * v
        U = np.stack([h, hu, hv], axis=1)
        F1 = np.stack([hu, hu * u + 0.5 * g * h * h, hu * v], axis=1)
        F2 = np.stack([hv, hu * v, hv * v + 0.5 * g * h * h], axis=1)
        return U, F1, F2, z

    def src(x1, x2, t):
        x1 = np.asarray(x1, dtype=complex)
        x2 = np.asarray(x2, dtype=complex)
        t = complex(t)
        e = 1j * step
        Ut = parts(x1, x2, t + e)[0].imag / step
        _, F1x, _, zx = (a.imag / step for a in parts(x1 + e, x2, t))
        S = Ut + F1x
        h = parts(x1, x2, t)[0][:, 0].real
        S[:, 1] += g * h * zx
        if dim == 2:
            _, _, F2y, zy = (a.imag / step for a in parts(x1, x2 + e, t))
            S = S + F2y
            S[:, 2] += g * h * zy
        M = S.shape[0]
        return S.reshape((3 * M,) + S.shape[2:])

    return src


def closed_form_source_1d_2layer(x, t, r):
    """Closed-form momentum sources of the two-layer 1D manufactured solution (g = 1)."""
    ct, cx, st, sx = np.cos(PI * t), np.cos(PI * x), np.sin(PI * t), np.sin(PI * x)
    d1, d2 = ct * cx + 6.0, ct * cx + 4.0
    s2 = (PI * cx * d1 + PI * ct * sx - 1.5 * PI * ct * sx * d1 - PI * ct * sx * (0.5 * ct * cx + 3.0)
          + PI * ct * st ** 2 * sx ** 3 / d1 ** 2 + 2.0 * PI * cx * st ** 2 * sx / d1)
    s4 = (PI * cx * d2 + PI * ct * sx - 0.5 * PI * ct * sx * d2 - PI * ct * sx * (0.5 * ct * cx + 2.0)
          - PI * r * ct * sx * d2 + PI * ct * st ** 2 * sx ** 3 / d2 ** 2 + 2.0 * PI * cx * st ** 2 * sx / d2)
    return s2, s4


def closed_form_vortex_source(x1, x2, t):
    """Closed-form layer-1 momentum sources for the vortex; a quarter of the true residual, kept for comparison."""
    e = np.exp(1.0 - (t - x2) ** 2 - (t - x1) ** 2)
    return -e * (2 * t - 2 * x1) / 40.0, -e * (2 * t - 2 * x2) / 40.0


# ------------------------------------------------------------------ catalogue

def _rho(layers, two, three):
    if layers == 2:
        return two
    if layers == 3:
        return three
    raise ConfigError(f"this case is defined for {{2, 3}} layers, got {layers}")


def _two_only(layers):
    if layers != 2:
        raise ConfigError(f"this case is defined for two layers only, got {layers}")


def _step(x, lo, hi):
    return (x >= lo) & (x <= hi)


def _wb_1d(layers, smooth):
    rho = _rho(layers, (0.8, 1.0), (0.8, 1.0, 1.2))
    sys = LayerSystem(rho, g=1.0)
    if smooth:
        bath = lambda x1, x2: 2.0 * np.exp(-(x1 - 9.0) ** 2 / 2.0) + 3.0 * np.exp(-(x1 - 11.5) ** 2)
    else:
        bath = lambda x1, x2: np.where(_step(x1, 9.0, 13.0), 2.0, 0.0)
    tops = (6.0, 4.0) if layers == 2 else (8.0, 6.0, 4.0)
    return Case(f"wb-1d-{'smooth' if smooth else 'step'}", 1, sys, (0.0, 0.0), (20.0, 0.0), "outflow", 0.2,
                (50, 1), bath, lambda x1, x2, b: lake_at_rest_from_tops(sys, b, tops),
                Monitor(100.0, f"h{layers}"), kind="wb")


def _wb_2d(layers, smooth):
    rho = _rho(layers, (0.8, 1.0), (0.8, 1.0, 1.2))
    sys = LayerSystem(rho, g=1.0)
    if smooth:
        bath = lambda x1, x2: 1.2 * np.exp(-50.0 * ((x1 - 0.5) ** 2 + (x2 - 0.5) ** 2))
    else:
        def bath(x1, x2):
            inner = _step(x1, 0.4, 0.5) & _step(x2, 0.4, 0.5)
            ring = (_step(x1, 0.4, 0.6) & _step(x2, 0.4, 0.6)) | (_step(x1, 0.3, 0.5) & _step(x2, 0.3, 0.5))
            return np.where(inner, 1.0, np.where(ring, 0.5, 0.0))
    tops = (2.2, 2.0) if layers == 2 else (2.4, 2.2, 2.0)
    return Case(f"wb-2d-{'smooth' if smooth else 'step'}", 2, sys, (0.0, 0.0), (1.0, 1.0), "outflow", 0.1,
                (100, 100), bath, lambda x1, x2, b: lake_at_rest_from_tops(sys, b, tops),
                Monitor(100.0, f"h{layers}"), kind="wb")


def _accuracy(layers, dim):
    rho = _rho(layers, (0.7, 1.0), (0.7, 1.0, 1.3))
    sys = LayerSystem(rho, g=1.0)
    offs = np.array((6.0, 4.0) if layers == 2 else (8.0, 6.0, 4.0))

    if dim == 1:
        def exact(x1, x2, t):
            c = np.cos(PI * t) * np.cos(PI * x1)
            h = np.stack([c + o for o in offs])
            return h, np.sin(PI * t) * np.sin(PI * x1) / h, 0.0 * h
        bath = lambda x1, x2: np.sin(PI * x1) + 1.5
    else:
        def exact(x1, x2, t):
            c = np.cos(PI * t) * (np.cos(PI * x1) + np.cos(PI * x2))
            h = np.stack([c + o for o in offs])
            return h, np.sin(PI * t) * np.sin(PI * x1) / h, np.sin(PI * t) * np.sin(PI * x2) / h
        bath = lambda x1, x2: np.sin(PI * x1) + np.sin(PI * x2) + 1.5

    source = residual_source(exact, bath, sys, dim)
    if dim == 1 and layers == 2:
        def source(x1, x2, t, r=rho[0] / rho[1]):
            s2, s4 = closed_form_source_1d_2layer(x1, t, r)
            S = np.zeros((6,) + np.shape(x1))
            S[1], S[4] = s2, s4
            return S

    hi = (2.0, 0.0) if dim == 1 else (2.0, 2.0)
    n = (100, 1) if dim == 1 else (40, 40)
    conv = (25, 50, 100, 200) if dim == 1 else (20, 40, 80)
    return Case(f"accuracy-{dim}d", dim, sys, (0.0, 0.0), hi, "periodic", 0.1, n, bath,
                lambda x1, x2, b: to_conserved(*exact(x1, x2, 0.0)),
                Monitor(1.0, "h2+b"), kind="accuracy", exact=exact, source=source, convergence_n=conv)


def _dambreak_1d(layers):
    if layers == 2:
        sys = LayerSystem((0.8, 1.0), g=9.812)

        def init(x1, x2, b):
            h2 = np.where(x1 <= 5.0, 0.6, 0.4)
            return to_conserved(np.stack([1.0 - h2, h2]), 0.0, 0.0)
        t_end, sigma = 1.25, "h1+h2+b"
    else:
        sys = LayerSystem(_rho(layers, None, (0.64, 0.8, 1.0)), g=9.812)

        def init(x1, x2, b):
            h3 = np.where(x1 <= 5.0, 0.6, 0.4)
            h2 = 1.0 - h3
            return to_conserved(np.stack([2.0 - h2 - h3, h2, h3]), 0.0, 0.0)
        t_end, sigma = 0.8, "h1+h2+h3+b"
    return Case("dambreak-1d", 1, sys, (0.0, 0.0), (10.0, 0.0), "outflow", t_end, (400, 1),
                lambda x1, x2: 0.0 * x1, init, Monitor(100.0, sigma), kind="energy", reference_n=(3000, 1))


def _perturb_1d(layers):
    def bath(x1, x2):
        return np.where(_step(x1, 0.4, 0.6), 0.25 * (np.cos(10.0 * PI * (x1 - 0.5)) + 1.0) - 2.0, -2.0)

    bump = lambda x1: np.where(_step(x1, 0.1, 0.2), 1.00001, 1.0)
    if layers == 2:
        sys = LayerSystem((0.98, 1.0), g=9.812)
        init = lambda x1, x2, b: to_conserved(np.stack([bump(x1), -1.0 - b]), 0.0, 0.0)
        t_end, sigma = 0.15, "h1+h2+b"
    else:
        sys = LayerSystem(_rho(layers, None, (0.97, 0.98, 1.0)), g=9.812)
        init = lambda x1, x2, b: to_conserved(np.stack([np.ones_like(b), bump(x1), -1.0 - b]), 0.0, 0.0)
        t_end, sigma = 0.1, "h1+h2+h3+b"
    return Case("perturb-1d", 1, sys, (-1.0, 0.0), (1.0, 0.0), "outflow", t_end, (400, 1), bath, init,
                Monitor(100.0, sigma), kind="energy", reference_n=(3000, 1))


def _vortex(layers):
    _two_only(layers)
    sys = LayerSystem((0.7, 1.0), g=1.0)
    umax = 0.2

    def exact(x1, x2, t):
        R2 = (x1 - t) ** 2 + (x2 - t) ** 2
        h2 = 1.0 - umax ** 2 * np.exp(1.0 - R2) / (2.0 * sys.g)
        e = umax * np.exp(0.5 * (1.0 - R2))
        h = np.stack([5.0 + 0.0 * h2, h2])
        u = np.stack([0.0 * h2, 1.0 - e * (x2 - t)])
        v = np.stack([0.0 * h2, 1.0 + e * (x1 - t)])
        return h, u, v

    bath = lambda x1, x2: 0.0 * x1
    return Case("vortex-2d", 2, sys, (-8.0, -8.0), (8.0, 8.0), "periodic", 0.5, (100, 100), bath,
                lambda x1, x2, b: to_conserved(*exact(x1, x2, 0.0)),
                Monitor(10.0, "h2+b", lap_weight=10.0), kind="accuracy", exact=exact,
                source=residual_source(exact, bath, sys, 2), convergence_n=(50, 100, 200),
                order_var="h2")


def _interface(layers):
    bath = lambda x1, x2: 0.05 * np.exp(-100.0 * (x1 ** 2 + x2 ** 2)) - 1.0

    def omega(x1, x2):
        return (((x1 < -0.5) & (x2 < 0.0)) | ((x1 < 0.0) & (x2 < -0.5))
                | ((x1 + 0.5) ** 2 + (x2 + 0.5) ** 2 < 0.25))

    if layers == 2:
        sys = LayerSystem((0.98, 1.0), g=10.0)
    else:
        sys = LayerSystem(_rho(layers, None, (0.98, 1.0, 1.1)), g=10.0)

    def init(x1, x2, b):
        top = np.where(omega(x1, x2), 0.5, 0.45)
        hs = [top, -top - b]
        us = [2.5 + 0 * b, 2.5 + 0 * b]
        if layers == 3:
            hs = [np.ones_like(b)] + hs
            us = [0.0 * b] + us
        return to_conserved(np.stack(hs), np.stack(us), np.stack(us))

    return Case("interface-2d", 2, sys, (-1.0, -1.0), (1.0, 1.0), "outflow", 0.1, (200, 200), bath, init,
                Monitor(300.0, "h1"), kind="demo", reference_n=(600, 600))


def _circledam(layers):
    _two_only(layers)
    sys = LayerSystem((0.98, 1.0), g=9.812)
    bath = lambda x1, x2: 0.5 * np.exp(-5.0 * (x1 ** 2 + x2 ** 2)) - 2.0

    def init(x1, x2, b):
        out = x1 ** 2 + x2 ** 2 >= 1.0
        bump = 0.5 * np.exp(-5.0 * (x1 ** 2 + x2 ** 2))
        h1 = np.where(out, 1.8, 0.2)
        h2 = np.where(out, 0.2 - bump, 1.8 - bump)
        return to_conserved(np.stack([h1, h2]), 0.0, 0.0)

    return Case("circledam-2d", 2, sys, (-2.0, -2.0), (2.0, 2.0), "outflow", 1.0, (150, 150), bath, init,
                Monitor(100.0, "h2+b+5"), kind="demo", reference_n=(600, 600))


def _perturb_2d(layers):
    _two_only(layers)
    sys = LayerSystem((0.85, 1.0), g=9.812)
    bath = lambda x1, x2: 0.8 * np.exp(-5.0 * (x1 - 0.9) ** 2 - 50.0 * (x2 - 0.5) ** 2)

    def init(x1, x2, b):
        h2 = np.where(_step(x1, 0.05, 0.15), 1.01, 1.0) - b
        return to_conserved(np.stack([2.0 - h2 - b, h2]), 0.0, 0.0)

    return Case("perturb-2d", 2, sys, (0.0, 0.0), (2.0, 1.0), "outflow", 2.0, (300, 150), bath, init,
                Monitor(100.0, "h2+b"), kind="demo", snapshots=(0.9, 1.3, 1.7, 2.0))


_BUILDERS = {
    "accuracy-1d": lambda L: _accuracy(L, 1),
    "wb-1d-smooth": lambda L: _wb_1d(L, True),
    "wb-1d-step": lambda L: _wb_1d(L, False),
    "dambreak-1d": _dambreak_1d,
    "perturb-1d": _perturb_1d,
    "accuracy-2d": lambda L: _accuracy(L, 2),
    "vortex-2d": _vortex,
    "wb-2d-smooth": lambda L: _wb_2d(L, True),
    "wb-2d-step": lambda L: _wb_2d(L, False),
    "interface-2d": _interface,
    "circledam-2d": _circledam,
    "perturb-2d": _perturb_2d,
}


def case_names():
    return list(_BUILDERS)


def get_case(name, layers=2):
    if name not in _BUILDERS:
        raise ConfigError(f"unknown case {name!r}; available: {', '.join(_BUILDERS)}")
    c = _BUILDERS[name](layers)
    c.name = f"{name}-{c.sys.M}layer"
    return c


def case_catalog():
    out = []
    for name in _BUILDERS:
        for L in (2, 3):
            try:
                out.append(get_case(name, L))
            except ConfigError:
                pass
    return out
