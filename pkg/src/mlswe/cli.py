"""Command-line driver: configuration, case runs, reports and exit codes.

Exit codes: 0 all case checks pass, 1 an acceptance check failed,
2 usage or runtime error.
"""
import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cases import case_names, get_case, monitor_field
from .energy import check_gamma, default_gamma
from .model import ConfigError, DryStateError, LayerSystem, surface_levels, to_primitive
from .movingmesh import MeshTanglingError, MovingSolver, identity_mesh, quadrature_weights
from .solver_fixed import FixedSolver, Scheme

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
WB_TOL = {"fixed": 1e-12, "moving": 1e-11}
ORDER_MIN = {1: 4.5, 2: 4.3}
ENERGY_SLACK = 1e-8
WORKERS_ENV = "MLSWE_WORKERS"
CACHE_ENV = "MLSWE_CACHE"


@dataclass
class RunConfig:
    case: str = ""
    layers: int = 2
    rho: tuple = None
    n1: int = None
    n2: int = None
    ns: tuple = None
    cfl: float = 0.4
    t_end: float = None
    mesh: str = "fixed"
    dissipation: bool = True
    p: int = 3
    gamma: float = None
    theta: float = None
    sigma: str = None
    dt_policy: str = None
    out: str = "mlswe-out"
    stride: int = 0
    reference_n: int = None
    reference: bool = True
    cache_dir: str = None
    workers: int = 1

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}
_BOOL = {"on": True, "off": False, "true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(key, value):
    """Parse a textual config value for field `key`."""
    if value is None or not isinstance(value, str):
        return value
    v = value.strip()
    try:
        if key in ("layers", "n1", "n2", "p", "stride", "reference_n", "workers"):
            return int(v)
        if key in ("cfl", "t_end", "gamma", "theta"):
            return float(v)
        if key in ("dissipation", "reference"):
            if v.lower() not in _BOOL:
                raise ValueError(v)
            return _BOOL[v.lower()]
        if key == "rho":
            return tuple(float(a) for a in v.split(","))
        if key == "ns":
            return tuple(int(a) for a in v.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return v


def read_config_file(path):
    """key = value lines; '#' starts a comment. Unknown keys are rejected."""
    out = {}
    for k, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{k}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{k}: unknown key {key!r}")
        out[key] = _convert(key, val)
    return out


def parse_config(values=None, path=None):
    """Merge defaults, an optional file and explicit values (highest priority)."""
    merged = {}
    if path is not None:
        merged.update(read_config_file(path))
    for k, v in (values or {}).items():
        k = k.replace("-", "_")
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {k!r}")
        if v is not None:
            merged[k] = _convert(k, v)
    if WORKERS_ENV in os.environ and "workers" not in merged:
        merged["workers"] = _convert("workers", os.environ[WORKERS_ENV])
    cfg = RunConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg):
    """Check a config against solver preconditions; returns the case."""
    if not cfg.case:
        raise ConfigError("a case name is required")
    case = get_case(cfg.case, cfg.layers)
    if not 0.0 < cfg.cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfg.cfl}")
    if cfg.mesh not in ("fixed", "moving"):
        raise ConfigError(f"mesh must be fixed or moving, got {cfg.mesh!r}")
    if cfg.p not in (1, 2, 3):
        raise ConfigError(f"p must be 1, 2 or 3 (moving-mesh metrics exist up to p = 3), got {cfg.p}")
    if cfg.dt_policy not in (None, "standard", "accuracy"):
        raise ConfigError(f"unknown dt policy {cfg.dt_policy!r}")
    if cfg.t_end is not None and cfg.t_end <= 0:
        raise ConfigError("t_end must be positive")
    if cfg.stride < 0 or cfg.workers < 1:
        raise ConfigError("stride must be >= 0 and workers >= 1")
    if cfg.theta is not None and cfg.theta < 0:
        raise ConfigError("theta must be non-negative")
    sysm = layer_system(case, cfg)
    check_gamma(sysm, default_gamma(sysm) if cfg.gamma is None else cfg.gamma)
    for n in resolutions(case, cfg):
        case.grid(*n).check_stencil(cfg.p)
    if cfg.reference_n is not None and cfg.reference_n < 2 * cfg.p + 5:
        raise ConfigError("reference resolution too small")
    if cfg.sigma is not None:
        monitor_field(cfg.sigma, np.zeros((3 * sysm.M, 1, 1)), np.zeros((1, 1)), sysm.M)
    return case


def layer_system(case, cfg):
    if cfg.rho is None:
        return case.sys
    if len(cfg.rho) != case.sys.M:
        raise ConfigError(f"rho needs {case.sys.M} values, got {len(cfg.rho)}")
    return LayerSystem(cfg.rho, case.sys.g)


def resolutions(case, cfg):
    """Grid sizes to run: an explicit list, one explicit size, or the case's."""
    def pair(n):
        return (n, n if case.dim == 2 else 1)
    if cfg.ns:
        return [pair(n) for n in cfg.ns]
    if cfg.n1 is not None:
        return [(cfg.n1, (cfg.n2 or cfg.n1) if case.dim == 2 else 1)]
    if case.kind == "accuracy" and case.convergence_n:
        return [pair(n) for n in case.convergence_n]
    return [case.n]


# ------------------------------------------------------------------ reports

def convergence_report(ns, errors):
    """Observed orders between successive resolutions.

    Doubling sequences use log2 of the error ratio; otherwise the log-ratio of
    the node counts (equivalently of the spacings) is used.
    """
    if len(ns) != len(errors) or len(ns) < 2:
        raise ValueError("need at least two resolutions with errors")
    out = []
    for (n0, e0), (n1, e1) in zip(zip(ns, errors), zip(ns[1:], errors[1:])):
        if e0 == e1:
            out.append(0.0)
        elif n1 == 2 * n0:
            out.append(math.log2(e0 / e1))
        else:
            out.append(math.log(e0 / e1) / math.log(n1 / n0))
    return out


def norms(err, weights, measure):
    """(l1 measure-weighted, l_inf) of an error field."""
    e = np.abs(err)
    return math.fsum((weights * e).ravel()) * measure, float(e.max())


def snapshot_table(U, b, J, x, layers):
    h, u, v = to_primitive(U)
    cols = [x[0], x[1], b, J]
    names = ["x1", "x2", "b", "J"]
    for m in range(layers.M):
        cols += [h[m], u[m], v[m]]
        names += [f"h{m + 1}", f"u{m + 1}", f"v{m + 1}"]
    return names, np.stack([c.ravel() for c in cols], axis=1)


def write_table(path, names, data, cfg):
    with open(path, "w") as f:
        f.write(f"# config: {cfg.to_json()}\n")
        f.write(",".join(names) + "\n")
        for row in data:
            f.write(",".join(repr(float(a)) for a in row) + "\n")


# --------------------------------------------------------------- simulation

class Simulation:
    """Uniform interface over the fixed and moving solvers for one grid."""

    def __init__(self, case, cfg, n, scheme_override=None):
        self.case, self.cfg = case, cfg
        self.sys = layer_system(case, cfg)
        self.grid = case.grid(*n)
        policy = cfg.dt_policy or ("accuracy" if case.kind == "accuracy" else "standard")
        self.scheme = scheme_override or Scheme(cfg.p, cfg.cfl, cfg.dissipation, policy, workers=cfg.workers)
        self.moving = cfg.mesh == "moving"
        if self.moving:
            mon = case.monitor
            if cfg.theta is not None or cfg.sigma is not None:
                mon = dataclasses.replace(mon, theta=mon.theta if cfg.theta is None else cfg.theta,
                                          sigma=mon.sigma if cfg.sigma is None else cfg.sigma)
            self.solver = MovingSolver(self.sys, self.grid, self.scheme, cfg.gamma, mon, case.source)
            self.Uc, self.J, self.x = self.solver.initialize(lambda x1, x2, b: case.initial(x1, x2, b),
                                                             case.bathymetry)
            self.weights = self.solver.weights
        else:
            U, b = case.setup(self.grid)
            self.solver = FixedSolver(self.sys, self.grid, b, self.scheme, case.source)
            self.U = U
            self.x = identity_mesh(self.grid)
            self.J = np.ones(self.grid.n)
            self.weights = np.ones(self.grid.n)
        self.t = 0.0
        self.steps = 0

    def state(self):
        """(U, b, J, x) at the current time."""
        if self.moving:
            U, b = self.solver.split(self.Uc, self.J)
            return U, b, self.J, self.x
        return self.U, self.solver.b, self.J, self.x

    def energy(self):
        if self.moving:
            return self.solver.total_energy(self.Uc, self.J)
        return self.solver.total_energy(self.U)

    def advance(self, t_stop, on_step):
        if self.moving:
            def cb(k, t, dt, Uc, J, x):
                self.Uc, self.J, self.x, self.t = Uc, J, x, t
                self.steps += 1
                on_step(t, dt)
            self.solver.run(self.Uc, self.J, self.x, t_stop, t0=self.t, callback=cb)
        else:
            def cb(k, t, dt, U):
                self.U, self.t = U, t
                self.steps += 1
                on_step(t, dt)
            self.solver.run(self.U, t_stop, t0=self.t, callback=cb)


def run_case(cfg, case, n, out_dir, tag=""):
    """Advance one resolution, writing snapshots and the energy series."""
    sim = Simulation(case, cfg, n)
    t_end = cfg.t_end if cfg.t_end is not None else case.t_end
    energies = [(0.0, 0.0, sim.energy())]
    nsnap = [0]

    def snap():
        U, b, J, x = sim.state()
        names, data = snapshot_table(U, b, J, x, sim.sys)
        write_table(out_dir / f"snapshot{tag}_{nsnap[0]:04d}_t{sim.t:.6g}.csv", names, data, cfg)
        nsnap[0] += 1

    def on_step(t, dt):
        energies.append((t, dt, sim.energy()))
        if cfg.stride and sim.steps % cfg.stride == 0:
            snap()

    snap()
    stops = sorted({s for s in case.snapshots if 0.0 < s < t_end} | {t_end})
    for ts in stops:
        sim.advance(ts, on_step)
        if ts != t_end and not (cfg.stride and sim.steps % cfg.stride == 0):
            snap()
    if not (cfg.stride and sim.steps % cfg.stride == 0):
        snap()
    write_table(out_dir / f"energy{tag}.csv", ["t", "dt", "total_energy"], np.array(energies), cfg)
    E = np.array([e for _, _, e in energies])
    monotone = bool(np.all(np.diff(E) <= ENERGY_SLACK * abs(E[0])))
    return sim, monotone


def wb_errors(sim):
    """Surface-level and velocity errors against the initial lake at rest."""
    U, b, J, x = sim.state()
    U0, b0 = sim.case.setup(sim.grid)
    levels = [float(np.median(s0)) for s0 in surface_levels(U0, b0, sim.sys)]
    s = surface_levels(U, b, sim.sys)
    rows = []
    for m in range(sim.sys.M):
        l1, li = norms(s[m] - levels[m], J * sim.weights, sim.grid.cell_measure)
        rows.append((m + 1, l1, li))
    _, u, v = to_primitive(U)
    vel = float(max(np.abs(u).max(), np.abs(v).max()))
    return rows, vel


def accuracy_errors(sim):
    U, b, J, x = sim.state()
    h, u, v = to_primitive(U)
    he, ue, ve = sim.case.exact(x[0], x[1], sim.t)
    out = {}
    for m in range(sim.sys.M):
        for name, a, e in (("h", h, he), ("u", u, ue), ("v", v, ve)):
            if name == "v" and sim.grid.dim == 1:
                continue
            out[f"{name}{m + 1}"] = norms(a[m] - np.broadcast_to(e[m], a[m].shape), J * sim.weights,
                                          sim.grid.cell_measure)
    return out


# ---------------------------------------------------------------- references

def cache_dir(cfg):
    d = cfg.cache_dir or os.environ.get(CACHE_ENV) or os.path.join(os.path.expanduser("~"), ".cache", "mlswe")
    return Path(d)


def reference_solution(case, cfg, t_end):
    """Fine fixed-mesh surface levels, cached on disk with a manifest."""
    n = cfg.reference_n or case.reference_n[0]
    n = (n, n if case.dim == 2 else 1)
    key = {"case": case.name, "n": list(n), "t_end": t_end, "p": cfg.p, "cfl": cfg.cfl,
           "rho": list(layer_system(case, cfg).rho), "scheme": "fixed-es"}
    digest = hashlib.sha1(json.dumps(key, sort_keys=True).encode()).hexdigest()[:12]
    d = cache_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{case.name}_{n[0]}x{n[1]}_{digest}.npz"
    if path.exists():
        z = np.load(path)
        return z["x1"], z["x2"], z["surf"]
    ref_cfg = dataclasses.replace(cfg, mesh="fixed", dissipation=True, dt_policy="standard", t_end=t_end)
    sim = Simulation(case, ref_cfg, n)
    sim.advance(t_end, lambda t, dt: None)
    U, b, _, _ = sim.state()
    surf = surface_levels(U, b, sim.sys)
    x1, x2 = sim.grid.axis_nodes(0), sim.grid.axis_nodes(1)
    np.savez(path, x1=x1, x2=x2, surf=surf)
    manifest = d / "manifest.json"
    entries = json.loads(manifest.read_text()) if manifest.exists() else {}
    entries[path.name] = key
    manifest.write_text(json.dumps(entries, indent=1, sort_keys=True))
    return x1, x2, surf


def interpolate(x1n, x2n, f, x1, x2):
    """Linear (1D) or bilinear (2D) interpolation from a uniform lattice."""
    if f.shape[1] == 1:
        return np.interp(x1, x1n, f[:, 0])
    def locate(xn, q):
        i = np.clip(np.searchsorted(xn, q) - 1, 0, len(xn) - 2)
        return i, np.clip((q - xn[i]) / (xn[i + 1] - xn[i]), 0.0, 1.0)
    i, a = locate(x1n, x1)
    j, c = locate(x2n, x2)
    return ((1 - a) * (1 - c) * f[i, j] + a * (1 - c) * f[i + 1, j]
            + (1 - a) * c * f[i, j + 1] + a * c * f[i + 1, j + 1])


def reference_distance(sim, ref):
    """l1 distance of every surface level to a reference, summed over layers."""
    x1n, x2n, surf = ref
    U, b, J, x = sim.state()
    s = surface_levels(U, b, sim.sys)
    tot = 0.0
    for m in range(sim.sys.M):
        r = interpolate(x1n, x2n, surf[m], x[0], x[1])
        tot += norms(s[m] - r, J * sim.weights, sim.grid.cell_measure)[0]
    return tot


# --------------------------------------------------------------------- run

def run(cfg, stream=None):
    """Execute a validated config; returns (exit code, result dict)."""
    stream = stream or sys.stdout
    case = validate(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = {"case": case.name, "mesh": cfg.mesh, "checks": {}}
    ns = resolutions(case, cfg)
    max_surf = None
    monotone_all = True
    if case.kind == "accuracy" and len(ns) > 1:
        table = []
        for n in ns:
            t0 = time.perf_counter()
            sim, mono = run_case(cfg, case, n, out, tag=f"_n{n[0]}")
            monotone_all &= mono
            table.append((n[0], accuracy_errors(sim), time.perf_counter() - t0))
        keys = list(table[0][1])
        orders = {k: convergence_report([r[0] for r in table], [r[1][k][0] for r in table]) for k in keys}
        with open(out / "convergence.csv", "w") as f:
            f.write(f"# config: {cfg.to_json()}\n")
            f.write("n," + ",".join(f"{k}_l1,{k}_linf,{k}_order" for k in keys) + ",seconds\n")
            for i, (n, errs, sec) in enumerate(table):
                cells = []
                for k in keys:
                    o = "" if i == 0 else f"{orders[k][i - 1]:.4f}"
                    cells += [f"{errs[k][0]:.6e}", f"{errs[k][1]:.6e}", o]
                f.write(f"{n}," + ",".join(cells) + f",{sec:.2f}\n")
        watch = case.order_var if case.order_var in orders else keys[0]
        final = orders[watch][-1]
        res["orders"] = orders
        res["checks"]["order"] = final >= ORDER_MIN[case.dim]
        stream.write(f"convergence {watch}: orders " + " ".join(f"{o:.3f}" for o in orders[watch]) + "\n")
    else:
        sim, mono = run_case(cfg, case, ns[0], out)
        monotone_all = mono
        if case.kind == "wb":
            rows, vel = wb_errors(sim)
            with open(out / "wb_report.csv", "w") as f:
                f.write(f"# config: {cfg.to_json()}\n")
                f.write("level,l1,linf\n")
                for m, l1, li in rows:
                    f.write(f"{m},{l1:.6e},{li:.6e}\n")
                f.write(f"max_velocity,{vel:.6e},{vel:.6e}\n")
            max_surf = max(max(r[1], r[2]) for r in rows)
            tol = WB_TOL[cfg.mesh]
            res["checks"]["well_balanced"] = max_surf <= tol and vel <= tol
            res["max_velocity"] = vel
        if case.kind == "accuracy":
            errs = accuracy_errors(sim)
            res["errors"] = errs
            with open(out / "errors.csv", "w") as f:
                f.write(f"# config: {cfg.to_json()}\n")
                f.write("variable,l1,linf\n")
                for k, (l1, li) in errs.items():
                    f.write(f"{k},{l1:.6e},{li:.6e}\n")
        if case.kind == "energy":
            res["checks"]["energy_monotone"] = mono
        if case.reference_n is not None and cfg.reference:
            ref = reference_solution(case, cfg, sim.t)
            dist = reference_distance(sim, ref)
            res["reference_l1"] = dist
            with open(out / "reference_distance.csv", "w") as f:
                f.write(f"# config: {cfg.to_json()}\n")
                f.write(f"n,reference_n,l1_surface_distance\n{ns[0][0]},{cfg.reference_n or case.reference_n[0]},{dist:.6e}\n")
            stream.write(f"reference l1 surface distance: {dist:.6e}\n")
        res["steps"] = sim.steps
    res["energy_monotone"] = monotone_all
    res["max_surface_err"] = max_surf
    ok = all(res["checks"].values())
    ms = "na" if max_surf is None else f"{max_surf:.3e}"
    stream.write(f"case={case.name} status={'ok' if ok else 'fail'} max_surface_err={ms} "
                 f"energy_monotone={str(monotone_all).lower()}\n")
    return (EXIT_OK if ok else EXIT_FAIL), res


# -------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="mlswe", description="Multi-layer shallow water solvers and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("cases", help="list the benchmark cases")
    r = sub.add_parser("run", help="run one benchmark case")
    r.add_argument("--config", help="key = value file; flags override it")
    r.add_argument("--case")
    r.add_argument("--layers")
    r.add_argument("--rho", help="comma-separated densities, top to bottom")
    r.add_argument("--n1")
    r.add_argument("--n2")
    r.add_argument("--ns", help="comma-separated resolutions for convergence runs")
    r.add_argument("--cfl")
    r.add_argument("--t-end", dest="t_end")
    r.add_argument("--mesh", choices=("fixed", "moving"))
    r.add_argument("--dissipation", choices=("on", "off"))
    r.add_argument("--p")
    r.add_argument("--gamma")
    r.add_argument("--theta")
    r.add_argument("--sigma")
    r.add_argument("--dt-policy", dest="dt_policy", choices=("standard", "accuracy"))
    r.add_argument("--out")
    r.add_argument("--stride")
    r.add_argument("--reference-n", dest="reference_n")
    r.add_argument("--no-reference", dest="reference", action="store_const", const="off")
    r.add_argument("--cache-dir", dest="cache_dir")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    if args.command == "cases":
        for name in case_names():
            layers = []
            for L in (2, 3):
                try:
                    c = get_case(name, L)
                    layers.append(str(L))
                except ConfigError:
                    pass
            print(f"{name:14s} dim={c.dim} kind={c.kind:8s} layers={','.join(layers)}")
        return EXIT_OK
    values = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = parse_config(values, args.config)
        code, _ = run(cfg)
        return code
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (DryStateError, MeshTanglingError, FloatingPointError, RuntimeError) as e:
        print(f"error: solver aborted: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
