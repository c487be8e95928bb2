"""Convergence studies: reference run at k_ref, then k = 2^l k_ref for l = 1..levels.

Errors are max over the sample times t_j (the grid of the coarsest run)
of the requested norm of the difference to the reference solution.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .diagnostics import EocTable, gram_matrix, reference_error
from .eddy import EllgConfig, EllgIntegrator, piecewise_sigma
from .fem import EdgeSpace, P1Space, edge_interpolate, nodal_interpolate
from .fields import ConstantField, PiecewiseRamp, UniaxialAnisotropy
from .mesh import build_cube_mesh, build_graded_cube_mesh, extract_submesh
from .solvers import SolverConfig
from .tps import MChoice, Operators, RhoChoice, SchemeConfig, TangentPlaneIntegrator, Trajectory


def initial_magnetization(vertices, kind="uniform", direction=(1.0, 0.0, 0.0), seed=0, amplitude=0.5):
    x = np.asarray(vertices, dtype=float)
    d = np.asarray(direction, dtype=float)
    if kind == "uniform":
        m = np.tile(d, (len(x), 1))
    elif kind == "random":
        m = np.random.default_rng(seed).normal(size=(len(x), 3))
    elif kind == "perturbed":
        pert = np.stack([np.zeros(len(x)), np.cos(np.pi * x[:, 0]), np.cos(np.pi * x[:, 1])], axis=1)
        m = d + amplitude * pert
    else:
        raise ValueError("unknown initial magnetization %r" % kind)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def override(setup, settings):
    """Copy of a setup dataclass with string-valued field overrides."""
    names = {f.name: f for f in fields(setup)}
    vals = {}
    for key, raw in settings.items():
        if key not in names:
            raise ValueError("unknown setting %r for %s" % (key, type(setup).__name__))
        cur = getattr(setup, key)
        if isinstance(cur, bool):
            vals[key] = str(raw).lower() in ("1", "true", "yes", "on")
        elif isinstance(cur, int):
            vals[key] = int(raw)
        elif isinstance(cur, float):
            vals[key] = float(raw)
        elif isinstance(cur, tuple) and cur and not isinstance(cur[0], tuple):
            parts = str(raw).replace(",", " ").split()
            vals[key] = tuple(type(cur[0])(p) for p in parts)
        elif isinstance(cur, str):
            vals[key] = str(raw)
        else:
            raise ValueError("setting %r cannot be overridden from text" % key)
    return replace(setup, **vals)


def _map(fn, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


# LLG ------------------------------------------------------------------------

@dataclass
class LlgRatesSetup:
    n: int = 4
    T: float = 1.0
    ref_steps: int = 2560
    levels: int = 5
    alpha: float = 1.0
    lex2: float = 1.0
    f: tuple = (-2.0, -0.5, 0.0)
    c_K: float = 1.0
    axis: tuple = (1.0, 0.0, 0.0)
    m0: str = "uniform"
    m0_direction: tuple = (1.0, 0.0, 0.0)
    m0_amplitude: float = 0.5
    norm: str = "H1"
    # (label, variant, strategy, rho kind, rho delta)
    cells: tuple = (("TPS2", "TPS2", "FI", "canonical", 1.0),
                    ("TPS2+AB", "TPS2", "AB", "canonical", 1.0),
                    ("TPS2+EE", "TPS2", "EE", "canonical", 1.0),
                    ("TPS1+EE", "TPS1", "EE", "canonical", 1.0),
                    ("TPS1+AB", "TPS1", "AB", "canonical", 1.0))
    solver_tol: float = 1e-12

    @property
    def k_ref(self):
        return self.T / self.ref_steps


def rho_study_setup(**kw):
    cells = tuple(("rho=k^%g" % d, "TPS2", "AB", "power", float(d)) for d in (0.0, 0.5, 1.0))
    base = LlgRatesSetup(m0="perturbed", norm="L2", cells=cells)
    return replace(base, **kw)


def _llg_problem(setup):
    mesh = build_cube_mesh((0, 0, 0), (1, 1, 1), setup.n)
    space = P1Space(mesh)
    ops = Operators(pi=UniaxialAnisotropy(setup.c_K, setup.axis), f=ConstantField(setup.f))
    m0 = initial_magnetization(mesh.vertices, setup.m0, setup.m0_direction, amplitude=setup.m0_amplitude)
    return space, ops, m0


def _llg_cell(job):
    setup, variant, strategy, rho_kind, rho_delta, k, every = job
    space, ops, m0 = _llg_problem(setup)
    cfg = SchemeConfig(alpha=setup.alpha, lex2=setup.lex2, k=k, T=setup.T, variant=variant,
                       strategy=strategy, rho=RhoChoice(rho_kind, rho_delta), M=MChoice(),
                       solver=SolverConfig(tol=setup.solver_tol))
    tr = TangentPlaneIntegrator(space, cfg, ops).run(m0, sample_every=every)
    return tr.times, tr.values, tr.reports


@dataclass
class ConvergenceResult:
    ks: list
    tables: dict                                  # label -> EocTable (or tuple of tables)
    reports: dict = field(default_factory=dict)   # label -> list of report lists per level
    reference_reports: list = None
    notes: list = field(default_factory=list)


def llg_convergence(setup, threads=1):
    space, _, _ = _llg_problem(setup)
    top = 2 ** setup.levels
    ks = [2 ** l * setup.k_ref for l in range(1, setup.levels + 1)]
    jobs = [(setup, "TPS2", "FI", "canonical", 1.0, setup.k_ref, top)]
    for _, var, strat, rk, rd in setup.cells:
        for l in range(1, setup.levels + 1):
            jobs.append((setup, var, strat, rk, rd, ks[l - 1], top // 2 ** l))
    out = _map(_llg_cell, jobs, threads)
    ref = Trajectory(space, out[0][0], out[0][1])
    gram = gram_matrix(space, setup.norm)
    tables, reports = {}, {}
    for c, (label, *_rest) in enumerate(setup.cells):
        errs, reps = [], []
        for l in range(setup.levels):
            times, vals, rep = out[1 + c * setup.levels + l]
            errs.append(reference_error(ref, Trajectory(space, times, vals), gram=gram))
            reps.append(rep)
        tables[label] = EocTable(ks, errs)
        reports[label] = reps
    return ConvergenceResult(ks, tables, reports, out[0][2])


# ELLG -----------------------------------------------------------------------

@dataclass
class EllgRatesSetup:
    n: int = 4
    inner_cells: int = 2
    inner_lo: tuple = (0.375, 0.375, 0.375)
    inner_hi: tuple = (0.625, 0.625, 0.625)
    T: float = 1.75
    ref_steps: int = 28672
    levels: int = 5
    ramp_time_scale: float = 1.0
    alpha: float = 1.0
    lex2: float = 1.0
    mu0: float = 1.0
    sigma_inner: float = 100.0
    sigma_outer: float = 1.0
    relax_T: float = 1.0
    relax_steps: int = 256
    reference: str = "DC2"
    couplings: tuple = ("FC", "DC2", "DC1", "SF")
    solver_tol: float = 1e-12

    @property
    def k_ref(self):
        return self.T / self.ref_steps


def ellg_geometry(setup):
    mesh = build_graded_cube_mesh((0, 0, 0), (1, 1, 1), setup.n, setup.inner_lo, setup.inner_hi,
                                  inner_cells=setup.inner_cells)
    sub = extract_submesh(mesh, (setup.inner_lo, setup.inner_hi))
    return mesh, sub


def ellg_integrator(setup, mesh, sub, k, T, coupling, applied):
    scheme = SchemeConfig(alpha=setup.alpha, lex2=setup.lex2, k=k, T=T, variant="TPS2", strategy="AB",
                          solver=SolverConfig(tol=setup.solver_tol))
    cfg = EllgConfig(scheme, mu0=setup.mu0, sigma=piecewise_sigma(mesh, sub, setup.sigma_inner, setup.sigma_outer),
                     coupling=coupling, eddy_solver=SolverConfig(tol=setup.solver_tol, jacobi=True))
    return EllgIntegrator(mesh, sub, cfg, Operators(f=applied))


def ellg_initial_data(setup, mesh, sub):
    """Uniform m0 = -(1,1,1)/sqrt3 and h0 = -m0 on the closed magnet, relaxed with FC at f = 0."""
    m0v = -np.ones(3) / np.sqrt(3.0)
    lo, hi = np.asarray(setup.inner_lo), np.asarray(setup.inner_hi)
    edge = EdgeSpace(mesh)

    def h0fn(x):
        inside = np.all((x >= lo - 1e-12) & (x <= hi + 1e-12), axis=1)
        return np.where(inside[:, None], -m0v, 0.0)

    h0 = edge_interpolate(h0fn, edge)
    m0 = np.tile(m0v, (len(sub.inner_vertices), 1))
    if setup.relax_T <= 0:
        return m0, h0
    k = setup.relax_T / setup.relax_steps
    integ = ellg_integrator(setup, mesh, sub, k, setup.relax_T, "FC", ConstantField())
    tr = integ.run(m0, h0, sample_every=setup.relax_steps)
    return tr.m[-1], tr.h[-1]


def _ellg_cell(job):
    setup, coupling, k, every, m0, h0 = job
    mesh, sub = ellg_geometry(setup)
    f = PiecewiseRamp(direction=(1.0, 0.0, 0.0), time_scale=setup.ramp_time_scale)
    integ = ellg_integrator(setup, mesh, sub, k, setup.T, coupling, f)
    tr = integ.run(m0, h0, sample_every=every)
    return tr.times, tr.m, tr.h, tr.reports


def ellg_convergence(setup, threads=1):
    mesh, sub = ellg_geometry(setup)
    m0, h0 = ellg_initial_data(setup, mesh, sub)
    space, edge = P1Space(sub.mesh), EdgeSpace(mesh)
    top = 2 ** setup.levels
    ks = [2 ** l * setup.k_ref for l in range(1, setup.levels + 1)]
    jobs = [(setup, setup.reference, setup.k_ref, top, m0, h0)]
    for c in setup.couplings:
        for l in range(1, setup.levels + 1):
            jobs.append((setup, c, ks[l - 1], top // 2 ** l, m0, h0))
    out = _map(_ellg_cell, jobs, threads)
    ref_m = Trajectory(space, out[0][0], out[0][1])
    ref_h = Trajectory(edge, out[0][0], out[0][2])
    g_m, g_h = gram_matrix(space, "H1"), gram_matrix(edge, "Hcurl")
    tables, reports = {}, {}
    for ci, c in enumerate(setup.couplings):
        em, eh, reps = [], [], []
        for l in range(setup.levels):
            times, ms, hs, rep = out[1 + ci * setup.levels + l]
            em.append(reference_error(ref_m, Trajectory(space, times, ms), gram=g_m))
            eh.append(reference_error(ref_h, Trajectory(edge, times, hs), gram=g_h))
            reps.append(rep)
        tables[c] = (EocTable(ks, em), EocTable(ks, eh))
        reports[c] = reps
    return ConvergenceResult(ks, tables, reports, out[0][3])


PRESETS = {
    "llg-rates": LlgRatesSetup,
    "rho-study": rho_study_setup,
    "ellg-rates": EllgRatesSetup,
}


def run_preset(name, settings=None, threads=1):
    if name not in PRESETS:
        raise ValueError("unknown preset %r (choose from %s)" % (name, ", ".join(PRESETS)))
    setup = override(PRESETS[name](), settings or {})
    if name == "ellg-rates":
        return setup, ellg_convergence(setup, threads)
    return setup, llg_convergence(setup, threads)
