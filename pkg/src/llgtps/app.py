"""Build and run a simulation from a RunConfig, streaming CSV rows and VTK snapshots."""
import csv
from pathlib import Path

import numpy as np

from . import config as C
from .diagnostics import energy, spatial_average
from .eddy import EllgConfig, EllgIntegrator, piecewise_sigma
from .experiments import initial_magnetization
from .fem import EdgeSpace, P1Space, edge_interpolate
from .fields import (ConstantField, PiecewiseRamp, Slonczewski, SlonczewskiG, UniaxialAnisotropy,
                     ZeroField, ZeroTorque, ZhangLi)
from .mesh import build_cube_mesh, build_graded_cube_mesh, extract_submesh
from .solvers import SolverConfig
from .tps import MChoice, Operators, RhoChoice, SchemeConfig, TangentPlaneIntegrator
from .vtk import export_vtk

CSV_COLUMNS = ["step", "t", "E_exchange", "E_lower", "E_zeeman", "E_field", "E_total",
               "unit_violation", "tangency_violation", "mx", "my", "mz",
               "lambda_min", "lambda_max", "solves", "fixpoint_iterations",
               "ledger_lhs", "ledger_rhs", "ledger_ok",
               "field_ledger_lhs", "field_ledger_rhs", "field_ledger_ok"]


def scheme_config(cfg, k=None, T=None):
    s = cfg.scheme
    return SchemeConfig(
        alpha=s.alpha, lex2=s.lex2, k=s.k if k is None else k, T=s.T if T is None else T,
        variant=s.variant, strategy=s.strategy, rho=RhoChoice(s.rho, s.rho_delta),
        M=MChoice(s.M, s.M_value), fixpoint_tol=s.fixpoint_tol,
        fixpoint_max_iter=s.fixpoint_max_iter, first_step_fi=s.first_step_fi,
        solver=SolverConfig(cfg.solver.tol, cfg.solver.max_iter, cfg.solver.restart, cfg.solver.jacobi))


def operators(cfg, applied=None):
    p, t, a = cfg.pi, cfg.torque, cfg.applied
    pi = UniaxialAnisotropy(p.c_K, tuple(np.asarray(p.axis) / np.linalg.norm(p.axis))) \
        if p.kind == "anisotropy" else ZeroField()
    if t.kind == "slonczewski":
        Pi = Slonczewski(tuple(np.asarray(t.p) / np.linalg.norm(t.p)),
                         SlonczewskiG(P=t.P, prefactor_override=t.prefactor))
    elif t.kind == "zhangli":
        Pi = ZhangLi(t.u, t.beta)
    else:
        Pi = ZeroTorque()
    if applied is None:
        if a.kind == "ramp":
            applied = PiecewiseRamp(direction=a.direction, time_scale=a.time_scale, amplitude=a.amplitude)
        else:
            applied = ConstantField(a.value)
    return Operators(pi=pi, Pi=Pi, f=applied)


def build_mesh(cfg):
    m = cfg.mesh
    if m.inner_lo is not None:
        mesh = build_graded_cube_mesh(m.lo, m.hi, m.n, m.inner_lo, m.inner_hi, m.inner_cells)
        return mesh, extract_submesh(mesh, (m.inner_lo, m.inner_hi))
    mesh = build_cube_mesh(m.lo, m.hi, m.n)
    return mesh, None


class Simulation:
    """Holds the integrator and initial state described by a RunConfig."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.mesh, self.sub = build_mesh(cfg)
        self.ops = operators(cfg)
        self.ellg = cfg.ellg.enabled
        ini = cfg.initial
        if self.ellg:
            self.integ = self._ellg_integrator(scheme_config(cfg), cfg.ellg.coupling, self.ops)
            self.space = self.integ.space
            verts = self.sub.mesh.vertices
        else:
            llg_mesh = self.sub.mesh if self.sub is not None else self.mesh
            self.space = P1Space(llg_mesh)
            self.integ = TangentPlaneIntegrator(self.space, scheme_config(cfg), self.ops)
            verts = llg_mesh.vertices
        self.m0 = initial_magnetization(verts, ini.m0, ini.direction, ini.seed, ini.amplitude)
        self.h0 = None
        if self.ellg:
            self.h0 = self._initial_field()
            if cfg.ellg.relax_T > 0:
                self.m0, self.h0 = self._relax()

    def _ellg_integrator(self, scheme, coupling, ops):
        e = self.cfg.ellg
        sigma = piecewise_sigma(self.mesh, self.sub, e.sigma_inner, e.sigma_outer)
        ec = EllgConfig(scheme, mu0=e.mu0, sigma=sigma, coupling=coupling,
                        eddy_solver=SolverConfig(self.cfg.solver.tol, self.cfg.solver.max_iter,
                                                 self.cfg.solver.restart, True))
        return EllgIntegrator(self.mesh, self.sub, ec, ops)

    def _initial_field(self):
        edge = self.integ.edge
        if self.cfg.initial.h0 == "zero":
            return np.zeros(edge.n)
        m0v = self.m0.mean(axis=0)
        lo, hi = (np.asarray(b) for b in self.sub.box)

        def fn(x):
            inside = np.all((x >= lo - 1e-12) & (x <= hi + 1e-12), axis=1)
            return np.where(inside[:, None], -m0v, 0.0)
        return edge_interpolate(fn, edge)

    def _relax(self):
        e = self.cfg.ellg
        scheme = scheme_config(self.cfg, k=e.relax_k, T=e.relax_T)
        integ = self._ellg_integrator(scheme, "FC", operators(self.cfg, ConstantField()))
        tr = integ.run(self.m0, self.h0, sample_every=max(1, scheme.n_steps))
        return tr.m[-1], tr.h[-1]

    def header_notes(self):
        c = self.cfg
        notes = ["mesh: Kuhn split, n=%d cells per axis, box %s-%s" % (c.mesh.n, c.mesh.lo, c.mesh.hi)]
        if self.sub is not None:
            notes.append("magnet box %s-%s (%d tets)" % (c.mesh.inner_lo, c.mesh.inner_hi, len(self.sub.inner_tets)))
        notes.append("scheme: %s+%s k=%g T=%g" % (c.scheme.variant, c.scheme.strategy, c.scheme.k, c.scheme.T))
        if self.ellg:
            notes.append("coupling %s, mu0=%g, sigma %g/%g, relaxed for %g" % (
                c.ellg.coupling, c.ellg.mu0, c.ellg.sigma_inner, c.ellg.sigma_outer, c.ellg.relax_T))
        return notes

    def row(self, state, rep):
        t = state.i * self.cfg.scheme.k
        m = state.m_curr
        if self.ellg:
            E = energy(self.space, m, self.cfg.scheme.lex2, self.ops.pi, self.ops.f(t),
                       state.h_curr, self.integ.edge)
        else:
            E = energy(self.space, m, self.cfg.scheme.lex2, self.ops.pi, self.ops.f(t))
        r = {"step": state.i, "t": repr(t), "E_exchange": E.exchange, "E_lower": E.lower_order,
             "E_zeeman": E.zeeman, "E_field": E.field, "E_total": E.total,
             "mx": spatial_average(self.space, m, 0), "my": spatial_average(self.space, m, 1),
             "mz": spatial_average(self.space, m, 2)}
        if rep is None:
            r.update(unit_violation=float(np.abs(np.linalg.norm(m, axis=1) - 1).max()), tangency_violation=0.0,
                     lambda_min="", lambda_max="", solves=0, fixpoint_iterations=0, ledger_lhs="",
                     ledger_rhs="", ledger_ok="", field_ledger_lhs="", field_ledger_rhs="", field_ledger_ok="")
        else:
            r.update(unit_violation=rep.unit_violation, tangency_violation=rep.tangency_violation,
                     lambda_min=rep.lambda_min, lambda_max=rep.lambda_max, solves=rep.solves,
                     fixpoint_iterations=rep.fixpoint_iterations, ledger_lhs=rep.ledger_lhs,
                     ledger_rhs=rep.ledger_rhs, ledger_ok=int(rep.ledger_ok),
                     field_ledger_lhs=rep.extra.get("field_ledger_lhs", ""),
                     field_ledger_rhs=rep.extra.get("field_ledger_rhs", ""),
                     field_ledger_ok=int(rep.extra["field_ledger_ok"]) if "field_ledger_ok" in rep.extra else "")
        return r

    def snapshot(self, state, path):
        if self.ellg:
            m_full = np.zeros((self.mesh.n_vertices, 3))
            m_full[self.sub.inner_vertices] = state.m_curr
            export_vtk(self.mesh, path, point_data={"m": m_full},
                       edge_data={"h": (self.integ.edge, state.h_curr)})
        else:
            export_vtk(self.space.mesh, path, point_data={"m": state.m_curr})

    def run(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(C.to_ini(self.cfg))
        (out / "header.txt").write_text("\n".join(self.header_notes()) + "\n")
        every, vtk_every = self.cfg.output.every, self.cfg.output.vtk_every
        if self.ellg:
            state = self.integ.initial_state(self.m0, self.h0)
        else:
            state = self.integ.initial_state(self.m0)
        N = scheme_config(self.cfg).n_steps
        with open(out / "trajectory.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            w.writerow(self.row(state, None))
            if vtk_every:
                self.snapshot(state, out / ("snap_%06d.vtk" % 0))
            for _ in range(N):
                state, rep = self.integ.step(state)
                if state.i % every == 0 or state.i == N:
                    w.writerow(self.row(state, rep))
                if vtk_every and (state.i % vtk_every == 0 or state.i == N):
                    self.snapshot(state, out / ("snap_%06d.vtk" % state.i))
        return state
