"""Eddy-current coupling: LLG on the magnet omega, field h on the box Omega.

The field is discretised with edge elements on Omega and advanced by the
midpoint rule; the LLG half uses the tangent plane integrator on the
submesh.  The coupling schedule decides which combination h^Theta of past,
current and next field drives the LLG step:

    FC   midpoint at every step (joint fixpoint iteration)
    DC2  midpoint at i = 0, then 3/2 h^i - 1/2 h^{i-1}
    DC1  midpoint at i = 0, then h^i
    SF   as DC2 but the eddy right-hand side uses v instead of d_t m
"""
from dataclasses import dataclass, field

import numpy as np

from .fem import EdgeSpace, P1Space, coupling_matrix
from .fields import load_vector
from .solvers import SolverConfig, solve_spd
from .tps import FixpointError, Operators, SchemeConfig, TangentPlaneIntegrator, project_update

SCHEDULES = ("FC", "DC2", "DC1", "SF")


def theta_coefficients(schedule, i):
    """(Theta_1, Theta_2, Theta_3) weighting (h^{i-1}, h^i, h^{i+1})."""
    if schedule not in SCHEDULES:
        raise ValueError("unknown coupling schedule %r" % (schedule,))
    if schedule == "FC" or i == 0:
        return (0.0, 0.5, 0.5)
    if schedule == "DC1":
        return (0.0, 1.0, 0.0)
    return (-0.5, 1.5, 0.0)


def theta_field(schedule, i, h_curr, h_prev, h_mid=None):
    t1, t2, t3 = theta_coefficients(schedule, i)
    if t3 != 0 and h_mid is None:
        raise ValueError("implicit schedule needs the midpoint field")
    out = t1 * np.asarray(h_prev) + (t2 - t3) * np.asarray(h_curr)
    if t3 != 0:
        out = out + 2 * t3 * np.asarray(h_mid)
    return out


@dataclass
class EllgConfig:
    scheme: SchemeConfig
    mu0: float = 1.0
    sigma: np.ndarray = None      # per tet of Omega
    coupling: str = "DC2"
    sigma_floor: float = 1e-12
    eddy_solver: SolverConfig = field(default_factory=lambda: SolverConfig(jacobi=True))

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if self.coupling not in SCHEDULES:
            raise ValueError("unknown coupling schedule %r" % (self.coupling,))
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if np.any(~np.isfinite(s)) or np.any(s < self.sigma_floor) or self.sigma_floor <= 0:
                raise ValueError("conductivity must be bounded below by a positive floor")


def piecewise_sigma(mesh, submap, inner, outer):
    s = np.full(mesh.n_tets, float(outer))
    s[submap.inner_tets] = float(inner)
    return s


@dataclass
class EllgState:
    m_prev: np.ndarray
    m_curr: np.ndarray
    h_prev: np.ndarray
    h_curr: np.ndarray
    i: int = 0
    v: np.ndarray = None
    nu: np.ndarray = None

    @property
    def llg(self):
        from .tps import LlgState
        return LlgState(self.m_prev, self.m_curr, self.i)


class EllgIntegrator:
    def __init__(self, mesh, submap, cfg, ops=None):
        self.mesh = mesh
        self.submap = submap
        self.cfg = cfg
        self.space = P1Space(submap.mesh)
        self.edge = EdgeSpace(mesh)
        self.llg = TangentPlaneIntegrator(self.space, cfg.scheme, ops or Operators())
        sigma = cfg.sigma if cfg.sigma is not None else np.ones(mesh.n_tets)
        self.sigma = np.asarray(sigma, dtype=float)
        self.P = coupling_matrix(self.edge, self.space, submap.inner_tets).tocsr()
        self.PT = self.P.T.tocsr()
        self.Kc = self.edge.curlcurl(1.0 / self.sigma)
        self.Me = self.edge.mass
        k = cfg.scheme.k
        self.S = ((2 * cfg.mu0 / k) * self.Me + self.Kc).tocsr()
        self._W_inner = self.edge._basis_at(self.space.qlam)[submap.inner_tets]
        self._inner_edges = self.edge.tet_edges[submap.inner_tets]

    @property
    def k(self):
        return self.cfg.scheme.k

    def h_at_quad(self, h):
        return np.einsum("tqid,ti->tqd", self._W_inner, np.asarray(h)[self._inner_edges])

    def h_load(self, h):
        """Integrals over omega of h . phi for the P1 basis on omega."""
        return self.PT @ np.asarray(h)

    def initial_state(self, m0, h0):
        st = self.llg.initial_state(m0)
        h0 = np.array(h0, dtype=float)
        if h0.shape != (self.edge.n,):
            raise ValueError("initial field has wrong length")
        return EllgState(st.m_prev, st.m_curr, h0.copy(), h0.copy(), 0)

    def solve_midpoint_eddy(self, h_curr, source, x0=None):
        """Solve for nu; returns (nu, h_next, solver result)."""
        mu0, k = self.cfg.mu0, self.k
        rhs = -mu0 * (self.P @ np.asarray(source).ravel()) + (2 * mu0 / k) * (self.Me @ h_curr)
        res = solve_spd(self.S, rhs, self.cfg.eddy_solver, x0=h_curr if x0 is None else x0)
        nu = res.x
        return nu, 2.0 * nu - h_curr, res

    def _source(self, schedule, m, m_new, v):
        return v if schedule == "SF" else (m_new - m) / self.k

    def step(self, state):
        cfg, k = self.cfg, self.k
        sched = cfg.coupling
        variant, strategy = cfg.scheme.step_kind(state.i)
        sched_i = "FC" if state.i == 0 else sched  # the first step is always fully coupled
        th = theta_coefficients(sched_i, state.i)
        llg_state = state.llg
        system, lam = self.llg.build_system(llg_state, variant, self.h_at_quad(state.h_curr))
        base = self.llg.base_load(state.m_curr, state.i)
        exch = -cfg.scheme.lex2 * (self.space.stiffness @ state.m_curr.ravel())
        stats = {"solves": 0, "krylov": 0, "diffs": [], "eddy_iters": 0}

        if th[2] == 0:
            h_theta = theta_field(sched_i, state.i, state.h_curr, state.h_prev)
            v, load, st = self.llg.solve_velocity(system, llg_state, strategy, self.h_load(h_theta))
            stats["solves"] += st["solves"]
            stats["krylov"] += st["krylov"]
            stats["diffs"] = st["diffs"]
            m_new = project_update(state.m_curr, v, k)
            nu, h_next, res = self.solve_midpoint_eddy(state.h_curr, self._source(sched_i, state.m_curr, m_new, v))
            stats["solves"] += 1
            stats["eddy_iters"] += res.iterations
            fix_iters = 0
        else:
            eta = np.zeros_like(state.m_curr)
            nu = state.h_curr.copy()
            y = None
            fp_strategy = "FI" if strategy == "FI" else strategy
            for it in range(cfg.scheme.fixpoint_max_iter):
                h_theta = theta_field(sched_i, state.i, state.h_curr, state.h_prev, nu)
                low = self.llg.lower_load(fp_strategy, llg_state, eta)
                b = base + low + self.h_load(h_theta)
                eta_new, r1 = system.solve(b, y)
                y = r1.x
                m_trial = project_update(state.m_curr, eta_new, k)
                nu_new, _, r2 = self.solve_midpoint_eddy(
                    state.h_curr, self._source(sched_i, state.m_curr, m_trial, eta_new), x0=nu)
                stats["solves"] += 2
                stats["krylov"] += r1.iterations
                stats["eddy_iters"] += r2.iterations
                diff = self.space.l2_norm(eta_new - eta) + self.edge.l2_norm(nu_new - nu)
                stats["diffs"].append(diff)
                eta, nu = eta_new, nu_new
                if diff <= cfg.scheme.fixpoint_tol:
                    break
            else:
                raise FixpointError("coupled fixpoint did not converge (last diff %g)" % diff)
            v = eta
            load = b - exch
            m_new = project_update(state.m_curr, v, k)
            h_next = 2.0 * nu - state.h_curr
            fix_iters = len(stats["diffs"])

        new = EllgState(state.m_curr, m_new, state.h_curr, h_next, state.i + 1, v, nu)
        report = self.llg.make_report(llg_state, variant, strategy, system, lam, v, m_new, load,
                                      {"solves": stats["solves"], "krylov": stats["krylov"],
                                       "diffs": stats["diffs"]})
        report.fixpoint_iterations = fix_iters
        report.extra["schedule"] = sched_i
        report.extra["eddy_iterations"] = stats["eddy_iters"]
        source = self._source(sched_i, state.m_curr, m_new, v)
        lhs2, rhs2 = self.field_ledger(state.h_curr, h_next, source)
        report.extra["field_ledger_lhs"] = lhs2
        report.extra["field_ledger_rhs"] = rhs2
        report.extra["field_ledger_ok"] = bool(lhs2 <= rhs2 + 1e-9)
        h_theta_final = theta_field(sched_i, state.i, state.h_curr, state.h_prev, nu)
        lhs1, rhs1 = self.total_ledger(report, state, new, h_theta_final, source)
        report.extra["total_ledger_lhs"] = lhs1
        report.extra["total_ledger_rhs"] = rhs1
        report.extra["total_ledger_ok"] = bool(lhs1 <= rhs1 + 1e-9)
        return new, report

    def field_ledger(self, h_curr, h_next, source):
        """mu0 ||d_t h||^2 + d_t ||sigma^-1/2 curl h||^2  vs  mu0 ||source||^2_omega."""
        mu0, k = self.cfg.mu0, self.k
        dth = (h_next - h_curr) / k
        c_new = h_next @ (self.Kc @ h_next)
        c_old = h_curr @ (self.Kc @ h_curr)
        lhs = mu0 * dth @ (self.Me @ dth) + (c_new - c_old) / k
        rhs = mu0 * self.space.l2_norm(source) ** 2
        return float(lhs), float(rhs)

    def total_ledger(self, report, old, new, h_theta, source):
        """Total energy inequality: LLG part plus field energy and Joule losses."""
        mu0, k = self.cfg.mu0, self.k
        h_mid = 0.5 * (old.h_curr + new.h_curr)
        v = new.v.ravel()
        field_term = 0.5 * (new.h_curr @ (self.Me @ new.h_curr) - old.h_curr @ (self.Me @ old.h_curr)) / k \
            + (h_mid @ (self.Kc @ h_mid)) / mu0
        lhs = report.ledger_lhs + field_term
        # ledger_rhs contains <h^Theta, v>_omega; rearrange as in the total energy identity
        hv = self.h_load(h_theta) @ v
        rhs = report.ledger_rhs - hv + self.h_load(h_mid) @ (v - source.ravel()) \
            + self.h_load(h_theta - h_mid) @ v
        return float(lhs), float(rhs)

    def run(self, m0, h0, sample_every=1, callback=None, n_steps=None):
        state = self.initial_state(m0, h0)
        return self.run_from(state, sample_every, callback, n_steps)

    def run_from(self, state, sample_every=1, callback=None, n_steps=None):
        N = self.cfg.scheme.n_steps if n_steps is None else n_steps
        i0 = state.i
        out = EllgTrajectory(self.space, self.edge, [state.i * self.k], [state.m_curr.copy()],
                             [state.h_curr.copy()])
        for _ in range(N):
            state, rep = self.step(state)
            out.reports.append(rep)
            if callback is not None:
                callback(state, rep)
            j = state.i - i0
            if j % sample_every == 0 or j == N:
                out.times.append(state.i * self.k)
                out.m.append(state.m_curr.copy())
                out.h.append(state.h_curr.copy())
        out.final_state = state
        return out


@dataclass
class EllgTrajectory:
    space: object
    edge_space: object
    times: list
    m: list
    h: list
    reports: list = field(default_factory=list)
    final_state: object = None

    def magnetization(self):
        from .tps import Trajectory
        return Trajectory(self.space, self.times, self.m)

    def field(self):
        from .tps import Trajectory
        return Trajectory(self.edge_space, self.times, self.h)


def coupled_step(integrator, state):
    return integrator.step(state)


def coupled_fixpoint_first_step(integrator, state):
    """One fully coupled step from `state`; returns (v, nu, fixpoint iteration count, diffs)."""
    if theta_coefficients(integrator.cfg.coupling, state.i)[2] == 0:
        raise ValueError("not an implicit step for this schedule")
    new, rep = integrator.step(state)
    return new.v, new.nu, rep.fixpoint_iterations, rep.fixpoint_diffs


def energy_dissipation_check_h(integrator, before, after, source=None):
    """Field ledger row for two consecutive states: (lhs, rhs, ok)."""
    if source is None:
        source = (after.m_curr - before.m_curr) / integrator.k
    lhs, rhs = integrator.field_ledger(before.h_curr, after.h_curr, source)
    return lhs, rhs, bool(lhs <= rhs + 1e-9)
