"""Tangent plane integrator for the Landau-Lifshitz-Gilbert equation.

Each step computes lambda from the current magnetization, solves a linear
problem for the velocity v in the discrete tangent space (realised through
per-vertex tangent bases), and projects m + k v back to unit length at the
vertices.  TPS2 uses the weight W_M(lambda) and stabilization rho; TPS1 is
the same code path with W = alpha and rho = 0.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fields import (ConstantField, ZeroField, ZeroTorque, build_Pi_step, build_pi_step,
                     load_vector, to_quad)
from .solvers import SolverConfig, solve_nonsymmetric


class FixpointError(RuntimeError):
    pass


# weight and stabilization --------------------------------------------------

def weight(s, k, M, alpha):
    """W_M(s): alpha + k/2 min(s, M) for s >= 0, alpha / (1 + k/(2 alpha) min(-s, M)) else."""
    s = np.asarray(s, dtype=float)
    pos = alpha + 0.5 * k * np.minimum(s, M)
    neg = alpha / (1.0 + 0.5 * k / alpha * np.minimum(-s, M))
    return np.where(s >= 0, pos, neg)


@dataclass(frozen=True)
class RhoChoice:
    kind: str = "canonical"  # canonical | power | zero
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("canonical", "power", "zero"):
            raise ValueError("unknown rho choice %r" % self.kind)


@dataclass(frozen=True)
class MChoice:
    kind: str = "canonical"  # canonical | constant
    value: float = None

    def __post_init__(self):
        if self.kind not in ("canonical", "constant"):
            raise ValueError("unknown M choice %r" % self.kind)
        if self.kind == "constant" and not (self.value and self.value > 0):
            raise ValueError("constant M needs a positive value")


def _klogk(k):
    if not 0 < k < 1:
        raise ValueError("canonical choice needs 0 < k < 1")
    return abs(k * np.log(k))


def rho(choice, k):
    if choice.kind == "canonical":
        return _klogk(k)
    if choice.kind == "power":
        return k ** choice.delta
    return 0.0


def bigM(choice, k):
    if choice.kind == "canonical":
        return 1.0 / _klogk(k)
    return float(choice.value)


@dataclass
class SchemeConfig:
    alpha: float = 1.0
    lex2: float = 1.0
    k: float = 1e-3
    T: float = 1.0
    variant: str = "TPS2"    # TPS2 | TPS1
    strategy: str = "AB"     # FI | AB | EE
    rho: RhoChoice = field(default_factory=RhoChoice)
    M: MChoice = field(default_factory=MChoice)
    fixpoint_tol: float = 1e-10
    fixpoint_max_iter: int = 100
    solver: SolverConfig = field(default_factory=SolverConfig)
    first_step_fi: bool = True  # AB/EE runs start with one TPS2 fully implicit step

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.lex2 > 0:
            raise ValueError("lex2 must be positive")
        if not self.k > 0 or not self.T > 0:
            raise ValueError("k and T must be positive")
        if self.variant not in ("TPS1", "TPS2"):
            raise ValueError("unknown variant %r" % self.variant)
        if self.strategy not in ("FI", "AB", "EE"):
            raise ValueError("unknown strategy %r" % self.strategy)
        if self.uses_tps2_somewhere():
            Mk = bigM(self.M, self.k)
            if Mk * self.k / 2 >= self.alpha / 2:
                raise ValueError("time step too large: M(k) k / 2 = %g >= alpha / 2" % (Mk * self.k / 2))
        n = self.T / self.k
        if abs(n - round(n)) > 1e-8 * n:
            raise ValueError("T must be an integer multiple of k")

    def uses_tps2_somewhere(self):
        return self.variant == "TPS2" or (self.first_step_fi and self.strategy != "FI")

    @property
    def n_steps(self):
        return int(round(self.T / self.k))

    def step_kind(self, i):
        """(variant, strategy) actually used at step i."""
        if i == 0 and self.first_step_fi and self.strategy != "FI":
            return "TPS2", "FI"
        return self.variant, self.strategy


@dataclass
class Operators:
    pi: object = field(default_factory=ZeroField)
    Pi: object = field(default_factory=ZeroTorque)
    f: object = field(default_factory=ConstantField)


@dataclass
class LlgState:
    m_prev: np.ndarray
    m_curr: np.ndarray
    i: int = 0
    v: np.ndarray = None
    report: object = None


@dataclass
class StepReport:
    i: int
    t: float
    variant: str
    strategy: str
    lambda_min: float = 0.0
    lambda_max: float = 0.0
    lambda_mean: float = 0.0
    M_k: float = float("nan")
    weight_min: float = 0.0
    solves: int = 0
    fixpoint_iterations: int = 0
    fixpoint_diffs: list = field(default_factory=list)
    krylov_iterations: int = 0
    unit_violation: float = 0.0
    tangency_violation: float = 0.0
    v_l2: float = 0.0
    ledger_lhs: float = 0.0
    ledger_rhs: float = 0.0
    ledger_ok: bool = True
    extra: dict = field(default_factory=dict)


# building blocks -----------------------------------------------------------

def compute_lambda(space, m, f_t, pi_op, Pi_op, lex2, h_quad=None):
    """lambda at quadrature points, shape (nt, nq)."""
    g = space.gradient(m)
    grad2 = np.einsum("tcd,tcd->t", g, g)
    field_q = to_quad(space, np.asarray(f_t, dtype=float)) + to_quad(space, pi_op.apply(m)) \
        + to_quad(space, Pi_op.Pi(m, space))
    if h_quad is not None:
        field_q = field_q + h_quad
    mq = space.at_quad(m)
    return -lex2 * grad2[:, None] + np.einsum("tqc,tqc->tq", field_q, mq)


@dataclass
class TangentBasis:
    t1: np.ndarray
    t2: np.ndarray
    B: sp.csr_matrix  # (3n, 2n)


def tangent_basis(m):
    m = np.asarray(m, dtype=float)
    n = len(m)
    axis = np.argmin(np.abs(m), axis=1)
    e = np.zeros_like(m)
    e[np.arange(n), axis] = 1.0
    t1 = np.cross(m, e)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(m, t1)
    t2 /= np.linalg.norm(t2, axis=1, keepdims=True)
    rows = (3 * np.arange(n)[:, None, None] + np.arange(3)[None, :, None]).repeat(2, axis=2)
    cols = (2 * np.arange(n)[:, None, None] + np.arange(2)[None, None, :]).repeat(3, axis=1)
    vals = np.stack([t1, t2], axis=2)
    B = sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(3 * n, 2 * n))
    return TangentBasis(t1, t2, B)


def project_update(m, v, k):
    w = np.asarray(m) + k * np.asarray(v)
    nrm = np.linalg.norm(w, axis=1)
    if np.any(nrm < 1 - 1e-10):
        raise ValueError("|m + k v| < 1 at some vertex: velocity not tangent")
    return w / nrm[:, None]


class TangentSystem:
    """The step matrix for fixed (m, lambda), reduced to tangent coordinates."""

    def __init__(self, space, m, lam, cfg, variant):
        self.space = space
        self.m = m
        k = cfg.k
        if variant == "TPS2":
            self.M_k = bigM(cfg.M, k)
            self.rho_k = rho(cfg.rho, k)
            self.W = weight(lam, k, self.M_k, cfg.alpha)
        else:
            self.M_k = float("nan")
            self.rho_k = 0.0
            self.W = np.full(lam.shape, cfg.alpha)
        if np.any(self.W <= 0):
            raise ValueError("nonpositive weight")
        self.Wmass = space.weighted_mass(self.W)
        self.stab = 0.5 * cfg.lex2 * k * (1.0 + self.rho_k)
        self.A = (self.Wmass + space.cross_term(m) + self.stab * space.stiffness).tocsr()
        self.basis = tangent_basis(m)
        B = self.basis.B
        self.Ar = (B.T @ self.A @ B).tocsr()
        self.solver = cfg.solver

    def solve(self, b, y0=None):
        res = solve_nonsymmetric(self.Ar, self.basis.B.T @ b, self.solver, x0=y0)
        v = (self.basis.B @ res.x).reshape(-1, 3)
        return v, res


class TangentPlaneIntegrator:
    """Algorithm state holder: mesh space, configuration and operators."""

    def __init__(self, space, cfg, ops=None):
        self.space = space
        self.cfg = cfg
        self.ops = ops or Operators()

    def initial_state(self, m0):
        m0 = np.array(m0, dtype=float).reshape(-1, 3)
        if m0.shape[0] != self.space.n:
            raise ValueError("initial magnetization has wrong length")
        nrm = np.linalg.norm(m0, axis=1)
        if np.any(np.abs(nrm - 1) > 1e-12):
            raise ValueError("initial magnetization must be unit length at the vertices")
        return LlgState(m0.copy(), m0.copy(), 0)

    def time(self, i):
        return i * self.cfg.k

    def base_load(self, m, i):
        """-lex2 <grad m, grad phi> + <f(t_{i+1/2}), phi>."""
        sp_ = self.space
        f_mid = self.ops.f(self.time(i + 0.5))
        return -self.cfg.lex2 * (sp_.stiffness @ m.ravel()) + load_vector(sp_, f_mid)

    def lower_load(self, strategy, state, eta):
        sp_, ops, k = self.space, self.ops, self.cfg.k
        m, mp = state.m_curr, state.m_prev
        pi_i = build_pi_step(strategy, state.i, ops.pi, eta, m, mp, k)
        Pi_i = build_Pi_step(strategy, state.i, ops.Pi, eta, m, mp, k, sp_)
        return load_vector(sp_, pi_i) + load_vector(sp_, Pi_i)

    def build_system(self, state, variant, h_quad=None):
        lam = compute_lambda(self.space, state.m_curr, self.ops.f(self.time(state.i)),
                             self.ops.pi, self.ops.Pi, self.cfg.lex2, h_quad)
        return TangentSystem(self.space, state.m_curr, lam, self.cfg, variant), lam

    def solve_velocity(self, system, state, strategy, extra_load=None):
        """Solve for v; FI runs the fixpoint iteration with eta^0 = 0.

        Returns v, the load (without the exchange part) used in the final
        solve, and bookkeeping (solves, fixpoint diffs, Krylov iterations).
        """
        base = self.base_load(state.m_curr, state.i)
        if extra_load is not None:
            base = base + extra_load
        stats = {"solves": 0, "krylov": 0, "diffs": []}
        exch = -self.cfg.lex2 * (self.space.stiffness @ state.m_curr.ravel())
        if strategy != "FI":
            low = self.lower_load(strategy, state, None)
            v, res = system.solve(base + low)
            stats["solves"] = 1
            stats["krylov"] = res.iterations
            return v, base + low - exch, stats
        eta = np.zeros_like(state.m_curr)
        y = None
        for it in range(self.cfg.fixpoint_max_iter):
            low = self.lower_load("FI", state, eta)
            v, res = system.solve(base + low, y)
            y = res.x
            stats["solves"] += 1
            stats["krylov"] += res.iterations
            diff = self.space.l2_norm(v - eta)
            stats["diffs"].append(diff)
            eta = v
            if diff <= self.cfg.fixpoint_tol:
                return v, base + low - exch, stats
        raise FixpointError("fixpoint iteration did not converge in %d sweeps (last diff %g)"
                            % (self.cfg.fixpoint_max_iter, stats["diffs"][-1]))

    def ledger(self, system, m_old, m_new, v, load):
        """Discrete energy inequality for one step: returns (lhs, rhs)."""
        sp_, k, l2 = self.space, self.cfg.k, self.cfg.lex2
        K = sp_.stiffness
        e_new = m_new.ravel() @ (K @ m_new.ravel())
        e_old = m_old.ravel() @ (K @ m_old.ravel())
        vv = v.ravel()
        lhs = 0.5 * l2 * (e_new - e_old) / k + vv @ (system.Wmass @ vv) \
            + 0.5 * l2 * k * system.rho_k * (vv @ (K @ vv))
        return float(lhs), float(load @ vv)

    def make_report(self, state, variant, strategy, system, lam, v, m_new, load, stats):
        lhs, rhs = self.ledger(system, state.m_curr, m_new, v, load)
        return StepReport(
            i=state.i, t=self.time(state.i), variant=variant, strategy=strategy,
            lambda_min=float(lam.min()), lambda_max=float(lam.max()), lambda_mean=float(lam.mean()),
            M_k=system.M_k, weight_min=float(system.W.min()),
            solves=stats["solves"], fixpoint_iterations=len(stats["diffs"]),
            fixpoint_diffs=list(stats["diffs"]), krylov_iterations=stats["krylov"],
            unit_violation=float(np.abs(np.linalg.norm(m_new, axis=1) - 1).max()),
            tangency_violation=float(np.abs(np.einsum("ij,ij->i", state.m_curr, v)).max()),
            v_l2=self.space.l2_norm(v),
            ledger_lhs=lhs, ledger_rhs=rhs, ledger_ok=bool(lhs <= rhs + 1e-9),
        )

    def step(self, state):
        variant, strategy = self.cfg.step_kind(state.i)
        system, lam = self.build_system(state, variant)
        v, load, stats = self.solve_velocity(system, state, strategy)
        m_new = project_update(state.m_curr, v, self.cfg.k)
        report = self.make_report(state, variant, strategy, system, lam, v, m_new, load, stats)
        return LlgState(state.m_curr, m_new, state.i + 1, v, report), report

    def run(self, m0, sample_every=1, callback=None):
        state = self.initial_state(m0)
        traj = Trajectory(self.space, [0.0], [state.m_curr.copy()])
        N = self.cfg.n_steps
        for _ in range(N):
            state, rep = self.step(state)
            traj.reports.append(rep)
            if callback is not None:
                callback(state, rep)
            if state.i % sample_every == 0 or state.i == N:
                traj.times.append(self.time(state.i))
                traj.values.append(state.m_curr.copy())
        traj.final_state = state
        return traj


@dataclass
class Trajectory:
    space: object
    times: list
    values: list
    reports: list = field(default_factory=list)
    final_state: object = None


def solve_tangent_step(space, state, cfg, ops=None):
    """Velocity for one step of the configured scheme (no projection)."""
    integ = TangentPlaneIntegrator(space, cfg, ops)
    variant, strategy = cfg.step_kind(state.i)
    system, _ = integ.build_system(state, variant)
    v, _, _ = integ.solve_velocity(system, state, strategy)
    return v


def fixpoint_first_step(space, state, cfg, ops=None):
    """Fully implicit velocity by fixpoint iteration; returns (v, iteration count, diffs)."""
    integ = TangentPlaneIntegrator(space, cfg, ops)
    system, _ = integ.build_system(state, "TPS2" if cfg.uses_tps2_somewhere() else cfg.variant)
    v, _, stats = integ.solve_velocity(system, state, "FI")
    return v, len(stats["diffs"]), stats["diffs"]


def step(space, state, cfg, ops=None):
    return TangentPlaneIntegrator(space, cfg, ops).step(state)


def run(space, m0, cfg, ops=None, sample_every=1):
    return TangentPlaneIntegrator(space, cfg, ops).run(m0, sample_every)
