"""Krylov solvers: conjugate gradients and restarted GMRES.

Both accept anything supporting ``A @ x`` and stop on the relative residual
``||b - A x|| <= tol ||b||`` with an absolute floor of ``1e-14 ||b||_inf``.
They are written out here (rather than calling scipy.sparse.linalg) so that
iteration counts, restart residuals and the negative-curvature breakdown
test are available to the callers.
"""
from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    pass


class BreakdownError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


@dataclass
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 2000
    restart: int = 50
    jacobi: bool = False

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("solver tolerance must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("solver max_iter must be >= 1")
        if self.restart < 1:
            raise ValueError("solver restart must be >= 1")


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def _threshold(b, tol):
    return max(tol * np.linalg.norm(b), 1e-14 * np.abs(b).max())


def _jacobi(A, use):
    if not use:
        return None
    d = np.asarray(A.diagonal(), dtype=float)
    if np.any(d == 0):
        raise SolverError("zero diagonal entry, Jacobi preconditioner unavailable")
    return 1.0 / d


def solve_spd(A, b, cfg=None, x0=None):
    """Preconditioned CG for symmetric positive definite A."""
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if not np.any(b):
        return SolveResult(np.zeros(n), 0, 0.0)
    thresh = _threshold(b, cfg.tol)
    dinv = _jacobi(A, cfg.jacobi)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    rn = np.linalg.norm(r)
    hist = [rn]
    if rn <= thresh:
        return SolveResult(x, 0, rn, hist)
    z = r * dinv if dinv is not None else r
    p = z.copy()
    rz = r @ z
    for it in range(1, cfg.max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise BreakdownError("negative curvature p.Ap = %g: matrix not SPD" % pAp)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        rn = np.linalg.norm(r)
        hist.append(rn)
        if rn <= thresh:
            return SolveResult(x, it, rn, hist)
        z = r * dinv if dinv is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError("CG: no convergence in %d iterations (residual %g)" % (cfg.max_iter, rn))


def _as_operator(A, n):
    # tiny sparse systems are faster as dense arrays
    if hasattr(A, "toarray") and n <= 1200:
        return A.toarray()
    return A


def solve_nonsymmetric(A, b, cfg=None, x0=None):
    """Restarted GMRES(m) with optional right Jacobi preconditioning.

    `history` holds the true residual norm at the start of every cycle and
    at the end, so it is nonincreasing by the minimal residual property.
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if not np.any(b):
        return SolveResult(np.zeros(n), 0, 0.0)
    thresh = _threshold(b, cfg.tol)
    dinv = _jacobi(A, cfg.jacobi)
    A = _as_operator(A, n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    m = min(cfg.restart, n)
    total = 0
    hist = []
    while True:
        r = b - A @ x
        beta = float(np.linalg.norm(r))
        hist.append(beta)
        if beta <= thresh:
            return SolveResult(x, total, beta, hist)
        if total >= cfg.max_iter:
            raise ConvergenceError("GMRES: no convergence in %d iterations (residual %g)"
                                   % (total, beta))
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = [], []
        g = [beta]
        V[0] = r / beta
        j_done = 0
        for j in range(m):
            w = A @ (V[j] * dinv if dinv is not None else V[j])
            # classical Gram-Schmidt, applied twice for stability
            h = V[:j + 1] @ w
            w -= h @ V[:j + 1]
            h2 = V[:j + 1] @ w
            w -= h2 @ V[:j + 1]
            col = (h + h2).tolist()
            hn = float(np.linalg.norm(w))
            breakdown = hn <= 1e-14 * beta
            if not breakdown:
                V[j + 1] = w / hn
            for i in range(j):
                a, c = col[i], col[i + 1]
                col[i] = cs[i] * a + sn[i] * c
                col[i + 1] = -sn[i] * a + cs[i] * c
            d = float(np.hypot(col[j], hn))
            if d == 0:
                raise BreakdownError("GMRES: singular Hessenberg matrix")
            cs.append(col[j] / d)
            sn.append(hn / d)
            col[j] = d
            H[:j + 1, j] = col
            g.append(-sn[j] * g[j])
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            if abs(g[j + 1]) <= 0.5 * thresh or breakdown or total >= cfg.max_iter:
                break
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), np.array(g[:j_done]))
        dx = y @ V[:j_done]
        x += dx * dinv if dinv is not None else dx
        if total >= cfg.max_iter:
            r = b - A @ x
            beta = float(np.linalg.norm(r))
            hist.append(beta)
            if beta <= thresh:
                return SolveResult(x, total, beta, hist)
            raise ConvergenceError("GMRES: no convergence in %d iterations (residual %g)"
                                   % (total, beta))
