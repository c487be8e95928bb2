"""Energies, constraint checks, reference errors and convergence orders."""
from dataclasses import dataclass

import numpy as np

from .fields import load_vector


@dataclass
class EnergyBreakdown:
    exchange: float
    lower_order: float
    zeeman: float
    field: float = 0.0

    @property
    def total(self):
        return self.exchange + self.lower_order + self.zeeman + self.field


def energy(space, m, lex2=1.0, pi_op=None, f_t=None, h=None, edge_space=None):
    """Micromagnetic energy of nodal m (plus 1/2 ||h||^2 when a field is given)."""
    x = np.asarray(m, dtype=float).ravel()
    exch = 0.5 * lex2 * float(x @ (space.stiffness @ x))
    low = 0.0
    if pi_op is not None:
        low = -0.5 * float(x @ (space.mass @ pi_op.apply(m).ravel()))
    zee = 0.0
    if f_t is not None:
        zee = -float(load_vector(space, np.asarray(f_t, dtype=float)) @ x)
    fld = 0.0
    if h is not None:
        fld = 0.5 * edge_space.l2_norm(h) ** 2
    return EnergyBreakdown(exch, low, zee, fld)


def constraint_report(m, v=None):
    m = np.asarray(m)
    out = {"unit": float(np.abs(np.linalg.norm(m, axis=1) - 1).max())}
    out["tangency"] = float(np.abs(np.einsum("ij,ij->i", m, v)).max()) if v is not None else 0.0
    return out


def spatial_average(space, m, component):
    """Volume average of one component of a nodal field."""
    ones = np.ones(space.n)
    lumped = space.scalar_mass() @ ones
    return float(lumped @ np.asarray(m)[:, component] / lumped.sum())


def gram_matrix(space, norm):
    """SPD matrix G with ||x||^2 = x.G x for the named discrete norm."""
    if norm == "L2":
        return space.mass
    if norm == "H1":
        return space.mass + space.stiffness
    if norm == "Hcurl":
        return space.hcurl_gram()
    raise ValueError("unknown norm %r" % norm)


def reference_error(traj_ref, traj, norm="H1", gram=None, rtol=1e-9):
    """Max over the sample times of traj of the norm of (ref - traj).

    Every sample time of `traj` must also be a sample time of `traj_ref`.
    """
    if traj_ref.space is not traj.space and (
            getattr(traj_ref.space, "n", None) != getattr(traj.space, "n", None)):
        raise ValueError("trajectories live on different meshes")
    G = gram if gram is not None else gram_matrix(traj.space, norm)
    tref = np.asarray(traj_ref.times)
    scale = max(1.0, abs(tref).max())
    worst = 0.0
    for t, val in zip(traj.times, traj.values):
        j = np.flatnonzero(np.abs(tref - t) <= rtol * scale)
        if len(j) == 0:
            raise ValueError("time %g missing from the reference trajectory" % t)
        d = (np.asarray(traj_ref.values[j[0]]) - np.asarray(val)).ravel()
        worst = max(worst, float(np.sqrt(max(d @ (G @ d), 0.0))))
    return worst


@dataclass
class EocTable:
    ks: list
    errors: list

    def __post_init__(self):
        k = np.asarray(self.ks, dtype=float)
        e = np.asarray(self.errors, dtype=float)
        if len(k) != len(e) or len(k) < 2:
            raise ValueError("need at least two (k, error) rows")
        order = np.argsort(-k)
        self.ks = list(k[order])
        self.errors = list(e[order])
        if np.any(np.diff(self.ks) >= 0):
            raise ValueError("time steps must be distinct")
        if np.any(np.asarray(self.errors) <= 0):
            raise ValueError("errors must be positive")

    @property
    def orders(self):
        k = np.asarray(self.ks)
        e = np.asarray(self.errors)
        return list(np.log(e[:-1] / e[1:]) / np.log(k[:-1] / k[1:]))

    def fitted_order(self):
        """Least-squares slope of log e against log k over all rows."""
        return float(np.polyfit(np.log(self.ks), np.log(self.errors), 1)[0])

    def rows(self):
        o = [float("nan")] + self.orders
        return [(k, e, r) for k, e, r in zip(self.ks, self.errors, o)]


def eoc(table):
    return table.orders
