"""Lower-order field operators, spin-torque operators and applied fields.

Field values come in two shapes: nodal arrays (n, 3) on the P1 space, or
`QuadField` samples (nt, nq, 3) at the space's quadrature points.  Both are
integrated against test functions through `load_vector`.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

MU0 = 4e-7 * np.pi
HBAR = 1.054571800e-34
E_CHARGE = 1.602176621e-19


@dataclass
class QuadField:
    values: np.ndarray  # (nt, nq, 3)


def to_quad(space, f):
    if isinstance(f, QuadField):
        return f.values
    f = np.asarray(f, dtype=float)
    if f.shape == (3,):
        return np.broadcast_to(f, (len(space.tets), space.nq, 3))
    return space.at_quad(f)


def load_vector(space, f):
    """Integrals of f . phi for every vector basis function phi."""
    if isinstance(f, QuadField):
        return space.load(f.values)
    f = np.asarray(f, dtype=float)
    if f.shape == (3,):
        f = np.broadcast_to(f, (space.n, 3))
    return space.mass @ f.ravel()


def combine(space, terms):
    """Linear combination sum(c * f); stays nodal unless a term is sampled."""
    terms = [(c, f) for c, f in terms if c != 0 and f is not None]
    if not terms:
        return np.zeros((space.n, 3))
    if all(not isinstance(f, QuadField) for _, f in terms):
        return sum(c * np.broadcast_to(np.asarray(f, dtype=float), (space.n, 3)) for c, f in terms)
    return QuadField(sum(c * to_quad(space, f) for c, f in terms))


# lower-order operators pi -----------------------------------------------

class ZeroField:
    linear = True

    def apply(self, m):
        return np.zeros_like(np.asarray(m, dtype=float))

    def energy_density_sign(self):
        return 0.0


@dataclass
class UniaxialAnisotropy:
    c_K: float
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if not np.isclose(np.linalg.norm(a), 1.0, atol=1e-12):
            raise ValueError("anisotropy axis must be a unit vector")
        self.a = a

    def apply(self, m):
        m = np.asarray(m, dtype=float)
        return self.c_K * (m @ self.a)[..., None] * self.a


def anisotropy_coefficient(K, Ms, mu0=MU0):
    """Dimensionless c_K = 2K / (mu0 Ms^2)."""
    return 2.0 * K / (mu0 * Ms ** 2)


def exchange_length(A, Ms, mu0=MU0):
    return np.sqrt(2.0 * A / (mu0 * Ms ** 2))


def eval_pi(op, m):
    return op.apply(m)


# dissipative operators Pi and their derivatives D -------------------------

class ZeroTorque:
    def Pi(self, m, space=None):
        return np.zeros_like(np.asarray(m, dtype=float))

    def D(self, m, psi, space=None):
        return np.zeros_like(np.asarray(m, dtype=float))


@dataclass
class SlonczewskiG:
    """G(x) = prefactor / ((1+P)^3 (3+x) / (4 P^(3/2)) - 4)."""
    P: float = 0.8
    Je: float = 1e11
    Ms: float = 8e5
    d: float = 1e-8
    hbar: float = HBAR
    e: float = E_CHARGE
    mu0: float = MU0
    prefactor_override: float = None

    def __post_init__(self):
        if not 0 < self.P <= 1:
            raise ValueError("polarization P must lie in (0, 1]")

    @property
    def prefactor(self):
        if self.prefactor_override is not None:
            return self.prefactor_override
        return self.hbar * self.Je / (self.e * self.mu0 * self.Ms ** 2 * self.d)

    def bracket(self, x):
        return (1 + self.P) ** 3 * (3 + np.asarray(x, dtype=float)) / (4 * self.P ** 1.5)

    def __call__(self, x):
        q = self.bracket(x) - 4.0
        if np.any(q == 0):
            raise ZeroDivisionError("G has a pole at this argument")
        return self.prefactor / q

    def derivative(self, x):
        q = self.bracket(x) - 4.0
        return -self.prefactor * (1 + self.P) ** 3 / (4 * self.P ** 1.5) / q ** 2


def slonczewski_G(x, P=0.8, Je=1e11, Ms=8e5, d=1e-8, hbar=HBAR, e=E_CHARGE, mu0=MU0):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("G is defined on [-1, 1]")
    return SlonczewskiG(P, Je, Ms, d, hbar, e, mu0)(x)


@dataclass
class Slonczewski:
    """Pi(m) = G(m.p) m x p, evaluated vertexwise."""
    p: tuple
    G: object = field(default_factory=SlonczewskiG)
    check_range: bool = True

    def __post_init__(self):
        self.pv = np.asarray(self.p, dtype=float)
        if not np.isclose(np.linalg.norm(self.pv), 1.0, atol=1e-12):
            raise ValueError("polarization direction p must be a unit vector")

    def _mp(self, m):
        mp = np.asarray(m) @ self.pv
        if self.check_range and np.any(np.abs(mp) > 1 + 1e-12):
            raise ValueError("|m.p| > 1 at some vertex")
        return mp

    def Pi(self, m, space=None):
        m = np.asarray(m, dtype=float)
        return self.G(self._mp(m))[..., None] * np.cross(m, self.pv)

    def D(self, m, psi, space=None):
        m = np.asarray(m, dtype=float)
        psi = np.asarray(psi, dtype=float)
        mp = self._mp(m)
        mxp = np.cross(m, self.pv)
        return (self.G.derivative(mp) * (psi @ self.pv))[..., None] * mxp \
            + self.G(mp)[..., None] * np.cross(psi, self.pv)


@dataclass
class ZhangLi:
    """Pi(m) = m x (u.grad) m + beta (u.grad) m, sampled at quadrature points."""
    u: tuple
    beta: float

    def __post_init__(self):
        self.uv = np.asarray(self.u, dtype=float)
        if not self.beta > 0:
            raise ValueError("Zhang-Li beta must be positive")

    def _ugrad(self, space, m):
        g = space.gradient(m)  # (nt, 3, 3): [component, direction]
        return np.broadcast_to((g @ self.uv)[:, None, :], (len(g), space.nq, 3))

    def Pi(self, m, space):
        um = self._ugrad(space, m)
        mq = space.at_quad(m)
        return QuadField(np.cross(mq, um) + self.beta * um)

    def D(self, m, psi, space):
        um = self._ugrad(space, m)
        up = self._ugrad(space, psi)
        mq = space.at_quad(m)
        pq = space.at_quad(psi)
        return QuadField(np.cross(pq, um) + np.cross(mq, up) + self.beta * up)


def eval_Pi(op, m, space=None):
    return op.Pi(m, space)


def eval_D(op, m, psi, space=None):
    return op.D(m, psi, space)


# per-step approximations -------------------------------------------------

STRATEGIES = ("FI", "AB", "EE")


def _check(strategy, i, m_prev):
    if strategy not in STRATEGIES:
        raise ValueError("unknown strategy %r" % (strategy,))
    if strategy == "AB" and i >= 1 and m_prev is None:
        raise ValueError("AB strategy needs the previous magnetization for i >= 1")


def build_pi_step(strategy, i, op, v, m_i, m_prev, k=0.0, space=None):
    """pi_h^i for the given strategy; FI is affine in the velocity v."""
    _check(strategy, i, m_prev)
    if strategy == "FI":
        out = op.apply(m_i)
        if v is not None:
            out = out + 0.5 * k * op.apply(v)
        return out
    if strategy == "AB":
        prev = m_i if m_prev is None else m_prev
        return 1.5 * op.apply(m_i) - 0.5 * op.apply(prev)
    return op.apply(m_i)


def _lincomb(terms):
    # the terms of one operator share their representation
    if isinstance(terms[0][1], QuadField):
        return QuadField(sum(c * f.values for c, f in terms))
    return sum(c * np.asarray(f) for c, f in terms)


def build_Pi_step(strategy, i, op, v, m_i, m_prev, k=0.0, space=None):
    """Pi_h^i for the given strategy, using D for the linearised correction."""
    _check(strategy, i, m_prev)
    base = op.Pi(m_i, space)
    if isinstance(op, ZeroTorque):
        return base
    if strategy == "FI":
        if v is None:
            return base
        return _lincomb([(1.0, base), (0.5 * k, op.D(m_i, v, space))])
    if strategy == "AB":
        prev = m_i if m_prev is None else m_prev
        return _lincomb([(1.0, base), (0.5, op.D(m_i, m_i, space)),
                         (-0.5, op.D(m_i, prev, space))])
    return base


# applied fields ------------------------------------------------------------

class _Applied:
    T = np.inf
    t_tol = 1e-12

    def _check_t(self, t):
        if t < -self.t_tol or t > self.T + self.t_tol * max(1.0, self.T):
            raise ValueError("time %g outside [0, %g]" % (t, self.T))


@dataclass
class ConstantField(_Applied):
    value: tuple = (0.0, 0.0, 0.0)

    def __call__(self, t):
        self._check_t(t)
        return np.asarray(self.value, dtype=float)


def ramp_profile(t):
    """The scalar C^1 ramp on [0, 7]: up to 30, hold, back down to 0."""
    t = float(t)
    if t <= 1:
        return 15.0 * t * t
    if t <= 2:
        return 30.0 - 15.0 * (t - 2) ** 2
    if t <= 4:
        return 30.0
    if t <= 5:
        return 30.0 - 15.0 * (t - 4) ** 2
    if t <= 6:
        return 15.0 * (t - 6) ** 2
    return 0.0


@dataclass
class PiecewiseRamp(_Applied):
    """f(t) = amplitude * ramp_profile(t / time_scale) * direction on [0, 7 time_scale]."""
    direction: tuple = (1.0, 0.0, 0.0)
    time_scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.time_scale <= 0:
            raise ValueError("ramp time_scale must be positive")
        self.T = 7.0 * self.time_scale

    def __call__(self, t):
        self._check_t(t)
        t = min(max(t, 0.0), self.T)
        return self.amplitude * ramp_profile(t / self.time_scale) * np.asarray(self.direction, dtype=float)


class SampledField(_Applied):
    """C^1 (monotone cubic Hermite) interpolation of sampled 3-vectors."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        if times[0] != 0:
            raise ValueError("samples must start at t = 0")
        self.T = float(times[-1])
        self._f = PchipInterpolator(times, np.asarray(values, dtype=float), axis=0)

    def __call__(self, t):
        self._check_t(t)
        return self._f(min(max(t, 0.0), self.T))


def eval_applied(f, t):
    return f(t)
