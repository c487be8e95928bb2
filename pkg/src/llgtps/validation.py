"""Self-checks run by `llgtps validate`: weight bounds, Theta identities, ledger controls."""
import numpy as np

from .eddy import EllgConfig, EllgIntegrator, SCHEDULES, piecewise_sigma, theta_coefficients
from .fem import edge_interpolate
from .mesh import build_graded_cube_mesh, extract_submesh
from .tps import SchemeConfig, weight

EPS = np.finfo(float).eps


def sample_weight_bound_i(n, rng):
    """Violations of |W(s) - alpha| <= M k / 2 over n random (s, k, M, alpha)."""
    s = rng.choice([-1, 1], n) * 10 ** rng.uniform(-4, 4, n)
    k = 10 ** rng.uniform(-6, 0, n)
    M = 10 ** rng.uniform(-2, 5, n)
    alpha = rng.uniform(1e-3, 1.0, n)
    W = weight(s, k, M, alpha)
    slack = 4 * EPS * (alpha + M * k)  # rounding in alpha + x
    return int(np.sum(np.abs(W - alpha) > M * k / 2 + slack))


def sample_weight_bound_ii(n, rng):
    """Violations of |alpha + k s / 2 - W(s)| <= B^2 k^2 / (2 alpha) for B <= M, k < alpha / B, |s| <= B."""
    alpha = rng.uniform(1e-3, 1.0, n)
    B = 10 ** rng.uniform(-3, 4, n)
    M = B * (1 + 10 ** rng.uniform(-6, 2, n))
    k = alpha / B * rng.uniform(1e-6, 1.0, n) * (1 - 1e-12)
    s = B * rng.uniform(-1, 1, n)
    W = weight(s, k, M, alpha)
    diff = np.abs(alpha + 0.5 * k * s - W)
    slack = 8 * EPS * (alpha + np.abs(0.5 * k * s))
    return int(np.sum(diff > B ** 2 * k ** 2 / (2 * alpha) + slack))


def theta_row_sums(max_i=5):
    return max(abs(sum(theta_coefficients(s, i)) - 1.0) for s in SCHEDULES for i in range(max_i))


def field_ledger_negative_control():
    """A corrupted field update must be flagged by the field ledger; the true one must pass."""
    lo, hi = (0.375,) * 3, (0.625,) * 3
    mesh = build_graded_cube_mesh((0, 0, 0), (1, 1, 1), 4, lo, hi, inner_cells=2)
    sub = extract_submesh(mesh, (lo, hi))
    cfg = EllgConfig(SchemeConfig(k=1 / 64, T=1 / 16), sigma=piecewise_sigma(mesh, sub, 100, 1), coupling="DC2")
    integ = EllgIntegrator(mesh, sub, cfg)
    m0 = np.tile(-np.ones(3) / np.sqrt(3), (integ.space.n, 1))
    h0 = edge_interpolate(lambda x: np.tile([0.3, -0.2, 0.5], (len(x), 1)) * x[:, :1], integ.edge)
    st = integ.initial_state(m0, h0)
    new, rep = integ.step(st)
    good = rep.extra["field_ledger_ok"]
    bad_h = new.h_curr + 5.0 * np.sign(np.sin(np.arange(len(new.h_curr))))
    lhs, rhs = integ.field_ledger(st.h_curr, bad_h, (new.m_curr - st.m_curr) / integ.k)
    return bool(good), bool(lhs > rhs + 1e-9)


def run_all(samples=100000, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    v1 = sample_weight_bound_i(samples, rng)
    checks.append(("weight bound |W - alpha| <= Mk/2 (%d samples)" % samples, v1 == 0, "%d violations" % v1))
    v2 = sample_weight_bound_ii(samples, rng)
    checks.append(("weight bound near alpha + ks/2 (%d samples)" % samples, v2 == 0, "%d violations" % v2))
    rs = theta_row_sums()
    checks.append(("Theta row sums equal 1", rs < 1e-15, "max deviation %g" % rs))
    good, flagged = field_ledger_negative_control()
    checks.append(("field ledger passes a true step", good, ""))
    checks.append(("field ledger flags a corrupted step", flagged, ""))
    return checks
