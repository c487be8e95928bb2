import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llgtps.diagnostics import (EocTable, constraint_report, energy, eoc, gram_matrix, reference_error,
                                spatial_average)
from llgtps.fem import EdgeSpace, P1Space, edge_interpolate
from llgtps.fields import UniaxialAnisotropy
from llgtps.mesh import build_cube_mesh
from llgtps.tps import Trajectory

MESH = build_cube_mesh((0, 0, 0), (1, 1, 1), 3)
SPACE = P1Space(MESH)


def const(v):
    return np.tile(np.asarray(v, dtype=float), (SPACE.n, 1))


def test_energy_of_uniform_state():
    m = const([0.0, 0.0, 1.0])
    e = energy(SPACE, m)
    assert abs(e.exchange) < 1e-13 and e.total == e.exchange
    c_K = 1.24339799290543e-3
    e = energy(SPACE, m, pi_op=UniaxialAnisotropy(c_K))
    assert e.lower_order == pytest.approx(-c_K / 2, rel=1e-12)
    e = energy(SPACE, m, f_t=np.array([0.0, 0.0, 2.0]))
    assert e.zeeman == pytest.approx(-2.0, rel=1e-12)


def test_field_energy_of_constant_field():
    edge = EdgeSpace(MESH)
    h = edge_interpolate(lambda x: np.tile([1.0, 0.0, 0.0], (len(x), 1)), edge)
    e = energy(SPACE, const([1.0, 0, 0]), h=h, edge_space=edge)
    assert e.field == pytest.approx(0.5, rel=1e-12)


def test_exchange_energy_of_linear_profile():
    x = MESH.vertices
    m = np.stack([0.3 * x[:, 0], 0.0 * x[:, 0], -0.5 * x[:, 1]], 1)
    # 1/2 |grad m|^2 over the unit cube, exact for P1-representable fields
    assert energy(SPACE, m, lex2=2.0).exchange == pytest.approx(0.09 + 0.25, rel=1e-12)


def test_constraint_report():
    m = const([0.0, 0.6, 0.8])
    rep = constraint_report(m, np.tile([1.0, 0, 0], (SPACE.n, 1)))
    assert rep["unit"] < 1e-15 and rep["tangency"] == 0.0
    rep = constraint_report(2 * m, m)
    assert rep["unit"] == pytest.approx(1.0) and rep["tangency"] == pytest.approx(2.0)


def test_spatial_average():
    assert spatial_average(SPACE, const([0.2, -0.4, 0.1]), 1) == pytest.approx(-0.4, rel=1e-14)
    m = np.stack([MESH.vertices[:, 0]] * 3, 1)
    # lumped quadrature integrates linear functions exactly
    assert spatial_average(SPACE, m, 0) == pytest.approx(0.5, rel=1e-13)


def test_gram_matrices():
    x = np.random.default_rng(0).normal(size=3 * SPACE.n)
    assert np.sqrt(x @ (gram_matrix(SPACE, "L2") @ x)) == pytest.approx(SPACE.l2_norm(x.reshape(-1, 3)))
    assert x @ (gram_matrix(SPACE, "H1") @ x) >= x @ (gram_matrix(SPACE, "L2") @ x)
    with pytest.raises(ValueError):
        gram_matrix(SPACE, "H2")


def traj(times, values):
    return Trajectory(SPACE, list(times), list(values))


def test_reference_error_examples():
    rng = np.random.default_rng(1)
    vals = [rng.normal(size=(SPACE.n, 3)) for _ in range(5)]
    ref = traj(np.linspace(0, 1, 5), vals)
    assert reference_error(ref, ref) == 0.0
    shifted = traj([0.0, 0.5, 1.0], [vals[0], vals[2] + 0.1, vals[4] + 0.3])
    # a constant shift c has H1 norm |c| sqrt(3) on the unit cube
    assert reference_error(ref, shifted) == pytest.approx(0.3 * np.sqrt(3), rel=1e-12)
    with pytest.raises(ValueError):
        reference_error(ref, traj([0.3], [vals[0]]))


def test_eoc_examples():
    t = EocTable([0.1, 0.05, 0.025], [4e-2, 1e-2, 2.5e-3])
    assert np.allclose(t.orders, [2.0, 2.0], atol=1e-12)
    assert t.fitted_order() == pytest.approx(2.0, abs=1e-12)
    t = EocTable([0.025, 0.1, 0.05], [1.0, 4.0, 2.0])
    assert t.ks == [0.1, 0.05, 0.025] and np.allclose(eoc(t), [1.0, 1.0])
    assert np.isnan(t.rows()[0][2])
    for bad in (([0.1], [1.0]), ([0.1, 0.1], [1.0, 2.0]), ([0.1, 0.05], [1.0, 0.0])):
        with pytest.raises(ValueError):
            EocTable(*bad)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3), st.integers(3, 7))
def test_eoc_recovers_power_law(p, c, levels):
    ks = [0.2 / 2 ** j for j in range(levels)]
    t = EocTable(ks, [c * k ** p for k in ks])
    assert np.allclose(t.orders, p, atol=1e-9)
    assert t.fitted_order() == pytest.approx(p, abs=1e-9)
