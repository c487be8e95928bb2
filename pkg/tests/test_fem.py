import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from llgtps.fem import (EdgeSpace, P1Space, assemble_cross_term, assemble_curlcurl, assemble_edge_mass,
                        assemble_mass_p1, assemble_stiffness_p1, assemble_weighted_mass, coupling_matrix,
                        edge_interpolate, nodal_interpolate, quadrature)
from llgtps.mesh import build_cube_mesh, build_graded_cube_mesh, extract_submesh, mesh_from_tets
from llgtps.tps import weight

REF_TET = mesh_from_tets([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]])
SKEW_TET = mesh_from_tets([[0.1, 0, 0], [1.3, 0.2, 0.1], [0.2, 0.9, -0.1], [0.3, 0.4, 1.1]], [[0, 1, 2, 3]])


def cube(n):
    return build_cube_mesh((0, 0, 0), (1, 1, 1), n)


def quad_points(space):
    return np.einsum("qa,tad->tqd", space.qlam, space.mesh.vertices[space.tets])


def is_symmetric(A):
    A = A.toarray()
    return np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()


@pytest.mark.parametrize("deg", [1, 2, 3, 4, 6])
def test_quadrature_weights_and_exactness(deg):
    lam, w = quadrature(deg)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(lam.sum(axis=1), 1.0)
    # integral of lambda_1^p over the tet, relative to |K|: p! 3! / (p+3)!
    for p in range(0, min(deg, 6) + 1):
        exact = math.factorial(p) * 6 / math.factorial(p + 3)
        assert w @ lam[:, 1] ** p == pytest.approx(exact, abs=1e-14)


def test_single_tet_row_sums_and_mass_total():
    sp_ = P1Space(REF_TET)
    K = assemble_stiffness_p1(sp_).toarray()
    assert np.abs(K.sum(axis=1)).max() < 1e-14
    M = assemble_mass_p1(sp_).toarray()
    vol = 1 / 6
    for c in range(3):
        assert M[c::3, c::3].sum() == pytest.approx(vol, rel=1e-14)
    assert is_symmetric(assemble_mass_p1(sp_)) and is_symmetric(assemble_stiffness_p1(sp_))


def test_constant_field_zero_stiffness_energy():
    sp_ = P1Space(cube(2))
    x = np.tile([1.0, 0, 0], sp_.n)
    assert abs(x @ (sp_.stiffness @ x)) < 1e-13
    assert np.abs(sp_.stiffness @ np.tile([0.3, -2.0, 1.5], sp_.n)).max() < 1e-12


def test_sparse_rows_sorted_unique():
    A = P1Space(cube(2)).mass
    for r in range(A.shape[0]):
        idx = A.indices[A.indptr[r]:A.indptr[r + 1]]
        assert np.all(np.diff(idx) > 0)


def test_weighted_mass_examples():
    sp_ = P1Space(cube(2))
    M = sp_.mass.toarray()
    assert np.abs(assemble_weighted_mass(sp_, 1.0).toarray() - M).max() < 1e-14
    assert np.abs(sp_.weighted_mass(0.3).toarray() - 0.3 * M).max() < 1e-14
    with pytest.raises(ValueError):
        sp_.weighted_mass(np.nan)


def test_weighted_mass_tends_to_alpha_mass():
    sp_ = P1Space(cube(2))
    rng = np.random.default_rng(1)
    lam = rng.normal(scale=30, size=(len(sp_.tets), sp_.nq))
    M = sp_.mass.toarray()
    alpha = 0.7
    prev = np.inf
    for k in [1e-2, 1e-3, 1e-4, 1e-5]:
        Mk = 1 / abs(k * np.log(k))
        A = sp_.weighted_mass(weight(lam, k, Mk, alpha)).toarray()
        dev = np.abs(A - alpha * M).max()
        # entrywise bound from |W - alpha| <= M k / 2 and nonnegative mass entries
        assert dev <= Mk * k / 2 * M.max() * (1 + 1e-12)
        assert dev < prev
        prev = dev


def test_weighted_mass_spd_probe():
    sp_ = P1Space(cube(2))
    rng = np.random.default_rng(2)
    w = rng.uniform(0.01, 5, size=(len(sp_.tets), sp_.nq))
    A = sp_.weighted_mass(w)
    assert is_symmetric(A)
    np.linalg.cholesky(A.toarray())
    X = rng.normal(size=(100, sp_.ndof))
    assert np.all(np.einsum("ij,ij->i", X, (A @ X.T).T) > 0)


def test_cross_term_examples():
    sp_ = P1Space(REF_TET)
    m = np.tile([0.0, 0.0, 1.0], (4, 1))
    A = assemble_cross_term(sp_, m)
    ex, ey = np.tile([1.0, 0, 0], 4), np.tile([0, 1.0, 0], 4)
    assert abs(ex @ (A @ ex)) < 1e-16
    # (0,0,1) x (1,0,0) = (0,1,0): pairing with (0,1,0) gives |K|
    assert ey @ (A @ ex) == pytest.approx(1 / 6, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (27, 3), elements=st.floats(-1, 1)), arrays(float, 81, elements=st.floats(-10, 10)))
def test_cross_term_is_skew(m, x):
    sp_ = P1Space(cube(2))
    A = sp_.cross_term(m)
    assert abs(x @ (A @ x)) <= 1e-12 * max(1.0, x @ x) * max(1.0, np.abs(m).max())
    assert np.abs((A + A.T).toarray()).max() <= 1e-14 * max(1.0, np.abs(A).max())


def test_quadrature_change_is_second_order_in_h():
    def w(x):
        return 1 + np.exp(x[..., 0]) * np.sin(2 * x[..., 1]) ** 2 + x[..., 2] ** 3

    def fn(x):
        return np.stack([np.cos(x[:, 0] + x[:, 2]), np.sin(x[:, 1]), np.ones(len(x))], axis=1)

    gaps = []
    for n in (2, 4, 8):
        mesh = cube(n)
        s2, s6 = P1Space(mesh, 2), P1Space(mesh, 6)
        v = nodal_interpolate(fn, s2).ravel()
        a2 = v @ (s2.weighted_mass(w(quad_points(s2))) @ v)
        a6 = v @ (s6.weighted_mass(w(quad_points(s6))) @ v)
        gaps.append(abs(a2 - a6))
    assert gaps[0] / gaps[1] > 3 and gaps[1] / gaps[2] > 3


def test_edge_mass_matches_high_order_rule():
    for mesh in (REF_TET, SKEW_TET):
        es = EdgeSpace(mesh)
        lam, w = quadrature(8)
        W = es._basis_at(lam)[0]  # (nq, 6, 3)
        brute = es.vol[0] * np.einsum("q,qid,qjd->ij", w, W, W)
        assert np.abs(assemble_edge_mass(es).toarray() - brute).max() < 1e-12
        assert is_symmetric(es.mass)


def test_curlcurl_single_tet_psd_rank3():
    es = EdgeSpace(SKEW_TET)
    C = assemble_curlcurl(es, 1.0).toarray()
    assert np.abs(C - C.T).max() < 1e-12 * np.abs(C).max()
    ev = np.linalg.eigvalsh(C)
    assert ev.min() > -1e-12 * ev.max()
    assert np.sum(ev > 1e-10 * ev.max()) == 3
    with pytest.raises(ValueError):
        es.curlcurl(0.0)


def test_edge_interpolation_examples():
    es = EdgeSpace(cube(2))
    c = edge_interpolate(lambda x: np.tile([1.0, 0, 0], (len(x), 1)), es)
    v = es.mesh.vertices
    assert np.allclose(c, v[es.mesh.edges[:, 1], 0] - v[es.mesh.edges[:, 0], 0], atol=1e-15)
    g = edge_interpolate(lambda x: np.stack([2 * x[:, 0], 0 * x[:, 0], 0 * x[:, 0]], axis=1), es)
    assert np.abs(es.curl(g)).max() < 1e-13
    assert abs(g @ (es.curlcurl(1.0) @ g)) < 1e-13
    one = EdgeSpace(REF_TET)
    r = edge_interpolate(lambda x: np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], axis=1) / 2, one)
    assert np.allclose(one.curl(r), [[0, 0, 1]], atol=1e-14)


def test_edge_interpolant_reproduces_linear_fields():
    es = EdgeSpace(SKEW_TET)
    b = np.array([1.2, 0.1, -0.4])
    c0 = np.array([0.2, -0.3, 0.9])

    def fn(x):
        return c0 + np.cross(b, x)

    c = edge_interpolate(fn, es)
    pts = np.einsum("qa,ad->qd", es.qlam, SKEW_TET.vertices[SKEW_TET.tets[0]])
    assert np.allclose(es.at_quad(c)[0], fn(pts), atol=1e-13)
    assert np.allclose(es.curl(c)[0], 2 * b, atol=1e-13)


def test_nodal_interpolation():
    sp_ = P1Space(cube(2))
    rng = np.random.default_rng(3)
    phi = rng.normal(size=(sp_.n, 3))
    table = {tuple(x): p for x, p in zip(sp_.mesh.vertices, phi)}
    out = nodal_interpolate(lambda x: np.array([table[tuple(p)] for p in x]), sp_)
    assert np.array_equal(out, phi)
    m = phi / np.linalg.norm(phi, axis=1, keepdims=True)
    par = 2.5 * m
    assert np.abs(np.cross(m, par)).max() < 1e-14
    with pytest.raises(ValueError):
        nodal_interpolate(lambda x: np.full((len(x), 3), np.inf), sp_)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_product_interpolation_is_stable(seed):
    rng = np.random.default_rng(seed)
    sp_ = P1Space(cube(2))
    phi = rng.normal(size=(sp_.n, 3))
    psi = rng.uniform(-1, 1, size=sp_.n)
    assert sp_.l2_norm(phi * psi[:, None]) <= np.sqrt(5) * sp_.l2_norm(phi)


def test_coupling_matrix_against_high_order_rule():
    lo, hi = (0.375,) * 3, (0.625,) * 3
    mesh = build_graded_cube_mesh((0, 0, 0), (1, 1, 1), 4, lo, hi, inner_cells=2)
    sub = extract_submesh(mesh, (lo, hi))
    es = EdgeSpace(mesh)
    P = coupling_matrix(es, P1Space(sub.mesh), sub.inner_tets).toarray()
    Po = coupling_matrix(es, P1Space(sub.mesh, 6), sub.inner_tets).toarray()
    assert P.shape == (mesh.n_edges, 3 * len(sub.inner_vertices))
    assert np.abs(P - Po).max() < 1e-14
    # a constant edge field paired with constant nodal fields integrates to |omega| h.c
    h = edge_interpolate(lambda x: np.tile([0.5, -1.0, 2.0], (len(x), 1)), es)
    c = np.tile([1.0, 1.0, 1.0], len(sub.inner_vertices))
    assert h @ (P @ c) == pytest.approx(0.25 ** 3 * 1.5, rel=1e-12)
