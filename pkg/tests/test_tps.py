import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llgtps.fem import P1Space
from llgtps.fields import ConstantField, Slonczewski, SlonczewskiG, UniaxialAnisotropy
from llgtps.mesh import build_cube_mesh
from llgtps.tps import (LlgState, MChoice, Operators, RhoChoice, SchemeConfig, TangentPlaneIntegrator,
                        bigM, compute_lambda, fixpoint_first_step, project_update, rho, run,
                        solve_tangent_step, tangent_basis, weight)
from oracles import lagrange_velocity, random_unit

SPACE2 = P1Space(build_cube_mesh((0, 0, 0), (1, 1, 1), 2))


def test_weight_examples():
    assert weight(0.0, 0.1, 10, 0.6) == 0.6
    assert weight(4.0, 0.1, 10, 1.0) == pytest.approx(1.2, abs=1e-15)
    assert weight(-4.0, 0.1, 10, 1.0) == pytest.approx(1 / 1.2, abs=1e-15)
    # clamping at M
    assert weight(100.0, 0.1, 10, 1.0) == pytest.approx(1.5)
    assert weight(-100.0, 0.1, 10, 1.0) == pytest.approx(1 / 1.5)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(1e-6, 1.0), st.floats(1e-2, 1e5), st.floats(1e-3, 1.0))
def test_weight_deviation_bound(s, k, M, alpha):
    W = weight(s, k, M, alpha)
    assert W > 0
    assert abs(W - alpha) <= M * k / 2 + 4 * np.finfo(float).eps * (alpha + M * k)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1e3), st.floats(1.0, 50.0), st.floats(1e-6, 0.999),
       st.floats(-1, 1))
def test_weight_second_order_bound(alpha, B, Mfac, kfrac, sfrac):
    M = B * Mfac
    k = alpha / B * kfrac
    s = B * sfrac
    W = weight(s, k, M, alpha)
    slack = 8 * np.finfo(float).eps * (alpha + abs(k * s / 2))
    assert abs(alpha + k * s / 2 - W) <= B ** 2 * k ** 2 / (2 * alpha) + slack


def test_rho_and_M_examples():
    can_r, can_m = RhoChoice(), MChoice()
    assert rho(can_r, 0.1) == pytest.approx(0.230258509299404, rel=1e-14)
    assert bigM(can_m, 0.1) == pytest.approx(4.34294481903252, rel=1e-14)
    assert rho(RhoChoice("power", 0.0), 0.1) == 1.0
    assert rho(RhoChoice("power", 0.5), 0.04) == pytest.approx(0.2)
    assert rho(RhoChoice("zero"), 0.3) == 0.0
    assert bigM(MChoice("constant", 7.0), 0.3) == 7.0
    for bad in (1.0, 2.0, 0.0):
        with pytest.raises(ValueError):
            rho(can_r, bad)
    with pytest.raises(ValueError):
        RhoChoice("cubic")
    with pytest.raises(ValueError):
        MChoice("constant")


def test_canonical_asymptotics():
    ks = 2.0 ** -np.arange(4, 30, 3)
    r = np.array([rho(RhoChoice(), k) for k in ks])
    Mk = np.array([bigM(MChoice(), k) * k for k in ks])
    assert np.all(np.diff(r) < 0) and r[-1] < 1e-7
    assert np.all(np.diff(ks / r) < 0)
    assert np.all(np.diff(Mk) < 0)


def test_scheme_config_guards():
    with pytest.raises(ValueError):
        SchemeConfig(k=0.5, T=1.0)  # M(k) k = 1 / |log k| > alpha
    with pytest.raises(ValueError):
        SchemeConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(k=0.01, T=0.015)
    with pytest.raises(ValueError):
        SchemeConfig(strategy="RK4")
    # TPS1 without a TPS2 first step needs no guard
    cfg = SchemeConfig(k=0.5, T=1.0, variant="TPS1", first_step_fi=False)
    assert cfg.n_steps == 2 and cfg.step_kind(0) == ("TPS1", "AB")
    assert SchemeConfig(k=0.01, T=0.1, variant="TPS1", strategy="EE").step_kind(0) == ("TPS2", "FI")


def test_lambda_examples():
    m = np.tile([1.0, 0, 0], (SPACE2.n, 1))
    ops = Operators()
    lam = compute_lambda(SPACE2, m, np.array([-2.0, -0.5, 0.0]), ops.pi, ops.Pi, 1.0)
    assert np.allclose(lam, -2.0, atol=1e-15)
    lam = compute_lambda(SPACE2, m, np.zeros(3), UniaxialAnisotropy(0.8, (1.0, 0, 0)), ops.Pi, 1.0)
    assert np.allclose(lam, 0.8, atol=1e-15)


def test_lambda_gradient_term_on_one_tet():
    from llgtps.mesh import mesh_from_tets
    sp1 = P1Space(mesh_from_tets([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]]))
    # m varies linearly in x: grad m has the single column b in the x direction
    b = np.array([0.0, 0.3, -0.4])
    m = np.array([1.0, 0, 0]) + sp1.mesh.vertices[:, :1] * b
    lam = compute_lambda(sp1, m, np.zeros(3), Operators().pi, Operators().Pi, 2.0)
    assert np.allclose(lam, -2.0 * (b @ b), atol=1e-15)


def test_tangent_basis_examples():
    tb = tangent_basis(np.array([[0, 0, 1.0]]))
    assert abs(tb.t1[0, 2]) < 1e-15 and abs(tb.t2[0, 2]) < 1e-15
    assert abs(tb.t1[0] @ tb.t2[0]) < 1e-15
    tb = tangent_basis(np.array([[1.0, 1.0, 1.0]]) / np.sqrt(3))
    m = np.ones(3) / np.sqrt(3)
    for v in (tb.t1[0], tb.t2[0]):
        assert abs(v @ m) < 1e-15 and abs(np.linalg.norm(v) - 1) < 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_tangent_basis_invariants(seed):
    m = random_unit(np.random.default_rng(seed), 200)
    tb = tangent_basis(m)
    for a, b in ((tb.t1, m), (tb.t2, m), (tb.t1, tb.t2)):
        assert np.abs(np.einsum("ij,ij->i", a, b)).max() < 1e-14
    assert np.abs(np.linalg.norm(tb.t1, axis=1) - 1).max() < 1e-14
    assert np.abs(np.linalg.norm(tb.t2, axis=1) - 1).max() < 1e-14
    assert tb.B.shape == (600, 400)


def test_reduced_spd_matrix_stays_spd():
    m = random_unit(np.random.default_rng(11), SPACE2.n)
    B = tangent_basis(m).B
    A = (SPACE2.mass + 0.1 * SPACE2.stiffness).tocsr()
    Ar = (B.T @ A @ B).toarray()
    assert Ar.shape == (2 * SPACE2.n, 2 * SPACE2.n)
    assert np.abs(Ar - Ar.T).max() < 1e-14
    assert np.linalg.eigvalsh(Ar).min() > 0


def make_state(m):
    return LlgState(m.copy(), m.copy(), 0)


def test_zero_data_gives_zero_velocity():
    m = np.tile([0.0, 0.6, 0.8], (SPACE2.n, 1))
    for variant in ("TPS2", "TPS1"):
        cfg = SchemeConfig(k=0.01, T=0.1, variant=variant)
        v = solve_tangent_step(SPACE2, make_state(m), cfg)
        # the exchange load of a constant field is zero up to rounding
        assert np.abs(v).max() < 1e-13


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_reduced_solve_matches_lagrange_oracle(seed):
    rng = np.random.default_rng(seed)
    m = random_unit(rng, SPACE2.n)
    f = tuple(rng.normal(size=3))
    ops = Operators(pi=UniaxialAnisotropy(0.5, (0, 0, 1.0)), f=ConstantField(f))
    cfg = SchemeConfig(alpha=0.5, k=0.01, T=0.1, strategy="EE", first_step_fi=False)
    integ = TangentPlaneIntegrator(SPACE2, cfg, ops)
    state = make_state(m)
    system, _ = integ.build_system(state, "TPS2")
    b = integ.base_load(m, 0) + integ.lower_load("EE", state, None)
    v, _ = system.solve(b)
    ref = lagrange_velocity(system.A, b, m)
    assert np.linalg.norm(v - ref) <= 1e-9 * np.linalg.norm(ref)


def test_one_step_precession_matches_lagrange_oracle():
    m = np.tile([1.0, 0, 0], (SPACE2.n, 1))
    ops = Operators(f=ConstantField((0, 0, 0.1)))
    cfg = SchemeConfig(alpha=0.3, k=0.01, T=0.1, strategy="EE", first_step_fi=False)
    integ = TangentPlaneIntegrator(SPACE2, cfg, ops)
    state = make_state(m)
    system, _ = integ.build_system(state, "TPS2")
    b = integ.base_load(m, 0) + integ.lower_load("EE", state, None)
    v, _ = system.solve(b)
    ref = lagrange_velocity(system.A, b, m)
    assert np.linalg.norm(v - ref) <= 1e-10 * np.linalg.norm(ref)
    # uniform response: W v + m x v = P_m f, solved by hand for m = e_x, f = c e_z
    W = system.W.ravel()[0]
    c = 0.1
    vy, vz = c / (W ** 2 + 1), c * W / (W ** 2 + 1)
    assert np.allclose(v, [0, vy, vz], atol=1e-12)


def test_project_update_examples():
    m = np.array([[1.0, 0, 0]])
    assert np.array_equal(project_update(m, np.zeros((1, 3)), 0.3), m)
    assert np.allclose(project_update(m, np.array([[0, 2.0, 0]]), 0.5), [[1, 1, 0]] / np.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        project_update(m, np.array([[-0.5, 0, 0]]), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-4, 1.0))
def test_projection_is_unit_and_lipschitz(seed, k):
    rng = np.random.default_rng(seed)
    m = random_unit(rng, SPACE2.n)
    v = rng.normal(size=(SPACE2.n, 3))
    v -= np.einsum("ij,ij->i", v, m)[:, None] * m
    new = project_update(m, v, k)
    assert np.abs(np.linalg.norm(new, axis=1) - 1).max() <= 1e-15 * 4
    # nodal |m_new - m| <= k |v|, and the P1 mass matrix lies between lumped/5 and lumped
    assert SPACE2.l2_norm(new - m) <= np.sqrt(5) * k * SPACE2.l2_norm(v) * (1 + 1e-12)


def test_fixpoint_without_lower_order_terms_needs_one_correction():
    m = random_unit(np.random.default_rng(5), SPACE2.n)
    cfg = SchemeConfig(k=0.01, T=0.1, strategy="FI")
    v, its, diffs = fixpoint_first_step(SPACE2, make_state(m), cfg, Operators(f=ConstantField((1.0, 0, 0))))
    # the first sweep produces the answer, the second only confirms it
    assert its == 2 and diffs[1] <= 1e-10 and diffs[0] > 0


def test_fixpoint_with_zero_rhs_stays_zero():
    m = np.tile([0.0, 0.0, 1.0], (SPACE2.n, 1))
    cfg = SchemeConfig(k=0.01, T=0.1, strategy="FI")
    v, its, diffs = fixpoint_first_step(SPACE2, make_state(m), cfg)
    assert not np.any(v) and its == 1 and diffs == [0.0]


def test_fixpoint_contracts_geometrically_with_torque():
    m = random_unit(np.random.default_rng(6), SPACE2.n)
    torque = Slonczewski((0.0, 0.0, 1.0), G=SlonczewskiG(prefactor_override=5.0), check_range=False)
    cfg = SchemeConfig(k=0.01, T=0.1, strategy="FI")
    _, its, diffs = fixpoint_first_step(SPACE2, make_state(m), cfg, Operators(Pi=torque))
    assert its >= 3
    ratios = np.array(diffs[1:]) / np.array(diffs[:-1])
    assert np.all(ratios < 1)


def test_zero_forcing_keeps_uniform_state():
    m0 = np.tile([0.0, 0.6, 0.8], (SPACE2.n, 1))
    for strategy in ("FI", "AB", "EE"):
        tr = run(SPACE2, m0, SchemeConfig(k=0.05, T=0.5, strategy=strategy))
        assert all(np.abs(v - m0).max() < 1e-15 for v in tr.values)


def test_exchange_energy_decays():
    mesh = build_cube_mesh((0, 0, 0), (1, 1, 1), 3)
    sp_ = P1Space(mesh)
    m0 = random_unit(np.random.default_rng(7), sp_.n)
    energies = []

    def record(state, rep):
        x = state.m_curr.ravel()
        energies.append(0.5 * x @ (sp_.stiffness @ x))

    integ = TangentPlaneIntegrator(sp_, SchemeConfig(k=0.005, T=0.25))
    x0 = m0.ravel()
    energies.append(0.5 * x0 @ (sp_.stiffness @ x0))
    integ.run(m0, callback=record)
    assert np.all(np.diff(energies) <= 1e-10)


def test_relaxation_reaches_stationary_state():
    # starting next to the unstable equilibrium, the switch takes until t ~ 3 and
    # |v| then halves every half time unit, so 1e-6 is reached near t = 13
    ops = Operators(pi=UniaxialAnisotropy(1.0, (1.0, 0, 0)), f=ConstantField((-2.0, -0.5, 0.0)))
    m0 = np.tile([1.0, 0, 0], (SPACE2.n, 1))
    tr = run(SPACE2, m0, SchemeConfig(k=0.02, T=15.0, strategy="AB"), ops, sample_every=750)
    v = [r.v_l2 for r in tr.reports]
    assert v[-1] < 1e-6
    tail = v[len(v) // 2:]
    assert all(b <= a * (1 + 1e-6) + 1e-14 for a, b in zip(tail, tail[1:]))
    fine = run(SPACE2, m0, SchemeConfig(k=0.005, T=15.0, strategy="FI"), ops, sample_every=3000)
    assert np.abs(fine.values[-1] - tr.values[-1]).max() < 1e-4


@pytest.mark.parametrize("variant", ["TPS1", "TPS2"])
def test_strategy_equivalence_without_lower_order_terms(variant):
    m0 = random_unit(np.random.default_rng(8), SPACE2.n)
    ops = Operators(f=ConstantField((0.3, -0.2, 0.1)))
    out = {}
    for s in ("FI", "AB", "EE"):
        cfg = SchemeConfig(k=0.01, T=0.1, variant=variant, strategy=s, first_step_fi=False)
        out[s] = run(SPACE2, m0, cfg, ops).values[-1]
    assert np.abs(out["FI"] - out["AB"]).max() < 1e-10
    assert np.abs(out["AB"] - out["EE"]).max() < 1e-10


@pytest.mark.parametrize("strategy", ["FI", "AB", "EE"])
def test_energy_ledger_and_constraints(strategy):
    mesh = build_cube_mesh((0, 0, 0), (1, 1, 1), 3)
    sp_ = P1Space(mesh)
    m0 = random_unit(np.random.default_rng(9), sp_.n)
    ops = Operators(pi=UniaxialAnisotropy(1.0, (0.0, 0.6, 0.8)), f=ConstantField((0.5, -1.0, 0.2)))
    tr = run(sp_, m0, SchemeConfig(k=0.01, T=0.2, strategy=strategy), ops)
    for rep in tr.reports:
        assert rep.ledger_ok, (rep.i, rep.ledger_lhs, rep.ledger_rhs)
        assert rep.unit_violation <= 1e-12
        assert rep.tangency_violation <= 1e-9
        assert rep.weight_min >= 0.5
    if strategy != "FI":
        assert tr.reports[0].strategy == "FI" and tr.reports[1].strategy == strategy


def test_initial_state_validation():
    integ = TangentPlaneIntegrator(SPACE2, SchemeConfig(k=0.01, T=0.1))
    with pytest.raises(ValueError):
        integ.initial_state(np.ones((SPACE2.n, 3)))
    with pytest.raises(ValueError):
        integ.initial_state(np.tile([1.0, 0, 0], (3, 1)))
