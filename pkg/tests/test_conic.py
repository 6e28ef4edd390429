"""Cone-program representation, backend solve and feasibility checks."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_irs import conic
from secure_irs.conic import (
    ConeBlock,
    ConicProblem,
    Model,
    check_feasibility,
    dump_problem,
    embed_hermitian_array,
    solve,
)


def test_lp_one_variable():  # [TRIVIAL]
    mdl = Model()
    x = mdl.real_var("x")
    mdl.add_nonneg(x - 3.0, "x >= 3")
    mdl.minimize(x)
    sol = mdl.solve()
    assert sol.ok and sol.x[0] == pytest.approx(3.0, abs=1e-7)


def test_soc_norm_of_fixed_vector():  # [TRIVIAL]
    mdl = Model()
    t = mdl.real_var("t")
    mdl.add_soc(t, np.array([1.0, 1.0]), "norm")
    mdl.minimize(t)
    assert mdl.solve().objective == pytest.approx(np.sqrt(2), abs=1e-7)


def test_psd_2x2():  # [DERIVED] eigenvalue condition t >= |1|
    mdl = Model()
    t = mdl.real_var("t")
    H = conic.block([[t.reshape(1, 1), np.ones((1, 1))], [np.ones((1, 1)), t.reshape(1, 1)]])
    mdl.add_psd(H, "psd", hermitian=False)
    mdl.minimize(t)
    assert mdl.solve().objective == pytest.approx(1.0, abs=1e-6)


def test_complex_hermitian_psd():  # [DERIVED] lambda_min of a Hermitian matrix
    rng = np.random.default_rng(0)
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = B + B.conj().T
    mdl = Model()
    t = mdl.real_var("t")
    mdl.add_psd(conic.Affine.constant(B, mdl.n) + np.eye(3) * t, "shift")
    mdl.minimize(t)
    assert mdl.solve().objective == pytest.approx(-np.linalg.eigvalsh(B)[0], abs=1e-6)


def test_rotated_cone():  # [DERIVED]
    mdl = Model()
    x = mdl.real_var("x")
    mdl.add_rsoc(x, 2.0, np.array([3.0]), "9 <= 2x")
    mdl.minimize(x)
    assert mdl.solve().objective == pytest.approx(4.5, abs=1e-6)


def test_complex_variable_maximize():  # [DERIVED]
    mdl = Model()
    z = mdl.complex_var("z", 2)
    mdl.add_soc(1.0, z, "unit ball")
    c = np.array([1.0 + 1j, 2.0])
    mdl.maximize(2 * (z.dot(c.conj())).real)
    sol = mdl.solve()
    assert sol.objective == pytest.approx(2 * np.linalg.norm(c), abs=1e-6)


def test_infeasible_and_unbounded():  # [TRIVIAL]
    mdl = Model()
    x = mdl.real_var("x")
    mdl.add_nonneg(x - 1.0, "x >= 1")
    mdl.add_nonneg(-x, "x <= 0")
    mdl.minimize(x)
    assert mdl.solve().status == "infeasible"
    mdl = Model()
    x = mdl.real_var("x")
    mdl.minimize(x)
    mdl.add_nonneg(-x, "x <= 0")
    assert mdl.solve().status == "unbounded"


def test_embedding_spectrum():  # [DERIVED]
    rng = np.random.default_rng(1)
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = B @ B.conj().T - 2 * np.eye(4)
    ev = np.linalg.eigvalsh(B)
    ev2 = np.linalg.eigvalsh(embed_hermitian_array(B))
    assert np.allclose(np.sort(np.repeat(ev, 2)), ev2)


def test_feasibility_report():  # [DERIVED]
    blk = ConeBlock("psd", np.zeros((4, 1)), np.array([1.0, 0.0, 0.0, -2.0]), "diag(1,-2)", 2)
    p = ConicProblem(1, np.zeros(1), (blk,))
    assert check_feasibility(p, np.zeros(1)).max == pytest.approx(2.0)  # [DERIVED]
    ok = ConeBlock("soc", np.zeros((2, 1)), np.array([1.0, 1.0]), "boundary")
    p = ConicProblem(1, np.zeros(1), (ok,))
    assert check_feasibility(p, np.zeros(1)).max <= 1e-12  # [TRIVIAL]
    rep = check_feasibility(ConicProblem(1, np.zeros(1), (blk, ok)), np.zeros(1))
    assert rep.worst() == ("diag(1,-2)", 2.0)


def test_problem_validation():  # [TRIVIAL]
    with pytest.raises(ValueError):
        ConicProblem(2, np.zeros(1), ())
    with pytest.raises(ValueError):
        ConicProblem(1, np.zeros(1), (ConeBlock("cube", np.zeros((1, 1)), np.zeros(1), "x"),))
    with pytest.raises(ValueError):
        ConicProblem(1, np.zeros(1), (ConeBlock("zero", np.zeros((1, 1)), np.zeros(1), ""),))
    with pytest.raises(ValueError):
        ConicProblem(1, np.zeros(1), (ConeBlock("psd", np.zeros((3, 1)), np.zeros(3), "p", 2),))


def test_complex_constraint_rejected():  # [TRIVIAL]
    mdl = Model()
    z = mdl.complex_var("z", 1)
    with pytest.raises(ValueError):
        mdl.add_nonneg(z, "complex")


def test_listing_and_dump():  # [TRIVIAL]
    mdl = Model()
    x = mdl.real_var("x", 2)
    mdl.add_nonneg(x - 1.0, "lower bound")
    mdl.add_soc(x[0], x[1:], "cone")
    mdl.minimize(x.sum())
    p = mdl.build()
    listing = p.listing()
    assert "lower bound" in listing and "variables: 2" in listing
    text = dump_problem(p)
    lines = text.splitlines()
    assert lines[0] == "CONIC 1" and lines[1] == "VARS 2" and lines[2] == "CONES 2"
    assert lines[3].startswith("nonneg 2 0 lower_bound")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_residual(seed):  # [DERIVED]
    # random feasible SOCP: residual at the returned point <= 10 tol
    rng = np.random.default_rng(seed)
    n = 4
    mdl = Model()
    x = mdl.real_var("x", n)
    A = rng.standard_normal((3, n))
    mdl.add_soc(5.0, A @ x - rng.standard_normal(3) * 0.1, "ball")
    # two-sided box: the ball alone leaves null(A) free, which can be unbounded
    mdl.add_nonneg(x + 10.0, "box_lo")
    mdl.add_nonneg(10.0 - x, "box_hi")
    c = rng.standard_normal(n)
    mdl.minimize(x.dot(c))
    sol = mdl.solve(tol=1e-8)
    assert sol.ok
    assert check_feasibility(mdl.build(), sol.x).max <= 10 * 1e-8 * max(1, np.abs(sol.x).max())


def test_solver_failure_is_reported_not_raised():  # [TRIVIAL]
    p = ConicProblem(1, np.array([1.0]), (ConeBlock("nonneg", np.array([[1.0]]),
                                                     np.array([np.nan]), "bad"),))
    sol = solve(p)
    assert sol.status in ("numerical_failure", "infeasible") and not sol.ok


def test_nonfinite_point_has_infinite_residual():  # [TRIVIAL]
    blk = ConeBlock("nonneg", np.array([[1.0]]), np.zeros(1), "x >= 0")
    p = ConicProblem(1, np.zeros(1), (blk,))
    assert check_feasibility(p, np.array([np.nan])).max == np.inf
