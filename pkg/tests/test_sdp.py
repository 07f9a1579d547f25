import numpy as np
import pytest
import scipy.sparse as sp

from purityopt import (
    LinearMatrixExpr,
    SdpProblem,
    fix_variables,
    read_sdpa,
    solve_sdp,
    write_sdpa,
)
from purityopt.sdp import _solve_cvxopt


def no_eqs(num_vars):
    return sp.csr_matrix((0, num_vars)), np.zeros(0)


def smallest_eigenvalue_problem(h):
    """max t s.t. h - t*I >= 0, encoded as minimizing -t."""
    dim = h.shape[0]
    expr = LinearMatrixExpr(dim=dim, const=h.astype(float),
                            coeffs={0: -sp.identity(dim).tocsr()})
    eq, rhs = no_eqs(1)
    return SdpProblem(num_vars=1, objective=np.array([-1.0]),
                      psd_constraints=[expr], eq_matrix=eq, eq_rhs=rhs)


def test_smallest_eigenvalue_via_sdp():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((5, 5))
    h = g + g.T
    prob = smallest_eigenvalue_problem(h)
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.status == "optimal"
    lam_min = np.linalg.eigvalsh(h)[0]
    assert sol.x[0] == pytest.approx(lam_min, abs=1e-7)


def test_weak_duality_and_violations():
    rng = np.random.default_rng(1)
    g = rng.standard_normal((4, 4))
    h = g + g.T
    prob = smallest_eigenvalue_problem(h)
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.objective_value >= sol.dual_objective - 1e-7
    eq_res, min_eig, box_res = prob.violations(sol.x)
    assert eq_res == 0.0
    assert min_eig > -1e-8
    assert box_res == 0.0


def test_equality_and_box():
    # minimize x0 + x1 with x0 + x1 + x2 = 1, diag(x) >= 0, x2 <= 0.25
    expr = LinearMatrixExpr(
        dim=3, const=np.zeros((3, 3)),
        coeffs={i: sp.csr_matrix(([1.0], ([i], [i])), shape=(3, 3))
                for i in range(3)},
    )
    prob = SdpProblem(
        num_vars=3, objective=np.array([1.0, 1.0, 0.0]),
        psd_constraints=[expr],
        eq_matrix=sp.csr_matrix(np.ones((1, 3))), eq_rhs=np.array([1.0]),
        box=[(2, 0.0, 0.25)],
    )
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(0.75, abs=1e-7)
    assert sol.x[2] == pytest.approx(0.25, abs=1e-7)


def test_infeasible_detection():
    # x >= 1 (PSD 1x1) and x = 0 cannot both hold
    expr = LinearMatrixExpr(dim=1, const=np.array([[-1.0]]),
                            coeffs={0: sp.csr_matrix(np.array([[1.0]]))})
    prob = SdpProblem(
        num_vars=1, objective=np.array([0.0]), psd_constraints=[expr],
        eq_matrix=sp.csr_matrix(np.array([[1.0]])), eq_rhs=np.array([0.0]),
    )
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.status == "infeasible"


def test_contradictory_equalities():
    expr = LinearMatrixExpr(dim=1, const=np.array([[1.0]]), coeffs={})
    eqm = sp.csr_matrix(np.array([[1.0], [1.0]]))
    prob = SdpProblem(num_vars=1, objective=np.array([0.0]),
                      psd_constraints=[expr],
                      eq_matrix=eqm, eq_rhs=np.array([0.0, 1.0]))
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.status == "infeasible"


def test_cvxopt_agrees_on_easy_problem():
    rng = np.random.default_rng(2)
    g = rng.standard_normal((4, 4))
    h = g + g.T
    prob = smallest_eigenvalue_problem(h)
    ref = solve_sdp(prob, tol=1e-9, backend="clarabel")
    alt = _solve_cvxopt(prob, tol=1e-9)
    assert alt.status == "optimal"
    assert alt.x[0] == pytest.approx(ref.x[0], abs=1e-6)


def test_backend_selection_guard():
    prob = smallest_eigenvalue_problem(np.eye(2))
    with pytest.raises(Exception):
        solve_sdp(prob, backend="mosek")


def test_fix_variables_reduces_and_offsets():
    expr = LinearMatrixExpr(
        dim=2, const=np.zeros((2, 2)),
        coeffs={0: sp.csr_matrix(([1.0], ([0], [0])), shape=(2, 2)),
                1: sp.csr_matrix(([1.0], ([1], [1])), shape=(2, 2))},
    )
    prob = SdpProblem(
        num_vars=2, objective=np.array([1.0, 2.0]),
        psd_constraints=[expr],
        eq_matrix=sp.csr_matrix(np.array([[1.0, 1.0]])), eq_rhs=np.array([1.5]),
    )
    reduced, keep = fix_variables(prob, {0: 0.5})
    assert reduced.num_vars == 1
    assert list(keep) == [1]
    assert reduced.objective_offset == pytest.approx(0.5)
    assert np.abs(reduced.psd_constraints[0].const
                  - np.diag([0.5, 0.0])).max() == 0
    sol = solve_sdp(reduced, tol=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.objective_value == pytest.approx(2.5, abs=1e-7)


def test_fix_variables_detects_dead_inconsistency():
    eqm = sp.csr_matrix(np.array([[1.0, 0.0]]))
    expr = LinearMatrixExpr(dim=1, const=np.eye(1), coeffs={})
    prob = SdpProblem(num_vars=2, objective=np.zeros(2),
                      psd_constraints=[expr],
                      eq_matrix=eqm, eq_rhs=np.array([1.0]))
    with pytest.raises(Exception):
        fix_variables(prob, {0: 0.0, 1: 0.0})


def test_sdpa_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    g = rng.standard_normal((3, 3))
    h = g + g.T
    prob = smallest_eigenvalue_problem(h)
    path = tmp_path / "prob.dat-s"
    write_sdpa(prob, path)
    data = read_sdpa(path)
    assert data.num_vars == 1
    assert np.abs(data.objective - prob.objective).max() == 0
    # constant block is stored negated (F0 convention)
    f0 = data.block_matrix(0, 1)
    fv = data.block_matrix(1, 1)
    assert np.abs(-f0 - h).max() < 1e-15
    assert np.abs(fv + np.eye(3)).max() < 1e-15


def test_sdpa_round_trip_with_eqs_and_box(tmp_path):
    expr = LinearMatrixExpr(
        dim=2, const=np.eye(2),
        coeffs={1: sp.csr_matrix(([1.0], ([0], [1])), shape=(2, 2)) * 0.5
                + sp.csr_matrix(([1.0], ([1], [0])), shape=(2, 2)) * 0.5},
    )
    prob = SdpProblem(
        num_vars=2, objective=np.array([0.3, -1.0]),
        psd_constraints=[expr],
        eq_matrix=sp.csr_matrix(np.array([[1.0, 2.0]])), eq_rhs=np.array([0.7]),
        box=[(0, -1.0, 1.0)],
    )
    path = tmp_path / "full.dat-s"
    write_sdpa(prob, path)
    data = read_sdpa(path)
    assert data.num_vars == 2
    # one PSD block plus the diagonal LP block for eqs and box rows
    assert len(data.block_dims) == 2
    assert data.block_dims[1] < 0


def test_solution_reports_violation():
    prob = smallest_eigenvalue_problem(np.eye(2))
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.max_violation is not None
    assert sol.max_violation < 1e-8
    assert sol.solver_name == "clarabel"
