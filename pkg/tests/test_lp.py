from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from owfccd.solver.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, PivotBudgetError, farkas_gap,
                              solve_lp)

BACKENDS = ["simplex", "highs"]


def vertex_optimum(c, A, b):
    """min c @ x over {A x <= b, x >= 0} by enumerating every basic point."""
    m, n = A.shape
    G = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    best = np.inf
    for active in combinations(range(m + n), n):
        M = G[list(active)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(active)])
        if np.all(G @ x <= h + 1e-9):
            best = min(best, c @ x)
    return best


def packing_lp(seed, n=10, m=5):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, (m, n))
    b = rng.uniform(1.0, 5.0, m)
    c = -rng.uniform(0.1, 2.0, n)
    return c, A, b


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_variable(backend):
    res = solve_lp([-1.0], [[1.0]], [3.0], backend=backend)
    assert res.status == OPTIMAL and res.success
    assert res.x[0] == pytest.approx(3.0) and res.objective == pytest.approx(-3.0)
    assert res.duals_ub[0] == pytest.approx(-1.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_pair(backend):
    A, b = np.array([[1.0], [-1.0]]), np.array([1.0, -2.0])
    res = solve_lp([0.0], A, b, backend=backend)
    assert res.status == INFEASIBLE and not res.success
    if backend == "simplex":
        assert farkas_gap(res.certificate, A, b, None, None, np.zeros(1), np.full(1, np.inf)) > 0


def test_farkas_with_equalities():
    A_eq = np.array([[1.0, 1.0]])
    b_eq = np.array([5.0])
    bounds = [(0, 2), (0, 2)]
    res = solve_lp([1.0, 1.0], A_eq=A_eq, b_eq=b_eq, bounds=bounds, backend="simplex")
    assert res.status == INFEASIBLE
    assert farkas_gap(res.certificate, None, None, A_eq, b_eq, np.zeros(2), np.full(2, 2.0)) > 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded(backend):
    res = solve_lp([-1.0, 0.0], [[0.0, 1.0]], [1.0], backend=backend)
    assert res.status == UNBOUNDED
    if backend == "simplex":
        d = res.certificate["direction"]
        assert d[0] > 0 and d[1] <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_matches_vertex_enumeration(seed):
    c, A, b = packing_lp(seed)
    exact = vertex_optimum(c, A, b)
    for backend in BACKENDS:
        res = solve_lp(c, A, b, backend=backend)
        assert res.objective == pytest.approx(exact, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(1, 5))
def test_backends_agree(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 3.0, m)
    c = rng.normal(size=n)
    A_eq = rng.normal(size=(1, n))
    bounds = [(-2.0, 2.0)] * n
    # x = 0 is feasible for the inequalities, so keep the equality through it
    b_eq = np.zeros(1)
    s = solve_lp(c, A, b, A_eq, b_eq, bounds, backend="simplex")
    h = solve_lp(c, A, b, A_eq, b_eq, bounds, backend="highs")
    assert s.status == h.status == OPTIMAL
    assert s.objective == pytest.approx(h.objective, abs=1e-7)
    assert np.all(A @ s.x <= b + 1e-8)


def test_duals_are_marginals():
    c, A, b = packing_lp(7, n=4, m=3)
    for backend in BACKENDS:
        res = solve_lp(c, A, b, backend=backend)
        eps = 1e-6
        for i in range(len(b)):
            bumped = b.copy()
            bumped[i] += eps
            delta = solve_lp(c, A, bumped, backend=backend).objective - res.objective
            assert delta / eps == pytest.approx(res.duals_ub[i], abs=1e-5)
        assert np.all(res.duals_ub <= 1e-12)


def test_strong_duality():
    c, A, b = packing_lp(3)
    res = solve_lp(c, A, b, backend="simplex")
    # with x >= 0 the dual objective is y @ b for marginals y <= 0
    assert res.duals_ub @ b == pytest.approx(res.objective, rel=1e-9)


def test_free_variables_and_equalities():
    # min x + y s.t. x - y = 1, x, y free in [-5, 5]
    res = solve_lp([1.0, 1.0], A_eq=[[1.0, -1.0]], b_eq=[1.0], bounds=[(-5, 5), (-5, 5)],
                   backend="simplex")
    assert res.x == pytest.approx([-4.0, -5.0])
    # y sits on its bound, so raising the right-hand side moves x one-for-one
    assert res.duals_eq[0] == pytest.approx(1.0)


def test_redundant_equalities():
    res = solve_lp([1.0, 2.0], A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0], backend="simplex")
    assert res.status == OPTIMAL
    assert res.x == pytest.approx([1.0, 0.0])


def test_pivot_budget():
    c, A, b = packing_lp(0)
    with pytest.raises(PivotBudgetError):
        solve_lp(c, A, b, backend="simplex", max_pivots=1)


def test_bad_input():
    with pytest.raises(ValueError, match="backend"):
        solve_lp([1.0], backend="glpk")
    with pytest.raises(ValueError, match="shape"):
        solve_lp([1.0, 1.0], [[1.0]], [1.0], backend="simplex")
