import numpy as np
import pytest

from owfccd.model import build_program
from owfccd.solver.oracle import brute_force_design, evaluate_design, frontier_cuts
from owfccd.solver.slp import solve_slp

from helpers import random_tree


@pytest.fixture(scope="module")
def small():
    p = build_program(random_tree(1, 2, 2, seed=9))
    return p, solve_slp(p)


def test_frontier_chords_sit_below_curve():
    g, v1 = 89500.0, 1.05
    a, b, p_max = frontier_cuts(g, v1, 0.95, 1500.0, 40)
    p1 = np.linspace(0.0, p_max, 2001)
    exact = p1 - p1 ** 2 / (g * v1 ** 2)
    envelope = np.min(a[:, None] + b[:, None] * p1[None, :], axis=0)
    assert np.all(envelope <= exact + 1e-9)
    # chord error of a parabola is (h/2)^2 / (g v^2) with h the flow step
    h = p_max / 40
    assert np.max(exact - envelope) <= (h / 2) ** 2 / (g * v1 ** 2) * 1.2


def test_frontier_slopes_decrease():
    _, b, _ = frontier_cuts(89500.0, 1.05, 0.95, 1500.0, 20)
    assert np.all(np.diff(b) < 0) and b[0] <= 1.0


def test_oracle_agrees_with_slp_at_its_design(small):
    p, sol = small
    oracle = evaluate_design(p, sol.sz_e, sol.sz_c, n_segments=400)
    # the chord frontier is conservative and fine, so it sits just above
    assert oracle >= sol.objective - 1e-6 * abs(sol.objective)
    assert oracle == pytest.approx(sol.objective, rel=1e-4)


def test_zero_cable_is_infeasible(small):
    p, _ = small
    assert evaluate_design(p, 10.0, 0.0) == np.inf


def test_brute_force_small_grid(small):
    p, sol = small
    res = brute_force_design(p, np.linspace(0, 75, 4), np.linspace(1000, 1800, 5), n_segments=40)
    assert res.table.shape == (4, 5)
    assert res.objective == res.table.min()
    assert res.sz_e in np.linspace(0, 75, 4)
    assert res.v2.shape == (2, 8)
    assert np.all((res.v2 >= 0.95 - 1e-9) & (res.v2 <= 1.05 + 1e-9))
    # any grid design is feasible for the full program too, so it cannot win
    assert res.objective >= sol.objective - 1e-6 * abs(sol.objective)


def test_refinement_never_worse(small):
    p, _ = small
    coarse = brute_force_design(p, np.linspace(0, 75, 3), np.linspace(1000, 1800, 3), n_segments=30)
    fine = brute_force_design(p, np.linspace(0, 75, 3), np.linspace(1000, 1800, 3), n_segments=30,
                              refine=1)
    assert fine.objective <= coarse.objective
