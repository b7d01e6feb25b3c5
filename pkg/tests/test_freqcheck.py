import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from owfccd.core import DomainError
from owfccd.freqcheck import (DIVERGED, OK, Asset, GridAggregate, assets_from_solution, deadband,
                              scale_trip, simulate_trip, steady_state_deviation,
                              verify_reserve_delivery, write_trajectory_csv)
from owfccd.model import build_program
from owfccd.solver.slp import solve_slp

from helpers import random_tree

NO_BAND = GridAggregate(deadband_hz=0.0)


def test_deadband():
    out = deadband(np.array([-0.3, -0.1, 0.0, 0.05, 0.4]), 0.1)
    assert out == pytest.approx([-0.2, 0.0, 0.0, 0.0, 0.3])


def test_steady_state_formula():
    g = NO_BAND
    assert steady_state_deviation(g, [5000.0, 2000.0], 1000.0) == \
        pytest.approx(-1000.0 / (7000.0 + g.damping_mw))
    assert steady_state_deviation(g, [], -500.0) == pytest.approx(500.0 / g.damping_mw)


def test_steady_state_inside_deadband():
    g = GridAggregate()
    # a trip too small to leave the band is carried by load damping alone
    assert steady_state_deviation(g, [1e6], 10.0) == pytest.approx(-10.0 / g.damping_mw)


@pytest.mark.parametrize("gains,trip", [([7.5e5, 2e5], 2182.3), ([0.0], 1000.0),
                                        ([3e6], -1500.0)])
def test_simulated_steady_state(gains, trip):
    traj = simulate_trip(NO_BAND, trip, [Asset(f"a{i}", k) for i, k in enumerate(gains)],
                         horizon_s=150.0, dt_s=0.02)
    expected = steady_state_deviation(NO_BAND, gains, trip, use_deadband=False)
    assert traj.status == OK
    assert traj.steady_state_pu == pytest.approx(expected, rel=0.01)


def test_cap_limits_delivery():
    traj = simulate_trip(NO_BAND, 2000.0, [Asset("ess", 1e6, up_mw=15.0, down_mw=0.0)],
                         horizon_s=120.0, dt_s=0.02)
    assert traj.steady_state_power[0] == pytest.approx(15.0, rel=1e-6)
    assert traj.steady_state_pu == pytest.approx(-(2000.0 - 15.0) / NO_BAND.damping_mw, rel=1e-3)


def test_over_frequency_uses_down_cap():
    traj = simulate_trip(NO_BAND, -2000.0, [(1e6, 100.0, 4.0)], horizon_s=120.0, dt_s=0.02)
    assert traj.nadir_hz > 60.0
    assert traj.steady_state_power[0] == pytest.approx(-4.0, rel=1e-6)


def test_droop_raises_nadir():
    g = GridAggregate()
    with_res = simulate_trip(g, 2182.3, [Asset("wind", 5e5, 60.0), Asset("ess", 2e5, 20.0)])
    without = simulate_trip(g, 2182.3, [Asset("none", 0.0)])
    assert with_res.nadir_hz > without.nadir_hz
    assert with_res.nadir_time > 0


def test_step_halving_changes_nadir_little():
    g = GridAggregate()
    assets = [Asset("wind", 5e5, 60.0), Asset("ess", 2e5, 20.0)]
    a = simulate_trip(g, 2182.3, assets, dt_s=0.02)
    b = simulate_trip(g, 2182.3, assets, dt_s=0.01)
    dev = lambda t: 60.0 - t.nadir_hz
    assert abs(dev(a) - dev(b)) < 1e-3 * dev(b)


def test_divergence_truncates():
    traj = simulate_trip(GridAggregate(load_damping=0.0), 80_000.0, [], horizon_s=60.0)
    assert traj.status == DIVERGED
    assert traj.time[-1] < 60.0 and len(traj.time) == len(traj.frequency)


@pytest.mark.parametrize("kwargs", [dict(dt_s=0.1), dict(dt_s=0.0), dict(horizon_s=-1.0)])
def test_bad_step(kwargs):
    with pytest.raises(DomainError):
        simulate_trip(GridAggregate(), 100.0, [], **kwargs)


def test_bad_assets_and_grid():
    with pytest.raises(DomainError):
        Asset("x", -1.0)
    with pytest.raises(DomainError):
        simulate_trip(GridAggregate(), 1.0, [(1.0, 2.0, 3.0, 4.0)])
    with pytest.raises(DomainError):
        GridAggregate(inertia_2h=0.0)


def test_scale_trip():
    assert scale_trip(2182.3, 50_000.0, 100_000.0) == pytest.approx(4364.6)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e4, 1e6), st.floats(100.0, 3000.0))
def test_more_gain_less_deviation(k, trip):
    a = simulate_trip(NO_BAND, trip, [(k, np.inf)], horizon_s=30.0, dt_s=0.02)
    b = simulate_trip(NO_BAND, trip, [(2 * k, np.inf)], horizon_s=30.0, dt_s=0.02)
    assert b.nadir_hz >= a.nadir_hz


@pytest.fixture(scope="module")
def solved():
    return solve_slp(build_program(random_tree(1, 2, 2, seed=4)))


def test_reserve_delivery_within_schedule(solved):
    reserve = solved.schedule("rWU")[0] + solved.schedule("rBU")[0]
    quarter = int(np.argmax(reserve))
    traj = simulate_trip(GridAggregate(), 2182.3, assets_from_solution(solved, quarter),
                         horizon_s=120.0, dt_s=0.02)
    check = verify_reserve_delivery(solved, quarter, traj)
    assert check["ok"]
    for row in check["assets"].values():
        assert row["delivered_mw"] <= row["scheduled_mw"] + 1e-6


def test_trajectory_csv(tmp_path):
    traj = simulate_trip(GridAggregate(), 500.0, [Asset("wind", 1e5, 10.0)], horizon_s=1.0)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert data.shape == (101, 3)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "time_s,frequency_hz,wind_mw"
