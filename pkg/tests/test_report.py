import json

import numpy as np
import pandas as pd
import pytest

from owfccd.model import build_program, fix_case
from owfccd.report import (ReportError, operation_traces, reconcile, recompute_objective,
                           report_design, report_revenue, revenue_summary, write_design_report,
                           write_revenue_report)
from owfccd.solver.slp import load_solution, save_solution, solve_slp

from helpers import flat_tree, random_tree


@pytest.fixture(scope="module")
def solutions():
    p = build_program(random_tree(2, 2, 3, seed=8))
    return [solve_slp(fix_case(p, c)) for c in ("ccd", "base")]


def test_design_tables(solutions):
    battery, cable, raw = report_design(solutions)
    assert list(battery["case"]) == ["ccd", "base"]
    assert battery.loc[1, "battery_rated_power_mw"] == 30.0
    assert cable.loc[1, "cable_capacity_mw"] == 2600.0
    assert battery.loc[0, "battery_cost_musd"] == round(raw.loc[0, "battery_cost_usd"] / 1e6, 2)
    assert cable.loc[0, "installation_cost_musd"] == pytest.approx(64.39, abs=0.005)


def test_unit_revenue_flat_forty():
    # one scenario at $40 everywhere: every traded MWh earns exactly $40
    sol = solve_slp(build_program(flat_tree(1, 1, 3, price=40.0)))
    s = revenue_summary(sol)
    assert s["unit_average_usd_per_mwh"] == pytest.approx(40.0, rel=1e-9)
    assert s["unit_da_usd_per_mwh"] == pytest.approx(40.0, rel=1e-9)
    assert s["revenue_reserve_usd"] == 0.0


def test_revenue_table_units(solutions):
    table, traces, raw = report_revenue(solutions[0])
    assert table.loc[0, "revenue_total_kusd"] == round(raw["revenue_total_usd"] / 1e3, 2)
    assert raw["revenue_total_usd"] == pytest.approx(
        raw["revenue_da_usd"] + raw["revenue_rt_usd"] + raw["revenue_reserve_usd"])
    assert len(traces) == 4 * 12


def test_traces_columns(solutions):
    tr = operation_traces(solutions[0])
    assert tr.groupby(["da_node", "rt_leaf"])["probability"].first().sum() == pytest.approx(1.0)
    assert tr["quarter"].max() == 12 and tr["hour"].max() == 3
    assert np.all(tr["reserve_up_mw"] >= -1e-9)


@pytest.mark.parametrize("i", [0, 1])
def test_reconcile(solutions, i):
    assert reconcile(solutions[i]) <= 1e-6
    assert abs(recompute_objective(solutions[i]) - solutions[i].objective) <= \
        1e-6 * abs(solutions[i].objective)


def test_reconcile_catches_tampering(solutions):
    sol = solutions[0]
    bad = type(sol)(**{**sol.__dict__, "objective": sol.objective * 1.01})
    assert reconcile(bad) > 1e-3


def test_failed_solution_rejected(solutions):
    bad = type(solutions[0])(**{**solutions[0].__dict__, "status": "INFEASIBLE"})
    with pytest.raises(ReportError, match="SUCCESS"):
        report_design([solutions[1], bad])
    with pytest.raises(ReportError):
        report_design([])


def test_mixed_schema_rejected(solutions):
    other = type(solutions[0])(**{**solutions[0].__dict__, "schema": "owfccd.solution/2"})
    with pytest.raises(ReportError, match="schema"):
        report_design([solutions[1], other])


def test_detached_solution_has_no_traces(solutions, tmp_path):
    save_solution(solutions[0], tmp_path / "s.json")
    sol = load_solution(tmp_path / "s.json")
    with pytest.raises(ReportError):
        operation_traces(sol)
    table, traces, _ = report_revenue(sol)
    assert traces is None and len(table) == 1


def test_written_reports(solutions, tmp_path):
    write_design_report(solutions, tmp_path)
    write_revenue_report(solutions[0], tmp_path)
    battery = pd.read_csv(tmp_path / "design_battery.csv")
    assert list(battery.columns) == ["case", "poi", "battery_rated_power_mw", "battery_cost_musd",
                                     "net_profit_musd"]
    raw = json.loads((tmp_path / "design_raw.json").read_text())
    assert raw["schema"] == "owfccd.report/1" and len(raw["rows"]) == 2
    assert (tmp_path / "traces_ccd.csv").exists()
    rev = json.loads((tmp_path / "revenue_ccd_raw.json").read_text())
    assert rev["case"] == "ccd"
