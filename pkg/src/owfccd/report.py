"""Design, revenue and operation reports.

Money in the design tables is in $M with two decimals; revenue tables are
expected values for one day in $k. Raw dollar figures go to a JSON
companion so nothing is lost to rounding.
"""

import json

import numpy as np
import pandas as pd

REPORT_SCHEMA = "owfccd.report/1"


class ReportError(ValueError):
    pass


def _check_solutions(solutions):
    if not solutions:
        raise ReportError("no solutions to report")
    schemas = {getattr(s, "schema", None) for s in solutions}
    if len(schemas) > 1:
        raise ReportError(f"mixed solution schemas: {sorted(map(str, schemas))}")
    bad = [s.case for s in solutions if not s.success]
    if bad:
        raise ReportError(f"solutions without SUCCESS status for cases {bad}")


def _poi(sol):
    return sol.poi


def design_table(solutions):
    """Raw-dollar rows behind the battery and cable tables, one per solution."""
    _check_solutions(solutions)
    rows = []
    for s in solutions:
        rows.append({
            "case": s.case, "poi": _poi(s),
            "battery_mw": s.sz_e,
            "battery_cost_usd": s.costs["ess"],
            "net_profit_usd": s.net_profit,
            "cable_mw": s.sz_c,
            "cable_material_usd": s.costs["cable"],
            "cable_installation_usd": s.costs["cable_installation"],
            "converter_usd": s.costs["converter"],
        })
    return pd.DataFrame(rows)


def report_design(solutions):
    """Battery table and cable table in $M, two decimals.

    Returns ``(battery, cable, raw)`` data frames; ``raw`` keeps dollars.
    """
    raw = design_table(solutions)
    m = lambda col: (raw[col] / 1e6).round(2) + 0.0
    battery = pd.DataFrame({"case": raw["case"], "poi": raw["poi"],
                            "battery_rated_power_mw": raw["battery_mw"].round(2) + 0.0,
                            "battery_cost_musd": m("battery_cost_usd"),
                            "net_profit_musd": m("net_profit_usd")})
    cable = pd.DataFrame({"case": raw["case"], "poi": raw["poi"],
                          "cable_capacity_mw": raw["cable_mw"].round(2) + 0.0,
                          "material_cost_musd": m("cable_material_usd"),
                          "installation_cost_musd": m("cable_installation_usd")})
    return battery, cable, raw


def revenue_summary(solution):
    """Expected daily traded energy, revenue and unit revenue per market.

    RT energy is the net of sales and purchases. The average unit revenue
    divides DA plus RT revenue by DA plus RT energy; reserve revenue is
    paid for capacity and is left out of it.
    """
    rev, traded = solution.revenue, solution.traded
    da_mwh, rt_mwh = traded["DA"], traded["RT"]
    da, rt = rev["DA"], rev["RT"]
    reserve = rev["ReserveUp"] + rev["ReserveDown"]
    ratio = lambda a, b: a / b if abs(b) > 1e-9 else np.nan
    return {
        "case": solution.case, "poi": _poi(solution),
        "traded_da_mwh": da_mwh, "traded_rt_mwh": rt_mwh, "traded_total_mwh": da_mwh + rt_mwh,
        "revenue_da_usd": da, "revenue_rt_usd": rt, "revenue_reserve_usd": reserve,
        "revenue_total_usd": da + rt + reserve,
        "unit_da_usd_per_mwh": ratio(da, da_mwh), "unit_rt_usd_per_mwh": ratio(rt, rt_mwh),
        "unit_average_usd_per_mwh": ratio(da + rt, da_mwh + rt_mwh),
    }


def operation_traces(solution):
    """Per-leaf, per-quarter prices, trades, storage and droop schedules."""
    p = solution.program
    if p is None:
        raise ReportError("operation traces need the solution's program")
    hq = p.grid.hour_of_quarter
    leaves = list(p.tree.leaves())
    pWD = solution.schedule("pWD")
    pW = solution.schedule("pW")
    frames = []
    for k, (a, b, prob, lf) in enumerate(leaves):
        node = p.tree.da_nodes[a]
        frames.append(pd.DataFrame({
            "da_node": a, "rt_leaf": b, "probability": prob,
            "quarter": np.arange(1, p.grid.n_quarters + 1), "hour": hq + 1,
            "da_price": node.da_price[hq], "rt_price": lf.rt_price,
            "reserve_up_price": lf.reserve_up, "reserve_down_price": lf.reserve_down,
            "wind_available_mw": lf.wind[hq], "wind_output_mw": pW[k, hq],
            "da_trade_mw": pWD[a, hq], "rt_trade_mw": solution.schedule("pWR")[k],
            "ess_discharge_mw": solution.schedule("pdis")[k] - solution.schedule("pch")[k],
            "soc_mwh": solution.schedule("soc")[k],
            "k_wind": solution.schedule("kW")[k], "k_ess": solution.schedule("kB")[k],
            "reserve_up_mw": solution.schedule("rWU")[k] + solution.schedule("rBU")[k],
            "reserve_down_mw": solution.schedule("rWD")[k] + solution.schedule("rBD")[k],
            "v_offshore_pu": solution.schedule("v1")[k], "v_onshore_pu": solution.schedule("v2")[k],
        }))
    return pd.concat(frames, ignore_index=True)


def report_revenue(solution):
    """Revenue table row in $k (two decimals) plus operation traces."""
    _check_solutions([solution])
    s = revenue_summary(solution)
    k = lambda v: round(v / 1e3, 2)
    r2 = lambda v: round(v, 2) if np.isfinite(v) else np.nan
    table = pd.DataFrame([{
        "case": s["case"], "poi": s["poi"],
        "traded_da_mwh": r2(s["traded_da_mwh"]), "traded_rt_mwh": r2(s["traded_rt_mwh"]),
        "traded_total_mwh": r2(s["traded_total_mwh"]),
        "revenue_da_kusd": k(s["revenue_da_usd"]), "revenue_rt_kusd": k(s["revenue_rt_usd"]),
        "revenue_reserve_kusd": k(s["revenue_reserve_usd"]),
        "revenue_total_kusd": k(s["revenue_total_usd"]),
        "unit_da_usd_per_mwh": r2(s["unit_da_usd_per_mwh"]),
        "unit_rt_usd_per_mwh": r2(s["unit_rt_usd_per_mwh"]),
        "unit_average_usd_per_mwh": r2(s["unit_average_usd_per_mwh"]),
    }])
    traces = operation_traces(solution) if solution.program is not None else None
    return table, traces, s


def reconcile(solution):
    """Relative gap between the objective and its rebuilt decomposition.

    Rebuilds installation cost minus annuitised revenue from the report
    quantities and compares with the solver objective.
    """
    p = solution.program
    econ = p.params.econ
    s = revenue_summary(solution)
    cost = econ.tax_credit * (solution.costs["ess"] + solution.costs["cable"])
    rebuilt = cost - p.annuity * s["revenue_total_usd"]
    return abs(rebuilt - solution.objective) / max(1.0, abs(solution.objective))


def recompute_objective(solution):
    """Objective rebuilt from schedules and scenario prices alone."""
    p = solution.program
    econ = p.params.econ
    grid = p.grid
    dt = grid.quarter_length_h
    pWD = solution.schedule("pWD")
    total = 0.0
    for a, node in enumerate(p.tree.da_nodes):
        total += node.probability * float(node.da_price @ pWD[a])
    for k, (a, b, prob, lf) in enumerate(p.tree.leaves()):
        up = solution.schedule("rWU")[k] + solution.schedule("rBU")[k]
        down = solution.schedule("rWD")[k] + solution.schedule("rBD")[k]
        total += prob * dt * float(lf.rt_price @ solution.schedule("pWR")[k]
                                   + lf.reserve_up @ up + lf.reserve_down @ down)
    cost = econ.tax_credit * (econ.ess_unit_cost * solution.sz_e
                              + econ.cable_unit_cost * solution.sz_c)
    return cost - p.annuity * total


def write_design_report(solutions, out_dir):
    battery, cable, raw = report_design(solutions)
    battery.to_csv(f"{out_dir}/design_battery.csv", index=False, float_format="%.2f")
    cable.to_csv(f"{out_dir}/design_cable.csv", index=False, float_format="%.2f")
    with open(f"{out_dir}/design_raw.json", "w") as fh:
        json.dump({"schema": REPORT_SCHEMA, "rows": raw.to_dict(orient="records")}, fh,
                  indent=1, sort_keys=True)
        fh.write("\n")


def write_revenue_report(solution, out_dir, tag=None):
    tag = tag or solution.case
    table, traces, raw = report_revenue(solution)
    table.to_csv(f"{out_dir}/revenue_{tag}.csv", index=False, float_format="%.2f")
    if traces is not None:
        traces.to_csv(f"{out_dir}/traces_{tag}.csv", index=False, float_format="%.6f")
    with open(f"{out_dir}/revenue_{tag}_raw.json", "w") as fh:
        json.dump({"schema": REPORT_SCHEMA, **{k: (None if isinstance(v, float) and not np.isfinite(v)
                                                   else v) for k, v in raw.items()}},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")


__all__ = ["report_design", "report_revenue", "revenue_summary", "operation_traces",
           "reconcile", "recompute_objective", "write_design_report", "write_revenue_report"]
