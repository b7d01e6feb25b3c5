"""Co-design on synthetic market and wind data, small enough to run in seconds.

Generates 30 days of prices and wind, builds a 4 x 3 scenario tree, solves
the co-design and the three comparison cases, and prints the design and
revenue tables.

    python3 demos/pipeline_synthetic.py
"""

import pandas as pd

from owfccd.ingest import complete_days, history_array
from owfccd.model import build_program, fix_case
from owfccd.report import report_design, report_revenue
from owfccd.scengen import build_tree, clean_pool, generate_pool, wind_to_power_tree
from owfccd.solver.slp import solve_slp
from owfccd.synthetic import synthetic_series
from owfccd.windpower import default_curve, upscale

SHAPE = (1, 4, 3, 1, 1, 1)

prices, wind = synthetic_series(n_days=30, seed=0)
history = history_array(complete_days(prices, wind))
print(f"history: {history.shape[0]} days x {history.shape[1]} h x {history.shape[2]} channels")

pool, dropped = clean_pool(generate_pool(history, 2000, seed=0))
tree = build_tree(pool, SHAPE, seed=0)
tree = wind_to_power_tree(tree, upscale(default_curve(), 1500.0))
print(f"tree: {len(tree.da_nodes)} day-ahead nodes, {tree.n_leaves} leaves")

program = build_program(tree)
solutions = []
for case in ("ccd", "base", "noreserve", "noess"):
    sol = solve_slp(fix_case(program, case))
    print(f"{case:>10}: {sol.status}, {sol.iterations} iterations, "
          f"max residual {sol.max_residual:.1e}")
    solutions.append(sol)

battery, cable, _ = report_design(solutions)
with pd.option_context("display.width", 120):
    print(battery.to_string(index=False))
    print(cable.to_string(index=False))
    print(pd.concat([report_revenue(s)[0] for s in solutions]).to_string(index=False))
