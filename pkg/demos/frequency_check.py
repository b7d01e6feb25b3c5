"""Does the scheduled droop reserve hold frequency after a large trip?

Solves a small co-design, picks the quarter with the most up-reserve,
and simulates a 2182.3 MW generation loss with and without the farm's
droop response.

    python3 demos/frequency_check.py
"""

import numpy as np

from owfccd.freqcheck import (Asset, GridAggregate, assets_from_solution, simulate_trip,
                              verify_reserve_delivery)
from owfccd.model import build_program
from owfccd.scengen import tree_from_arrays
from owfccd.solver.slp import solve_slp

rng = np.random.default_rng(7)
hours, n_rt = 6, 2
tree = tree_from_arrays(
    da_prices=rng.uniform(30, 60, (1, hours)), da_probs=[1.0], rt_probs=[[0.5, 0.5]],
    rt_prices=rng.uniform(30, 60, (1, n_rt, 4 * hours)),
    reserve_up=rng.uniform(20, 40, (1, n_rt, 4 * hours)),
    reserve_down=rng.uniform(5, 15, (1, n_rt, 4 * hours)),
    wind=rng.uniform(600, 1500, (1, n_rt, hours)))
sol = solve_slp(build_program(tree))
print(f"design: ESS {sol.sz_e:.1f} MW, cable {sol.sz_c:.1f} MW ({sol.status})")

up = sol.schedule("rWU")[0] + sol.schedule("rBU")[0]
quarter = int(np.argmax(up))
print(f"quarter {quarter}: {up[quarter]:.1f} MW up-reserve scheduled")

grid = GridAggregate()
with_res = simulate_trip(grid, 2182.3, assets_from_solution(sol, quarter), horizon_s=60.0)
without = simulate_trip(grid, 2182.3, [Asset("none", 0.0)], horizon_s=60.0)
print(f"nadir with farm droop    {with_res.nadir_hz:.4f} Hz at {with_res.nadir_time:.1f} s")
print(f"nadir without farm droop {without.nadir_hz:.4f} Hz at {without.nadir_time:.1f} s")

check = verify_reserve_delivery(sol, quarter, with_res)
for name, row in check["assets"].items():
    print(f"  {name}: delivered {row['delivered_mw']:.2f} of {row['scheduled_mw']:.2f} MW")
print("delivery within schedule:", check["ok"])
