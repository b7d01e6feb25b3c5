"""LP backends, the SLP driver, feasibility checks and the grid oracle."""

from .feasibility import check_feasibility, max_violation
from .lp import LPResult, PivotBudgetError, SolverError, solve_lp
from .slp import (DesignSolution, SolveOptions, load_solution, pin_voltages, save_solution,
                  solve_slp)
