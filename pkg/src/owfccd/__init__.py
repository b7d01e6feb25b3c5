"""Co-design of offshore wind farm storage, HVDC cable and market operation.

Three-stage stochastic program over design, day-ahead and real-time
decisions, with droop-based primary frequency reserve, solved by
sequential linear programming.
"""

__version__ = "0.1.0"

from .core import (CableParams, DomainError, EconParams, EssParams, FarmParams, ReserveParams,
                   TimeGrid, annuity_factor, droop_reserve)
from .model import build_program, fix_case
from .scengen import ScenarioTree, build_tree, generate_pool, load_tree, save_tree
from .solver import DesignSolution, SolveOptions, load_solution, save_solution, solve_slp

__all__ = ["CableParams", "DomainError", "EconParams", "EssParams", "FarmParams", "ReserveParams",
           "TimeGrid", "annuity_factor", "droop_reserve", "build_program", "fix_case",
           "ScenarioTree", "build_tree", "generate_pool", "load_tree", "save_tree",
           "DesignSolution", "SolveOptions", "load_solution", "save_solution", "solve_slp"]
