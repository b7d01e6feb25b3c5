"""Constraint residuals of a candidate point, grouped by family."""

import numpy as np

from ..model import BOUNDS_FAMILY, FAMILIES


def row_violations(program, x):
    """Non-negative violation of every row, in the row's own units."""
    val = program.row_values(np.asarray(x, dtype=float))
    with np.errstate(invalid="ignore"):
        below = np.where(np.isfinite(program.row_lo), program.row_lo - val, 0.0)
        above = np.where(np.isfinite(program.row_hi), val - program.row_hi, 0.0)
    return np.maximum(np.maximum(below, above), 0.0)


def bound_violations(program, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        below = np.where(np.isfinite(program.lb), program.lb - x, 0.0)
        above = np.where(np.isfinite(program.ub), x - program.ub, 0.0)
    return np.maximum(np.maximum(below, above), 0.0)


def check_feasibility(program, x):
    """Largest violation per constraint family.

    Families dropped by a comparison case do not appear. Variable bounds
    (non-negativity and case pins) are reported under ``variable_bounds``.
    """
    viol = row_violations(program, x)
    out = {}
    for f in np.unique(program.row_family):
        out[FAMILIES[f]] = float(viol[program.row_family == f].max())
    out[BOUNDS_FAMILY] = float(bound_violations(program, x).max(initial=0.0))
    return out


def max_violation(program, x):
    return max(check_feasibility(program, x).values())
