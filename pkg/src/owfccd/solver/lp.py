"""Linear programs: a dense two-phase simplex and a HiGHS backend.

Both backends take the ``scipy.optimize.linprog`` layout

    minimise c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x = b_eq,  lb <= x <= ub

and return an :class:`LPResult`. Duals are marginals ``d(objective)/d(b)``,
so they are <= 0 on ``<=`` rows of a minimisation.

The dense simplex is meant for small programs and for cross-checks. The
co-design programs have 10^5 variables and go to HiGHS.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    pass


class PivotBudgetError(SolverError):
    """The simplex ran out of pivots, typically from stalling."""


@dataclass(eq=False)
class LPResult:
    status: str
    x: np.ndarray = None
    objective: float = np.nan
    duals_ub: np.ndarray = None
    duals_eq: np.ndarray = None
    certificate: dict = field(default=None)
    iterations: int = 0
    backend: str = ""
    message: str = ""

    @property
    def success(self):
        return self.status == OPTIMAL


def _normalise(c, A_ub, b_ub, A_eq, b_eq, bounds):
    c = np.asarray(c, dtype=float).ravel()
    n = len(c)

    def mat(A, b):
        if A is None:
            return np.zeros((0, n)), np.zeros(0)
        A = A.toarray() if sp.issparse(A) else np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape != (len(b), n):
            raise ValueError(f"constraint matrix shape {A.shape} does not match ({len(b)}, {n})")
        return A, b

    A_ub, b_ub = mat(A_ub, b_ub)
    A_eq, b_eq = mat(A_eq, b_eq)
    lb, ub = _bounds(bounds, n)
    return c, A_ub, b_ub, A_eq, b_eq, lb, ub


def _bounds(bounds, n):
    if bounds is None:
        return np.zeros(n), np.full(n, np.inf)
    if isinstance(bounds, np.ndarray) and bounds.shape == (n, 2):
        return bounds[:, 0].astype(float), bounds[:, 1].astype(float)
    if len(bounds) == 2 and all(b is None or np.isscalar(b) for b in bounds):
        bounds = [tuple(bounds)] * n
    arr = np.array([[-np.inf if lo is None else lo, np.inf if hi is None else hi]
                    for lo, hi in bounds], dtype=float)
    if arr.shape != (n, 2):
        raise ValueError("bounds must give one (lo, hi) pair per variable")
    return arr[:, 0], arr[:, 1]


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None,
             backend="highs", tol=1e-9, max_pivots=None):
    """Solve an LP with the chosen backend.

    Parameters
    ----------
    backend : {"highs", "simplex"}
        ``"simplex"`` is the dense two-phase method in this module; it
        returns a Farkas multiplier set when infeasible and a recession
        direction when unbounded.
    tol : float
        Primal and dual feasibility tolerance.
    max_pivots : int, optional
        Simplex pivot budget; exceeding it raises :class:`PivotBudgetError`.
    """
    if backend == "highs":
        return _solve_highs(c, A_ub, b_ub, A_eq, b_eq, bounds, tol)
    if backend == "simplex":
        return _solve_simplex(*_normalise(c, A_ub, b_ub, A_eq, b_eq, bounds), tol, max_pivots)
    raise ValueError(f"unknown backend {backend!r}")


# HiGHS -------------------------------------------------------------------

def _highs_options(tol):
    return {"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol,
            "presolve": True}


def _solve_highs(c, A_ub, b_ub, A_eq, b_eq, bounds, tol):
    c = np.asarray(c, dtype=float)
    lb, ub = _bounds(bounds, len(c))
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lb, ub]), method="highs", options=_highs_options(tol))
    if res.status == 0:
        return LPResult(OPTIMAL, res.x, float(res.fun),
                        None if A_ub is None else np.asarray(res.ineqlin.marginals),
                        None if A_eq is None else np.asarray(res.eqlin.marginals),
                        iterations=int(res.nit), backend="highs", message=res.message)
    if res.status == 2:
        cert = _highs_farkas(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol)
        return LPResult(INFEASIBLE, certificate=cert, backend="highs", message=res.message)
    if res.status == 3:
        return LPResult(UNBOUNDED, backend="highs", message=res.message)
    raise SolverError(f"HiGHS failed: {res.message}")


def _highs_farkas(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol):
    """Farkas multipliers from the duals of the elastic feasibility LP."""
    n = len(c)
    m_ub = 0 if A_ub is None else A_ub.shape[0]
    m_eq = 0 if A_eq is None else A_eq.shape[0]
    blocks_ub = None if A_ub is None else sp.hstack(
        [sp.csr_matrix(A_ub), -sp.eye(m_ub), sp.csr_matrix((m_ub, 2 * m_eq))])
    blocks_eq = None if A_eq is None else sp.hstack(
        [sp.csr_matrix(A_eq), sp.csr_matrix((m_eq, m_ub)), sp.eye(m_eq), -sp.eye(m_eq)])
    cost = np.concatenate([np.zeros(n), np.ones(m_ub + 2 * m_eq)])
    bnds = np.vstack([np.column_stack([lb, ub]),
                      np.column_stack([np.zeros(m_ub + 2 * m_eq), np.full(m_ub + 2 * m_eq, np.inf)])])
    res = linprog(cost, A_ub=blocks_ub, b_ub=b_ub, A_eq=blocks_eq, b_eq=b_eq,
                  bounds=bnds, method="highs", options=_highs_options(tol))
    if res.status != 0:
        return None
    u = np.zeros(m_ub) if A_ub is None else -np.asarray(res.ineqlin.marginals)
    v = np.zeros(m_eq) if A_eq is None else -np.asarray(res.eqlin.marginals)
    return {"ub": u, "eq": v, "infeasibility": float(res.fun)}


# dense simplex ------------------------------------------------------------

@dataclass
class _StandardForm:
    """``A z = b, z >= 0`` with ``x = shift + M @ y`` and ``z = [y, slacks]``."""

    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    shift: np.ndarray
    M: np.ndarray
    n_y: int
    n_ub: int           # original <= rows, first in A
    n_eq: int           # original = rows, after the bound rows
    n_bound: int        # bound rows, between the two
    slack_col: np.ndarray   # slack column per row, -1 for equality rows
    sign: np.ndarray        # row flips applied to make b >= 0


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    n = len(c)
    cols, shift = [], np.zeros(n)
    bound_rows = []
    for j in range(n):
        if np.isfinite(lb[j]):
            shift[j] = lb[j]
            cols.append((j, 1.0))
            if np.isfinite(ub[j]):
                if ub[j] < lb[j]:
                    raise ValueError(f"variable {j} has lb > ub")
                bound_rows.append((len(cols) - 1, ub[j] - lb[j]))
        elif np.isfinite(ub[j]):
            shift[j] = ub[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    n_y = len(cols)
    M = np.zeros((n, n_y))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    rows_ub = np.vstack([A_ub @ M] + [np.eye(1, n_y, k) for k, _ in bound_rows]) \
        if (len(A_ub) or bound_rows) else np.zeros((0, n_y))
    rhs_ub = np.concatenate([b_ub - A_ub @ shift, [w for _, w in bound_rows]])
    n_ineq = len(rhs_ub)
    A = np.zeros((n_ineq + len(A_eq), n_y + n_ineq))
    A[:n_ineq, :n_y] = rows_ub
    A[:n_ineq, n_y:] = np.eye(n_ineq)
    A[n_ineq:, :n_y] = A_eq @ M
    b = np.concatenate([rhs_ub, b_eq - A_eq @ shift])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    slack_col = np.concatenate([n_y + np.arange(n_ineq), np.full(len(A_eq), -1)])
    cost = np.concatenate([M.T @ c, np.zeros(n_ineq)])
    return _StandardForm(A, b, cost, shift, M, n_y, len(b_ub), len(b_eq), len(bound_rows),
                         slack_col, sign)


class _Tableau:
    def __init__(self, A, b, basis):
        self.T = np.hstack([A, b[:, None]])
        self.basis = np.array(basis)
        self.pivots = 0

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T[:, :-1]

    def pivot(self, r, e):
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = e
        self.pivots += 1

    def run(self, cost, allowed, tol, budget, degenerate_limit=50):
        """Primal simplex; returns ``("optimal", None)`` or ``("unbounded", col)``."""
        degenerate_run = 0
        while True:
            rc = self.reduced_costs(cost)
            rc[~allowed] = 0.0
            candidates = np.flatnonzero(rc < -tol)
            if len(candidates) == 0:
                return OPTIMAL, None
            bland = degenerate_run > degenerate_limit
            e = candidates[0] if bland else candidates[np.argmin(rc[candidates])]
            d = self.T[:, e]
            pos = np.flatnonzero(d > tol)
            if len(pos) == 0:
                return UNBOUNDED, e
            ratios = self.T[pos, -1] / d[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(d[ties])]
            degenerate_run = degenerate_run + 1 if best <= tol else 0
            if self.pivots >= budget:
                raise PivotBudgetError(f"simplex exceeded {budget} pivots")
            self.pivot(r, e)


def _solve_simplex(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol, max_pivots):
    sf = _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    m, nz = sf.A.shape
    budget = max_pivots or 50 * (m + nz) + 1000

    # a slack still carrying +1 after the row flip starts basic, others need artificials
    basis = np.full(m, -1)
    for i in range(m):
        if sf.slack_col[i] >= 0 and sf.sign[i] > 0:
            basis[i] = sf.slack_col[i]
    art_rows = np.flatnonzero(basis < 0)
    A1 = np.hstack([sf.A, np.zeros((m, len(art_rows)))])
    for k, i in enumerate(art_rows):
        A1[i, nz + k] = 1.0
        basis[i] = nz + k
    tab = _Tableau(A1, sf.b.copy(), basis)
    cost1 = np.concatenate([np.zeros(nz), np.ones(len(art_rows))])
    allowed = np.ones(A1.shape[1], dtype=bool)
    tab.run(cost1, allowed, tol, budget)
    infeas = float(cost1[tab.basis] @ tab.T[:, -1])
    scale = max(1.0, np.abs(sf.b).max(initial=0.0))
    if infeas > tol * scale * max(1, m):
        y = _basis_duals(A1, tab.basis, cost1)
        return LPResult(INFEASIBLE, certificate=_farkas(sf, y), iterations=tab.pivots,
                        backend="simplex", message=f"phase 1 residual {infeas:.3g}")

    # drive zero-level artificials out of the basis; rows where that is
    # impossible are linearly dependent and get dropped
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= nz:
            row = tab.T[r, :nz]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if len(cand):
                tab.pivot(r, cand[np.argmax(np.abs(row[cand]))])
            else:
                keep[r] = False
    tab.T = tab.T[keep][:, list(range(nz)) + [A1.shape[1]]]
    tab.basis = tab.basis[keep]
    allowed = np.ones(nz, dtype=bool)
    status, col = tab.run(sf.cost, allowed, tol, budget)
    if status == UNBOUNDED:
        dz = np.zeros(nz)
        dz[col] = 1.0
        dz[tab.basis] = -tab.T[:, col]
        direction = sf.M @ dz[:sf.n_y]
        return LPResult(UNBOUNDED, certificate={"direction": direction}, iterations=tab.pivots,
                        backend="simplex", message="objective unbounded below")

    z = np.zeros(nz)
    z[tab.basis] = tab.T[:, -1]
    x = sf.shift + sf.M @ z[:sf.n_y]
    y = np.zeros(m)
    y[keep] = _basis_duals(sf.A[keep], tab.basis, sf.cost)
    marg = y * sf.sign
    n_ineq = sf.n_ub + sf.n_bound
    return LPResult(OPTIMAL, x, float(c @ x), marg[:sf.n_ub] if sf.n_ub else np.zeros(0),
                    marg[n_ineq:] if sf.n_eq else np.zeros(0),
                    iterations=tab.pivots, backend="simplex")


def _basis_duals(A, basis, cost):
    B = A[:, basis]
    return np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]


def _farkas(sf, y):
    """Turn phase-1 duals into multipliers on the original rows.

    The returned ``u >= 0`` (``<=`` rows) and ``v`` (equality rows) satisfy
    ``min over the box of (u A_ub + v A_eq) x > u b_ub + v b_eq``.
    """
    w = y * sf.sign
    n_ineq = sf.n_ub + sf.n_bound
    return {"ub": np.maximum(-w[:sf.n_ub], 0.0), "eq": -w[n_ineq:]}


def farkas_gap(cert, A_ub, b_ub, A_eq, b_eq, lb, ub):
    """Amount by which the aggregated row proves infeasibility (> 0 proves it).

    Computes ``min over lb <= x <= ub of g @ x - rhs`` for the aggregated
    row ``g @ x <= rhs``; ``inf`` bounds make it ``-inf`` unless the
    matching coefficient of ``g`` vanishes.
    """
    n = len(lb)
    g, rhs = np.zeros(n), 0.0
    if A_ub is not None and len(cert["ub"]):
        g += cert["ub"] @ np.asarray(A_ub)
        rhs += cert["ub"] @ np.asarray(b_ub)
    if A_eq is not None and len(cert["eq"]):
        g += cert["eq"] @ np.asarray(A_eq)
        rhs += cert["eq"] @ np.asarray(b_eq)
    g[np.abs(g) < 1e-12] = 0.0
    with np.errstate(invalid="ignore"):
        low = np.where(g > 0, g * lb, np.where(g < 0, g * ub, 0.0))
    return float(low.sum() - rhs)
