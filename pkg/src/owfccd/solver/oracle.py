"""Grid-search design oracle.

For a fixed design ``(szE, szC)`` the operating problem is an LP once the
cable is described by its receiving-end frontier. With the offshore bus at
its upper voltage ``v`` and the onshore voltage on a fine grid, the power
delivered onshore for a sending-end flow ``P1`` is

    Q(P1) = P1 - P1**2 / (g * v**2),

which is concave, so chords between grid points give linear cuts
``Q <= a_j + b_j * P1`` that approximate it from below. Raising ``V1``
never lowers ``Q`` at fixed ``P1``, so the frontier describes every
reachable flow pair.

The LP here is written directly from the scenario tree, independently of
:func:`owfccd.model.build_program`: reserves enter through the droop gains
only and the design ratings are constants.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..core import annuity_factor
from ..model import rt_trade_bounds
from .lp import SolverError


@dataclass(eq=False)
class OracleResult:
    sz_e: float
    sz_c: float
    objective: float
    table: np.ndarray          # (len(sz_e_grid), len(sz_c_grid)) objectives, inf if infeasible
    sz_e_grid: np.ndarray
    sz_c_grid: np.ndarray
    v2: np.ndarray = None      # recovered onshore voltages at the best design, (L, Q)
    max_chord_gap: float = np.nan   # MW between frontier and delivered power at the best design


def frontier_cuts(g, v1, v2_min, p1_max, n_segments):
    """Chord coefficients ``(a, b)`` of the frontier on a grid of onshore voltages.

    The grid runs from ``V2 = v1`` (no flow) down to the lowest voltage
    needed to carry ``p1_max``.
    """
    v2_lo = max(v2_min, v1 - p1_max / (g * v1))
    v2 = np.linspace(v1, v2_lo, n_segments + 1)
    p1 = g * v1 * (v1 - v2)
    q = g * v2 * (v1 - v2)
    b = np.diff(q) / np.diff(p1)
    a = q[:-1] - b * p1[:-1]
    return a, b, float(p1[-1])


class _OperatingLP:
    """Operating LP of one tree; design ratings enter as bounds and rhs."""

    def __init__(self, tree, params, grid, n_segments):
        farm, econ, ess, cab, res = (params.farm, params.econ, params.ess, params.cable,
                                     params.reserve)
        self.params = params
        T, Q = grid.n_hours, grid.n_quarters
        hq = grid.hour_of_quarter
        dt = grid.quarter_length_h
        leaves = list(tree.leaves())
        L, n_da = len(leaves), len(tree.da_nodes)
        da_of = np.array([a for a, _, _, _ in leaves])
        pi = np.array([p for _, _, p, _ in leaves])
        cond = np.array([lf.probability for _, _, _, lf in leaves])
        P = np.array([lf.wind for _, _, _, lf in leaves])
        Pq = P[:, hq]
        up, lo = rt_trade_bounds(tree, grid)

        # column layout
        sizes = [("pWD", n_da * T), ("pW", L * T)] + [(k, L * Q) for k in
                                                        ("pWR", "pch", "pdis", "soc", "kW", "kB")]
        self.col = {}
        off = 0
        for name, size in sizes:
            self.col[name] = off + np.arange(size)
            off += size
        n = off
        c = lambda name, shape: self.col[name].reshape(shape)
        pWD, pW = c("pWD", (n_da, T)), c("pW", (L, T))
        pWR, pch, pdis, soc, kW, kB = (c(k, (L, Q)) for k in ("pWR", "pch", "pdis", "soc", "kW", "kB"))
        self.shape = dict(L=L, Q=Q, T=T)
        self.idx = dict(pW=pW, pWD=pWD, pWR=pWR, pch=pch, pdis=pdis, soc=soc, kW=kW, kB=kB)
        self.da_of = da_of

        v1 = cab.v_max[0]
        g = cab.conductance
        self.v1, self.g = v1, g
        a_cut, b_cut, p1_cap = frontier_cuts(g, v1, cab.v_min[1], min(farm.rated_power_mw,
                                             g * v1 * (v1 - cab.v_min[1])), n_segments)
        self.a_cut, self.b_cut = a_cut, b_cut

        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        lb[pWD.ravel()] = -np.inf
        ub[pW.ravel()] = np.minimum(P, p1_cap).ravel()
        lb[pWR.ravel()], ub[pWR.ravel()] = lo.ravel(), up.ravel()
        lb[kW.ravel()] = (Pq / res.r_max_wf).ravel()
        ub[kW.ravel()] = (Pq / res.r_min_wf).ravel()
        self.lb, self.ub = lb, ub

        rows, cols, vals, rhs = [], [], [], []
        self.rhs_kind = []     # per row: (const, szE coef, szC coef)
        nrow = [0]

        def add(col_coef, const, e_coef=0.0, c_coef=0.0):
            """Elementwise rows ``sum coef * x <= const + e_coef * szE + c_coef * szC``."""
            m = None
            for col, coef in col_coef:
                col = np.asarray(col).ravel()
                m = len(col)
                rows.append(nrow[0] + np.arange(m))
                cols.append(col)
                vals.append(np.broadcast_to(np.ravel(np.asarray(coef, float)), m)
                            if np.ndim(coef) else np.full(m, float(coef)))
            self.rhs_kind.append(np.column_stack([np.broadcast_to(np.ravel(const), m),
                                                  np.full(m, e_coef), np.full(m, c_coef)]))
            nrow[0] += m

        def add_row(col, coef, const, e_coef=0.0):
            """One row over many columns."""
            col = np.asarray(col).ravel()
            rows.append(np.full(len(col), nrow[0]))
            cols.append(col)
            vals.append(np.broadcast_to(np.asarray(coef, float).ravel(), len(col)))
            self.rhs_kind.append(np.array([[const, e_coef, 0.0]]))
            nrow[0] += 1

        dfu, dfd = res.df_up_max, res.df_down_max
        pWq = pW[:, hq]
        add([(pWq, 1.0), (kW, dfu)], Pq)                          # output upper
        add([(pWq, -1.0), (kW, dfd)], 0.0)                        # output lower
        add([(kW, -1.0), (kB, -1.0)], -Pq / res.r_all)            # joint droop
        add([(kB, -1.0)], 0.0, e_coef=-1.0 / res.r_max_ess)       # ess droop lower
        add([(kB, 1.0)], 0.0, e_coef=1.0 / res.r_min_ess)         # ess droop upper
        add([(pch, 1.0), (kB, dfd)], 0.0, e_coef=1.0)
        add([(pdis, 1.0), (kB, dfu)], 0.0, e_coef=1.0)
        add([(soc, 1.0)], 0.0, e_coef=ess.duration_h)
        add([(pWq, cab.safety_factor), (kW, cab.safety_factor * dfu)], 0.0, c_coef=1.0)
        # storage energy, written as two inequalities per equality
        for sgn in (1.0, -1.0):
            add([(soc[:, 1:], sgn), (soc[:, :-1], -sgn), (pch[:, 1:], -sgn * ess.eta_ch * dt),
                 (pdis[:, 1:], sgn * ess.eta_dis * dt)], 0.0)
            add([(soc[:, 0], sgn), (pch[:, 0], -sgn * ess.eta_ch * dt),
                 (pdis[:, 0], sgn * ess.eta_dis * dt)], 0.0, e_coef=sgn * 0.5 * ess.duration_h)
        for a in range(n_da):
            mine = np.flatnonzero(da_of == a)
            for sgn in (1.0, -1.0):
                add_row(soc[mine, -1], sgn * cond[mine], 0.0, e_coef=sgn * 0.5 * ess.duration_h)
            add_row(pdis[mine], np.repeat(cond[mine], Q) * ess.eta_dis * dt, 0.0,
                    e_coef=ess.cycle_limit)
        # frontier cuts: delivered power below every chord
        pWDq = pWD[da_of][:, hq]
        for a_j, b_j in zip(a_cut, b_cut):
            add([(pWR, 1.0), (pWDq, 1.0), (pch, 1.0), (pdis, -1.0), (pWq, -b_j)], a_j)

        self.A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(nrow[0], n))
        self.rhs = np.vstack(self.rhs_kind)

        da_prob = np.array([nd.probability for nd in tree.da_nodes])
        da_price = np.array([nd.da_price for nd in tree.da_nodes])
        rt = np.array([lf.rt_price for _, _, _, lf in leaves])
        ru = np.array([lf.reserve_up for _, _, _, lf in leaves])
        rd = np.array([lf.reserve_down for _, _, _, lf in leaves])
        rev = np.zeros(n)
        rev[pWD.ravel()] = (da_prob[:, None] * da_price).ravel()
        rev[pWR.ravel()] = (pi[:, None] * rt * dt).ravel()
        gain_value = pi[:, None] * dt * (ru * dfu + rd * dfd)
        rev[kW.ravel()] = gain_value.ravel()
        rev[kB.ravel()] = gain_value.ravel()
        self.revenue = rev
        self.annuity = annuity_factor(econ)
        self.econ = econ
        self.Pq = Pq
        self.ess = ess
        self.reserve = res

    def solve(self, sz_e, sz_c, tol=1e-9):
        b = self.rhs[:, 0] + self.rhs[:, 1] * sz_e + self.rhs[:, 2] * sz_c
        res = linprog(-self.revenue, A_ub=self.A, b_ub=b,
                      bounds=np.column_stack([self.lb, self.ub]), method="highs",
                      options={"primal_feasibility_tolerance": tol,
                               "dual_feasibility_tolerance": tol})
        if res.status == 2:
            return np.inf, None
        if res.status != 0:
            raise SolverError(f"oracle LP failed at ({sz_e}, {sz_c}): {res.message}")
        econ = self.econ
        cost = econ.tax_credit * (econ.ess_unit_cost * sz_e + econ.cable_unit_cost * sz_c)
        return cost + self.annuity * res.fun, res.x

    def voltages(self, x):
        """Onshore voltage per (leaf, quarter) at ``V1 = v_max``."""
        hq = np.repeat(np.arange(self.shape["T"]), 4)
        p1 = x[self.idx["pW"]][:, hq]
        return self.v1 - p1 / (self.g * self.v1)

    def chord_gap(self, x):
        hq = np.repeat(np.arange(self.shape["T"]), 4)
        p1 = x[self.idx["pW"]][:, hq]
        delivered = (x[self.idx["pWR"]] + x[self.idx["pWD"]][self.da_of][:, hq]
                     + x[self.idx["pch"]] - x[self.idx["pdis"]])
        exact = p1 - p1 ** 2 / (self.g * self.v1 ** 2)
        return float(np.abs(exact - delivered).max())


def _params_of(program):
    return program.tree, program.params, program.grid


def evaluate_design(program, sz_e, sz_c, n_segments=200):
    """Oracle objective ($) of one fixed design; ``inf`` if infeasible."""
    tree, params, grid = _params_of(program)
    lp = _OperatingLP(tree, params, grid, n_segments)
    return lp.solve(sz_e, sz_c)[0]


def _grid_search(lp, sz_e_grid, sz_c_grid):
    table = np.full((len(sz_e_grid), len(sz_c_grid)), np.inf)
    best = (np.inf, None, None, None)
    for i, e in enumerate(sz_e_grid):
        for j, cbl in enumerate(sz_c_grid):
            obj, x = lp.solve(e, cbl)
            table[i, j] = obj
            if obj < best[0]:
                best = (obj, e, cbl, x)
    return table, best


def _zoom(grid, value, lo, hi):
    step = grid[1] - grid[0] if len(grid) > 1 else 0.0
    return np.linspace(max(lo, value - step), min(hi, value + step), len(grid))


def brute_force_design(program, sz_e_grid=None, sz_c_grid=None, n_segments=60, refine=0):
    """Best design on a grid of ESS and cable ratings.

    Defaults: 11 ESS ratings on ``[0, cap]`` and 11 cable ratings on
    ``[0.5, 1.05] * safety_factor * peak scenario wind``. Each ``refine``
    pass repeats the search on a grid of the same size spanning one step
    either side of the incumbent.
    """
    tree, params, grid = _params_of(program)
    cap = params.ess.size_cap_fraction * params.farm.rated_power_mw
    if sz_e_grid is None:
        sz_e_grid = np.linspace(0.0, cap, 11)
    if sz_c_grid is None:
        peak = max(float(lf.wind.max()) for _, _, _, lf in tree.leaves())
        base = params.cable.safety_factor * peak
        sz_c_grid = np.linspace(0.5 * base, 1.05 * base, 11)
    sz_e_grid, sz_c_grid = np.asarray(sz_e_grid, float), np.asarray(sz_c_grid, float)
    lp = _OperatingLP(tree, params, grid, n_segments)
    table, best = _grid_search(lp, sz_e_grid, sz_c_grid)
    first = (table, sz_e_grid, sz_c_grid)
    for _ in range(refine):
        if best[3] is None:
            break
        e_grid = _zoom(sz_e_grid, best[1], 0.0, cap)
        c_grid = _zoom(sz_c_grid, best[2], 0.0, np.inf)
        _, cand = _grid_search(lp, e_grid, c_grid)
        sz_e_grid, sz_c_grid = e_grid, c_grid
        if cand[0] <= best[0]:
            best = cand
    obj, e, cbl, x = best
    if x is None:
        raise SolverError("no grid design is feasible")
    return OracleResult(float(e), float(cbl), float(obj), *first, lp.voltages(x), lp.chord_gap(x))
