"""Deterministic equivalent of the three-stage co-design program.

Stages: design (ESS rating ``szE``, cable rating ``szC``), day-ahead (hourly
DA sales per DA node) and real time (everything else, per leaf). The
program is stored as

    minimise    c @ x + c0
    subject to  lo <= A @ x + sum_k q_k * x[i_k] * x[j_k] <= hi   (per row)
                lb <= x <= ub

where the only product terms are the bus-voltage products of the cable
flow equations. Every row carries a constraint-family tag.

Units: power MW, energy MWh, prices $/MWh, reserve prices $/MW per hour,
voltages pu, droop gains MW per pu frequency.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core import (CABLE_MODULE_MW, QUARTERS_PER_HOUR, CableParams, DomainError,
                   EconParams, EssParams, FarmParams, ReserveParams, TimeGrid,
                   annuity_factor)

# constraint families in build order
FAMILIES = (
    "ess_size_cap",
    "size_nonnegative",
    "offshore_balance",
    "onshore_balance",
    "cable_limit",
    "voltage_offshore",
    "voltage_onshore",
    "rt_trade_upper",
    "rt_trade_lower",
    "output_upper",
    "output_lower",
    "reserve_wind_up",
    "reserve_wind_down",
    "reserve_ess_up",
    "reserve_ess_down",
    "droop_wind_lower",
    "droop_wind_upper",
    "droop_ess_lower",
    "droop_ess_upper",
    "droop_joint",
    "soc_dynamics",
    "soc_initial",
    "charge_limit",
    "discharge_limit",
    "soc_lower",
    "soc_upper",
    "end_soc",
    "cycle_limit",
)
# pseudo-family for variable bounds (non-negativity and case pins)
BOUNDS_FAMILY = "variable_bounds"
BILINEAR_FAMILIES = ("offshore_balance", "onshore_balance", "cable_limit")
CASES = ("ccd", "base", "noreserve", "noess")

LEAF_BLOCKS = ("pW", "pWR", "pch", "pdis", "soc", "v1", "v2", "kW", "kB",
               "rWU", "rWD", "rBU", "rBD")
REVENUE_KINDS = ("DA", "RT", "ReserveUp", "ReserveDown")


@dataclass(frozen=True)
class ModelParams:
    farm: FarmParams = field(default_factory=FarmParams)
    econ: EconParams = field(default_factory=EconParams)
    ess: EssParams = field(default_factory=EssParams)
    cable: CableParams = field(default_factory=CableParams)
    reserve: ReserveParams = field(default_factory=ReserveParams)


@dataclass(frozen=True, eq=False)
class CcdProgram:
    """Built program plus the data it came from.

    ``blocks`` maps a variable block name to ``(offset, shape)``. Leaf blocks
    have shape ``(n_leaves, n_hours)`` (``pW``) or ``(n_leaves, n_quarters)``;
    ``pWD`` is ``(n_da, n_hours)``; ``szE`` and ``szC`` are scalars.
    """

    blocks: dict
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    c0: float
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    row_family: np.ndarray          # index into FAMILIES
    row_leaf: np.ndarray            # leaf index, DA index for DA-level rows, -1 for design rows
    row_time: np.ndarray            # 0-based time index, -1 if none
    quad_row: np.ndarray
    quad_i: np.ndarray
    quad_j: np.ndarray
    quad_coef: np.ndarray
    revenue: dict                   # kind -> (n,) expected daily $ per unit of x
    traded: dict                    # kind -> (n,) expected daily MWh per unit of x
    tree: object
    params: ModelParams
    grid: TimeGrid
    leaf_da: np.ndarray
    leaf_prob: np.ndarray           # absolute probability of each leaf
    annuity: float
    case: str = "ccd"

    @property
    def n_vars(self):
        return len(self.c)

    @property
    def n_rows(self):
        return self.A.shape[0]

    def index(self, name, *idx):
        off, shape = self.blocks[name]
        if not shape:
            return off
        return off + np.ravel_multi_index(idx, shape) if idx else off + np.arange(int(np.prod(shape))).reshape(shape)

    def block(self, x, name):
        off, shape = self.blocks[name]
        if not shape:
            return float(x[off])
        return np.asarray(x[off:off + int(np.prod(shape))]).reshape(shape)

    def family_rows(self, name):
        return np.flatnonzero(self.row_family == FAMILIES.index(name))

    def families_present(self):
        return [FAMILIES[f] for f in np.unique(self.row_family)]

    def quad_values(self, x):
        out = np.zeros(self.n_rows)
        np.add.at(out, self.quad_row, self.quad_coef * x[self.quad_i] * x[self.quad_j])
        return out

    def row_values(self, x):
        return self.A @ x + self.quad_values(x)

    def jacobian(self, x):
        rows = np.concatenate([self.quad_row, self.quad_row])
        cols = np.concatenate([self.quad_i, self.quad_j])
        vals = np.concatenate([self.quad_coef * x[self.quad_j], self.quad_coef * x[self.quad_i]])
        dq = sp.csr_matrix((vals, (rows, cols)), shape=self.A.shape)
        return (self.A + dq).tocsr()

    def objective(self, x):
        return float(self.c @ x + self.c0)

    def bilinear_rows(self):
        return np.unique(self.quad_row)

    def bilinear_terms(self):
        """``(row, i, j, coef)`` tuples for every voltage product."""
        return list(zip(self.quad_row.tolist(), self.quad_i.tolist(),
                        self.quad_j.tolist(), self.quad_coef.tolist()))


class _Rows:
    """Vectorised accumulator for tagged sparse rows."""

    def __init__(self):
        self.r, self.c, self.v = [], [], []
        self.qr, self.qi, self.qj, self.qc = [], [], [], []
        self.lo, self.hi, self.fam, self.leaf, self.time = [], [], [], [], []
        self.n = 0

    def add(self, family, lo, hi, terms, quad=(), leaf=-1, time=-1):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        size = max(len(lo), len(hi), *(np.size(col) for col, _ in terms))
        rows = self.n + np.arange(size)
        for col, coef in terms:
            self.r.append(rows)
            self.c.append(np.broadcast_to(col, size))
            self.v.append(np.broadcast_to(np.asarray(coef, dtype=float), size))
        for i, j, coef in quad:
            self.qr.append(rows)
            self.qi.append(np.broadcast_to(i, size))
            self.qj.append(np.broadcast_to(j, size))
            self.qc.append(np.broadcast_to(np.asarray(coef, dtype=float), size))
        self.lo.append(np.broadcast_to(lo, size))
        self.hi.append(np.broadcast_to(hi, size))
        self.fam.append(np.full(size, FAMILIES.index(family)))
        self.leaf.append(np.broadcast_to(leaf, size))
        self.time.append(np.broadcast_to(time, size))
        self.n += size

    def add_row(self, family, lo, hi, cols, coefs, leaf=-1, time=-1):
        """One row with many columns."""
        cols = np.asarray(cols, dtype=int)
        self.r.append(np.full(len(cols), self.n))
        self.c.append(cols)
        self.v.append(np.broadcast_to(np.asarray(coefs, dtype=float), len(cols)))
        self.lo.append(np.array([lo], dtype=float))
        self.hi.append(np.array([hi], dtype=float))
        self.fam.append(np.array([FAMILIES.index(family)]))
        self.leaf.append(np.array([leaf]))
        self.time.append(np.array([time]))
        self.n += 1

    def finish(self, n_vars):
        cat = lambda xs, dt=float: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
        A = sp.csr_matrix((cat(self.v), (cat(self.r, int), cat(self.c, int))), shape=(self.n, n_vars))
        A.sum_duplicates()
        return (A, cat(self.lo), cat(self.hi), cat(self.fam, int), cat(self.leaf, int),
                cat(self.time, int), cat(self.qr, int), cat(self.qi, int), cat(self.qj, int),
                cat(self.qc))


def rt_trade_bounds(tree, grid=None):
    """Per-leaf RT trade limits from actual minus expected wind power.

    Returns two arrays of shape ``(n_leaves, n_quarters)``: the upper limit
    ``max(P - E[P], 0)`` and the lower limit ``min(P - E[P], 0)``, each hourly
    value copied onto its four quarters.
    """
    if tree.wind_unit != "MW":
        raise DomainError("RT trade bounds need a tree carrying wind power (MW)")
    grid = grid or TimeGrid(tree.n_hours)
    up, lo = [], []
    for a, node in enumerate(tree.da_nodes):
        expected = tree.expected_wind(a)
        for lf in node.leaves:
            diff = grid.to_quarters(lf.wind - expected)
            up.append(np.maximum(diff, 0.0))
            lo.append(np.minimum(diff, 0.0))
    return np.array(up), np.array(lo)


def build_program(tree, farm=None, econ=None, ess=None, cable=None, reserve=None, grid=None):
    """Assemble the deterministic equivalent for ``tree``.

    Parameter bundles default to the package defaults; ``grid`` defaults to
    the tree's own horizon.
    """
    params = ModelParams(farm or FarmParams(), econ or EconParams(), ess or EssParams(),
                         cable or CableParams(), reserve or ReserveParams())
    farm, econ, ess, cable, reserve = (params.farm, params.econ, params.ess,
                                       params.cable, params.reserve)
    grid = grid or TimeGrid(tree.n_hours)
    if tree.wind_unit != "MW":
        raise DomainError("program needs wind power (MW); convert the tree first")
    if tree.n_hours != grid.n_hours:
        raise DomainError(f"tree horizon {tree.n_hours} h does not match grid {grid.n_hours} h")
    tree.validate()

    T, Q = grid.n_hours, grid.n_quarters
    dt = grid.quarter_length_h
    hq = grid.hour_of_quarter
    leaf_da, leaf_prob, leaf_cond, P, lam_rt, lam_u, lam_d = [], [], [], [], [], [], []
    for a, b, prob, lf in tree.leaves():
        if np.any(lf.wind < -1e-9) or np.any(lf.wind > farm.rated_power_mw * (1 + 1e-9)):
            raise DomainError(f"leaf ({a}, {b}) wind power outside [0, rated]")
        leaf_da.append(a)
        leaf_prob.append(prob)
        leaf_cond.append(lf.probability)
        P.append(lf.wind)
        lam_rt.append(lf.rt_price)
        lam_u.append(lf.reserve_up)
        lam_d.append(lf.reserve_down)
    leaf_da = np.array(leaf_da)
    leaf_prob, leaf_cond = np.array(leaf_prob), np.array(leaf_cond)
    P = np.clip(np.array(P), 0.0, farm.rated_power_mw)
    Pq = P[:, hq]
    lam_rt, lam_u, lam_d = np.array(lam_rt), np.array(lam_u), np.array(lam_d)
    L, n_da = len(leaf_da), len(tree.da_nodes)

    # variable layout
    blocks, off = {}, 0
    for name, shape in [("szE", ()), ("szC", ()), ("pWD", (n_da, T)), ("pW", (L, T))] + \
            [(nm, (L, Q)) for nm in LEAF_BLOCKS[1:]]:
        blocks[name] = (off, shape)
        off += int(np.prod(shape)) if shape else 1
    n = off
    ix = lambda name: (blocks[name][0] if not blocks[name][1]
                       else blocks[name][0] + np.arange(int(np.prod(blocks[name][1]))).reshape(blocks[name][1]))
    szE, szC, pWD, pW = ix("szE"), ix("szC"), ix("pWD"), ix("pW")
    pWR, pch, pdis, soc = ix("pWR"), ix("pch"), ix("pdis"), ix("soc")
    v1, v2, kW, kB = ix("v1"), ix("v2"), ix("kW"), ix("kB")
    rWU, rWD, rBU, rBD = ix("rWU"), ix("rWD"), ix("rBU"), ix("rBD")

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    for name in ("szE", "szC", "pch", "pdis", "kW", "kB", "rWU", "rWD", "rBU", "rBD"):
        lb[ix(name)] = 0.0

    pW_q = pW[:, hq]                       # hourly variable seen at each quarter
    pWD_q = pWD[leaf_da][:, hq]
    leaf_of = np.repeat(np.arange(L)[:, None], Q, axis=1)
    t_of = np.repeat(np.arange(Q)[None, :], L, axis=0)
    g = cable.conductance
    up, lo = rt_trade_bounds(tree, grid)
    R = _Rows()
    lq = dict(leaf=leaf_of.ravel(), time=t_of.ravel())
    f = lambda a: np.ravel(a)

    cap = ess.size_cap_fraction * farm.rated_power_mw
    R.add("ess_size_cap", -np.inf, cap, [(szE, 1.0)])
    R.add("size_nonnegative", 0.0, np.inf, [(np.array([szE, szC]), 1.0)])

    # cable flow, bus 1 offshore, bus 2 onshore
    R.add("offshore_balance", 0.0, 0.0, [(f(pW_q), 1.0)],
          quad=[(f(v1), f(v1), -g), (f(v1), f(v2), g)], **lq)
    R.add("onshore_balance", 0.0, 0.0,
          [(f(pdis), 1.0), (f(pch), -1.0), (f(pWR), -1.0), (f(pWD_q), -1.0)],
          quad=[(f(v2), f(v2), -g), (f(v1), f(v2), g)], **lq)
    sf = cable.safety_factor
    R.add("cable_limit", -np.inf, 0.0, [(f(rWU), sf), (np.full(L * Q, szC), -1.0)],
          quad=[(f(v1), f(v1), sf * g), (f(v1), f(v2), -sf * g)], **lq)
    R.add("voltage_offshore", cable.v_min[0], cable.v_max[0], [(f(v1), 1.0)], **lq)
    R.add("voltage_onshore", cable.v_min[1], cable.v_max[1], [(f(v2), 1.0)], **lq)

    R.add("rt_trade_upper", -np.inf, f(up), [(f(pWR), 1.0)], **lq)
    R.add("rt_trade_lower", f(lo), np.inf, [(f(pWR), 1.0)], **lq)
    R.add("output_upper", -np.inf, f(Pq), [(f(pW_q), 1.0), (f(rWU), 1.0)], **lq)
    R.add("output_lower", 0.0, np.inf, [(f(pW_q), 1.0), (f(rWD), -1.0)], **lq)

    dfu, dfd = reserve.df_up_max, reserve.df_down_max
    R.add("reserve_wind_up", 0.0, 0.0, [(f(rWU), 1.0), (f(kW), -dfu)], **lq)
    R.add("reserve_wind_down", 0.0, 0.0, [(f(rWD), 1.0), (f(kW), -dfd)], **lq)
    R.add("reserve_ess_up", 0.0, 0.0, [(f(rBU), 1.0), (f(kB), -dfu)], **lq)
    R.add("reserve_ess_down", 0.0, 0.0, [(f(rBD), 1.0), (f(kB), -dfd)], **lq)
    R.add("droop_wind_lower", f(Pq) / reserve.r_max_wf, np.inf, [(f(kW), 1.0)], **lq)
    R.add("droop_wind_upper", -np.inf, f(Pq) / reserve.r_min_wf, [(f(kW), 1.0)], **lq)
    szE_col = np.full(L * Q, szE)
    R.add("droop_ess_lower", 0.0, np.inf, [(f(kB), 1.0), (szE_col, -1.0 / reserve.r_max_ess)], **lq)
    R.add("droop_ess_upper", -np.inf, 0.0, [(f(kB), 1.0), (szE_col, -1.0 / reserve.r_min_ess)], **lq)
    R.add("droop_joint", f(Pq) / reserve.r_all, np.inf, [(f(kW), 1.0), (f(kB), 1.0)], **lq)

    eta_c, eta_d = ess.eta_ch, ess.eta_dis
    later = dict(leaf=f(leaf_of[:, 1:]), time=f(t_of[:, 1:]))
    R.add("soc_dynamics", 0.0, 0.0,
          [(f(soc[:, 1:]), 1.0), (f(soc[:, :-1]), -1.0),
           (f(pch[:, 1:]), -eta_c * dt), (f(pdis[:, 1:]), eta_d * dt)], **later)
    R.add("soc_initial", 0.0, 0.0,
          [(soc[:, 0], 1.0), (np.full(L, szE), -0.5 * ess.duration_h),
           (pch[:, 0], -eta_c * dt), (pdis[:, 0], eta_d * dt)], leaf=np.arange(L), time=0)
    R.add("charge_limit", -np.inf, 0.0, [(f(pch), 1.0), (f(rBD), 1.0), (szE_col, -1.0)], **lq)
    R.add("discharge_limit", -np.inf, 0.0, [(f(pdis), 1.0), (f(rBU), 1.0), (szE_col, -1.0)], **lq)
    R.add("soc_lower", 0.0, np.inf, [(f(soc), 1.0)], **lq)
    R.add("soc_upper", -np.inf, 0.0, [(f(soc), 1.0), (szE_col, -ess.duration_h)], **lq)

    # expectations over the RT leaves of each DA node
    for a in range(n_da):
        mine = np.flatnonzero(leaf_da == a)
        R.add_row("end_soc", 0.0, 0.0, np.append(soc[mine, -1], szE),
                  np.append(leaf_cond[mine], -0.5 * ess.duration_h), leaf=a, time=Q - 1)
        R.add_row("cycle_limit", -np.inf, 0.0, np.append(f(pdis[mine]), szE),
                  np.append(np.repeat(leaf_cond[mine], Q) * eta_d * dt, -ess.cycle_limit), leaf=a)
    A, row_lo, row_hi, fam, leaf, time, qr, qi, qj, qc = R.finish(n)

    # revenue: expected $ per day for one unit of each variable
    da_prob = np.array([nd.probability for nd in tree.da_nodes])
    da_price = np.array([nd.da_price for nd in tree.da_nodes])
    revenue = {k: np.zeros(n) for k in REVENUE_KINDS}
    traded = {k: np.zeros(n) for k in ("DA", "RT")}
    revenue["DA"][f(pWD)] = f(da_prob[:, None] * da_price)
    traded["DA"][f(pWD)] = np.repeat(da_prob, T)
    revenue["RT"][f(pWR)] = f(leaf_prob[:, None] * lam_rt * dt)
    traded["RT"][f(pWR)] = np.repeat(leaf_prob, Q) * dt
    for cols, lam, kind in ((rWU, lam_u, "ReserveUp"), (rBU, lam_u, "ReserveUp"),
                            (rWD, lam_d, "ReserveDown"), (rBD, lam_d, "ReserveDown")):
        revenue[kind][f(cols)] = f(leaf_prob[:, None] * lam * dt)

    ry = annuity_factor(econ)
    c = -ry * sum(revenue.values())
    c[szE] += econ.tax_credit * econ.ess_unit_cost
    c[szC] += econ.tax_credit * econ.cable_unit_cost

    return CcdProgram(blocks, lb, ub, c, 0.0, A, row_lo, row_hi, fam, leaf, time,
                      qr, qi, qj, qc, revenue, traded, tree, params, grid,
                      leaf_da, leaf_prob, ry)


def _keep_rows(program, keep):
    keep = np.asarray(keep, dtype=bool)
    new_index = np.cumsum(keep) - 1
    qmask = keep[program.quad_row]
    return replace(program, A=program.A[keep], row_lo=program.row_lo[keep],
                   row_hi=program.row_hi[keep], row_family=program.row_family[keep],
                   row_leaf=program.row_leaf[keep], row_time=program.row_time[keep],
                   quad_row=new_index[program.quad_row[qmask]], quad_i=program.quad_i[qmask],
                   quad_j=program.quad_j[qmask], quad_coef=program.quad_coef[qmask])


def _quarter_power(program):
    P = np.array([lf.wind for _, _, _, lf in program.tree.leaves()])
    return P[:, program.grid.hour_of_quarter]


def base_cable_rating(farm, safety_factor=1.1, module_mw=CABLE_MODULE_MW):
    """Smallest multiple of the cable module covering ``safety_factor * rating``."""
    return module_mw * math.ceil(safety_factor * farm.rated_power_mw / module_mw - 1e-12)


def fix_case(program, case):
    """Restrict a CCD program to one of the comparison cases.

    ``base``: ESS at 2 % of farm rating, droop gains at their upper limits,
    cable at whole 2600 MW modules. ``noreserve``: every reserve and gain
    at zero and the minimum-droop rows dropped. ``noess``: no storage.
    ``ccd`` returns the program unchanged.
    """
    case = case.lower().replace("_", "").replace("-", "").replace(" ", "")
    if case not in CASES:
        raise DomainError(f"unknown case {case!r}; expected one of {CASES}")
    if case == "ccd":
        return replace(program, case="ccd")
    prm = program.params
    lb, ub = program.lb.copy(), program.ub.copy()

    def pin(name, value):
        idx = program.index(name)
        lb[idx] = value
        ub[idx] = value

    keep = np.ones(program.n_rows, dtype=bool)
    if case == "base":
        sz_e = 0.02 * prm.farm.rated_power_mw
        pin("szE", sz_e)
        pin("szC", base_cable_rating(prm.farm, prm.cable.safety_factor))
        pin("kW", _quarter_power(program) / prm.reserve.r_min_wf)
        pin("kB", sz_e / prm.reserve.r_min_ess)
    elif case == "noreserve":
        for name in ("kW", "kB", "rWU", "rWD", "rBU", "rBD"):
            pin(name, 0.0)
        for fam in ("droop_joint", "droop_wind_lower", "droop_ess_lower"):
            keep &= program.row_family != FAMILIES.index(fam)
    elif case == "noess":
        for name in ("szE", "pch", "pdis", "soc", "kB", "rBU", "rBD"):
            pin(name, 0.0)
    out = replace(program, lb=lb, ub=ub, case=case)
    return _keep_rows(out, keep) if not keep.all() else out


def write_program(program, path):
    """Text dump: one VAR line per variable, one ROW line per row.

    ``VAR <index> <block>[<i>,<j>] <lb> <ub> <cost>``
    ``ROW <index> <family> <lo> <hi> lin <col>:<coef> ... quad <i>*<j>:<coef> ...``
    Floats are written with ``repr`` so the dump round-trips exactly.
    """
    names = np.empty(program.n_vars, dtype=object)
    for name, (off, shape) in program.blocks.items():
        if not shape:
            names[off] = name
        else:
            for k, idx in enumerate(np.ndindex(*shape)):
                names[off + k] = f"{name}[{','.join(map(str, idx))}]"
    A = program.A.tocsr()
    quad_by_row = {}
    for r, i, j, q in zip(program.quad_row, program.quad_i, program.quad_j, program.quad_coef):
        quad_by_row.setdefault(int(r), []).append(f"{i}*{j}:{q!r}")
    with open(path, "w") as fh:
        fh.write(f"# owfccd program v1 case={program.case} vars={program.n_vars} rows={program.n_rows}\n")
        fh.write(f"OBJCONST {program.c0!r}\n")
        for k in range(program.n_vars):
            fh.write(f"VAR {k} {names[k]} {float(program.lb[k])!r} {float(program.ub[k])!r} "
                     f"{float(program.c[k])!r}\n")
        for r in range(program.n_rows):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            lin = " ".join(f"{j}:{float(v)!r}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi]))
            quad = " ".join(quad_by_row.get(r, []))
            fh.write(f"ROW {r} {FAMILIES[program.row_family[r]]} {float(program.row_lo[r])!r} "
                     f"{float(program.row_hi[r])!r} lin {lin} quad {quad}\n".replace("  ", " "))
