"""Sequential linear programming for the co-design program.

The only nonlinearity is the product of bus voltages in the cable flow
rows. Each iteration linearises those rows at the current point, relaxes
them with penalised elastic slacks and solves the LP inside a box trust
region on the voltages. Steps are accepted on the ratio of actual to
predicted decrease of the l1 merit function

    phi(x) = c @ x / scale + mu * sum(violation of the product rows).

With the offshore voltage at its upper limit and every other degree of
freedom pinned by an active linear row, the LP solutions are vertices of
the linearised set and the iteration behaves like Newton's method on the
active flow equations.
"""

import json
import logging
from dataclasses import dataclass, field, replace

import highspy
import numpy as np
import scipy.sparse as sp

from ..model import FAMILIES, REVENUE_KINDS
from .feasibility import check_feasibility, row_violations
from .lp import SolverError

logger = logging.getLogger(__name__)

SUCCESS = "SUCCESS"
MAX_ITERATIONS = "MAX_ITERATIONS"
INFEASIBLE = "INFEASIBLE"
FIXED_VOLTAGE = "FIXED_VOLTAGE"
FALLBACK = "FIXED_VOLTAGE_FALLBACK"

SOLUTION_SCHEMA = "owfccd.solution/1"


@dataclass(frozen=True)
class SolveOptions:
    """SLP controls.

    ``penalty`` multiplies the elastic slacks after the objective has been
    scaled to unit largest coefficient. It is the starting weight; the
    iteration then keeps it a small multiple of the largest product-row
    multiplier, within ``[penalty_min, penalty_max]``. ``fixed_voltage`` pins ``(V1, V2)``
    (scalars or per-quarter arrays) and solves a single LP. ``lp_pivot_tol``
    is the primal and dual feasibility tolerance handed to the LP solver.
    The iteration is deterministic; ``seed`` is only recorded.
    """

    max_outer_iters: int = 60
    trust_radius_init: float = 0.05
    trust_shrink: float = 0.25
    trust_expand: float = 2.0
    trust_radius_max: float = 0.2
    trust_radius_min: float = 1e-10
    convergence_tol_obj: float = 1e-9
    feasibility_tol: float = 1e-6
    lp_pivot_tol: float = 1e-9
    penalty: float = 100.0
    penalty_max: float = 1e8
    penalty_min: float = 1e-9
    flat_start: float = 1.0
    accept_ratio: float = 0.1
    expand_ratio: float = 0.75
    max_corrections: int = 3
    fixed_voltage: tuple = None
    seed: int = 0

    def __post_init__(self):
        for name in ("trust_radius_init", "trust_radius_max", "trust_radius_min",
                     "convergence_tol_obj", "feasibility_tol", "lp_pivot_tol", "penalty"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.trust_shrink < 1 < self.trust_expand:
            raise ValueError("need 0 < trust_shrink < 1 < trust_expand")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass(eq=False)
class DesignSolution:
    case: str
    status: str
    sz_e: float
    sz_c: float
    objective: float                 # $, installation cost minus annuitised revenue
    net_profit: float                # $, also net of converter and cable installation
    revenue: dict                    # kind -> expected $ per day
    traded: dict                     # DA/RT -> expected MWh per day
    costs: dict                      # $
    residuals: dict                  # family -> max violation
    iterations: int
    x: np.ndarray
    history: list = field(default_factory=list)
    message: str = ""
    program: object = field(default=None, repr=False)
    schema: str = SOLUTION_SCHEMA
    poi: str = ""

    def __post_init__(self):
        if not self.poi and self.program is not None:
            self.poi = self.program.params.farm.poi_name

    @property
    def success(self):
        return self.status in (SUCCESS, FIXED_VOLTAGE)

    @property
    def max_residual(self):
        return max(self.residuals.values())

    def schedule(self, name):
        """Block of the solution vector, e.g. ``"pWR"`` -> (n_leaves, n_quarters)."""
        if self.program is None:
            raise ValueError("solution is detached from its program")
        return self.program.block(self.x, name)


# LP assembly ---------------------------------------------------------------

class _LinearisedLP:
    """Linearised subproblem on a persistent HiGHS instance.

    Voltage columns hold the step ``d = V - V_k`` rather than ``V`` itself.
    The flow rows have coefficients of order ``g`` (about 1e5 MW/pu^2) on
    the voltages, so solving for the small step keeps row activities and
    tolerances on the same scale as the power variables. Consecutive
    subproblems differ only in those coefficients and in the bounds, so
    each solve restarts the simplex from the previous basis.
    """

    def __init__(self, program, tol):
        self.p = program
        self.bil = program.bilinear_rows()
        nb = len(self.bil)
        rows = np.concatenate([self.bil, self.bil])
        vals = np.concatenate([np.ones(nb), -np.ones(nb)])
        # s+ and s- per product row, after the model variables
        self.S = sp.csr_matrix((vals, (rows, np.arange(2 * nb))), shape=(program.n_rows, 2 * nb))
        self.n_slack = 2 * nb
        self.scale = max(float(np.abs(program.c).max()), 1e-12)
        self.volt = np.concatenate([program.index("v1").ravel(), program.index("v2").ravel()])
        cab = program.params.cable
        nq = program.index("v1").size
        self.v_lo = np.repeat(cab.v_min, nq)
        self.v_hi = np.repeat(cab.v_max, nq)
        self.A_volt = program.A[:, self.volt]
        self.tol = tol
        self.basis = None
        self.max_dual = 0.0
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        self.h.setOptionValue("primal_feasibility_tolerance", tol)
        self.h.setOptionValue("dual_feasibility_tolerance", tol)

    def solve(self, x_k, radius, mu, elastic=True, correction=None):
        """LP at ``x_k``; ``correction`` is added to the linearised rows.

        Returns ``((x, model_merit), message)`` or ``(None, message)``.
        """
        p = self.p
        v_k = x_k[self.volt]
        J = p.jacobian(x_k)
        # voltage part of every row at x_k, moved to the row bounds
        const = self.A_volt @ v_k + p.quad_values(x_k)
        if correction is not None:
            const = const + correction
        lo, hi = p.row_lo - const, p.row_hi - const
        G = sp.hstack([J, self.S]).tocsc() if elastic else J.tocsc()

        lb, ub = p.lb.copy(), p.ub.copy()
        pinned = p.lb[self.volt] == p.ub[self.volt]
        d_lo = np.maximum(lb[self.volt], self.v_lo) - v_k
        d_hi = np.minimum(ub[self.volt], self.v_hi) - v_k
        if radius is not None:
            d_lo = np.maximum(d_lo, -radius)
            d_hi = np.minimum(d_hi, radius)
        d_lo = np.where(pinned, lb[self.volt] - v_k, np.minimum(d_lo, 0.0))
        d_hi = np.where(pinned, ub[self.volt] - v_k, np.maximum(d_hi, 0.0))
        lb[self.volt], ub[self.volt] = d_lo, d_hi
        c = p.c / self.scale
        if elastic:
            c = np.concatenate([c, np.full(self.n_slack, mu)])
            lb = np.concatenate([lb, np.zeros(self.n_slack)])
            ub = np.concatenate([ub, np.full(self.n_slack, np.inf)])

        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = G.shape[1], G.shape[0]
        lp.col_cost_, lp.col_lower_, lp.col_upper_ = c, lb, ub
        lp.row_lower_, lp.row_upper_ = lo, hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = G.indptr
        lp.a_matrix_.index_ = G.indices
        lp.a_matrix_.value_ = G.data
        lp.a_matrix_.num_col_, lp.a_matrix_.num_row_ = G.shape[1], G.shape[0]
        self.h.passModel(lp)
        if self.basis is not None and elastic:
            self.h.setBasis(self.basis)
        self.h.run()
        status = self.h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal and self.basis is not None and elastic:
            # warm dual simplex sometimes stops short of the unscaled dual
            # tolerance; a looser one keeps the basis and is far cheaper
            # than a cold restart
            self.h.setOptionValue("dual_feasibility_tolerance", 100 * self.tol)
            self.h.passModel(lp)
            self.h.setBasis(self.basis)
            self.h.run()
            self.h.setOptionValue("dual_feasibility_tolerance", self.tol)
            status = self.h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal and self.basis is not None:
            self.h.passModel(lp)
            self.h.run()
            status = self.h.getModelStatus()
        msg = self.h.modelStatusToString(status)
        if status != highspy.HighsModelStatus.kOptimal:
            return None, msg
        if elastic:
            self.basis = self.h.getBasis()
        solution = self.h.getSolution()
        self.max_dual = float(np.abs(np.asarray(solution.row_dual)[self.bil]).max(initial=0.0))
        sol = np.asarray(solution.col_value)
        x = sol[:p.n_vars].copy()
        x[self.volt] = v_k + x[self.volt]
        model_merit = float(self.h.getInfo().objective_function_value)
        return (x, model_merit), msg

    def second_order_error(self, x_k, x):
        """Exact error of the linearisation at ``x_k`` when evaluated at ``x``.

        The product terms are a quadratic form, so the error is the form
        itself applied to the step.
        """
        return self.p.quad_values(x - x_k)

    def merit(self, x, mu):
        viol = row_violations(self.p, x)[self.bil].sum()
        return float(self.p.c @ x / self.scale + mu * viol), float(viol)


# driver --------------------------------------------------------------------

def _flat_point(program, value):
    x = np.zeros(program.n_vars)
    for name in ("v1", "v2"):
        idx = program.index(name)
        x[idx] = value
        pinned = program.lb[idx] == program.ub[idx]
        x[idx[pinned]] = program.lb[idx[pinned]]
    return x


def pin_voltages(program, v1, v2):
    lb, ub = program.lb.copy(), program.ub.copy()
    for name, v in (("v1", v1), ("v2", v2)):
        idx = program.index(name)
        val = np.broadcast_to(np.asarray(v, dtype=float), idx.shape)
        lb[idx] = val
        ub[idx] = val
    return replace(program, lb=lb, ub=ub)


def solve_slp(program, options=None):
    """Solve a (possibly case-restricted) co-design program.

    Returns a :class:`DesignSolution` whose ``status`` is ``SUCCESS`` when
    every family's residual is within ``options.feasibility_tol``.
    """
    opt = options or SolveOptions()
    if opt.fixed_voltage is not None:
        return _solve_fixed(pin_voltages(program, *opt.fixed_voltage), opt, FIXED_VOLTAGE)

    lp = _LinearisedLP(program, opt.lp_pivot_tol)
    mu = opt.penalty
    radius = opt.trust_radius_init
    x_k = _flat_point(program, opt.flat_start)
    history = []

    out, msg = lp.solve(x_k, radius, mu)
    if out is None:
        logger.warning("first linearisation failed (%s); falling back to fixed voltages", msg)
        return _solve_fixed(pin_voltages(program, opt.flat_start, opt.flat_start), opt, FALLBACK,
                            f"linearisation at the flat start failed: {msg}")
    x_k = out[0]
    phi_k, viol_k = lp.merit(x_k, mu)
    history.append(dict(iteration=0, merit=phi_k, infeasibility=viol_k, radius=radius,
                        ratio=np.nan, accepted=True))

    status = MAX_ITERATIONS
    for it in range(1, opt.max_outer_iters + 1):
        new_mu = _adapt_penalty(mu, lp.max_dual, opt)
        if new_mu != mu:
            mu = new_mu
            phi_k, viol_k = lp.merit(x_k, mu)
        out, msg = lp.solve(x_k, radius, mu)
        if out is None:
            raise SolverError(f"SLP subproblem failed at iteration {it}: {msg}")
        x_new, model_new = out
        pred = phi_k - model_new
        phi_new, viol_new = lp.merit(x_new, mu)
        ared = phi_k - phi_new
        tiny = opt.convergence_tol_obj * max(1.0, abs(phi_k))
        ratio = ared / pred if pred > tiny else 1.0
        x_trial = x_new
        for _ in range(opt.max_corrections if pred > tiny else 0):
            if ratio >= opt.expand_ratio:
                break
            # second-order correction: move the curvature error of the last
            # trial step into the linearisation and re-solve; the product
            # terms are quadratic, so each round shrinks the error
            corr = lp.second_order_error(x_k, x_trial)
            out, msg = lp.solve(x_k, radius, mu, correction=corr)
            if out is None:
                break
            x_trial = out[0]
            phi_soc, viol_soc = lp.merit(x_trial, mu)
            ratio_soc = (phi_k - phi_soc) / pred
            if ratio_soc <= ratio:
                break
            x_new, phi_new, viol_new, ratio = x_trial, phi_soc, viol_soc, ratio_soc
            ared = phi_k - phi_new
        accepted = ratio >= opt.accept_ratio
        step = float(np.abs(x_new[lp.volt] - x_k[lp.volt]).max())
        history.append(dict(iteration=it, merit=phi_new, infeasibility=viol_new, radius=radius,
                            ratio=float(ratio), accepted=bool(accepted)))
        if accepted:
            x_k, phi_k, viol_k = x_new, phi_new, viol_new
            if ratio >= opt.expand_ratio and step >= 0.99 * radius:
                radius = min(opt.trust_expand * radius, opt.trust_radius_max)
        else:
            radius = opt.trust_shrink * (step if step > 0 else radius)

        if pred <= tiny or (accepted and abs(ared) <= tiny):
            if viol_k <= opt.feasibility_tol * 1e-3 or _residual(program, x_k) <= opt.feasibility_tol:
                status = SUCCESS
                break
            if mu >= opt.penalty_max:
                status = INFEASIBLE
                break
            # stationary but infeasible: weight feasibility harder
            mu = min(10.0 * mu, opt.penalty_max)
            phi_k, viol_k = lp.merit(x_k, mu)
        if radius < opt.trust_radius_min:
            status = SUCCESS if _residual(program, x_k) <= opt.feasibility_tol else INFEASIBLE
            break

    return _package(program, x_k, status, it, history,
                    f"merit {phi_k:.9g}, product-row violation {viol_k:.3g} MW")


def _adapt_penalty(mu, lam, opt):
    """Penalty weight kept between 2x and 20x the largest multiplier.

    A multiplier at the weight itself means slacks are in use, which also
    triggers the increase. An oversized weight makes the merit function
    punish the tiny curvature error of every step and stalls the iteration.
    """
    if lam >= 0.5 * mu:
        return min(10.0 * lam, opt.penalty_max)
    if mu > 20.0 * lam:
        return max(4.0 * lam, opt.penalty_min)
    return mu


def _residual(program, x):
    return max(check_feasibility(program, x).values())


def _solve_fixed(program, opt, status, message=""):
    lp = _LinearisedLP(program, opt.lp_pivot_tol)
    x0 = _flat_point(program, opt.flat_start)
    out, msg = lp.solve(x0, None, 0.0, elastic=False)
    if out is None:
        return DesignSolution(program.case, INFEASIBLE, np.nan, np.nan, np.nan, np.nan, {}, {}, {},
                              {}, 1, np.full(program.n_vars, np.nan), [], f"{message} {msg}".strip(),
                              program)
    return _package(program, out[0], status, 1, [], message or msg)


def _package(program, x, status, iterations, history, message):
    econ = program.params.econ
    sz_e = program.block(x, "szE")
    sz_c = program.block(x, "szC")
    revenue = {k: float(program.revenue[k] @ x) for k in REVENUE_KINDS}
    traded = {k: float(v @ x) for k, v in program.traded.items()}
    costs = {
        "ess": econ.ess_unit_cost * sz_e,
        "cable": econ.cable_unit_cost * sz_c,
        "ess_after_credit": econ.tax_credit * econ.ess_unit_cost * sz_e,
        "cable_after_credit": econ.tax_credit * econ.cable_unit_cost * sz_c,
        "cable_installation": econ.cable_installation_cost,
        "converter": econ.converter_fixed_cost,
    }
    objective = program.objective(x)
    net = -objective - econ.cable_installation_cost - econ.converter_fixed_cost
    residuals = check_feasibility(program, x)
    if status == SUCCESS and max(residuals.values()) > 1e-6:
        status = INFEASIBLE
    return DesignSolution(program.case, status, sz_e, sz_c, objective, net, revenue, traded,
                          costs, residuals, iterations, x, history, message, program)


# serialisation ---------------------------------------------------------------

def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(w) for w in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def solution_to_dict(sol):
    doc = {
        "schema": sol.schema,
        "case": sol.case, "poi": sol.poi, "status": sol.status, "message": sol.message,
        "iterations": sol.iterations,
        "sz_e_mw": sol.sz_e, "sz_c_mw": sol.sz_c,
        "objective_usd": sol.objective, "net_profit_usd": sol.net_profit,
        "revenue_usd_per_day": sol.revenue, "traded_mwh_per_day": sol.traded,
        "costs_usd": sol.costs, "residuals": sol.residuals,
        "history": sol.history,
        "x": sol.x,
    }
    if sol.program is not None:
        p = sol.program
        doc["annuity_factor"] = p.annuity
        doc["blocks"] = {k: [off, list(shape)] for k, (off, shape) in p.blocks.items()}
    return _clean(doc)


def save_solution(sol, path):
    with open(path, "w") as fh:
        json.dump(solution_to_dict(sol), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_solution(path, program=None):
    """Read a solution file; attach ``program`` to enable :meth:`schedule`."""
    with open(path) as fh:
        doc = json.load(fh)
    schema = str(doc.get("schema", ""))
    if not schema.startswith(SOLUTION_SCHEMA.split("/")[0] + "/"):
        raise ValueError(f"{path}: not a solution file (schema {schema!r})")
    nan = lambda v: np.nan if v is None else v
    return DesignSolution(doc["case"], doc["status"], nan(doc["sz_e_mw"]), nan(doc["sz_c_mw"]),
                          nan(doc["objective_usd"]), nan(doc["net_profit_usd"]),
                          doc["revenue_usd_per_day"], doc["traded_mwh_per_day"], doc["costs_usd"],
                          doc["residuals"], doc["iterations"],
                          np.array([nan(v) for v in doc["x"]], dtype=float), doc["history"],
                          doc["message"], program, schema, doc.get("poi", ""))


__all__ = ["SolveOptions", "DesignSolution", "solve_slp", "pin_voltages", "save_solution",
           "load_solution", "solution_to_dict", "FAMILIES"]
