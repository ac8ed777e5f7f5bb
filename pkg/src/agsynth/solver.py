"""LP solving behind a narrow contract.

Two backends:

* ``"highs"`` (default) -- the HiGHS library through ``highspy``. With
  ``method="auto"`` small problems go to the dual simplex (vertex solutions)
  and large ones to the interior point method without crossover: the
  occupancy LPs here have hundreds of thousands of columns, and crossover
  costs far more than the interior solve while adding nothing the policy
  extraction needs.
* ``"simplex"`` -- a dense two-phase revised simplex with Bland's rule. It
  is self-contained and exact enough for small instances, and serves as an
  independent cross-check of the default backend.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import highspy
import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .lp import OccupancyLp

__all__ = ["SolverConfig", "SolveReport", "solve", "OPTIMAL", "INFEASIBLE",
           "UNBOUNDED", "ITERATION_LIMIT", "TIME_LIMIT", "NUMERICAL"]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"
TIME_LIMIT = "TimeLimit"
NUMERICAL = "NumericalError"

# auto method: simplex up to this many nonzeros, interior point above
AUTO_SIMPLEX_NNZ = 50_000


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-8
    max_iterations: int | None = None
    time_limit: float | None = None
    backend: str = "highs"
    method: str = "auto"  # auto, simplex, ipm or pdlp (HiGHS backend only)
    crossover: bool = False  # after ipm

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.backend not in ("highs", "simplex"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.method not in ("auto", "simplex", "ipm", "pdlp"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveReport:
    status: str
    objective: float | None
    x: np.ndarray | None = field(default=None, repr=False)
    duals: np.ndarray | None = field(default=None, repr=False)  # row prices, caller's sense
    dual_objective: float | None = None
    seconds: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def block(self, lp: OccupancyLp, name: str) -> np.ndarray:
        return lp.block(name).values(self.x)


def solve(lp: OccupancyLp, cfg: SolverConfig | None = None) -> SolveReport:
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if cfg.backend == "highs":
        rep = _solve_highs(lp, cfg)
    else:
        rep = _solve_simplex(lp, cfg)
    rep.seconds = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------------ HiGHS

_STATUS = {
    highspy.HighsModelStatus.kOptimal: OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: UNBOUNDED,
    highspy.HighsModelStatus.kTimeLimit: TIME_LIMIT,
    highspy.HighsModelStatus.kIterationLimit: ITERATION_LIMIT,
}


def _highs_model(lp: OccupancyLp, sign: float) -> highspy.HighsLp:
    inf = highspy.kHighsInf
    A = lp.A.tocsc()
    A.sort_indices()
    m = highspy.HighsLp()
    m.num_col_, m.num_row_ = A.shape[1], A.shape[0]
    m.col_cost_ = sign * np.asarray(lp.c, dtype=float)
    m.col_lower_ = np.where(np.isinf(lp.lower), -inf, lp.lower)
    m.col_upper_ = np.where(np.isinf(lp.upper), inf, lp.upper)
    m.row_lower_ = np.where(lp.senses == "<", -inf, lp.b).astype(float)
    m.row_upper_ = np.where(lp.senses == ">", inf, lp.b).astype(float)
    m.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    m.a_matrix_.start_ = A.indptr
    m.a_matrix_.index_ = A.indices
    m.a_matrix_.value_ = A.data
    return m


def _run_highs(model, cfg: SolverConfig, method: str, presolve: bool = True,
               crossover: bool = False):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("primal_feasibility_tolerance", cfg.feasibility_tol)
    if method == "ipm":
        # a tight dual feasibility target makes IPX stop "imprecise" on these LPs
        h.setOptionValue("ipm_optimality_tolerance", cfg.optimality_tol)
    else:
        h.setOptionValue("dual_feasibility_tolerance", cfg.optimality_tol)
    h.setOptionValue("solver", method)
    h.setOptionValue("run_crossover", "on" if crossover else "off")
    h.setOptionValue("presolve", "on" if presolve else "off")
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("threads", 1)
    if cfg.time_limit is not None:
        h.setOptionValue("time_limit", float(cfg.time_limit))
    if cfg.max_iterations is not None:
        for opt in ("simplex_iteration_limit", "ipm_iteration_limit", "pdlp_iteration_limit"):
            h.setOptionValue(opt, int(cfg.max_iterations))
    h.passModel(model)
    h.run()
    return h, h.getModelStatus()


def _solve_highs(lp: OccupancyLp, cfg: SolverConfig) -> SolveReport:
    sign = -1.0 if lp.sense == "max" else 1.0  # HiGHS minimizes
    method = cfg.method
    if method == "auto":
        method = "simplex" if lp.A.nnz <= AUTO_SIMPLEX_NNZ else "ipm"
    model = _highs_model(lp, sign)
    h, st = _run_highs(model, cfg, method, crossover=cfg.crossover)
    if st == highspy.HighsModelStatus.kUnknown and method == "ipm" and not cfg.crossover:
        # interior solve could not certify its point; let crossover finish it
        h, st = _run_highs(model, cfg, method, crossover=True)
    if st == highspy.HighsModelStatus.kUnboundedOrInfeasible:
        # presolve cannot tell which; the simplex without it can
        h, st = _run_highs(model, cfg, "simplex", presolve=False)
    status = _STATUS.get(st, NUMERICAL)
    message = h.modelStatusToString(st)
    if status != OPTIMAL:
        return SolveReport(status, None, message=message)

    sol = h.getSolution()
    x = np.asarray(sol.col_value)
    y = np.asarray(sol.row_dual)
    z = np.asarray(sol.col_dual)
    # dual objective of the minimization: each price times its active bound
    rl, ru = np.asarray(model.row_lower_), np.asarray(model.row_upper_)
    cl, cu = np.asarray(model.col_lower_), np.asarray(model.col_upper_)
    row_bound = np.where(y > 0, rl, ru)
    col_bound = np.where(z > 0, cl, cu)
    dual_obj = float(np.dot(np.where(y != 0, y, 0.0), np.where(np.isfinite(row_bound), row_bound, 0.0))
                     + np.dot(np.where(z != 0, z, 0.0), np.where(np.isfinite(col_bound), col_bound, 0.0)))
    return SolveReport(OPTIMAL, float(lp.c @ x), x, sign * y, sign * dual_obj, message=message)


# --------------------------------------------------------- revised simplex

class _Limit(Exception):
    def __init__(self, status):
        self.status = status


def _standard_form(lp: OccupancyLp):
    """min c.z s.t. A z = b, z >= 0, b >= 0, with a map back to lp columns.

    Column j of the original problem becomes ``lower + z_j`` (finite lower),
    ``upper - z_j`` (only an upper bound) or ``z_j+ - z_j-`` (free). A
    finite upper bound on a lower-bounded column adds a slack row.
    """
    A = lp.A.toarray()
    m, n = A.shape
    sign = -1.0 if lp.sense == "max" else 1.0
    cost = sign * lp.c
    b = lp.b.astype(float).copy()
    cols, costs, back = [], [], []  # back: (orig col, coefficient)
    offset = np.zeros(n)
    extra_rows = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(A[:, j]); costs.append(cost[j]); back.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-A[:, j]); costs.append(-cost[j]); back.append((j, -1.0))
        else:
            cols.append(A[:, j]); costs.append(cost[j]); back.append((j, 1.0))
            cols.append(-A[:, j]); costs.append(-cost[j]); back.append((j, -1.0))
    b = b - A @ offset
    const = float(cost @ offset)
    M = np.column_stack(cols) if cols else np.zeros((m, 0))
    senses = list(lp.senses)
    # slack / surplus columns
    nz = M.shape[1]
    for i, s in enumerate(senses):
        if s in "<>":
            col = np.zeros(m)
            col[i] = 1.0 if s == "<" else -1.0
            M = np.column_stack([M, col]); costs.append(0.0); back.append((-1, 0.0))
    for k, (zcol, cap) in enumerate(extra_rows):
        row = np.zeros(M.shape[1])
        row[zcol] = 1.0
        M = np.vstack([M, row])
        M = np.column_stack([M, np.zeros(M.shape[0])])
        M[-1, -1] = 1.0
        costs.append(0.0); back.append((-1, 0.0))
        b = np.append(b, cap)
    neg = b < 0
    M[neg] *= -1
    b[neg] *= -1
    return M, b, np.array(costs), back, offset, const, sign, nz


def _revised_simplex(A, b, c, basis, max_iter, deadline, tol, bland_after=50):
    """Primal simplex from a feasible basis. Returns (basis, status).

    Pricing is Dantzig's most negative reduced cost; after ``bland_after``
    consecutive degenerate pivots it switches to Bland's rule (lowest index
    entering and leaving) until the objective moves again, which rules out
    cycling.
    """
    m, n = A.shape
    it = 0
    degenerate = 0
    while True:
        if max_iter is not None and it >= max_iter:
            raise _Limit(ITERATION_LIMIT)
        if deadline is not None and time.perf_counter() > deadline:
            raise _Limit(TIME_LIMIT)
        it += 1
        lu = lu_factor(A[:, basis])
        xB = lu_solve(lu, b)
        y = lu_solve(lu, c[basis], trans=1)
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        candidates = np.flatnonzero(reduced < -tol)
        if len(candidates) == 0:
            return basis, OPTIMAL
        bland = degenerate >= bland_after
        e = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])
        d = lu_solve(lu, A[:, e])
        pos = d > tol
        if not pos.any():
            return basis, UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * (1 + abs(best)))
        leave = min(ties, key=lambda i: basis[i]) if bland else max(ties, key=lambda i: d[i])
        degenerate = degenerate + 1 if best <= tol else 0
        basis = basis.copy()
        basis[leave] = e


def _solve_simplex(lp: OccupancyLp, cfg: SolverConfig) -> SolveReport:
    tol = cfg.feasibility_tol
    deadline = None if cfg.time_limit is None else time.perf_counter() + cfg.time_limit
    A, b, c, back, offset, const, sign, _ = _standard_form(lp)
    m, n = A.shape
    try:
        # phase I with one artificial per row
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis = np.arange(n, n + m)
        basis, _ = _revised_simplex(A1, b, c1, basis, cfg.max_iterations, deadline, tol)
        xB = np.linalg.solve(A1[:, basis], b)
        if float(c1[basis] @ xB) > 1e-7 * (1 + np.abs(b).max(initial=0)):
            return SolveReport(INFEASIBLE, None)
        # drive zero-level artificials out; drop rows that are redundant
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] < n:
                continue
            Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[i])
            row = Binv_row @ A
            cand = [j for j in np.flatnonzero(np.abs(row) > 1e-9) if j not in basis]
            if cand:
                basis[i] = cand[0]
            else:
                keep[i] = False
        A2, b2, basis2 = A[keep], b[keep], basis[keep]
        basis2, status = _revised_simplex(A2, b2, c, basis2, cfg.max_iterations, deadline, tol)
    except _Limit as lim:
        return SolveReport(lim.status, None)
    except np.linalg.LinAlgError as exc:
        return SolveReport(NUMERICAL, None, message=str(exc))
    if status == UNBOUNDED:
        return SolveReport(UNBOUNDED, None)

    z = np.zeros(n)
    z[basis2] = np.linalg.solve(A2[:, basis2], b2)
    x = offset.copy()
    for k, (j, coef) in enumerate(back):
        if j >= 0:
            x[j] += coef * z[k]
    obj = float(lp.c @ x)
    y_std = np.linalg.solve(A2[:, basis2].T, c[basis2])
    # rows that were flipped to make b >= 0 flip their price back
    duals = np.zeros(lp.n_cons)
    std_rows = np.flatnonzero(keep)
    flip = np.where((lp.b - lp.A.toarray() @ offset) < 0, -1.0, 1.0)
    for k, i in enumerate(std_rows):
        if i < lp.n_cons:
            duals[i] = sign * flip[i] * y_std[k]
    dual_obj = sign * (float(b2 @ y_std) + const)
    return SolveReport(OPTIMAL, obj, x, duals, dual_obj)
