"""Occupancy-measure linear programs.

Three builders share one sparse container, :class:`OccupancyLp`:

* :func:`build_monolithic_lp` -- the centralized LP over a (joint) product.
* :func:`build_inner_primal` -- the partner's worst-case response to a fixed
  ego occupancy (a minimization).
* :func:`build_ag_lp` -- the ego's max-min problem with the inner
  minimization replaced by its LP dual, giving a single maximization over
  the ego occupancy ``x`` and the dual prices ``(lam1, lam2, lam3)``.

Writing ``M`` for the partner's occupancy-constraint matrix (rows ``(h, s)``,
columns ``(h, s, a)``; ``h = 1`` rows are the initial-state rows) the inner
problem is ``min rho(x).y  s.t.  M y = e_init,  C.y >= 1 - delta_p,  y >= 0``
and its dual is ``max lam(1, s_init) + (1 - delta_p) lam3`` subject to
``M^T lam + C lam3 <= rho(x)`` with ``lam`` free and ``lam3 >= 0``. The dual
price of row ``(1, s)`` is ``lam2(s)``, of row ``(h, s)`` for ``h >= 2`` it is
``lam1_h(s)``. Because ``rho(x) = R x`` is linear in ``x`` the coupled rows
``M^T lam + C lam3 - R x <= 0`` keep the problem linear.
"""
from __future__ import annotations

import json
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .mdp import JointReward, ProductCmdp

__all__ = [
    "OccupancyLp", "ColumnBlock", "Occ", "DualFlow", "DualInit", "DualSpec",
    "build_monolithic_lp", "build_inner_primal", "build_ag_lp", "lp_dimensions",
    "pin_columns", "occupancy_matrix", "pair_reward",
]

Occ = namedtuple("Occ", "agent h s a")
DualFlow = namedtuple("DualFlow", "h s")
DualInit = namedtuple("DualInit", "s")
DualSpec = namedtuple("DualSpec", "")


@dataclass(frozen=True)
class ColumnBlock:
    """A contiguous run of columns ``[start, start + prod(shape))``.

    ``kind`` is ``"occ"`` (shape ``(H+1, S, A)``), ``"dual"`` (shape
    ``(H+1, S)``; step 1 holds lam2, later steps lam1) or ``"spec"`` (lam3).
    """

    name: str
    kind: str
    start: int
    shape: tuple
    agent: int = 0

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def stop(self) -> int:
        return self.start + self.size

    def tag(self, col: int):
        idx = np.unravel_index(col - self.start, self.shape)
        if self.kind == "occ":
            h, s, a = (int(i) for i in idx)
            return Occ(self.agent, h + 1, s, a)
        if self.kind == "dual":
            h, s = (int(i) for i in idx)
            return DualInit(s) if h == 0 else DualFlow(h + 1, s)
        return DualSpec()

    def values(self, x: np.ndarray) -> np.ndarray:
        return x[self.start:self.stop].reshape(self.shape)


@dataclass(frozen=True, eq=False)
class OccupancyLp:
    """``sense`` c.x subject to ``A x (senses) b`` and ``lower <= x <= upper``.

    ``senses`` holds one of ``'='``, ``'<'`` (meaning <=) or ``'>'`` (>=) per row.
    """

    c: np.ndarray = field(repr=False)
    A: sp.csr_matrix = field(repr=False)
    senses: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    blocks: tuple = ()
    sense: str = "max"
    row_groups: tuple = ()  # (name, start, stop)

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_cons(self) -> int:
        return self.A.shape[0]

    def block(self, name: str) -> ColumnBlock:
        for blk in self.blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    def tag(self, col: int):
        for blk in self.blocks:
            if blk.start <= col < blk.stop:
                return blk.tag(col)
        raise IndexError(col)

    def registry_json(self) -> str:
        return json.dumps([{"name": b.name, "kind": b.kind, "start": b.start,
                            "shape": list(b.shape), "agent": b.agent} for b in self.blocks])

    def to_lp_text(self) -> str:
        """CPLEX-style LP text, for cross-checking with external solvers."""
        names = [f"x{j}" for j in range(self.n_vars)]

        def expr(idx, vals):
            if len(idx) == 0:
                return "0 x0"
            return " ".join(f"{'+' if v >= 0 else '-'} {abs(v):.17g} {names[j]}"
                            for j, v in zip(idx, vals))

        nz = np.flatnonzero(self.c)
        out = ["Maximize" if self.sense == "max" else "Minimize",
               f" obj: {expr(nz, self.c[nz])}", "Subject To"]
        ops = {"=": "=", "<": "<=", ">": ">="}
        A = self.A.tocsr()
        for i in range(self.n_cons):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            out.append(f" r{i}: {expr(A.indices[lo:hi], A.data[lo:hi])} "
                       f"{ops[self.senses[i]]} {self.b[i]:.17g}")
        out.append("Bounds")
        for j in range(self.n_vars):
            lo, hi = self.lower[j], self.upper[j]
            if np.isinf(lo) and np.isinf(hi):
                out.append(f" {names[j]} free")
            elif lo == 0 and np.isinf(hi):
                continue
            else:
                l = "-inf" if np.isinf(lo) else f"{lo:.17g}"
                u = "+inf" if np.isinf(hi) else f"{hi:.17g}"
                out.append(f" {l} <= {names[j]} <= {u}")
        out.append("End")
        return "\n".join(out) + "\n"


def lp_dimensions(lp: OccupancyLp) -> tuple[int, int]:
    """(variables, constraints); bounds are not constraints."""
    return lp.n_vars, lp.n_cons


def pin_columns(lp: OccupancyLp, block: str, values: np.ndarray) -> OccupancyLp:
    """Copy of ``lp`` with every column of ``block`` fixed to ``values``."""
    blk = lp.block(block)
    lower, upper = lp.lower.copy(), lp.upper.copy()
    v = np.asarray(values, dtype=float).ravel()
    lower[blk.start:blk.stop] = v
    upper[blk.start:blk.stop] = v
    return replace(lp, lower=lower, upper=upper)


# --------------------------------------------------------------- builders

def occupancy_matrix(p: ProductCmdp) -> sp.csr_matrix:
    """Rows ``(h, s)``: sum_a q_h(s, a) - sum P_{h-1}(s | s', a') q_{h-1}(s', a').

    Row ``(1, s)`` is the initial-distribution row; the right-hand side is
    the indicator of the initial state there and zero elsewhere.
    """
    Hx, S, A = p.horizon_x, p.n_states, p.n_actions
    n_occ = S * A
    rows, cols, data = [], [], []
    s_of = np.repeat(np.arange(S), A)
    for h in range(Hx):
        rows.append(h * S + s_of)
        cols.append(h * n_occ + np.arange(n_occ))
        data.append(np.ones(n_occ))
    for h in range(Hx - 1):
        coo = p.transitions[h].tocoo()
        rows.append((h + 1) * S + coo.col)
        cols.append(h * n_occ + coo.row)
        data.append(-coo.data)
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(Hx * S, Hx * n_occ))


def _init_rhs(p: ProductCmdp) -> np.ndarray:
    b = np.zeros(p.horizon_x * p.n_states)
    b[p.initial] = 1.0
    return b


def build_monolithic_lp(p: ProductCmdp, delta: float) -> OccupancyLp:
    """max r.q over occupancy measures q of ``p`` with c.q >= 1 - delta."""
    M = occupancy_matrix(p)
    n = M.shape[1]
    c_row = sp.csr_matrix(p.constraint.reshape(1, n))
    A = sp.vstack([M, c_row], format="csr")
    b = np.append(_init_rhs(p), 1.0 - delta)
    senses = np.array(["="] * M.shape[0] + [">"])
    block = ColumnBlock("q", "occ", 0, (p.horizon_x, p.n_states, p.n_actions))
    return OccupancyLp(p.reward.reshape(n).copy(), A, senses, b, np.zeros(n),
                       np.full(n, np.inf), (block,), "max",
                       (("occupancy", 0, M.shape[0]), ("spec", M.shape[0], M.shape[0] + 1)))


def pair_reward(ego: ProductCmdp, partner: ProductCmdp, reward: JointReward,
                ego_index: int = 0) -> np.ndarray:
    """Reward ``R[h-1, (s_e, a_e), (s_p, a_p)]`` on the two products' state-action pairs.

    ``reward`` is indexed (agent 1, agent 2); ``ego_index`` says which one
    the ego is.
    """
    r = reward if ego_index == 0 else reward.swapped()
    if r.horizon_x != ego.horizon_x:
        raise ValueError("reward horizon does not match the products")
    full = r.full(ego.n_actions, partner.n_actions)  # (Hx, Se, Sp, Ae, Ap)
    full = np.repeat(np.repeat(full, ego.n_q, axis=1), partner.n_q, axis=2)
    Hx = ego.horizon_x
    return full.transpose(0, 1, 3, 2, 4).reshape(
        Hx, ego.n_states * ego.n_actions, partner.n_states * partner.n_actions)


def build_inner_primal(partner: ProductCmdp, x_fixed: np.ndarray, reward: JointReward,
                       delta_partner: float, ego: ProductCmdp, ego_index: int = 0) -> OccupancyLp:
    """min_y sum_h rho_h . y_h with rho_h = R_h^T x_h over partner occupancies y."""
    Hx = partner.horizon_x
    x = np.asarray(x_fixed, dtype=float).reshape(Hx, -1)
    R = pair_reward(ego, partner, reward, ego_index)
    rho = np.einsum("hi,hij->hj", x, R)
    M = occupancy_matrix(partner)
    n = M.shape[1]
    A = sp.vstack([M, sp.csr_matrix(partner.constraint.reshape(1, n))], format="csr")
    b = np.append(_init_rhs(partner), 1.0 - delta_partner)
    senses = np.array(["="] * M.shape[0] + [">"])
    block = ColumnBlock("y", "occ", 0, (Hx, partner.n_states, partner.n_actions), agent=1)
    return OccupancyLp(rho.ravel(), A, senses, b, np.zeros(n), np.full(n, np.inf),
                       (block,), "min",
                       (("occupancy", 0, M.shape[0]), ("spec", M.shape[0], M.shape[0] + 1)))


def _step_baseline(R: np.ndarray) -> np.ndarray:
    """Most frequent coefficient of each step's reward block."""
    out = np.empty(R.shape[0])
    for h in range(R.shape[0]):
        vals, counts = np.unique(R[h], return_counts=True)
        out[h] = vals[np.argmax(counts)]
    return out


def build_ag_lp(ego: ProductCmdp, partner: ProductCmdp, reward: JointReward,
                delta_ego: float, delta_partner: float, ego_index: int = 0,
                sparsify: bool = True) -> OccupancyLp:
    """Single-maximization AG problem for the ego agent.

    Columns: ego occupancy ``x`` (H+1, S_e, A_e), dual prices (H+1, S_p)
    with step 1 holding lam2 and steps 2.. holding lam1, then lam3.
    Rows: ego occupancy rows, the ego spec row, then one dual-feasibility row
    per partner ``(h, s, a)`` in lexicographic order.

    With ``sparsify`` the coupling term ``R_h x_h`` is written as
    ``k_h + (R_h - k_h) x_h`` where ``k_h`` is the most common entry of
    ``R_h``; the two agree on every feasible ``x`` because the occupancy
    rows force ``sum x_h = 1``. For rewards like "2 unless the agents
    share a cell" this removes nearly all coupling nonzeros.
    """
    if ego.horizon_x != partner.horizon_x:
        raise ValueError("ego and partner horizons differ")
    Hx = ego.horizon_x
    Me = occupancy_matrix(ego)
    Mp = occupancy_matrix(partner)
    nx = Me.shape[1]
    n_dual = Mp.shape[0]
    n_ell = Mp.shape[1]
    n = nx + n_dual + 1

    R = pair_reward(ego, partner, reward, ego_index)
    kappa = _step_baseline(R) if sparsify else np.zeros(Hx)
    Se_A = ego.n_states * ego.n_actions
    Sp_A = partner.n_states * partner.n_actions
    # -(R_h - k_h)^T x_h on the ell rows of step h
    blocks = []
    for h in range(Hx):
        blk = sp.coo_matrix(kappa[h] - R[h].T)
        blk.eliminate_zeros()
        blocks.append((blk.row + h * Sp_A, blk.col + h * Se_A, blk.data))
    Rx = sp.csr_matrix((np.concatenate([b[2] for b in blocks]),
                        (np.concatenate([b[0] for b in blocks]),
                         np.concatenate([b[1] for b in blocks]))), shape=(n_ell, nx))
    C = sp.csr_matrix(partner.constraint.reshape(n_ell, 1))

    top = sp.hstack([Me, sp.csr_matrix((Me.shape[0], n_dual + 1))])
    z1 = sp.hstack([sp.csr_matrix(ego.constraint.reshape(1, nx)),
                    sp.csr_matrix((1, n_dual + 1))])
    ell = sp.hstack([Rx, Mp.T, C])
    A = sp.vstack([top, z1, ell], format="csr")

    b = np.concatenate([_init_rhs(ego), [1.0 - delta_ego], np.repeat(kappa, Sp_A)])
    senses = np.array(["="] * Me.shape[0] + [">"] + ["<"] * n_ell)
    c = np.zeros(n)
    c[nx + partner.initial] = 1.0
    c[-1] = 1.0 - delta_partner
    lower = np.concatenate([np.zeros(nx), np.full(n_dual, -np.inf), [0.0]])
    blocks_ = (
        ColumnBlock("x", "occ", 0, (Hx, ego.n_states, ego.n_actions), agent=ego_index),
        ColumnBlock("lam", "dual", nx, (Hx, partner.n_states), agent=1 - ego_index),
        ColumnBlock("lam3", "spec", nx + n_dual, (1,), agent=1 - ego_index),
    )
    r0 = Me.shape[0]
    groups = (("occupancy", 0, r0), ("spec", r0, r0 + 1), ("dual", r0 + 1, r0 + 1 + n_ell))
    return OccupancyLp(c, A, senses, b, lower, np.full(n, np.inf), blocks_, "max", groups)
