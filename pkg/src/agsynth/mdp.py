"""Labeled finite-horizon MDPs, two-agent joint MDPs and constrained products
with a DFA.

Transition kernels are stored per step as CSR matrices of shape
``(n_states * n_actions, n_states)``; row ``s * n_actions + a`` holds
``P_h(. | s, a)``. Time-homogeneous models repeat the same matrix object,
which lets the derived constructions reuse work.

Steps ``h`` are 1-based in the public API and 0-based in array indices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp

from .automata import Dfa, letter_mask

__all__ = [
    "LabeledMdp", "JointMdp", "ProductCmdp", "JointReward", "SizeReport",
    "StochasticityViolation", "NegativeProbability", "LabelViolation",
    "HorizonMismatch", "ApOverlap", "ApMismatch",
    "validate", "join", "product_cmdp", "size_report", "mdp_to_json", "mdp_from_json",
]

ROW_TOL = 1e-9


class HorizonMismatch(ValueError):
    pass


class ApOverlap(ValueError):
    pass


class ApMismatch(ValueError):
    pass


@dataclass(frozen=True)
class StochasticityViolation:
    h: int
    s: int
    a: int
    total: float


@dataclass(frozen=True)
class NegativeProbability:
    h: int
    s: int
    a: int
    value: float


@dataclass(frozen=True)
class LabelViolation:
    s: int
    atoms: frozenset


@dataclass(frozen=True, eq=False)
class LabeledMdp:
    states: tuple
    actions: tuple
    horizon: int
    initial: int
    transitions: tuple  # horizon CSR matrices, (S*A, S)
    ap: tuple
    labels: tuple  # frozenset of atoms per state

    def __post_init__(self):
        S, A = len(self.states), len(self.actions)
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if len(self.transitions) != self.horizon:
            raise ValueError(f"need {self.horizon} transition matrices, got {len(self.transitions)}")
        for P in self.transitions:
            if P.shape != (S * A, S):
                raise ValueError(f"transition matrix shape {P.shape} != {(S * A, S)}")
        if len(self.labels) != S:
            raise ValueError("one label set per state required")
        if not 0 <= self.initial < S:
            raise ValueError("initial state out of range")
        object.__setattr__(self, "ap", tuple(sorted(self.ap)))
        object.__setattr__(self, "labels", tuple(frozenset(l) for l in self.labels))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def P(self, h: int) -> sp.csr_matrix:
        """Kernel used on the move from step ``h`` to ``h + 1`` (1-based)."""
        return self.transitions[h - 1]

    def prob(self, h: int, s: int, a: int, s_next: int) -> float:
        return float(self.transitions[h - 1][s * self.n_actions + a, s_next])

    def dense(self, h: int) -> np.ndarray:
        """``P_h`` as an array indexed ``[s, a, s']``."""
        S, A = self.n_states, self.n_actions
        return self.transitions[h - 1].toarray().reshape(S, A, S)

    def label_masks(self, ap: Sequence[str]) -> np.ndarray:
        return np.array([letter_mask(ap, l) for l in self.labels], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class JointMdp(LabeledMdp):
    """Two-agent composition. ``states[k]`` is ``(s1, s2)`` with index
    ``s1 * |S2| + s2``; actions likewise."""

    components: tuple = ()


@dataclass(frozen=True, eq=False)
class JointReward:
    """``values[h-1, s1, s2, a1, a2]`` for product steps ``h in [1, H+1]``.

    ``values`` may be a broadcast view (e.g. trailing action axes of size
    1 for state-only rewards).
    """

    values: np.ndarray = field(repr=False)

    @classmethod
    def state_based(cls, table, horizon_x: int, steps: int | None = None) -> "JointReward":
        """Reward ``table[s1, s2]`` at every step ``h <= steps`` (default all
        ``horizon_x`` product steps), independent of actions."""
        table = np.asarray(table, dtype=float)
        steps = horizon_x if steps is None else steps
        if not 0 <= steps <= horizon_x:
            raise ValueError("steps must lie in [0, horizon_x]")
        active = (np.arange(horizon_x) < steps).astype(float)
        return cls(active[:, None, None, None, None] * table[None, :, :, None, None])

    @property
    def horizon_x(self) -> int:
        return self.values.shape[0]

    @property
    def state_only(self) -> bool:
        return self.values.shape[3] == 1 and self.values.shape[4] == 1

    def full(self, n_actions1: int, n_actions2: int) -> np.ndarray:
        H, S1, S2 = self.values.shape[:3]
        return np.broadcast_to(self.values, (H, S1, S2, n_actions1, n_actions2))

    def swapped(self) -> "JointReward":
        """Same reward with the agents' roles exchanged."""
        return JointReward(self.values.transpose(0, 2, 1, 4, 3))


# ------------------------------------------------------------- validation

def validate(m: LabeledMdp) -> list:
    """Stochasticity and labelling defects of ``m``; empty when well formed."""
    out = []
    A = m.n_actions
    seen = {}
    for h, P in enumerate(m.transitions, start=1):
        key = id(P)
        if key in seen:
            out.extend(_with_step(v, h) for v in seen[key])
            continue
        found = []
        neg = P.tocoo()
        for r, v in zip(neg.row[neg.data < 0], neg.data[neg.data < 0]):
            found.append(NegativeProbability(h, int(r // A), int(r % A), float(v)))
        sums = np.asarray(P.sum(axis=1)).ravel()
        for r in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL):
            found.append(StochasticityViolation(h, int(r // A), int(r % A), float(sums[r])))
        seen[key] = found
        out.extend(found)
    ap = set(m.ap)
    for s, lab in enumerate(m.labels):
        if not lab <= ap:
            out.append(LabelViolation(s, frozenset(lab - ap)))
    return out


def _with_step(v, h):
    if isinstance(v, StochasticityViolation):
        return StochasticityViolation(h, v.s, v.a, v.total)
    if isinstance(v, NegativeProbability):
        return NegativeProbability(h, v.s, v.a, v.value)
    return v


# ------------------------------------------------------------------- join

def join(m1: LabeledMdp, m2: LabeledMdp) -> JointMdp:
    """Cartesian composition of two independently evolving agents."""
    if m1.horizon != m2.horizon:
        raise HorizonMismatch(f"horizons differ: {m1.horizon} vs {m2.horizon}")
    overlap = set(m1.ap) & set(m2.ap)
    if overlap:
        raise ApOverlap(f"shared atoms {sorted(overlap)}")
    S1, S2, A1, A2 = m1.n_states, m2.n_states, m1.n_actions, m2.n_actions

    # kron rows come out as (s1, a1, s2, a2); the joint order is (s1, s2, a1, a2)
    s1, s2, a1, a2 = np.meshgrid(np.arange(S1), np.arange(S2), np.arange(A1),
                                 np.arange(A2), indexing="ij")
    perm = (((s1 * A1 + a1) * S2 + s2) * A2 + a2).ravel()

    cache = {}
    kernels = []
    for P1, P2 in zip(m1.transitions, m2.transitions):
        key = (id(P1), id(P2))
        if key not in cache:
            cache[key] = sp.kron(P1, P2, format="csr")[perm]
        kernels.append(cache[key])

    states = tuple((x, y) for x in m1.states for y in m2.states)
    actions = tuple((x, y) for x in m1.actions for y in m2.actions)
    labels = tuple(l1 | l2 for l1 in m1.labels for l2 in m2.labels)
    return JointMdp(states, actions, m1.horizon, m1.initial * S2 + m2.initial,
                    tuple(kernels), tuple(sorted(set(m1.ap) | set(m2.ap))), labels,
                    components=(m1, m2))


# ---------------------------------------------------------------- product

@dataclass(frozen=True, eq=False)
class ProductCmdp:
    """Constrained product of an MDP with a DFA.

    Product state ``(s, q)`` has index ``s * |Q| + q``. ``reward`` and
    ``constraint`` are arrays ``[h-1, state, action]`` over the
    ``horizon_x = H + 1`` product steps.
    """

    mdp: LabeledMdp
    dfa: Dfa
    transitions: tuple = field(repr=False)  # H CSR matrices, (Sx*A, Sx)
    reward: np.ndarray = field(repr=False)
    constraint: np.ndarray = field(repr=False)
    dfa_next: np.ndarray = field(repr=False)  # q' = dfa_next[s, q]

    @property
    def n_q(self) -> int:
        return self.dfa.n_states

    @property
    def n_states(self) -> int:
        return self.mdp.n_states * self.dfa.n_states

    @property
    def n_actions(self) -> int:
        return self.mdp.n_actions

    @property
    def horizon_x(self) -> int:
        return self.mdp.horizon + 1

    @property
    def initial(self) -> int:
        return self.mdp.initial * self.n_q + self.dfa.q0

    def state(self, s: int, q: int) -> int:
        return s * self.n_q + q

    def split(self, x: int) -> tuple[int, int]:
        return divmod(x, self.n_q)

    def P(self, h: int) -> sp.csr_matrix:
        return self.transitions[h - 1]


def product_cmdp(m: LabeledMdp, d: Dfa, reward: np.ndarray | None = None) -> ProductCmdp:
    """Synchronous product of ``m`` and ``d``.

    ``reward`` is an optional objective over the underlying MDP,
    ``reward[h-1, s, a]`` for ``h in [1, H+1]``; it is copied to every DFA
    state. The DFA reads ``L(s)`` on the move out of ``(s, q)``, so the
    terminal product step holds the run's state after the full H-letter word.
    """
    missing = set(d.ap) - set(m.ap)
    if missing:
        raise ApMismatch(f"DFA atoms {sorted(missing)} are not in the MDP's AP")
    S, A, Q = m.n_states, m.n_actions, d.n_states
    Hx = m.horizon + 1
    masks = m.label_masks(d.ap)
    qnext = d.delta[:, masks].T.copy()  # (S, Q)

    cache = {}
    kernels = []
    for P in m.transitions:
        if id(P) not in cache:
            coo = P.tocoo()
            s, a = np.divmod(coo.row, A)
            q = np.arange(Q)
            rows = ((s[:, None] * Q + q[None, :]) * A + a[:, None]).ravel()
            cols = (coo.col[:, None] * Q + qnext[s][:, :]).ravel()
            data = np.repeat(coo.data, Q)
            cache[id(P)] = sp.csr_matrix((data, (rows, cols)), shape=(S * Q * A, S * Q))
        kernels.append(cache[id(P)])

    if reward is None:
        r = np.zeros((Hx, S * Q, A))
    else:
        reward = np.asarray(reward, dtype=float)
        if reward.shape != (Hx, S, A):
            raise ValueError(f"reward shape {reward.shape} != {(Hx, S, A)}")
        r = np.repeat(reward, Q, axis=1)

    c = np.zeros((Hx, S * Q, A))
    acc = d.accepting_mask()
    c[Hx - 1] = np.tile(acc, S)[:, None]
    return ProductCmdp(m, d, tuple(kernels), r, c, qnext)


# ------------------------------------------------------------------ sizes

@dataclass(frozen=True)
class SizeReport:
    monolithic: tuple[int, int]
    ag1: tuple[int, int]
    ag2: tuple[int, int]


def size_report(m1: LabeledMdp, m2: LabeledMdp, d1: Dfa, d2: Dfa, dJ: Dfa,
                horizon: int) -> SizeReport:
    """(variables, constraints) of every LP, nonnegativity bounds excluded."""
    Hx = horizon + 1
    S1, S2, A1, A2 = m1.n_states, m2.n_states, m1.n_actions, m2.n_actions
    Q1, Q2, QJ = d1.n_states, d2.n_states, dJ.n_states
    mono = (Hx * S1 * S2 * QJ * A1 * A2, Hx * S1 * S2 * QJ + 1)

    def ag(Se, Qe, Ae, Sp, Qp, Ap):
        return (Hx * Se * Qe * Ae + Hx * Sp * Qp + 1,
                Hx * Se * Qe + 1 + Hx * Sp * Qp * Ap)

    return SizeReport(mono, ag(S1, Q1, A1, S2, Q2, A2), ag(S2, Q2, A2, S1, Q1, A1))


# ------------------------------------------------------------------- JSON

def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x


def _from_jsonable(x) -> Hashable:
    if isinstance(x, list):
        return tuple(_from_jsonable(v) for v in x)
    return x


def mdp_to_json(m: LabeledMdp) -> str:
    """Sparse quintuple form ``[h, s, a, s', p]`` with 1-based ``h``."""
    A = m.n_actions
    quints = []
    for h, P in enumerate(m.transitions, start=1):
        coo = P.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, p in zip(coo.row[order], coo.col[order], coo.data[order]):
            quints.append([h, int(r // A), int(r % A), int(c), float(p)])
    return json.dumps({
        "states": [_jsonable(s) for s in m.states],
        "actions": [_jsonable(a) for a in m.actions],
        "horizon": m.horizon,
        "initial": m.initial,
        "transitions": quints,
        "ap": list(m.ap),
        "labels": [sorted(l) for l in m.labels],
    })


def mdp_from_json(text: str) -> LabeledMdp:
    obj = json.loads(text)
    states = tuple(_from_jsonable(s) for s in obj["states"])
    actions = tuple(_from_jsonable(a) for a in obj["actions"])
    S, A, H = len(states), len(actions), int(obj["horizon"])
    rows = [[] for _ in range(H)]
    for h, s, a, s2, p in obj["transitions"]:
        rows[h - 1].append((s * A + a, s2, p))
    kernels = []
    for entries in rows:
        if entries:
            r, c, p = zip(*entries)
        else:
            r, c, p = (), (), ()
        kernels.append(sp.csr_matrix((p, (r, c)), shape=(S * A, S)))
    return LabeledMdp(states, actions, H, int(obj["initial"]), tuple(kernels),
                      tuple(obj["ap"]), tuple(frozenset(l) for l in obj["labels"]))
