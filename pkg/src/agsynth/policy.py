"""Policies induced by occupancy measures, and their evaluation.

Exact evaluation is a forward pass over the distribution of ``(s, q)``
computed straight from the MDP kernels and the DFA (it does not reuse the
product construction, so it can check it). For two agents running
decentralized policies the chains are independent, so the joint
distribution at each step is the outer product of the marginals.

Monte Carlo simulation draws episode ``i`` from its own Philox substream
spawned from the seed, so any episode can be replayed on its own.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .automata import Dfa
from .mdp import JointReward, LabeledMdp, ProductCmdp

__all__ = [
    "Policy", "ExactReport", "SimReport", "NegativeMass", "DimensionMismatch",
    "extract_policy", "forward_occupancy", "evaluate_exact", "evaluate_centralized",
    "simulate", "simulate_centralized", "episode_uniforms",
]

MASS_EPS = 1e-12


class NegativeMass(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Policy:
    """``probs[h-1, x, a]`` over product states ``x = s * n_q + q``."""

    probs: np.ndarray = field(repr=False)
    n_q: int = 1

    @property
    def horizon_x(self) -> int:
        return self.probs.shape[0]

    def dist(self, h: int, s: int, q: int) -> np.ndarray:
        return self.probs[h - 1, s * self.n_q + q]


def extract_policy(occ, p: ProductCmdp) -> Policy:
    """pi_h(a | x) = q_h(x, a) / sum_b q_h(x, b); uniform where that mass is 0."""
    occ = np.asarray(occ, dtype=float).reshape(p.horizon_x, p.n_states, p.n_actions)
    if occ.min(initial=0.0) < -1e-6:
        raise NegativeMass(f"occupancy entry {occ.min():.3g} < -1e-6")
    occ = np.clip(occ, 0.0, None)
    mass = occ.sum(axis=2, keepdims=True)
    uniform = np.full_like(occ, 1.0 / p.n_actions)
    probs = np.where(mass > MASS_EPS, occ / np.where(mass > MASS_EPS, mass, 1.0), uniform)
    return Policy(probs, p.n_q)


# -------------------------------------------------------------- exact DP

def forward_occupancy(m: LabeledMdp, d: Dfa, pi: Policy) -> tuple[np.ndarray, float]:
    """Occupancy ``[h-1, s*Q+q, a]`` of ``pi`` and its acceptance probability."""
    S, A, Q = m.n_states, m.n_actions, d.n_states
    Hx = m.horizon + 1
    if pi.probs.shape != (Hx, S * Q, A):
        raise DimensionMismatch(f"policy shape {pi.probs.shape} != {(Hx, S * Q, A)}")
    qnext = d.delta[:, m.label_masks(d.ap)].T  # (S, Q)
    rows = np.arange(S)[:, None]
    cols = np.arange(A)[None, :]
    mu = np.zeros((S, Q))
    mu[m.initial, d.q0] = 1.0
    occ = np.empty((Hx, S * Q, A))
    for h in range(Hx):
        x = mu.reshape(S * Q, 1) * pi.probs[h]
        occ[h] = x
        if h == Hx - 1:
            break
        xq = x.reshape(S, Q, A)
        moved = np.zeros((S, A, Q))
        for q in range(Q):
            np.add.at(moved, (rows, cols, qnext[:, q][:, None]), xq[:, q, :])
        mu = np.asarray(m.transitions[h].T @ moved.reshape(S * A, Q))
    acc = float(mu[:, d.accepting_mask()].sum())
    return occ, acc


@dataclass
class ExactReport:
    reward: float
    sat1: float | None
    sat2: float | None
    sat_joint: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _marginal(occ: np.ndarray, S: int, Q: int, A: int) -> np.ndarray:
    return occ.reshape(occ.shape[0], S, Q, A).sum(axis=2)


def evaluate_exact(m1: LabeledMdp, m2: LabeledMdp, d1: Dfa, d2: Dfa, pi1: Policy,
                   pi2: Policy, reward: JointReward) -> ExactReport:
    """Expected joint reward and satisfaction probabilities of ``(pi1, pi2)``."""
    occ1, acc1 = forward_occupancy(m1, d1, pi1)
    occ2, acc2 = forward_occupancy(m2, d2, pi2)
    if reward.horizon_x != occ1.shape[0]:
        raise DimensionMismatch("reward horizon does not match the policies")
    x1 = _marginal(occ1, m1.n_states, d1.n_states, m1.n_actions)
    x2 = _marginal(occ2, m2.n_states, d2.n_states, m2.n_actions)
    if reward.state_only:
        r = reward.values[..., 0, 0]
        total = np.einsum("hi,hj,hij->", x1.sum(2), x2.sum(2), r)
    else:
        r = reward.full(m1.n_actions, m2.n_actions)
        total = np.einsum("hia,hjb,hijab->", x1, x2, r)
    return ExactReport(float(total), acc1, acc2, acc1 * acc2)


def evaluate_centralized(m: LabeledMdp, d: Dfa, pi: Policy, reward: np.ndarray) -> ExactReport:
    """Evaluate a policy on one (possibly joint) MDP; ``reward[h-1, s, a]``."""
    occ, acc = forward_occupancy(m, d, pi)
    x = _marginal(occ, m.n_states, d.n_states, m.n_actions)
    return ExactReport(float(np.sum(x * reward)), None, None, acc)


# ------------------------------------------------------------ Monte Carlo

@dataclass
class SimReport:
    episodes: int
    seed: int
    sat1: float | None
    sat2: float | None
    sat_joint: float
    mean_reward: float
    se_sat1: float | None
    se_sat2: float | None
    se_sat_joint: float
    se_reward: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def episode_uniforms(seed: int, episodes: int, width: int) -> np.ndarray:
    """Row ``i`` holds the uniforms of episode ``i`` from its own substream."""
    children = np.random.SeedSequence(seed).spawn(episodes)
    return np.stack([np.random.Generator(np.random.Philox(c)).random(width) for c in children])


def _se(p: float, n: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / n))


def _sample_rows(P, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of a column from each CSR row ``rows[i]``."""
    cum = np.cumsum(P.data)
    lo, hi = P.indptr[rows], P.indptr[rows + 1]
    base = np.where(lo > 0, cum[np.maximum(lo - 1, 0)], 0.0)
    total = np.where(hi > 0, cum[np.maximum(hi - 1, 0)], 0.0) - base
    pos = np.searchsorted(cum, base + u * total, side="right")
    pos = np.clip(pos, lo, hi - 1)
    return P.indices[pos]


def _run_chain(m: LabeledMdp, d: Dfa, pi: Policy, u_act: np.ndarray, u_move: np.ndarray):
    """Sample episodes; returns states, actions (episodes x H+1) and acceptance."""
    E = u_act.shape[0]
    Hx, A, Q = m.horizon + 1, m.n_actions, d.n_states
    if pi.probs.shape != (Hx, m.n_states * Q, A):
        raise DimensionMismatch("policy does not match the MDP and DFA")
    masks = m.label_masks(d.ap)
    s = np.full(E, m.initial)
    q = np.full(E, d.q0)
    states = np.empty((E, Hx), dtype=np.int64)
    actions = np.empty((E, Hx), dtype=np.int64)
    for h in range(Hx):
        cum = np.cumsum(pi.probs[h, s * Q + q], axis=1)
        a = np.minimum((u_act[:, h:h + 1] * cum[:, -1:] >= cum).sum(axis=1), A - 1)
        states[:, h], actions[:, h] = s, a
        if h < Hx - 1:
            q = d.delta[q, masks[s]]
            s = _sample_rows(m.transitions[h], s * A + a, u_move[:, h])
    accepted = d.accepting_mask()[q]
    return states, actions, accepted


def simulate(m1: LabeledMdp, m2: LabeledMdp, d1: Dfa, d2: Dfa, pi1: Policy, pi2: Policy,
             reward: JointReward, episodes: int, seed: int) -> SimReport:
    """Monte Carlo estimate of the decentralized execution of ``(pi1, pi2)``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    Hx = m1.horizon + 1
    U = episode_uniforms(seed, episodes, 4 * Hx)
    s1, a1, acc1 = _run_chain(m1, d1, pi1, U[:, :Hx], U[:, Hx:2 * Hx])
    s2, a2, acc2 = _run_chain(m2, d2, pi2, U[:, 2 * Hx:3 * Hx], U[:, 3 * Hx:])
    r = reward.full(m1.n_actions, m2.n_actions)
    h = np.arange(Hx)[None, :]
    totals = r[h, s1, s2, a1, a2].sum(axis=1)
    joint = acc1 & acc2
    p1, p2, pj = acc1.mean(), acc2.mean(), joint.mean()
    return SimReport(episodes, seed, float(p1), float(p2), float(pj), float(totals.mean()),
                     _se(p1, episodes), _se(p2, episodes), _se(pj, episodes),
                     float(totals.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0)


def simulate_centralized(m: LabeledMdp, d: Dfa, pi: Policy, reward: np.ndarray,
                         episodes: int, seed: int) -> SimReport:
    """Monte Carlo estimate for one policy on one (possibly joint) MDP."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    Hx = m.horizon + 1
    U = episode_uniforms(seed, episodes, 2 * Hx)
    s, a, acc = _run_chain(m, d, pi, U[:, :Hx], U[:, Hx:])
    totals = reward[np.arange(Hx)[None, :], s, a].sum(axis=1)
    pj = acc.mean()
    return SimReport(episodes, seed, None, None, float(pj), float(totals.mean()),
                     None, None, _se(pj, episodes),
                     float(totals.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0)
