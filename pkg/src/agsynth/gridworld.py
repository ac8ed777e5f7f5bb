"""Slippery n x n gridworlds and the two benchmark problems.

Cells are ``(col, row)`` with ``(0, 0)`` in the north-west corner and rows
growing southward; state index is ``row * n + col``. Every move action
realizes its own direction with probability ``p_star`` and each of the two
perpendicular directions with ``(1 - p_star) / 2``; a realized move that
would leave the grid keeps the agent in place. ``STAY`` is deterministic.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp

from .ltlf import Formula, parse
from .mdp import JointReward, LabeledMdp

__all__ = [
    "ACTIONS", "GridConfig", "ExperimentBundle", "ConfigError", "InvalidCell",
    "UnsoundThresholds", "UnsupportedSize", "build_gridworld_mdp",
    "experiment_config", "separation_reward", "load_placements",
]

ACTIONS = ("N", "E", "S", "W", "STAY")
_MOVES = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}
_LATERAL = {"N": ("E", "W"), "S": ("E", "W"), "E": ("N", "S"), "W": ("N", "S")}

SPECS = {
    1: ("F(a) & G(!b)", "F(c) & G(!d)"),
    2: ("F(b) & G(!c) & (!b U a)", "F(e) & G(!f) & (!e U d)"),
}


class ConfigError(ValueError):
    pass


class InvalidCell(ConfigError):
    pass


class UnsupportedSize(ConfigError):
    pass


class UnsoundThresholds(ConfigError):
    """Individual risks exceed the joint budget (``delta1 + delta2 > delta``)."""


@dataclass(frozen=True)
class GridConfig:
    n: int
    p_star: tuple[float, float]
    starts: tuple[tuple[int, int], tuple[int, int]]
    placements: tuple[dict, dict]  # per agent: atom -> (col, row)
    horizon: int
    delta1: float
    delta2: float
    delta: float
    reward_steps: str = "Hplus1"
    unsound: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise UnsupportedSize(f"grid size {self.n}")
        for cell in list(self.starts) + [c for p in self.placements for c in p.values()]:
            self.check_cell(cell)
        for p in self.p_star:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"p_star {p} outside [0, 1]")
        for d in (self.delta1, self.delta2, self.delta):
            if not 0.0 <= d <= 1.0:
                raise ConfigError(f"risk {d} outside [0, 1]")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.reward_steps not in ("H", "Hplus1"):
            raise ConfigError(f"reward_steps must be 'H' or 'Hplus1', got {self.reward_steps!r}")
        if set(self.placements[0]) & set(self.placements[1]):
            raise ConfigError("agents must use disjoint atoms")
        if self.delta1 + self.delta2 > self.delta + 1e-12 and not self.unsound:
            raise UnsoundThresholds(
                f"delta1 + delta2 = {self.delta1 + self.delta2:g} exceeds delta = {self.delta:g}")

    def check_cell(self, cell) -> None:
        col, row = cell
        if not (0 <= col < self.n and 0 <= row < self.n):
            raise InvalidCell(f"cell {tuple(cell)} outside a {self.n}x{self.n} grid")

    def to_json(self) -> str:
        obj = asdict(self)
        obj["placements"] = [{k: list(v) for k, v in p.items()} for p in self.placements]
        return json.dumps(obj, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GridConfig":
        obj = json.loads(text)
        obj["p_star"] = tuple(obj["p_star"])
        obj["starts"] = tuple(tuple(c) for c in obj["starts"])
        obj["placements"] = tuple({k: tuple(v) for k, v in p.items()} for p in obj["placements"])
        return cls(**obj)


def build_gridworld_mdp(cfg: GridConfig, agent: int) -> LabeledMdp:
    """Slip-dynamics MDP of agent ``agent`` (0 or 1)."""
    n, p = cfg.n, cfg.p_star[agent]
    S, A = n * n, len(ACTIONS)
    P = np.zeros((S, A, S))
    for row in range(n):
        for col in range(n):
            s = row * n + col
            for a, name in enumerate(ACTIONS):
                if name == "STAY":
                    P[s, a, s] = 1.0
                    continue
                side = (1.0 - p) / 2.0
                for direction, w in ((name, p), (_LATERAL[name][0], side), (_LATERAL[name][1], side)):
                    dc, dr = _MOVES[direction]
                    c2, r2 = col + dc, row + dr
                    target = r2 * n + c2 if 0 <= c2 < n and 0 <= r2 < n else s
                    P[s, a, target] += w
    kernel = sp.csr_matrix(P.reshape(S * A, S))
    kernel.eliminate_zeros()

    labels = [set() for _ in range(S)]
    for atom, (col, row) in cfg.placements[agent].items():
        labels[row * n + col].add(atom)
    col0, row0 = cfg.starts[agent]
    states = tuple((c, r) for r in range(n) for c in range(n))
    return LabeledMdp(states, ACTIONS, cfg.horizon, row0 * n + col0,
                      (kernel,) * cfg.horizon, tuple(sorted(cfg.placements[agent])),
                      tuple(frozenset(l) for l in labels))


def separation_reward(n_cells: int, horizon_x: int, steps: int | None = None) -> JointReward:
    """2 when the agents occupy different cells, 1 when they share one."""
    table = np.where(np.eye(n_cells, dtype=bool), 1.0, 2.0)
    return JointReward.state_based(table, horizon_x, steps)


# ------------------------------------------------------------ experiments

@dataclass(frozen=True, eq=False)
class ExperimentBundle:
    experiment: int
    config: GridConfig
    mdp1: LabeledMdp
    mdp2: LabeledMdp
    spec1: Formula
    spec2: Formula
    reward: JointReward = field(repr=False)

    @property
    def deltas(self) -> tuple[float, float, float]:
        return self.config.delta1, self.config.delta2, self.config.delta


def load_placements(path=None) -> dict:
    """Experiment 2 layout; ``path`` overrides the bundled default."""
    if path is None:
        text = resources.files("agsynth").joinpath("data/experiment2_placements.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    obj = json.loads(text)
    return {k: v for k, v in obj.items() if not k.startswith("_")}


def _resolve(cell, n):
    return tuple(int(v) + n if int(v) < 0 else int(v) for v in cell)


def _layout(layout: dict, n: int):
    starts, placements = [], []
    for agent in ("agent1", "agent2"):
        entry = dict(layout[agent])
        starts.append(_resolve(entry.pop("start"), n))
        placements.append({atom: _resolve(cell, n) for atom, cell in entry.items()})
    return tuple(starts), tuple(placements)


def experiment_config(experiment: int, n: int, *, placements: dict | None = None,
                      reward_steps: str = "Hplus1", unsound: bool = False,
                      risks: tuple[float, float, float] | None = None) -> ExperimentBundle:
    """Benchmark problem 1 (reach-avoid) or 2 (ordered goals) on an n x n grid.

    ``placements`` uses the Experiment 2 file layout ({"agent1": {"start":
    [c, r], atom: [c, r], ...}, "agent2": {...}}) and overrides the default
    for either experiment. ``risks`` overrides (delta1, delta2, delta).
    """
    if experiment not in SPECS:
        raise ConfigError(f"unknown experiment {experiment}")
    if n < 4:
        raise UnsupportedSize(f"benchmark grids start at 4x4, got {n}x{n}")
    if experiment == 1:
        default = {
            "agent1": {"start": [0, 0], "a": [0, -1], "b": [0, -2]},
            # mirror of agent 1's layout across the diagonal through the start
            "agent2": {"start": [0, 0], "c": [-1, 0], "d": [-2, 0]},
        }
        p_star, default_risks = (0.9, 0.8), (0.1, 0.1, 0.2)
    else:
        default = load_placements()
        p_star, default_risks = (0.95, 0.95), (0.05, 0.05, 0.1)
    starts, cells = _layout(placements or default, n)
    d1, d2, d = risks or default_risks
    horizon = 15 + (n - 4)
    cfg = GridConfig(n, p_star, starts, cells, horizon, d1, d2, d, reward_steps, unsound)
    return bundle_from_config(cfg, experiment)


def bundle_from_config(cfg: GridConfig, experiment: int) -> ExperimentBundle:
    spec1, spec2 = (parse(t) for t in SPECS[experiment])
    hx = cfg.horizon + 1
    steps = hx if cfg.reward_steps == "Hplus1" else cfg.horizon
    return ExperimentBundle(experiment, cfg, build_gridworld_mdp(cfg, 0),
                            build_gridworld_mdp(cfg, 1), spec1, spec2,
                            separation_reward(cfg.n * cfg.n, hx, steps))
