"""End-to-end synthesis runs and Table-I style reporting."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import automata
from .automata import compile_formula
from .gridworld import ExperimentBundle, experiment_config
from .lp import build_ag_lp, build_monolithic_lp, lp_dimensions
from .ltlf import parse
from .mdp import join, product_cmdp
from .policy import (evaluate_centralized, evaluate_exact, extract_policy, simulate,
                     simulate_centralized)
from .solver import OPTIMAL, SolverConfig, solve

__all__ = ["ReportRow", "run_experiment", "run_bundle", "emit_table", "compile_spec",
           "CSV_COLUMNS", "joint_reward_array"]

CSV_COLUMNS = ("experiment", "grid", "mode", "vars", "cons", "build_s", "solve_s",
               "objective", "achieved_reward", "sat_exact", "sat_mc", "rel_opt_pct", "seed")
TIMING = ("build_s", "solve_s")


@dataclass
class ReportRow:
    experiment: int
    grid: int
    mode: str
    vars: int
    cons: int
    build_s: float
    solve_s: float
    objective: float | None
    achieved_reward: float | None
    sat_exact: float | None
    sat_mc: float | None
    rel_opt_pct: float | None
    seed: int
    status: str = OPTIMAL
    v_x: float | None = None
    v_y: float | None = None
    sat1_exact: float | None = None
    sat2_exact: float | None = None
    mc_reward: float | None = None
    mc_reward_se: float | None = None
    sat_mc_se: float | None = None

    @property
    def runtime_s(self) -> float:
        return self.build_s + self.solve_s


def joint_reward_array(bundle: ExperimentBundle) -> np.ndarray:
    """Joint reward as ``[h-1, s1*|S2|+s2, a1*|A2|+a2]`` for the joint MDP."""
    m1, m2 = bundle.mdp1, bundle.mdp2
    r = bundle.reward.full(m1.n_actions, m2.n_actions)
    Hx = r.shape[0]
    return np.ascontiguousarray(r).reshape(Hx, m1.n_states * m2.n_states,
                                           m1.n_actions * m2.n_actions)


def run_experiment(experiment: int, n: int, mode: str = "both", seed: int = 0,
                   episodes: int = 10_000, cfg: SolverConfig | None = None,
                   **config_kw) -> list[ReportRow]:
    """Build, solve, extract and evaluate; ``config_kw`` goes to
    :func:`experiment_config`."""
    return run_bundle(experiment_config(experiment, n, **config_kw), mode, seed, episodes, cfg)


def run_bundle(bundle: ExperimentBundle, mode: str = "both", seed: int = 0,
               episodes: int = 10_000, cfg: SolverConfig | None = None) -> list[ReportRow]:
    if mode not in ("monolithic", "ag", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or SolverConfig()
    rows = []
    if mode in ("monolithic", "both"):
        rows.append(_run_monolithic(bundle, seed, episodes, cfg))
    if mode in ("ag", "both"):
        rows.append(_run_ag(bundle, seed, episodes, cfg))
    if mode == "both" and all(r.status == OPTIMAL for r in rows):
        mono, ag = rows
        ag.rel_opt_pct = 100.0 * ag.achieved_reward / mono.objective
    return rows


def _run_monolithic(b: ExperimentBundle, seed, episodes, cfg) -> ReportRow:
    t0 = time.perf_counter()
    d1, d2 = compile_formula(b.spec1), compile_formula(b.spec2)
    dJ = automata.product(d1, d2)
    joint = join(b.mdp1, b.mdp2)
    reward = joint_reward_array(b)
    p = product_cmdp(joint, dJ, reward)
    lp = build_monolithic_lp(p, b.config.delta)
    build_s = time.perf_counter() - t0
    res = solve(lp, cfg)
    nv, nc = lp_dimensions(lp)
    row = ReportRow(b.experiment, b.config.n, "monolithic", nv, nc, build_s, res.seconds,
                    None, None, None, None, None, seed, status=res.status)
    if res.status != OPTIMAL:
        return row
    pi = extract_policy(res.block(lp, "q"), p)
    ex = evaluate_centralized(joint, dJ, pi, reward)
    mc = simulate_centralized(joint, dJ, pi, reward, episodes, seed)
    row.objective = res.objective
    row.achieved_reward = ex.reward
    row.sat_exact = ex.sat_joint
    row.sat_mc = mc.sat_joint
    row.sat_mc_se = mc.se_sat_joint
    row.mc_reward, row.mc_reward_se = mc.mean_reward, mc.se_reward
    return row


def _run_ag(b: ExperimentBundle, seed, episodes, cfg) -> ReportRow:
    d1_, d2_, _ = b.deltas
    t0 = time.perf_counter()
    d1, d2 = compile_formula(b.spec1), compile_formula(b.spec2)
    p1, p2 = product_cmdp(b.mdp1, d1), product_cmdp(b.mdp2, d2)
    lp1 = build_ag_lp(p1, p2, b.reward, d1_, d2_, ego_index=0)
    lp2 = build_ag_lp(p2, p1, b.reward, d2_, d1_, ego_index=1)
    build_s = time.perf_counter() - t0
    r1 = solve(lp1, cfg)
    r2 = solve(lp2, cfg)
    nv, nc = lp_dimensions(lp1)
    status = r1.status if r1.status != OPTIMAL else r2.status
    row = ReportRow(b.experiment, b.config.n, "ag", nv, nc, build_s, r1.seconds + r2.seconds,
                    None, None, None, None, None, seed, status=status)
    if status != OPTIMAL:
        return row
    pi1 = extract_policy(r1.block(lp1, "x"), p1)
    pi2 = extract_policy(r2.block(lp2, "x"), p2)
    ex = evaluate_exact(b.mdp1, b.mdp2, d1, d2, pi1, pi2, b.reward)
    mc = simulate(b.mdp1, b.mdp2, d1, d2, pi1, pi2, b.reward, episodes, seed)
    row.v_x, row.v_y = r1.objective, r2.objective
    row.objective = max(r1.objective, r2.objective)
    row.achieved_reward = ex.reward
    row.sat_exact, row.sat1_exact, row.sat2_exact = ex.sat_joint, ex.sat1, ex.sat2
    row.sat_mc, row.sat_mc_se = mc.sat_joint, mc.se_sat_joint
    row.mc_reward, row.mc_reward_se = mc.mean_reward, mc.se_reward
    return row


# -------------------------------------------------------------- reporting

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_table(rows: list[ReportRow], fmt: str = "csv", path=None,
               timing: bool = True) -> str:
    """Render ``rows``; write to ``path`` when given.

    ``csv`` and ``json`` emit one record per row in :data:`CSV_COLUMNS`
    order. ``markdown`` pivots monolithic and AG rows of the same
    (experiment, grid) into one line: sizes, runtimes, speedup, rewards and
    relative optimality. ``timing=False`` blanks wall-clock fields.
    """
    if not rows:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) if timing or c not in TIMING else ""
                        for c in CSV_COLUMNS])
        text = buf.getvalue()
    elif fmt == "json":
        recs = []
        for r in rows:
            d = asdict(r)
            if not timing:
                for c in TIMING:
                    d[c] = None
            recs.append({k: (float(_fmt(v)) if isinstance(v, float) else v) for k, v in d.items()})
        text = json.dumps(recs, indent=1) + "\n"
    elif fmt == "markdown":
        text = _markdown(rows, timing)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def _markdown(rows, timing) -> str:
    groups: dict[tuple, dict] = {}
    for r in rows:
        groups.setdefault((r.experiment, r.grid), {})[r.mode] = r
    head = ("| Experiment | Gridworld Size | LP Size Monolithic | LP Size AG | Runtime Monolithic (s) "
            "| Runtime AG (s) | Speedup | Reward Monolithic | Reward AG | Relative Optimality |")
    lines = [head, "|" + "---|" * 10]
    for (exp, n), g in groups.items():
        mono, ag = g.get("monolithic"), g.get("ag")
        size = lambda r: f"({r.vars}, {r.cons})" if r else ""
        rt = lambda r: _fmt(r.runtime_s) if r and timing else ""
        speed = (_fmt(mono.runtime_s / ag.runtime_s) + "x"
                 if timing and mono and ag and ag.runtime_s > 0 else "")
        rel = _fmt(ag.rel_opt_pct) + " %" if ag and ag.rel_opt_pct is not None else ""
        lines.append(
            f"| {exp} | {n}x{n} | {size(mono)} | {size(ag)} | {rt(mono)} | {rt(ag)} | {speed} "
            f"| {_fmt(mono.objective) if mono else ''} "
            f"| {_fmt(ag.achieved_reward) if ag else ''} | {rel} |")
    return "\n".join(lines) + "\n"


def rows_from_json(text: str) -> list[ReportRow]:
    names = {f.name for f in fields(ReportRow)}
    return [ReportRow(**{k: v for k, v in rec.items() if k in names}) for rec in json.loads(text)]


def compile_spec(text: str, out=None) -> tuple[automata.Dfa, str]:
    """Compile ``text``; write ``<out>.dot`` and ``<out>.json`` when ``out`` is given."""
    d = compile_formula(parse(text))
    if out is not None:
        out = Path(out)
        stem = out.with_suffix("") if out.suffix in (".dot", ".json") else out
        stem.with_suffix(".dot").write_text(automata.to_dot(d))
        stem.with_suffix(".json").write_text(automata.to_json(d))
    msg = f"{d.n_states} state" + ("" if d.n_states == 1 else "s")
    return d, msg
