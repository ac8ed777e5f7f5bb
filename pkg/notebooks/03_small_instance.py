# %% [markdown]
# # A small instance end to end
#
# Two agents on a 3x3 grid, horizon 5. We solve the centralized LP and the
# two assume-guarantee LPs, extract policies, and check what the theory
# promises: the AG policies meet the joint risk budget and earn at least
# the larger of the two AG objective values, while never beating the
# centralized optimum.

# %%
import numpy as np

from agsynth.automata import compile_formula, product
from agsynth.gridworld import GridConfig, build_gridworld_mdp, separation_reward
from agsynth.lp import build_ag_lp, build_monolithic_lp
from agsynth.ltlf import parse
from agsynth.mdp import join, product_cmdp
from agsynth.policy import evaluate_centralized, evaluate_exact, extract_policy, simulate
from agsynth.solver import solve

# %%
cfg = GridConfig(3, (0.9, 0.85), ((0, 0), (2, 2)),
                 ({"a": (2, 0), "b": (1, 1)}, {"c": (0, 2), "d": (1, 0)}),
                 5, 0.1, 0.1, 0.2)
m1, m2 = build_gridworld_mdp(cfg, 0), build_gridworld_mdp(cfg, 1)
d1 = compile_formula(parse("F(a) & G(!b)"))
d2 = compile_formula(parse("F(c) & G(!d)"))
reward = separation_reward(9, cfg.horizon + 1)

# %% centralized
joint, dJ = join(m1, m2), product(d1, d2)
R = reward.full(5, 5).reshape(reward.horizon_x, joint.n_states, 25)
p = product_cmdp(joint, dJ, R)
lp = build_monolithic_lp(p, cfg.delta)
mono = solve(lp)
pi = extract_policy(mono.block(lp, "q"), p)
ex = evaluate_centralized(joint, dJ, pi, R)
print(f"monolithic: objective {mono.objective:.4f}, satisfaction {ex.sat_joint:.4f}")

# %% assume-guarantee
p1, p2 = product_cmdp(m1, d1), product_cmdp(m2, d2)
lp1 = build_ag_lp(p1, p2, reward, cfg.delta1, cfg.delta2, 0)
lp2 = build_ag_lp(p2, p1, reward, cfg.delta2, cfg.delta1, 1)
r1, r2 = solve(lp1), solve(lp2)
pi1 = extract_policy(r1.block(lp1, "x"), p1)
pi2 = extract_policy(r2.block(lp2, "x"), p2)
ag = evaluate_exact(m1, m2, d1, d2, pi1, pi2, reward)
mc = simulate(m1, m2, d1, d2, pi1, pi2, reward, 10_000, seed=0)
print(f"AG values v_x {r1.objective:.4f}, v_y {r2.objective:.4f}")
print(f"AG achieved {ag.reward:.4f} (MC {mc.mean_reward:.4f} +- {mc.se_reward:.4f})")
print(f"satisfaction {ag.sat_joint:.4f} (MC {mc.sat_joint:.4f}), budget {1 - cfg.delta:.2f}")
print(f"relative optimality {100 * ag.reward / mono.objective:.2f}%")

# %%
assert ag.sat_joint >= 1 - cfg.delta - 1e-9
assert ag.reward >= max(r1.objective, r2.objective) - 1e-6
assert ag.reward <= mono.objective + 1e-6
