# %% [markdown]
# # How big are the LPs?
#
# The centralized LP has one column per (step, joint cell, joint DFA state,
# joint action); the assume-guarantee LP only spans one agent plus the dual
# variables for its partner. Sizes follow from the model dimensions alone,
# so nothing is solved here.

# %%
from agsynth.automata import compile_formula, product
from agsynth.gridworld import experiment_config
from agsynth.mdp import size_report

# %%
print(f"{'exp':>3} {'n':>2} {'monolithic (vars, cons)':>26} {'AG (vars, cons)':>18} {'ratio':>7}")
for exp, sizes in ((1, range(4, 9)), (2, range(4, 7))):
    for n in sizes:
        b = experiment_config(exp, n)
        d1, d2 = compile_formula(b.spec1), compile_formula(b.spec2)
        rep = size_report(b.mdp1, b.mdp2, d1, d2, product(d1, d2), b.config.horizon)
        ratio = rep.monolithic[0] / rep.ag1[0]
        print(f"{exp:>3} {n:>2} {str(rep.monolithic):>26} {str(rep.ag1):>18} {ratio:7.0f}")

# %% [markdown]
# The monolithic column count grows with the square of the cell count,
# the AG one linearly.
