# %% [markdown]
# # Benchmark table
#
# Solves both experiments on the 4x4 grid with both methods and prints the
# table. The centralized LPs have half a million to a million columns; on a
# single core expect one to two minutes in total. Runtimes depend on the
# machine, the speedup column is the interesting part.

# %%
import sys

from agsynth.experiment import emit_table, run_experiment

grids = [int(a) for a in sys.argv[1:]] or [4]

# %%
rows = []
for exp in (1, 2):
    for n in grids:
        rows += run_experiment(exp, n, "both", seed=0, episodes=10_000)
print(emit_table(rows, "markdown"))

# %%
for mono, ag in zip(rows[::2], rows[1::2]):
    print(f"exp {mono.experiment} {mono.grid}x{mono.grid}: "
          f"speedup {mono.runtime_s / ag.runtime_s:.1f}x, "
          f"relative optimality {ag.rel_opt_pct:.2f}%, AG satisfaction {ag.sat_exact:.3f}")
