# %% [markdown]
# # From LTLf specifications to automata
#
# Each agent's task is a finite-trace formula. We compile the formulas of
# both gridworld experiments to minimal DFAs, check a few words by hand and
# look at the joint automaton the centralized LP has to carry around.

# %%
from agsynth.automata import accepts, compile_formula, product, to_dot
from agsynth.gridworld import SPECS
from agsynth.ltlf import evaluate, parse, pretty

# %%
for exp, texts in SPECS.items():
    dfas = [compile_formula(parse(t)) for t in texts]
    joint = product(*dfas)
    print(f"experiment {exp}")
    for t, d in zip(texts, dfas):
        print(f"  {t:28s} -> {d.n_states} states over {d.ap}")
    print(f"  joint automaton: {joint.n_states} states over {joint.ap}")

# %% [markdown]
# Reach-avoid: visit `a` and never touch `b`. The word `{} {a}` is accepted,
# `{b} {a}` is not. The DFA and the direct semantics agree.

# %%
f = parse("F(a) & G(!b)")
d = compile_formula(f)
for word in ([set(), {"a"}], [{"b"}, {"a"}], [set(), set()]):
    print(word, accepts(d, word), evaluate(f, word, 1))

# %% [markdown]
# Ordered goals: `a` has to come before `b`.

# %%
g = parse("F(b) & G(!c) & (!b U a)")
print(pretty(g))
dg = compile_formula(g)
for word in ([{"a"}, {"b"}], [{"b"}, {"a"}]):
    print(word, accepts(dg, word))

# %%
print(to_dot(d, "reach_avoid"))
