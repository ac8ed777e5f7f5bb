import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from agsynth.gridworld import experiment_config
from agsynth.lp import OccupancyLp, build_ag_lp, build_monolithic_lp
from agsynth.mdp import LabeledMdp, product_cmdp, join
from agsynth.automata import compile_formula, product
from agsynth.ltlf import parse
from agsynth.solver import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SolverConfig,
                            solve)

from instances import max_acceptance, small_pair

BACKENDS = [SolverConfig(), SolverConfig(method="ipm"), SolverConfig(backend="simplex")]
IDS = ["highs", "highs-ipm", "simplex"]


def make(c, A, senses, b, lower=None, upper=None, sense="max"):
    A = sp.csr_matrix(np.asarray(A, dtype=float))
    n = A.shape[1]
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return OccupancyLp(np.asarray(c, dtype=float), A, np.array(list(senses)),
                       np.asarray(b, dtype=float), lower, upper, (), sense)




@pytest.mark.parametrize("cfg", BACKENDS, ids=IDS)
class TestExamples:
    def test_bounded(self, cfg):
        r = solve(make([1], [[1]], "<", [1]), cfg)
        assert r.status == OPTIMAL and r.objective == pytest.approx(1.0)

    def test_infeasible(self, cfg):
        assert solve(make([1], [[1], [1]], "><", [2, 1]), cfg).status == INFEASIBLE

    def test_unbounded(self, cfg):
        assert solve(make([1, 1], [[1, -1]], "<", [1]), cfg).status == UNBOUNDED

    def test_threshold_cmdp(self, cfg):
        # max q(a1) s.t. q(a1) + q(a2) = 1, q(a2) >= 0.5
        r = solve(make([1, 0], [[1, 1], [0, 1]], "=>", [1, 0.5]), cfg)
        assert r.objective == pytest.approx(0.5, abs=1e-9)
        assert np.allclose(r.x, [0.5, 0.5], atol=1e-9)

    def test_free_and_bounded_columns(self, cfg):
        # min 2u - v, u + v = 3, u >= 1, both free, v <= 2.5
        lp = make([2, -1], [[1, 1], [1, 0]], "=>", [3, 1], lower=[-np.inf, -np.inf],
                  upper=[np.inf, 2.5], sense="min")
        r = solve(lp, cfg)
        assert r.objective == pytest.approx(2 * 1 - 2, abs=1e-9)

    def test_duality_gap(self, cfg):
        m1, m2, d1, d2, rew = small_pair(3, n=2, horizon=3)
        j = join(m1, m2)
        p = product_cmdp(j, product(d1, d2), rew.full(5, 5).reshape(rew.horizon_x, 16, 25))
        lp = build_monolithic_lp(p, 1 - 0.9 * max_acceptance(p))
        r = solve(lp, cfg)
        assert r.optimal
        assert abs(r.objective - r.dual_objective) <= 1e-6 * (1 + abs(r.objective))


def test_backends_agree_on_small_cmdps():
    for seed in range(5):
        m1, m2, d1, d2, rew = small_pair(seed, n=2, horizon=3, reward="random")
        j = join(m1, m2)
        p = product_cmdp(j, product(d1, d2), rew.full(5, 5).reshape(rew.horizon_x, 16, 25))
        lp = build_monolithic_lp(p, 1 - 0.8 * max_acceptance(p))
        vals = [solve(lp, cfg).objective for cfg in BACKENDS]
        assert max(vals) - min(vals) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    m, n = 6, 9
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 1, n)
    senses = rng.choice(list("=<>"), size=m)
    slack = rng.uniform(0, 1, m)
    b = A @ x0 + np.select([senses == "<", senses == ">"], [slack, -slack], 0.0)
    lp = make(rng.normal(size=n), A, senses, b, upper=np.full(n, 3.0))
    perm = rng.permutation(m)
    lp2 = make(lp.c, A[perm], senses[perm], b[perm], upper=np.full(n, 3.0))
    r1, r2 = solve(lp), solve(lp2)
    assert r1.status == r2.status == OPTIMAL
    assert r1.objective == pytest.approx(r2.objective, abs=1e-9)


def test_iteration_limit():
    b = experiment_config(1, 4)
    p1, p2 = (product_cmdp(m, compile_formula(f)) for m, f in ((b.mdp1, b.spec1), (b.mdp2, b.spec2)))
    big = build_ag_lp(p1, p2, b.reward, 0.1, 0.1)
    assert solve(big, SolverConfig(max_iterations=1, method="simplex")).status == ITERATION_LIMIT
    m1, m2, d1, d2, rew = small_pair(0, n=2, horizon=3)
    j = join(m1, m2)
    p = product_cmdp(j, product(d1, d2), rew.full(5, 5).reshape(rew.horizon_x, 16, 25))
    lp = build_monolithic_lp(p, 1.0)
    assert solve(lp, SolverConfig(max_iterations=1, backend="simplex")).status == ITERATION_LIMIT


def test_deterministic():
    m1, m2, d1, d2, rew = small_pair(8, n=2, horizon=4)
    j = join(m1, m2)
    p = product_cmdp(j, product(d1, d2), rew.full(5, 5).reshape(rew.horizon_x, 16, 25))
    lp = build_monolithic_lp(p, 0.9)
    a, b = solve(lp), solve(lp)
    assert np.array_equal(a.x, b.x) and a.objective == b.objective


def test_bad_config():
    with pytest.raises(ValueError):
        SolverConfig(feasibility_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(method="barrier")
