import json

import numpy as np
import pytest
import scipy.sparse as sp

from agsynth.automata import compile_formula
from agsynth.lp import build_ag_lp, build_monolithic_lp
from agsynth.ltlf import parse
from agsynth.mdp import JointReward, LabeledMdp, join, product_cmdp
from agsynth.automata import product
from agsynth.policy import (DimensionMismatch, NegativeMass, Policy, episode_uniforms,
                            evaluate_centralized, evaluate_exact, extract_policy,
                            forward_occupancy, simulate, simulate_centralized)
from agsynth.solver import solve

from instances import max_acceptance, products, small_pair
from oracles import path_distribution, truth, word_of


def single_state(horizon, labels=frozenset(), ap=("a",), A=1):
    P = sp.csr_matrix(np.ones((A, 1)))
    return LabeledMdp((0,), tuple(range(A)), horizon, 0, (P,) * horizon, ap, (labels,))


def uniform_policy(m, d):
    Hx = m.horizon + 1
    return Policy(np.full((Hx, m.n_states * d.n_states, m.n_actions), 1.0 / m.n_actions),
                  d.n_states)


class TestExtract:
    def product1(self):
        m = single_state(1, A=2)
        return product_cmdp(m, compile_formula(parse("true")))

    def test_proportional(self):
        p = self.product1()
        occ = np.array([[[0.3, 0.7]], [[0.3, 0.7]]])
        assert np.allclose(extract_policy(occ, p).probs[0, 0], [0.3, 0.7])

    def test_zero_mass_uniform(self):
        p = self.product1()
        occ = np.array([[[0.0, 0.0]], [[1.0, 0.0]]])
        pi = extract_policy(occ, p)
        assert np.allclose(pi.probs[0, 0], [0.5, 0.5])
        assert np.allclose(pi.probs[1, 0], [1.0, 0.0])

    def test_negative_mass(self):
        with pytest.raises(NegativeMass):
            extract_policy(np.array([[[-1e-3, 1.0]], [[0.5, 0.5]]]), self.product1())

    def test_rows_sum_to_one(self):
        m1, m2, d1, d2, r = small_pair(4)
        p1, _ = products(m1, m2, d1, d2)
        occ = np.random.default_rng(0).random((p1.horizon_x, p1.n_states, p1.n_actions))
        occ[occ < 0.5] = 0.0
        pi = extract_policy(occ, p1)
        assert np.allclose(pi.probs.sum(axis=2), 1.0, atol=1e-12)


class TestExact:
    def test_constant_reward(self):
        m = single_state(15)
        d = compile_formula(parse("true"))
        pi = uniform_policy(m, d)
        r = JointReward(np.full((16, 1, 1, 1, 1), 2.0))
        rep = evaluate_exact(m, m, d, d, pi, pi, r)
        assert rep.reward == pytest.approx(32.0)
        assert rep.sat_joint == pytest.approx(1.0)
        assert json.loads(rep.to_json())["reward"] == pytest.approx(32.0)

    def test_unreachable_goal(self):
        m = single_state(3)
        d = compile_formula(parse("F(a)"))
        rep = evaluate_exact(m, m, d, d, uniform_policy(m, d), uniform_policy(m, d),
                             JointReward(np.zeros((4, 1, 1, 1, 1))))
        assert rep.sat1 == 0.0 and rep.sat_joint == 0.0

    def test_shape_mismatch(self):
        m = single_state(3)
        d = compile_formula(parse("F(a)"))
        bad = Policy(np.full((3, 2, 1), 1.0), 2)
        with pytest.raises(DimensionMismatch):
            forward_occupancy(m, d, bad)

    @pytest.mark.parametrize("seed", range(5))
    def test_forward_pass_matches_path_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        m1, m2, d1, d2, _ = small_pair(seed, n=2, horizon=3)
        Hx = m1.horizon + 1
        probs = rng.dirichlet(np.ones(5), size=(Hx, m1.n_states * d1.n_states))
        pi = Policy(probs, d1.n_states)
        occ, acc = forward_occupancy(m1, d1, pi)

        f = parse("F(a) & G(!b)")
        q_of = lambda states: d1.run([m1.labels[s] for s in states[:-1]])[-1]
        paths = path_distribution(m1, lambda h, s, q, st: pi.dist(h, s, q), q_of)
        total = sum(w for w, _, _ in paths)
        assert total == pytest.approx(1.0)
        sat = sum(w for w, st, _ in paths if truth(f, m1.ap, word_of(m1, st, m1.ap))[0, 0])
        assert acc == pytest.approx(sat, abs=1e-12)
        # occupancy of (h, s, a) marginal over q
        marg = np.zeros((Hx, m1.n_states, 5))
        for w, st, ac in paths:
            for h in range(Hx):
                marg[h, st[h], ac[h]] += w
        got = occ.reshape(Hx, m1.n_states, d1.n_states, 5).sum(axis=2)
        assert np.allclose(got, marg, atol=1e-12)


class TestSimulate:
    def test_always_accepting(self):
        m = single_state(4, labels=frozenset({"a"}))
        d = compile_formula(parse("F(a)"))
        pi = uniform_policy(m, d)
        rep = simulate(m, m, d, d, pi, pi, JointReward(np.ones((5, 1, 1, 1, 1))), 1000, 1)
        assert rep.sat_joint == 1.0 and rep.se_sat_joint == 0.0
        assert rep.mean_reward == pytest.approx(5.0)

    def test_never_accepting(self):
        m = single_state(4)
        d = compile_formula(parse("F(a)"))
        pi = uniform_policy(m, d)
        rep = simulate(m, m, d, d, pi, pi, JointReward(np.ones((5, 1, 1, 1, 1))), 1000, 1)
        assert rep.sat_joint == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_mc_within_four_se(self, seed):
        m1, m2, d1, d2, r = small_pair(seed + 20, n=3, horizon=5)
        rng = np.random.default_rng(seed)
        Hx = m1.horizon + 1
        pi1 = Policy(rng.dirichlet(np.ones(5), size=(Hx, m1.n_states * d1.n_states)), d1.n_states)
        pi2 = Policy(rng.dirichlet(np.ones(5), size=(Hx, m2.n_states * d2.n_states)), d2.n_states)
        ex = evaluate_exact(m1, m2, d1, d2, pi1, pi2, r)
        mc = simulate(m1, m2, d1, d2, pi1, pi2, r, 10_000, seed)
        assert abs(mc.mean_reward - ex.reward) <= 4 * mc.se_reward
        for got, want, se in ((mc.sat1, ex.sat1, mc.se_sat1), (mc.sat2, ex.sat2, mc.se_sat2),
                              (mc.sat_joint, ex.sat_joint, mc.se_sat_joint)):
            assert abs(got - want) <= 4 * max(se, 1e-3)
        assert mc.se_sat1 == pytest.approx(np.sqrt(mc.sat1 * (1 - mc.sat1) / 10_000))

    def test_seeded_and_replayable(self):
        m1, m2, d1, d2, r = small_pair(3)
        pi1, pi2 = uniform_policy(m1, d1), uniform_policy(m2, d2)
        a = simulate(m1, m2, d1, d2, pi1, pi2, r, 500, 7)
        b = simulate(m1, m2, d1, d2, pi1, pi2, r, 500, 7)
        assert a == b
        # episode i draws the same numbers however many episodes run
        assert np.array_equal(episode_uniforms(7, 10, 6)[3], episode_uniforms(7, 50, 6)[3])

    def test_rejects_zero_episodes(self):
        m = single_state(2)
        d = compile_formula(parse("true"))
        with pytest.raises(ValueError):
            simulate(m, m, d, d, uniform_policy(m, d), uniform_policy(m, d),
                     JointReward(np.ones((3, 1, 1, 1, 1))), 0, 0)


class TestGuarantees:
    @pytest.mark.parametrize("seed", range(4))
    def test_lp_constraint_value_is_acceptance(self, seed):
        m1, m2, d1, d2, r = small_pair(seed + 60, n=2, horizon=4)
        j = join(m1, m2)
        dj = product(d1, d2)
        reward = r.full(5, 5).reshape(r.horizon_x, j.n_states, 25)
        p = product_cmdp(j, dj, reward)
        res = solve(build_monolithic_lp(p, 1 - 0.8 * max_acceptance(p)))
        pi = extract_policy(res.x, p)
        ex = evaluate_centralized(j, dj, pi, reward)
        assert ex.sat_joint == pytest.approx(p.constraint.ravel() @ res.x, abs=1e-6)
        assert ex.reward == pytest.approx(res.objective, abs=1e-6)
        mc = simulate_centralized(j, dj, pi, reward, 10_000, seed)
        assert abs(mc.sat_joint - ex.sat_joint) <= 4 * max(mc.se_sat_joint, 1e-3)

    @pytest.mark.parametrize("seed", range(4))
    def test_ag_sound_and_lower_bound(self, seed):
        m1, m2, d1, d2, r = small_pair(seed + 80, n=3, horizon=5)
        p1, p2 = products(m1, m2, d1, d2)
        dl1, dl2 = 1 - 0.8 * max_acceptance(p1), 1 - 0.8 * max_acceptance(p2)
        r1 = solve(build_ag_lp(p1, p2, r, dl1, dl2, 0))
        r2 = solve(build_ag_lp(p2, p1, r, dl2, dl1, 1))
        pi1 = extract_policy(r1.block(build_ag_lp(p1, p2, r, dl1, dl2), "x"), p1)
        pi2 = extract_policy(r2.block(build_ag_lp(p2, p1, r, dl2, dl1, 1), "x"), p2)
        ex = evaluate_exact(m1, m2, d1, d2, pi1, pi2, r)
        assert ex.sat_joint >= 1 - (dl1 + dl2) - 1e-9
        assert ex.reward >= max(r1.objective, r2.objective) - 1e-6
