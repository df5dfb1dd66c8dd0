import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from force_rl.errors import (
    FeatureNormViolation,
    InvalidInstance,
    InvalidKernel,
    InvalidReward,
    OracleUnavailable,
)
from force_rl.linmdp import (
    LinearMDP,
    dumps_mdp,
    exact_optimal_values,
    from_tabular,
    hard_instance,
    load_mdp,
    loads_mdp,
    policy_tables,
    policy_value,
    random_tabular,
    save_mdp,
    simplex_instance,
    small_suite,
)
from oracles import dp_values_ref


def chain(p):
    """Three states, H=2; action 1 at state 0 reaches the rewarding state 2 with probability p."""
    P = np.zeros((2, 3, 2, 3))
    P[:, :, :, 1] = 1.0
    P[:, 0, 1, :] = [0.0, 1 - p, p]
    P[:, 2, :, :] = 0.0
    P[:, 2, :, 2] = 1.0
    r = np.zeros((2, 3, 2))
    r[:, 2, :] = 1.0
    return from_tabular(P, r, s1=0)


def two_state_deterministic():
    P = np.zeros((1, 2, 2, 2))
    P[0, 0, 0, 1] = 1.0   # s0 -> s1 under a0
    P[0, 0, 1, 0] = 1.0   # self-loop under a1
    P[0, 1, :, 1] = 1.0
    return from_tabular(P, np.zeros((1, 2, 2)))


class TestFromTabular:
    """Indicator embedding of tabular kernels."""

    def test_deterministic_recovery(self):
        m = two_state_deterministic()
        assert m.d == 4
        assert m.P[0, 0, 0].tolist() == [0.0, 1.0]
        assert m.P[0, 0, 1].tolist() == [1.0, 0.0]
        assert m.phi(0, 0) @ m.measures[0, 1] == 1.0

    def test_random_kernel_inner_products(self):
        rng = np.random.default_rng(0)
        P = rng.dirichlet(np.ones(5), size=(3, 5, 2))
        m = from_tabular(P, rng.random((3, 5, 2)))
        for h in range(3):
            for s in range(5):
                for a in range(2):
                    got = m.measures[h] @ m.phi(s, a)
                    assert np.max(np.abs(got - P[h, s, a])) <= 1e-12

    def test_bad_rows(self):
        P = np.full((1, 2, 1, 2), 0.6)
        with pytest.raises(InvalidKernel):
            from_tabular(P, np.zeros((1, 2, 1)))

    def test_bad_reward(self):
        P = np.full((1, 2, 1, 2), 0.5)
        with pytest.raises(InvalidReward):
            from_tabular(P, np.full((1, 2, 1), 1.5))

    def test_immutable(self):
        m = random_tabular(seed=0)
        with pytest.raises(ValueError):
            m.rewards[0, 0, 0] = 0.0


class TestValidation:
    def test_feature_norm(self):
        feats = np.array([[1.0, 0.5], [0.0, 1.0]])
        meas = np.array([[[1.0, 0.0]]])
        with pytest.raises(FeatureNormViolation):
            LinearMDP(feats, meas, np.zeros((1, 1, 2)))

    def test_rotated_simplex_rejected(self):
        with pytest.raises(InvalidInstance, match="sqrt"):
            simplex_instance(rotate=True, seed=1)

    def test_simplex_valid(self):
        m = simplex_instance(seed=2)
        np.testing.assert_allclose(m.P.sum(axis=3), 1.0, atol=1e-12)

    def test_schedule_must_not_increase(self):
        m = random_tabular(S=2, A=2, H=1, seed=0)
        sched = np.stack([m.rewards * 0.5, m.rewards])
        with pytest.raises(InvalidReward):
            LinearMDP(m.features, m.measures, m.rewards, reward_schedule=sched)

    def test_schedule_lookup(self):
        m = random_tabular(S=2, A=2, H=1, seed=0)
        sched = np.stack([m.rewards, m.rewards * 0.5])
        ms = LinearMDP(m.features, m.measures, m.rewards, reward_schedule=sched)
        np.testing.assert_array_equal(ms.reward_table(1), m.rewards)
        np.testing.assert_array_equal(ms.reward_table(2), m.rewards * 0.5)
        np.testing.assert_array_equal(ms.reward_table(50), m.rewards * 0.5)


class TestStep:
    """Sampling transitions and rewards."""

    def test_deterministic_successor(self):
        m = two_state_deterministic()
        rng = np.random.default_rng(0)
        assert all(m.step(0, 0, 0, rng)[0] == 1 for _ in range(200))
        assert all(m.step(0, 0, 1, rng)[0] == 0 for _ in range(200))

    def test_fair_coin_frequency(self):
        P = np.full((1, 2, 1, 2), 0.5)
        m = from_tabular(P, np.zeros((1, 2, 1)))
        rng = np.random.default_rng(123)
        hits = sum(m.step(0, 0, 0, rng)[0] for _ in range(20000))
        assert abs(hits / 20000 - 0.5) <= 0.02

    def test_goodness_of_fit(self):
        m = random_tabular(S=5, A=2, H=1, seed=4)
        rng = np.random.default_rng(9)
        n = 20000
        counts = np.bincount([m.step(0, 2, 1, rng)[0] for _ in range(n)], minlength=5)
        expected = n * m.P[0, 2, 1]
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        # 99.9% quantile of chi-square with 4 degrees of freedom
        assert chi2 < 18.47

    def test_constant_reward(self):
        P = np.full((1, 2, 1, 2), 0.5)
        m = from_tabular(P, np.full((1, 2, 1), 0.3))
        assert m.step(0, 1, 0, np.random.default_rng(0))[1] == 0.3
        assert m.step(0, 1, 0, np.random.default_rng(99))[1] == 0.3

    @pytest.mark.parametrize("h, s, a", [(-1, 0, 0), (1, 0, 0), (0, 2, 0), (0, 0, 2)])
    def test_bad_indices(self, h, s, a):
        with pytest.raises(IndexError):
            two_state_deterministic().step(h, s, a, np.random.default_rng(0))


class TestOracles:
    """Exact dynamic programming on tabular instances."""

    def test_zero_reward(self):
        m = random_tabular(seed=1, reward_sparsity=1.0)
        vt = exact_optimal_values(m)
        assert np.all(vt.V == 0) and np.all(vt.Q == 0)

    def test_single_step(self):
        m = random_tabular(S=4, A=3, H=1, seed=2)
        np.testing.assert_array_equal(exact_optimal_values(m).V[0], m.rewards[0].max(axis=1))

    @pytest.mark.parametrize("p", [0.1, 0.37, 1.0])
    def test_chain(self, p):
        m = chain(p)
        assert exact_optimal_values(m).V[0, 0] == pytest.approx(p, abs=1e-15)

    def test_chain_uniform_policy(self):
        m = chain(0.4)
        pol0 = np.zeros((2, 3), dtype=int)
        pol1 = pol0.copy()
        pol1[0, 0] = 1
        assert 0.5 * (policy_value(m, pol0) + policy_value(m, pol1)) == pytest.approx(0.2, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        m = random_tabular(S=4, A=3, H=4, seed=seed)
        np.testing.assert_allclose(exact_optimal_values(m).V, dp_values_ref(m.P, m.rewards), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_greedy_attains_optimum(self, seed):
        m = random_tabular(S=4, A=2, H=3, seed=seed)
        vt = exact_optimal_values(m)
        assert policy_value(m, vt.greedy_policy()) == pytest.approx(vt.V[0, m.initial_state], abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_any_policy_below_optimum(self, seed):
        m = random_tabular(S=4, A=2, H=3, seed=seed)
        pol = np.random.default_rng(seed).integers(0, 2, size=(3, 4))
        vt = exact_optimal_values(m)
        assert np.all(policy_tables(m, pol).V <= vt.V + 1e-12)

    def test_zero_reward_policy(self):
        m = random_tabular(seed=3, reward_sparsity=1.0)
        assert policy_value(m, np.zeros((3, 5), dtype=int)) == 0.0

    def test_policy_shape(self):
        with pytest.raises(ValueError):
            policy_value(random_tabular(), np.zeros((2, 5), dtype=int))

    def test_non_tabular(self):
        m = random_tabular(S=2, A=2, H=1)
        nt = LinearMDP(m.features, m.measures, m.rewards, tabular=False)
        with pytest.raises(OracleUnavailable):
            exact_optimal_values(nt)
        with pytest.raises(OracleUnavailable):
            policy_value(nt, np.zeros((1, 2), dtype=int))


class TestHardInstance:
    """Reach-probability chains for the first-order comparison."""

    def test_certain_reach(self):
        m = hard_instance(1.0)
        assert exact_optimal_values(m).V[0, m.initial_state] == pytest.approx(m.H - 1, abs=1e-12)

    def test_ratio(self):
        lo = hard_instance(0.1, seed=3)
        hi = hard_instance(1.0, seed=3)
        r = exact_optimal_values(lo).V[0, lo.initial_state] / exact_optimal_values(hi).V[0, hi.initial_state]
        assert r == pytest.approx(0.1, abs=1e-10)

    def test_seed_only_relabels(self):
        a, b = hard_instance(0.5, seed=0), hard_instance(0.5, seed=1)
        assert exact_optimal_values(a).V[0, a.initial_state] == exact_optimal_values(b).V[0, b.initial_state]

    def test_bad_p(self):
        with pytest.raises(ValueError):
            hard_instance(0.0)

    def test_suite_builds(self):
        assert len(small_suite(0)) == 3


class TestSerialization:
    def test_round_trip_bytes(self, tmp_path):
        m = hard_instance(0.3, seed=5)
        path = tmp_path / "m.json"
        save_mdp(m, path)
        back = load_mdp(path)
        assert dumps_mdp(back) == path.read_text()
        np.testing.assert_array_equal(back.P, m.P)

    def test_schedule_round_trip(self):
        m = random_tabular(S=2, A=2, H=1, seed=0)
        ms = LinearMDP(m.features, m.measures, m.rewards, reward_schedule=np.stack([m.rewards, m.rewards / 2]))
        back = loads_mdp(dumps_mdp(ms))
        np.testing.assert_array_equal(back.reward_schedule, ms.reward_schedule)

    def test_bad_version(self):
        text = dumps_mdp(random_tabular()).replace('"schema_version": 1', '"schema_version": 9')
        with pytest.raises(InvalidInstance):
            loads_mdp(text)

    def test_float_exactness(self):
        m = random_tabular(seed=7)
        np.testing.assert_array_equal(loads_mdp(dumps_mdp(m)).rewards, m.rewards)
