import math
from dataclasses import replace

import numpy as np
import pytest

from banditlab import kernel
from banditlab.core import EpsilonGreedy, Policy
from banditlab.env import Family, make_instance
from banditlab.errors import (InvalidConfigurationError, UndefinedBoundError,
                              UnsupportedConfigurationError)
from banditlab.harness import (ExperimentConfig, aggregate, lai_robbins_bound, play,
                               run_experiment, run_single, tune)

SMALL = dict(horizon=200, repetitions=40, master_seed=3)


class AlwaysArm(Policy):
    def __init__(self, k, arm):
        super().__init__(k)
        self.arm = arm

    def select(self, rng):
        return self.arm


def test_single_arm_has_no_regret():
    cfg = ExperimentConfig(1, 0.01, "ucb1_tuned", **SMALL)
    m = run_single(cfg, make_instance([0.3], 0.01), np.random.default_rng(0))
    assert m.total_regret == 0.0 and m.optimal_fraction == 1.0


@pytest.mark.parametrize("algo,params", [("epsilon_greedy", {"epsilon": 0.2}),
                                         ("softmax", {"tau": 0.1}), ("pursuit", {"beta": 0.1}),
                                         ("reinforcement_comparison", {"alpha": 0.1, "beta": 0.5}),
                                         ("ucb1", {}), ("ucb1_tuned", {})])
def test_equal_means_have_no_regret(algo, params):
    cfg = ExperimentConfig(4, 0.04, algo, params, **SMALL)
    m = run_single(cfg, make_instance([0.4] * 4, 0.04), np.random.default_rng(1))
    assert m.total_regret == 0.0


def test_stub_policy_regret_is_horizon():
    cfg = ExperimentConfig(2, 0.01, "ucb1", **SMALL)
    m = run_single(cfg, make_instance([1.0, 0.0], 0.01), np.random.default_rng(0),
                   policy=AlwaysArm(2, 1))
    assert m.total_regret == 200.0
    assert not m.optimal_play.any() and list(m.play_counts) == [0, 200]


def test_instance_must_match():
    cfg = ExperimentConfig(3, 0.01, "ucb1", **SMALL)
    with pytest.raises(InvalidConfigurationError):
        run_single(cfg, make_instance([0.1, 0.2], 0.01), np.random.default_rng(0))


def test_generic_loop_matches_kernel_for_deterministic_policy():
    # UCB1 with distinct means never draws a uniform, so both paths see the same noise.
    inst = make_instance([0.2, 0.8, 0.5], 0.01)
    cfg = ExperimentConfig(3, 0.01, "ucb1", **SMALL)
    from banditlab.core import UCB1
    a = play(UCB1(3), inst, np.random.default_rng(5), 200)
    rng = np.random.default_rng(5)
    b = run_single(cfg, inst, rng)
    assert a.per_turn_regret.tobytes() == b.per_turn_regret.tobytes()
    assert list(a.play_counts) == list(b.play_counts)


class TestConfig:
    def test_horizon_covers_arms(self):
        with pytest.raises(InvalidConfigurationError):
            ExperimentConfig(10, 0.01, "ucb1", horizon=5)

    def test_parameters_checked(self):
        with pytest.raises(InvalidConfigurationError):
            ExperimentConfig(2, 0.01, "softmax", {"epsilon": 0.1})

    def test_repetitions_positive(self):
        with pytest.raises(InvalidConfigurationError):
            ExperimentConfig(2, 0.01, "ucb1", repetitions=0)


class TestExperiment:
    cfg = ExperimentConfig(5, 0.01, "softmax", {"tau": 0.01}, **SMALL)

    def test_thread_count_does_not_matter(self):
        a = run_experiment(self.cfg, threads=1)
        b = run_experiment(self.cfg, threads=4)
        assert a.regret_curve.tobytes() == b.regret_curve.tobytes()
        assert a.total_regrets.tobytes() == b.total_regrets.tobytes()
        assert a.mean_total_regret == b.mean_total_regret
        assert a.std_error_total_regret == b.std_error_total_regret

    def test_rerun_is_identical(self):
        a, b = run_experiment(self.cfg), run_experiment(self.cfg)
        assert a.optimal_fraction_curve.tobytes() == b.optimal_fraction_curve.tobytes()

    def test_seed_changes_result(self):
        a = run_experiment(self.cfg)
        b = run_experiment(replace(self.cfg, master_seed=4))
        assert a.mean_total_regret != b.mean_total_regret

    def test_backends_agree(self):
        if kernel.compiled_run_episode is None:
            pytest.skip("compiled extension not built")
        a = run_experiment(self.cfg, run_episode=kernel.python_run_episode)
        b = run_experiment(self.cfg, run_episode=kernel.compiled_run_episode)
        assert a.total_regrets.tobytes() == b.total_regrets.tobytes()

    def test_single_repetition_is_the_run(self):
        agg = run_experiment(replace(self.cfg, repetitions=1))
        assert agg.mean_total_regret == agg.total_regrets[0] == agg.cumulative_regret_curve[-1]
        assert agg.std_error_total_regret == 0.0

    def test_curve_invariants(self):
        agg = run_experiment(self.cfg)
        assert agg.mean_total_regret >= 0
        assert ((0 <= agg.optimal_fraction_curve) & (agg.optimal_fraction_curve <= 1)).all()
        assert (np.diff(agg.cumulative_regret_curve) >= 0).all()

    def test_permutation_invariance(self):
        agg = run_experiment(self.cfg)
        rng = np.random.default_rng(0)
        regrets = np.tile(agg.regret_curve, (5, 1)) * rng.random((5, 1))
        optimal = rng.random((5, self.cfg.horizon)) < 0.5
        perm = rng.permutation(5)
        x, y = aggregate(regrets, optimal), aggregate(regrets[perm], optimal[perm])
        assert x.mean_total_regret == pytest.approx(y.mean_total_regret, rel=1e-12)
        assert x.std_error_total_regret == pytest.approx(y.std_error_total_regret, rel=1e-12)
        np.testing.assert_allclose(x.regret_curve, y.regret_curve, rtol=1e-12)

    @pytest.mark.parametrize("algo,params", [("epsilon_greedy", {"epsilon": 0.01}),
                                             ("softmax", {"tau": 0.01}),
                                             ("pursuit", {"beta": 0.25}),
                                             ("reinforcement_comparison",
                                              {"alpha": 0.1, "beta": 0.95}),
                                             ("ucb1", {}), ("ucb1_tuned", {})])
    def test_learning_curves_flatten(self, algo, params):
        cfg = ExperimentConfig(5, 0.01, algo, params, horizon=1000, repetitions=100)
        curve = run_experiment(cfg).regret_curve
        assert curve[900:].mean() < curve[:100].mean()

    def test_standard_error_scaling(self):
        cfg = ExperimentConfig(5, 0.01, "epsilon_greedy", {"epsilon": 0.05}, horizon=200)
        se1 = run_experiment(replace(cfg, repetitions=100)).std_error_total_regret
        se4 = run_experiment(replace(cfg, repetitions=400)).std_error_total_regret
        assert 1 / 1.5 <= (se1 / se4) / 2 <= 1.5

    def test_total_regret_matches_curve(self):
        agg = run_experiment(self.cfg)
        assert agg.cumulative_regret_curve[-1] == pytest.approx(agg.mean_total_regret, rel=1e-12)

    def test_other_families_run(self):
        for family in Family:
            cfg = ExperimentConfig(3, 0.01, "ucb1_tuned", family=family, horizon=50,
                                   repetitions=5)
            assert run_experiment(cfg).mean_total_regret >= 0

    def test_normal_mean_mode(self):
        cfg = ExperimentConfig(3, 0.01, "ucb1", mean_mode="normal", horizon=50, repetitions=5)
        assert run_experiment(cfg).mean_total_regret >= 0


class TestTune:
    cfg = ExperimentConfig(5, 0.01, "softmax", {"tau": 0.01}, **SMALL)

    def test_single_value_grid(self):
        res = tune(self.cfg, "tau", [0.02])
        assert res.best_value == 0.02 and len(res.table) == 1

    def test_best_is_minimum(self):
        res = tune(self.cfg, "tau", [0.001, 0.01, 0.1, 1.0])
        regrets = {v: a.mean_total_regret for v, a in res.table}
        assert regrets[res.best_value] == min(regrets.values())
        assert res.best.mean_total_regret == min(regrets.values())

    def test_ties_go_to_smaller_value(self):
        cfg = ExperimentConfig(1, 0.01, "softmax", {"tau": 0.1}, **SMALL)
        assert tune(cfg, "tau", [0.5, 0.2, 0.9]).best_value == 0.2

    def test_common_streams_flag(self):
        a = tune(self.cfg, "tau", [0.01, 0.01])
        assert a.table[0][1].mean_total_regret == a.table[1][1].mean_total_regret
        b = tune(self.cfg, "tau", [0.01, 0.01], common_streams=False)
        assert b.table[0][1].mean_total_regret != b.table[1][1].mean_total_regret

    def test_empty_grid(self):
        with pytest.raises(InvalidConfigurationError):
            tune(self.cfg, "tau", [])

    def test_unknown_parameter(self):
        with pytest.raises(InvalidConfigurationError):
            tune(self.cfg, "epsilon", [0.1])


class TestLaiRobbins:
    def test_normal_closed_form(self):
        inst = make_instance([1.0, 0.5], 1.0)
        assert lai_robbins_bound(inst, math.e) == pytest.approx(4.0, rel=1e-14)

    def test_first_turn(self):
        assert lai_robbins_bound(make_instance([0.9, 0.1], 0.1), 1) == 0.0

    def test_bernoulli(self):
        inst = make_instance([0.8, 0.5], 1.0, "bernoulli")
        kl = 0.5 * math.log(0.5 / 0.8) + 0.5 * math.log(0.5 / 0.2)
        assert lai_robbins_bound(inst, 100) == pytest.approx(0.3 * math.log(100) / kl)

    def test_no_gap(self):
        with pytest.raises(UndefinedBoundError):
            lai_robbins_bound(make_instance([0.5, 0.5], 0.1), 10)

    def test_unsupported_family(self):
        with pytest.raises(UnsupportedConfigurationError):
            lai_robbins_bound(make_instance([0.9, 0.5], 0.1, "gumbel"), 10)

    def test_bound_below_observed_regret_for_ucb(self):
        inst = make_instance([0.9, 0.4], 0.25)
        cfg = ExperimentConfig(2, 0.25, "ucb1", horizon=1000, repetitions=1)
        total = np.mean([run_single(cfg, inst, np.random.default_rng(s)).total_regret
                         for s in range(30)])
        assert total > lai_robbins_bound(inst, 1000)


def test_play_with_epsilon_greedy_counts():
    inst = make_instance([0.1, 0.9], 0.01)
    m = play(EpsilonGreedy(2, 0.1), inst, np.random.default_rng(0), 500)
    assert m.play_counts.sum() == 500 and m.play_counts[1] > 400
