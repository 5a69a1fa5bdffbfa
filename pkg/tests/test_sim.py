import numpy as np
import pytest

from upkeep.exact import ReplacementMDP, as_component
from upkeep.model import Action, ComponentModel
from upkeep.scenario import Scenario, decay_rows
from upkeep.sim import (
    BaselinePolicy,
    BaselinePolicyConfig,
    PomcpPolicy,
    baseline_step,
    evaluate,
    most_probable_next,
    run_episode,
)


@pytest.fixture(scope="module")
def chain5():
    return as_component(ReplacementMDP(s_max=5, d0=1))


class TestBaselineStep:
    def test_inspects_on_schedule(self, boiler_like):
        cfg = BaselinePolicyConfig(inspect_every=5, replace_threshold=15)
        assert baseline_step(boiler_like, 50, 5, 0, 500, cfg) == Action.Q
        assert baseline_step(boiler_like, 10, 5, 0, 500, cfg) == Action.Q

    def test_replaces_below_threshold(self, boiler_like):
        cfg = BaselinePolicyConfig()
        assert baseline_step(boiler_like, 14, 3, 0, 500, cfg) == Action.M

    def test_does_nothing_otherwise(self, boiler_like):
        cfg = BaselinePolicyConfig()
        assert baseline_step(boiler_like, 50, 3, 0, 500, cfg) == Action.D

    def test_falls_through_when_unaffordable(self, boiler_like):
        cfg = BaselinePolicyConfig()
        # wants to replace (est 14 < 15) but cannot; wants to inspect at t=5
        # but cannot either
        assert baseline_step(boiler_like, 14, 5, 0, 0, cfg) == Action.D

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BaselinePolicyConfig(inspect_every=0)
        with pytest.raises(ValueError):
            BaselinePolicyConfig(replace_threshold=-1)


class TestMostProbableNext:
    def test_deterministic_drop(self):
        comp = as_component(ReplacementMDP(s_max=9, d0=2))
        assert most_probable_next(comp, 7) == 5

    def test_argmax_of_row(self):
        decay = np.array([
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.0, 0.0, 0.0],
            [0.2, 0.5, 0.3, 0.0, 0.0],
            [0.1, 0.2, 0.3, 0.4, 0.0],
        ])
        comp = ComponentModel(name="mp", s_max=4, decay=decay)
        assert most_probable_next(comp, 4) == 3

    def test_tie_breaks_low(self):
        decay = np.array([
            [1.0, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.5, 0.5, 0.0],
        ])
        comp = ComponentModel(name="tie", s_max=2, decay=decay)
        assert most_probable_next(comp, 2) == 0

    def test_failure_absorbs(self, boiler_like):
        assert most_probable_next(boiler_like, 0) == 0


class TestRunEpisode:
    def test_failed_start(self, chain5):
        for policy in (PomcpPolicy(n_simulations=50),
                       BaselinePolicy()):
            trace = run_episode(chain5, policy, 5, 0, 20, seed=1)
            assert trace.ttf == 0
            assert trace.flag == "failed"
            assert trace.n_steps == 0

    def test_pure_decay_ttf(self, chain5):
        for policy in (PomcpPolicy(n_simulations=100, n_particles=50),
                       BaselinePolicy()):
            trace = run_episode(chain5, policy, 0, 5, 30, seed=2)
            assert trace.ttf == 5
            assert trace.flag == "failed"

    def test_ttf_equals_total_reward(self, boiler_like):
        policy = PomcpPolicy(n_simulations=200, n_particles=100)
        for seed in range(5):
            trace = run_episode(boiler_like, policy, 200, 100, 40, seed=seed)
            assert trace.ttf == trace.rewards.sum()
            assert np.all((trace.rewards == 1) == (trace.states > 0))

    def test_budget_never_exceeded(self, boiler_like):
        for policy in (PomcpPolicy(n_simulations=150, n_particles=100),
                       BaselinePolicy()):
            for seed in range(10):
                trace = run_episode(boiler_like, policy, 137, 100, 60,
                                    seed=seed)
                assert np.all(np.diff(trace.cum_costs) >= 0)
                assert trace.cum_costs[-1] <= 137

    def test_reproducible_bit_for_bit(self, boiler_like):
        policy = PomcpPolicy(n_simulations=300, n_particles=200)
        a = run_episode(boiler_like, policy, 300, 100, 50, seed=99)
        b = run_episode(boiler_like, policy, 300, 100, 50, seed=99)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.cum_costs, b.cum_costs)
        np.testing.assert_array_equal(a.belief_means, b.belief_means)

    def test_policies_share_environment_stream(self, chain5):
        # pure decay under both policies with no budget: identical traces
        t1 = run_episode(chain5, BaselinePolicy(), 0, 5, 30, seed=5)
        t2 = run_episode(chain5, PomcpPolicy(n_simulations=60,
                                             n_particles=30), 0, 5, 30,
                         seed=5)
        np.testing.assert_array_equal(t1.states, t2.states)

    def test_budget_limited_flag(self):
        decay = decay_rows("deterministic", 4, {"d0": 1})
        comp = ComponentModel(name="tax", s_max=4, decay=decay,
                              cost_d=1, cost_q=2, cost_m=3)
        trace = run_episode(comp, BaselinePolicy(), 2, 4, 10, seed=3)
        assert trace.flag == "budget-limited"
        assert trace.cum_costs[-1] <= 2

    def test_baseline_pure_decay_matches_chain_law(self, small_stochastic):
        # distribution check against a direct Markov-chain simulation
        n = 3000
        ttfs = np.array([
            run_episode(small_stochastic, BaselinePolicy(), 0, 2, 200,
                        seed=s).ttf
            for s in range(n)
        ])
        rng = np.random.default_rng(123)
        direct = np.empty(n)
        for i in range(n):
            s, steps = 2, 0
            while s > 0:
                s = rng.choice(3, p=small_stochastic.decay[s])
                steps += 1
            direct[i] = steps
        assert ttfs.mean() == pytest.approx(direct.mean(), rel=0.05)
        assert ttfs.std() == pytest.approx(direct.std(), rel=0.15)

    def test_trace_serialization(self, chain5):
        trace = run_episode(chain5, BaselinePolicy(), 3, 5, 10, seed=1)
        data = trace.to_dict()
        assert data["ttf"] == trace.ttf
        assert len(data["states"]) == trace.n_steps + 1


class TestEvaluate:
    def make_scenario(self, comps, budget=20, horizon=15):
        return Scenario(
            name="tiny",
            total_budget=budget,
            horizon=horizon,
            components=comps,
            initial_states={c.name: c.s_max for c in comps},
        )

    def test_all_failed_scores_zero(self, chain5):
        scenario = self.make_scenario([chain5])
        scenario.initial_states["chain-s5-d1"] = 0
        result = evaluate(scenario, {"chain-s5-d1": 10}, BaselinePolicy(),
                          n_seeds=4, master_seed=1)
        assert result.overall_ttf == 0.0

    def test_overall_is_sum_of_means(self, chain5, small_stochastic):
        scenario = self.make_scenario([chain5, small_stochastic])
        budgets = {"chain-s5-d1": 4, "widget": 6}
        result = evaluate(scenario, budgets, BaselinePolicy(), n_seeds=6,
                          master_seed=3)
        total = sum(m.mean_ttf for m in result.per_component)
        assert result.overall_ttf == pytest.approx(total)
        assert len(result.traces) == 12

    def test_missing_component_rejected(self, chain5):
        scenario = self.make_scenario([chain5])
        with pytest.raises(ValueError, match="missing component"):
            evaluate(scenario, {}, BaselinePolicy(), n_seeds=2)

    def test_paired_and_reproducible(self, small_stochastic):
        scenario = self.make_scenario([small_stochastic])
        pol = PomcpPolicy(n_simulations=100, n_particles=50)
        r1 = evaluate(scenario, {"widget": 8}, pol, n_seeds=5, master_seed=7)
        r2 = evaluate(scenario, {"widget": 8}, pol, n_seeds=5, master_seed=7)
        assert r1.overall_ttf == r2.overall_ttf
        for a, b in zip(r1.traces, r2.traces):
            np.testing.assert_array_equal(a.states, b.states)

    def test_worker_invariance(self, small_stochastic, chain5):
        scenario = self.make_scenario([chain5, small_stochastic])
        budgets = {"chain-s5-d1": 4, "widget": 6}
        pol = PomcpPolicy(n_simulations=80, n_particles=40)
        seq = evaluate(scenario, budgets, pol, n_seeds=4, master_seed=11,
                       workers=1)
        par = evaluate(scenario, budgets, pol, n_seeds=4, master_seed=11,
                       workers=4)
        assert seq.overall_ttf == par.overall_ttf

    def test_metrics_rows(self, chain5):
        scenario = self.make_scenario([chain5])
        result = evaluate(scenario, {"chain-s5-d1": 5}, BaselinePolicy(),
                          n_seeds=3, master_seed=2)
        rows = result.metrics_rows("baseline")
        assert rows[0]["component"] == "chain-s5-d1"
        assert rows[0]["policy"] == "baseline"
        assert rows[0]["n_seeds"] == 3
