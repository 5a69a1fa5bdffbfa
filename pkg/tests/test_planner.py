import numpy as np
import pytest

from upkeep.exact import ReplacementMDP, as_component, optimal_first_actions, value_table
from upkeep.model import Action, Belief, BudgetExceededError, ComponentModel, initial_belief
from upkeep.planner import PlannerConfig, plan, root_value


def point_belief(s0, n=200):
    return Belief(particles=np.full(n, s0, dtype=np.int64), c=0)


class TestConfigValidation:
    def test_defaults(self):
        cfg = PlannerConfig(horizon_remaining=10, total_budget=5)
        assert cfg.n_simulations == 1000
        assert cfg.max_depth == 50
        assert cfg.ucb_c == 10.0
        assert cfg.rollout_policy == "random-feasible"

    @pytest.mark.parametrize("kwargs", [
        dict(n_simulations=0),
        dict(max_depth=0),
        dict(ucb_c=-1.0),
        dict(rollout_policy="greedy"),
        dict(horizon_remaining=-1),
        dict(total_budget=-1),
    ])
    def test_rejects(self, kwargs):
        base = dict(horizon_remaining=10, total_budget=5)
        base.update(kwargs)
        with pytest.raises(ValueError):
            PlannerConfig(**base)


class TestPlan:
    def test_deterministic_given_seed(self, boiler_like):
        belief = initial_belief(boiler_like, 60, n_particles=300)
        cfg = PlannerConfig(horizon_remaining=40, total_budget=200,
                            n_simulations=500)
        acts = {plan(boiler_like, belief, cfg, np.random.default_rng(42))
                for _ in range(3)}
        assert len(acts) == 1

    def test_empty_belief_rejected(self, boiler_like):
        cfg = PlannerConfig(horizon_remaining=10, total_budget=100)
        empty = Belief(particles=np.array([], dtype=np.int64), c=0)
        with pytest.raises(ValueError):
            plan(boiler_like, empty, cfg, np.random.default_rng(0))

    def test_tight_budget_forces_do_nothing(self, boiler_like):
        belief = initial_belief(boiler_like, 60, n_particles=100)
        cfg = PlannerConfig(horizon_remaining=30,
                            total_budget=0, n_simulations=300)
        act = plan(boiler_like, belief, cfg, np.random.default_rng(1))
        assert act == Action.D

    def test_nothing_affordable_raises(self):
        decay = np.zeros((3, 3))
        decay[0, 0] = 1.0
        decay[1, 0] = 1.0
        decay[2, 1] = 1.0
        comp = ComponentModel(name="pricey", s_max=2, decay=decay,
                              cost_d=1, cost_q=2, cost_m=3)
        cfg = PlannerConfig(horizon_remaining=5, total_budget=0,
                            n_simulations=50)
        with pytest.raises(BudgetExceededError):
            plan(comp, point_belief(2, 50), cfg, np.random.default_rng(0))

    def test_replaces_when_facing_failure(self):
        # one step from failure, budget available: replacement is clearly best
        mdp = ReplacementMDP(s_max=6, d0=2)
        comp = as_component(mdp)
        cfg = PlannerConfig(horizon_remaining=8, total_budget=3,
                            n_simulations=3000)
        act = plan(comp, point_belief(2), cfg, np.random.default_rng(3))
        assert act == Action.M


class TestAgainstExactSolver:
    def test_action_agreement_and_values(self):
        rng_master = np.random.default_rng(999)
        agree = 0
        n = 40
        for trial in range(n):
            s_max = int(rng_master.integers(2, 7))
            d0 = int(rng_master.integers(1, 4))
            horizon = int(rng_master.integers(1, 11))
            s0 = int(rng_master.integers(1, s_max + 1))
            b = int(rng_master.integers(0, 7))
            mdp = ReplacementMDP(s_max=s_max, d0=d0)
            table = value_table(mdp, horizon, max(b, 1))
            optimal = optimal_first_actions(table, horizon, s0, b)
            exact = table.value(horizon, s0, b)

            comp = as_component(mdp)
            cfg = PlannerConfig(horizon_remaining=horizon, total_budget=b,
                                n_simulations=10000)
            act = plan(comp, point_belief(s0), cfg,
                       np.random.default_rng(10 + trial))
            # free inspection is value-equivalent to plain decay here
            mapped = "m" if act == Action.M else "d"
            agree += mapped in optimal

            value = root_value(comp, point_belief(s0), cfg,
                               np.random.default_rng(20 + trial))
            if exact > 0:
                assert abs(value - exact) <= 0.05 * exact, \
                    (s_max, d0, horizon, s0, b, exact, value)
        assert agree >= 0.95 * n

    def test_failed_belief_has_zero_value(self, boiler_like):
        cfg = PlannerConfig(horizon_remaining=30, total_budget=500,
                            n_simulations=10000)
        value = root_value(boiler_like, point_belief(0), cfg,
                           np.random.default_rng(0))
        assert abs(value) <= 0.01

    def test_saturated_budget_reaches_full_survival(self):
        # enough budget to replace every other step: value is the horizon cap
        mdp = ReplacementMDP(s_max=4, d0=2)
        comp = as_component(mdp)
        horizon = 8
        b = 6  # > ceil(8/2)
        cfg = PlannerConfig(horizon_remaining=horizon, total_budget=b,
                            n_simulations=10000)
        value = root_value(comp, point_belief(4), cfg,
                           np.random.default_rng(5))
        assert value == pytest.approx(horizon + 1, abs=0.1)

    def test_horizon_zero_value_is_current_reward(self, boiler_like):
        cfg = PlannerConfig(horizon_remaining=0, total_budget=100,
                            n_simulations=100)
        value = root_value(boiler_like, point_belief(50), cfg,
                           np.random.default_rng(0))
        assert value == 1.0
