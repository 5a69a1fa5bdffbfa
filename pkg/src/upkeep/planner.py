"""Online planning for one budget-constrained component via tree search.

Thin, validated wrapper over the search kernel in :mod:`upkeep.kernels`.
Searches explore only actions that fit the remaining budget, so a plan can
never overspend; budget adherence is structural rather than penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Action, Belief, BudgetExceededError, ComponentModel, REWARD_ALIVE

ROLLOUT_POLICIES = ("random-feasible", "always-d")


@dataclass
class PlannerConfig:
    horizon_remaining: int
    total_budget: int
    n_simulations: int = 1000
    max_depth: int = 50
    ucb_c: float = 10.0
    rollout_policy: str = "random-feasible"
    n_eval_rollouts: int = 500  # post-search greedy evaluation, root_value only

    def __post_init__(self):
        if self.n_simulations < 1:
            raise ValueError("n_simulations must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.ucb_c < 0:
            raise ValueError("ucb_c must be >= 0")
        if self.rollout_policy not in ROLLOUT_POLICIES:
            raise ValueError(f"rollout_policy must be one of {ROLLOUT_POLICIES}")
        if self.horizon_remaining < 0:
            raise ValueError("horizon_remaining must be >= 0")
        if self.total_budget < 0:
            raise ValueError("total_budget must be >= 0")
        if self.n_eval_rollouts < 1:
            raise ValueError("n_eval_rollouts must be >= 1")


def _search(model: ComponentModel, belief: Belief, cfg: PlannerConfig, rng,
            n_eval: int = 0):
    if belief.particles.size == 0:
        raise ValueError("cannot plan from an empty belief")
    state = rng.integers(0, 2**64, size=2, dtype=np.uint64)
    if state[0] == 0 and state[1] == 0:
        state[0] = np.uint64(0x9E3779B97F4A7C15)
    action, q_value, eval_value = kernels.pomcp_search(
        model.decay_cdf,
        model.cost_array,
        cfg.total_budget,
        belief.c,
        belief.particles,
        cfg.horizon_remaining,
        cfg.n_simulations,
        cfg.max_depth,
        cfg.ucb_c,
        cfg.rollout_policy == "random-feasible",
        state,
        n_eval,
    )
    return action, q_value, eval_value


def plan(
    model: ComponentModel,
    belief: Belief,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> Action:
    """Choose the action with the best value estimate at the root.

    Raises ``BudgetExceededError`` when not even the do-nothing action is
    affordable (possible only with a positive do-nothing cost); callers treat
    that as episode termination.
    """
    action, _, _ = _search(model, belief, cfg, rng)
    if action < 0:
        raise BudgetExceededError(
            f"{model.name}: no action fits the remaining budget "
            f"({cfg.total_budget - belief.c} left)"
        )
    return Action(action)


def root_value(
    model: ComponentModel,
    belief: Belief,
    cfg: PlannerConfig,
    rng: np.random.Generator,
) -> float:
    """Estimate of the optimal total reward-to-come from this belief.

    Runs the search, then scores the recommended (greedy) tree policy with
    ``cfg.n_eval_rollouts`` exploration-free runs; the in-tree running mean
    is biased low by returns collected while the tree was still cold.
    Includes the reward collected for the current condition, so with horizon
    h this estimates the (h+1)-collection optimal value and is directly
    comparable to :func:`upkeep.exact.exact_value` on the deterministic
    special case.
    """
    action, _, value = _search(model, belief, cfg, rng,
                               n_eval=cfg.n_eval_rollouts)
    if action < 0:
        value = 0.0
    return belief.alive_fraction * REWARD_ALIVE + value
