"""Single-component deterioration model with budget-augmented state.

A component has an integer condition index in {0, ..., s_max}; 0 is failure
and absorbs.  Three actions are available each step: leave it alone (the
condition decays stochastically and nothing is observed), inspect (same decay,
but the new condition is revealed), or replace (the condition jumps to s_max
and is revealed).  Every action has an integer cost charged against a budget;
the cumulative cost is part of the state and is always known exactly, which
is what lets a planner rule out unaffordable actions outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Optional

import numpy as np


class Action(IntEnum):
    D = 0  # do nothing, let the condition decay
    Q = 1  # inspect: decay, then observe the new condition
    M = 2  # replace: condition jumps to s_max


#: Either the exactly observed new condition (after Q or M) or None (after D).
Observation = Optional[int]

REWARD_ALIVE = 1  # reward collected whenever the condition is above failure


class BudgetExceededError(RuntimeError):
    """An action was taken that does not fit the remaining budget."""


@dataclass(frozen=True, eq=False)
class ComponentModel:
    """Immutable description of one component.

    ``decay`` is a full (s_max+1) x (s_max+1) row-stochastic matrix giving the
    distribution of the next condition under actions D and Q.  Row 0 must be
    absorbing and no row may put mass above its own index (conditions never
    improve without a replacement).
    """

    name: str
    s_max: int
    decay: np.ndarray
    cost_d: int = 0
    cost_q: int = 1
    cost_m: int = 1
    failure_threshold: int = field(default=0)

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError(f"{self.name}: s_max must be >= 1, got {self.s_max}")
        if self.failure_threshold != 0:
            raise ValueError(f"{self.name}: failure threshold is fixed at 0")
        decay = np.asarray(self.decay, dtype=np.float64)
        n = self.s_max + 1
        if decay.shape != (n, n):
            raise ValueError(
                f"{self.name}: decay must be {(n, n)}, got {decay.shape}"
            )
        if np.any(decay < 0):
            raise ValueError(f"{self.name}: decay has negative entries")
        sums = decay.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-9)[0]
        if bad.size:
            raise ValueError(
                f"{self.name}: decay row {bad[0]} sums to {sums[bad[0]]:.12g}, not 1"
            )
        if np.any(np.triu(decay, k=1) != 0.0):
            s = int(np.nonzero(np.triu(decay, k=1))[0][0])
            raise ValueError(
                f"{self.name}: decay row {s} puts mass above state {s}"
            )
        if decay[0, 0] != 1.0:
            raise ValueError(f"{self.name}: state 0 must be absorbing")
        for label, cost in (("cost_d", self.cost_d), ("cost_q", self.cost_q),
                            ("cost_m", self.cost_m)):
            if int(cost) != cost or cost < 0:
                raise ValueError(f"{self.name}: {label} must be a nonnegative integer")
        decay = decay.copy()
        decay.setflags(write=False)
        object.__setattr__(self, "decay", decay)
        object.__setattr__(self, "cost_d", int(self.cost_d))
        object.__setattr__(self, "cost_q", int(self.cost_q))
        object.__setattr__(self, "cost_m", int(self.cost_m))

    @classmethod
    def from_decay_rows(cls, name, rows, cost_d=0, cost_q=1, cost_m=1):
        """Build from ragged rows: ``rows[i]`` is the distribution over
        {0..i+1} for starting state i+1.  Row 0 (absorbing) is implicit."""
        s_max = len(rows)
        decay = np.zeros((s_max + 1, s_max + 1))
        decay[0, 0] = 1.0
        for i, row in enumerate(rows, start=1):
            row = np.asarray(row, dtype=np.float64)
            if row.shape != (i + 1,):
                raise ValueError(
                    f"{name}: decay row for state {i} must have length {i + 1}"
                )
            decay[i, : i + 1] = row
        return cls(name=name, s_max=s_max, decay=decay,
                   cost_d=cost_d, cost_q=cost_q, cost_m=cost_m)

    @cached_property
    def decay_cdf(self) -> np.ndarray:
        """Row-wise CDF of ``decay`` with the tail pinned to exactly 1.0."""
        cdf = np.cumsum(self.decay, axis=1)
        for s in range(self.s_max + 1):
            cdf[s, s:] = 1.0
        cdf.setflags(write=False)
        return cdf

    @cached_property
    def cost_array(self) -> np.ndarray:
        costs = np.array([self.cost_d, self.cost_q, self.cost_m], dtype=np.int64)
        costs.setflags(write=False)
        return costs

    def _check_state(self, s: int) -> None:
        if not 0 <= s <= self.s_max:
            raise ValueError(f"{self.name}: state {s} outside 0..{self.s_max}")


@dataclass
class BudgetedState:
    """Hidden condition plus the fully observable cumulative cost."""

    s: int
    c: int


@dataclass
class Belief:
    """Particle belief over the hidden condition; the cost is known exactly."""

    particles: np.ndarray
    c: int

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=np.int64)

    @property
    def alive_fraction(self) -> float:
        return float(np.mean(self.particles > 0))


def initial_belief(model: ComponentModel, s0: int, n_particles: int = 1000) -> Belief:
    model._check_state(s0)
    return Belief(particles=np.full(n_particles, s0, dtype=np.int64), c=0)


def transition_prob(model: ComponentModel, s: int, a: Action, s_bar: int) -> float:
    """Probability of moving from ``s`` to ``s_bar`` under action ``a``.

    Failure absorbs every action, replacement is deterministic, and the decay
    matrix covers D and Q.
    """
    model._check_state(s)
    model._check_state(s_bar)
    if s == 0:
        return 1.0 if s_bar == 0 else 0.0
    if a == Action.M:
        return 1.0 if s_bar == model.s_max else 0.0
    if s_bar > s:
        return 0.0
    return float(model.decay[s, s_bar])


def observe(model: ComponentModel, s_bar: int, a: Action) -> Observation:
    """Deterministic observation of the new state: exact after Q or M, nothing
    after D."""
    model._check_state(s_bar)
    if a == Action.D:
        return None
    return int(s_bar)


def action_cost(model: ComponentModel, a: Action) -> int:
    if a == Action.D:
        return model.cost_d
    if a == Action.Q:
        return model.cost_q
    return model.cost_m


def feasible_actions(model: ComponentModel, c: int, budget: int) -> tuple:
    """Actions whose cost still fits the budget, in (D, Q, M) order.

    Never empty: when nothing is affordable (possible only with cost_d > 0)
    the result is ``(Action.D,)`` and callers must treat D as forced.
    """
    if c > budget:
        raise BudgetExceededError(
            f"{model.name}: spent {c} exceeds budget {budget}"
        )
    acts = tuple(a for a in Action if c + action_cost(model, a) <= budget)
    if not acts:
        return (Action.D,)
    return acts


def step(
    model: ComponentModel,
    state: BudgetedState,
    a: Action,
    rng: np.random.Generator,
    budget: int | None = None,
):
    """Sample one transition; returns (new state, observation, reward).

    The reward is 1 while the new condition is above failure, 0 after.  When
    ``budget`` is given, taking an unaffordable action raises
    ``BudgetExceededError``.
    """
    model._check_state(state.s)
    cost = action_cost(model, a)
    if budget is not None and state.c + cost > budget:
        raise BudgetExceededError(
            f"{model.name}: action {a.name} costs {cost}, only "
            f"{budget - state.c} left"
        )
    if a == Action.M:
        s_bar = model.s_max if state.s > 0 else 0
    else:
        u = rng.random()
        s_bar = int(np.searchsorted(model.decay_cdf[state.s], u, side="right"))
    new = BudgetedState(s=s_bar, c=state.c + cost)
    reward = REWARD_ALIVE if s_bar > 0 else 0
    return new, observe(model, s_bar, a), reward


def update_belief(
    model: ComponentModel,
    belief: Belief,
    a: Action,
    obs: Observation,
    rng: np.random.Generator,
) -> Belief:
    """Advance the particle belief after taking ``a`` and seeing ``obs``.

    Exact observations collapse every particle onto the reading; the
    uninformative observation pushes each particle through the decay matrix.
    """
    if belief.particles.size == 0:
        raise ValueError("belief has no particles")
    new_cost = belief.c + action_cost(model, a)
    if a == Action.D:
        if obs is not None:
            raise ValueError("exact observation is impossible after action D")
        u = rng.random(belief.particles.size)
        rows = model.decay_cdf[belief.particles]
        particles = (rows > u[:, None]).argmax(axis=1)
        return Belief(particles=particles.astype(np.int64), c=new_cost)
    if obs is None:
        raise ValueError(f"action {Action(a).name} always yields an observation")
    model._check_state(obs)
    return Belief(
        particles=np.full(belief.particles.size, int(obs), dtype=np.int64),
        c=new_cost,
    )
