"""Splitting one budget across components by welfare maximization.

With repaired (monotone, concave) value curves the discrete problem
``maximize sum_i V_i(b_i) subject to sum_i b_i = B`` is solved exactly by
greedy marginal allocation: repeatedly grant the next budget increment to the
component whose value curve gains the most from it.  A brute-force enumerator
serves as the oracle on small instances, and a cost/MTTF-proportional rule
mirrors the heuristic used in practice.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .curves import value_at
from .model import ComponentModel

BRUTE_FORCE_MAX_SPLITS = 10**7


@dataclass
class AllocationPlan:
    components: list
    budgets: np.ndarray  # int64, same order as components
    welfare: float | None
    method: str
    wall_time_s: float = 0.0

    def __post_init__(self):
        self.budgets = np.asarray(self.budgets, dtype=np.int64)

    def budget_of(self, name: str) -> int:
        return int(self.budgets[self.components.index(name)])

    def as_mapping(self) -> dict:
        return {name: int(b) for name, b in zip(self.components, self.budgets)}

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "welfare": self.welfare,
            "wall_time_s": self.wall_time_s,
            "budgets": self.as_mapping(),
            "total": int(self.budgets.sum()),
        }


def plan_welfare(curves, budgets) -> float:
    """Sum of interpolated curve values at the given budgets (shared by every
    allocator so welfare comparisons are arithmetic-identical)."""
    return float(sum(value_at(c, int(b)) for c, b in zip(curves, budgets)))


def _check_instance(curves, total_budget: int, step: int) -> None:
    if total_budget < 0:
        raise ValueError("total budget must be nonnegative")
    if step < 1:
        raise ValueError("step must be >= 1")
    if total_budget % step != 0:
        raise ValueError(f"step {step} does not divide budget {total_budget}")
    for curve in curves:
        if curve.grid[-1] < total_budget:
            raise ValueError(
                f"curve {curve.name!r} ends at {int(curve.grid[-1])} < budget "
                f"{total_budget}; extend it first (see curves.extend_to)"
            )


def allocate_greedy(curves, total_budget: int, step: int = 1) -> AllocationPlan:
    """Exact greedy marginal allocation on concave curves.

    Grants ``step`` units at a time to the component with the largest value
    gain, ties to the lowest component index.  Requires repaired curves;
    on concave curves the result is optimal among step-quantized splits.
    """
    _check_instance(curves, total_budget, step)
    t0 = time.perf_counter()
    n = len(curves)
    n_rounds = total_budget // step
    # value at every multiple of step, per component
    points = np.arange(0, total_budget + 1, step, dtype=np.int64)
    marginals = []
    for curve in curves:
        vals = np.interp(points, curve.grid, curve.values)
        marginals.append(np.diff(vals).tolist())
    levels = [0] * n
    current = [m[0] if n_rounds > 0 else float("-inf") for m in marginals]
    for _ in range(n_rounds):
        best_i = 0
        best_gain = current[0]
        for i in range(1, n):
            if current[i] > best_gain:
                best_gain = current[i]
                best_i = i
        levels[best_i] += 1
        lvl = levels[best_i]
        current[best_i] = marginals[best_i][lvl] if lvl < n_rounds else float("-inf")
    budgets = np.array(levels, dtype=np.int64) * step
    elapsed = time.perf_counter() - t0
    return AllocationPlan(
        components=[c.name for c in curves],
        budgets=budgets,
        welfare=plan_welfare(curves, budgets),
        method="greedy",
        wall_time_s=elapsed,
    )


def _compositions(total: int, n: int):
    """All n-part compositions of ``total`` (lexicographic)."""
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, n - 1):
            yield (first,) + rest


def allocate_bruteforce(curves, total_budget: int, step: int = 1) -> AllocationPlan:
    """Oracle: enumerate every step-quantized split and keep the best.

    Refuses instances with more than ``BRUTE_FORCE_MAX_SPLITS`` splits."""
    _check_instance(curves, total_budget, step)
    n = len(curves)
    k = total_budget // step
    n_splits = math.comb(k + n - 1, n - 1)
    if n_splits > BRUTE_FORCE_MAX_SPLITS:
        raise ValueError(
            f"{n_splits} splits exceed the enumeration limit "
            f"{BRUTE_FORCE_MAX_SPLITS}"
        )
    t0 = time.perf_counter()
    points = np.arange(0, total_budget + 1, step, dtype=np.int64)
    values = [np.interp(points, c.grid, c.values) for c in curves]
    best = None
    best_welfare = -math.inf
    for comp in _compositions(k, n):
        welfare = 0.0
        for i, units in enumerate(comp):
            welfare += values[i][units]
        if welfare > best_welfare:
            best_welfare = welfare
            best = comp
    budgets = np.array(best, dtype=np.int64) * step
    elapsed = time.perf_counter() - t0
    return AllocationPlan(
        components=[c.name for c in curves],
        budgets=budgets,
        welfare=plan_welfare(curves, budgets),
        method="brute-force",
        wall_time_s=elapsed,
    )


def mttf(model: ComponentModel) -> float:
    """Expected steps from s_max to failure under pure decay.

    First-step analysis; the no-improvement structure makes the linear system
    triangular, so it solves bottom-up.  Infinite when some state above
    failure never moves.
    """
    expected = np.zeros(model.s_max + 1)
    for s in range(1, model.s_max + 1):
        stay = model.decay[s, s]
        if stay >= 1.0:
            return math.inf
        below = float(np.dot(model.decay[s, :s], expected[:s]))
        expected[s] = (1.0 + below) / (1.0 - stay)
    return float(expected[model.s_max])


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights`` that sums
    exactly; ties on remainders go to the lowest index."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.sum() <= 0:
        weights = np.ones_like(weights)
    shares = total * weights / weights.sum()
    base = np.floor(shares).astype(np.int64)
    leftover = total - int(base.sum())
    if leftover > 0:
        remainders = shares - base
        order = np.lexsort((np.arange(len(weights)), -remainders))
        base[order[:leftover]] += 1
    return base


def allocate_baseline(models, total_budget: int) -> AllocationPlan:
    """Practitioner heuristic: budgets proportional to replacement cost over
    mean time to failure.  Components that never fail get zero weight; if no
    component carries weight the split is equal."""
    if total_budget < 0:
        raise ValueError("total budget must be nonnegative")
    weights = []
    for m in models:
        life = mttf(m)
        weights.append(0.0 if math.isinf(life) else m.cost_m / life)
    budgets = _largest_remainder(np.array(weights), total_budget)
    return AllocationPlan(
        components=[m.name for m in models],
        budgets=budgets,
        welfare=None,
        method="baseline-mttf",
        wall_time_s=0.0,
    )
