"""Exact finite-horizon solver for the deterministic replace-or-decay MDP.

This is the fully observable special case: the condition drops by a fixed
``d0`` each step unless replaced, replacement costs one budget unit, doing
nothing is free.  Values here are computed by exact integer dynamic
programming, cross-checked by brute-force enumeration of action sequences,
and the structural properties of the value function (monotonicity in state
and budget, diminishing returns in budget, regime-dependent optimal first
action, and flattening beyond a budget threshold) are machine-checked over
parameter grids by :func:`check_properties`.

Horizon convention: ``V[h]`` counts h+1 reward collections, one for the
initial state and one after each of the h steps.  Getting this off by one
breaks the floor(H/2) / ceil(H/2) flattening thresholds, so it is pinned by
tests against the enumeration oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

BRUTE_FORCE_MAX_HORIZON = 20


@dataclass(frozen=True)
class ReplacementMDP:
    """Deterministic decay by ``d0`` per step; unit-cost replacement."""

    s_max: int
    d0: int
    r: int = 1

    c_m: ClassVar[int] = 1
    c_d: ClassVar[int] = 0

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.d0 < 1:
            raise ValueError("d0 must be >= 1")
        if self.r <= 0:
            raise ValueError("r must be positive")


@dataclass(frozen=True)
class ValueTable:
    """Optimal values ``V[h, s, b]`` in units of ``mdp.r``."""

    mdp: ReplacementMDP
    values: np.ndarray  # int64, shape (h_max+1, s_max+1, b_max+1)

    def value(self, horizon: int, s0: int, b: int):
        return int(self.values[horizon, s0, b]) * self.mdp.r


def as_component(mdp: ReplacementMDP, name: str | None = None):
    """Embed the deterministic chain as a component model.

    Inspection is free and, with deterministic decay, informationally
    redundant (the belief never spreads), so the embedded component's optimal
    values coincide with the chain's and budgets count replacements.
    """
    from .model import ComponentModel

    decay = np.zeros((mdp.s_max + 1, mdp.s_max + 1))
    decay[0, 0] = 1.0
    for s in range(1, mdp.s_max + 1):
        decay[s, max(s - mdp.d0, 0)] = 1.0
    return ComponentModel(
        name=name or f"chain-s{mdp.s_max}-d{mdp.d0}",
        s_max=mdp.s_max,
        decay=decay,
        cost_d=0,
        cost_q=0,
        cost_m=1,
    )


def value_table(mdp: ReplacementMDP, h_max: int, b_max: int) -> ValueTable:
    """Backward induction over (horizon, state, budget), exact integers."""
    if h_max < 0 or b_max < 0:
        raise ValueError("h_max and b_max must be nonnegative")
    n_s = mdp.s_max + 1
    v = np.zeros((h_max + 1, n_s, b_max + 1), dtype=np.int64)
    v[0, 1:, :] = 1
    decayed = np.maximum(np.arange(n_s) - mdp.d0, 0)
    for h in range(1, h_max + 1):
        prev = v[h - 1]
        q_d = prev[decayed, :]
        q_m = np.full_like(q_d, -1)
        q_m[:, 1:] = prev[mdp.s_max, :-1]
        v[h, 1:, :] = 1 + np.maximum(q_d, q_m)[1:, :]
    return ValueTable(mdp=mdp, values=v)


def exact_value(mdp: ReplacementMDP, horizon: int, s0: int, b: int):
    """Optimal total reward over ``horizon + 1`` reward collections."""
    if horizon < 0 or b < 0:
        raise ValueError("horizon and budget must be nonnegative")
    if not 0 <= s0 <= mdp.s_max:
        raise ValueError(f"state {s0} outside 0..{mdp.s_max}")
    table = value_table(mdp, horizon, b)
    return table.value(horizon, s0, b)


def brute_force_value(mdp: ReplacementMDP, horizon: int, s0: int, b: int):
    """Independent oracle: enumerate all feasible action sequences.

    With deterministic transitions, open-loop sequences cover every policy, so
    maximizing over the 2**horizon decay/replace sequences is exhaustive.  No
    recursion on values anywhere: each sequence is simulated forward.
    """
    if horizon < 0 or b < 0:
        raise ValueError("horizon and budget must be nonnegative")
    if not 0 <= s0 <= mdp.s_max:
        raise ValueError(f"state {s0} outside 0..{mdp.s_max}")
    if horizon > BRUTE_FORCE_MAX_HORIZON:
        raise ValueError(
            f"horizon {horizon} too large to enumerate "
            f"(limit {BRUTE_FORCE_MAX_HORIZON})"
        )
    if s0 == 0:
        return 0
    n_seq = 1 << horizon
    masks = np.arange(n_seq, dtype=np.int64)
    s = np.full(n_seq, s0, dtype=np.int64)
    spent = np.zeros(n_seq, dtype=np.int64)
    total = np.ones(n_seq, dtype=np.int64)  # everyone collects at t=0
    valid = np.ones(n_seq, dtype=bool)
    for t in range(horizon):
        replace = ((masks >> t) & 1) == 1
        spent = spent + replace
        valid &= spent <= b
        s = np.where(replace, np.where(s > 0, mdp.s_max, 0),
                     np.maximum(s - mdp.d0, 0))
        total += (s > 0)
    return int(total[valid].max()) * mdp.r


def saturation_budget(s0: int, d0: int, horizon: int) -> int:
    """Budget beyond which the optimal value stops increasing."""
    if s0 < 0:
        raise ValueError("s0 must be nonnegative")
    if s0 == 0:
        return 0
    if s0 > d0:
        return horizon // 2
    return math.ceil(horizon / 2)


def optimal_first_actions(table: ValueTable, horizon: int, s0: int, b: int) -> set:
    """Which of {'d', 'm'} attain the maximum at the root (horizon >= 1)."""
    if horizon < 1:
        raise ValueError("no action is taken at horizon 0")
    v = table.values
    mdp = table.mdp
    q_d = v[horizon - 1, max(s0 - mdp.d0, 0), b]
    q_m = v[horizon - 1, mdp.s_max, b - 1] if b >= 1 else None
    acts = set()
    if q_m is None or q_d >= q_m:
        acts.add("d")
    if q_m is not None and q_m >= q_d:
        acts.add("m")
    return acts


@dataclass
class PropertyReport:
    """Outcome of the grid check; ``violations`` is empty on success."""

    n_tables: int
    n_values: int
    violations: list
    interpolation_equality_failures: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "n_tables": self.n_tables,
            "n_values": self.n_values,
            "n_violations": len(self.violations),
            "violations": self.violations,
            "interpolation_equality_failures": self.interpolation_equality_failures,
        }


def _record(violations, prop, s_max, d0, where):
    # keep reports readable if something ever goes wrong
    if len(violations) >= 200:
        return
    h, s, b = where
    violations.append(
        {"property": prop, "s_max": s_max, "d0": d0, "h": int(h), "s": int(s),
         "b": int(b)}
    )


def check_properties(
    s_max_values=range(1, 7),
    d0_values=range(1, 4),
    h_max: int = 12,
    b_max: int = 10,
) -> PropertyReport:
    """Exhaustively verify the value function's structure on a parameter grid.

    Checks, with exact integer arithmetic and no tolerances:

    1. values never decrease in the state;
    2. values never decrease in the budget;
    3. for s0 > d0 and b > 0, decaying attains the root maximum;
    4. for 0 < s0 <= d0 and b > 0, replacing attains the root maximum;
    5. discrete concavity: V(b+2) - V(b+1) <= V(b+1) - V(b);
    6. values are flat in the budget beyond :func:`saturation_budget`;
    7. chord form of concavity on every budget triple, counting how often the
       interpolated value is strictly above the chord (reported, not a
       violation).
    """
    violations = []
    eq_failures = 0
    n_tables = 0
    n_values = 0

    # all budget triples b < b' < b'' once, for the chord check
    b_idx = np.arange(b_max + 1)
    tri_b, tri_bp, tri_bpp = [], [], []
    for b in b_idx:
        for bpp in b_idx[b + 2:]:
            for bp in range(b + 1, bpp):
                tri_b.append(b)
                tri_bp.append(bp)
                tri_bpp.append(bpp)
    tri_b = np.array(tri_b, dtype=np.int64)
    tri_bp = np.array(tri_bp, dtype=np.int64)
    tri_bpp = np.array(tri_bpp, dtype=np.int64)

    for s_max in s_max_values:
        for d0 in d0_values:
            mdp = ReplacementMDP(s_max=s_max, d0=d0)
            table = value_table(mdp, h_max, b_max)
            v = table.values
            n_tables += 1
            n_values += v.size

            bad = np.argwhere(v[:, 1:, :] < v[:, :-1, :])
            for h, s, b in bad:
                _record(violations, "monotone_in_state", s_max, d0, (h, s + 1, b))

            bad = np.argwhere(v[:, :, 1:] < v[:, :, :-1])
            for h, s, b in bad:
                _record(violations, "monotone_in_budget", s_max, d0, (h, s, b + 1))

            d2 = v[:, :, 2:] - 2 * v[:, :, 1:-1] + v[:, :, :-2]
            bad = np.argwhere(d2 > 0)
            for h, s, b in bad:
                _record(violations, "discrete_concavity", s_max, d0, (h, s, b))

            for h in range(1, h_max + 1):
                for s0 in range(1, s_max + 1):
                    for b in range(1, b_max + 1):
                        acts = optimal_first_actions(table, h, s0, b)
                        if s0 > d0 and "d" not in acts:
                            _record(violations, "decay_first_regime",
                                    s_max, d0, (h, s0, b))
                        if s0 <= d0 and "m" not in acts:
                            _record(violations, "replace_first_regime",
                                    s_max, d0, (h, s0, b))

            for h in range(h_max + 1):
                for s0 in range(s_max + 1):
                    sat = saturation_budget(s0, d0, h)
                    if sat <= b_max:
                        row = v[h, s0, :]
                        if np.any(row[sat:] != row[sat]):
                            b_bad = sat + int(
                                np.nonzero(row[sat:] != row[sat])[0][0]
                            )
                            _record(violations, "flat_beyond_saturation",
                                    s_max, d0, (h, s0, b_bad))

            if tri_b.size:
                flat = v.reshape(-1, b_max + 1)
                span = tri_bpp - tri_b
                lhs = flat[:, tri_bp] * span
                rhs = flat[:, tri_b] * (tri_bpp - tri_bp) + flat[:, tri_bpp] * (
                    tri_bp - tri_b
                )
                if np.any(lhs < rhs):
                    rows, cols = np.nonzero(lhs < rhs)
                    h, s = divmod(int(rows[0]), s_max + 1)
                    _record(violations, "chord_concavity", s_max, d0,
                            (h, s, int(tri_bp[cols[0]])))
                eq_failures += int(np.count_nonzero(lhs > rhs))

    return PropertyReport(
        n_tables=n_tables,
        n_values=n_values,
        violations=violations,
        interpolation_equality_failures=eq_failures,
    )
