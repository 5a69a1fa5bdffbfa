"""Value-of-budget curves: estimate, then repair to monotone concave shape.

For each budget on a grid we run closed-loop planned episodes and average the
collected reward.  The raw means are Monte-Carlo noisy; since the underlying
optimal value is nondecreasing in budget and (on the provable special case,
and empirically in general) concave, the estimates are repaired by isotonic
regression followed by the least concave majorant.  The repaired curves are
what the budget allocator consumes - piecewise-linear interpolation of a
concave curve is concave, so greedy marginal allocation stays exact.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .model import ComponentModel
from .planner import PlannerConfig
from .sim import PomcpPolicy, run_episode
from .util import derive_seed

CURVE_SCHEMA_VERSION = 1


@dataclass
class ValueCurve:
    """Estimated optimal total reward as a function of allocated budget."""

    name: str
    grid: np.ndarray  # strictly increasing ints, grid[0] == 0
    raw_values: np.ndarray
    values: np.ndarray  # repaired (monotone, concave) after repair()
    stderr: np.ndarray
    n_episodes: int
    repair_sse: float = 0.0
    flagged: bool = False

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int64)
        self.raw_values = np.asarray(self.raw_values, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if self.grid.size == 0 or self.grid[0] != 0:
            raise ValueError(f"{self.name}: budget grid must start at 0")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError(f"{self.name}: budget grid must be strictly increasing")
        for arr, label in ((self.raw_values, "raw_values"),
                           (self.values, "values"), (self.stderr, "stderr")):
            if arr.shape != self.grid.shape:
                raise ValueError(f"{self.name}: {label} does not match the grid")

    def value_at(self, b) -> float:
        return value_at(self, b)


def value_at(curve: ValueCurve, b) -> float:
    """Piecewise-linear interpolation of the repaired values; exact on grid
    points.  Budgets beyond the grid are an error - extend the grid first."""
    if b < 0 or b > curve.grid[-1]:
        raise ValueError(
            f"{curve.name}: budget {b} outside grid 0..{curve.grid[-1]}"
        )
    return float(np.interp(b, curve.grid, curve.values))


def extend_to(curve: ValueCurve, budget: int) -> ValueCurve:
    """Extend the grid flatly out to ``budget`` (the curve has saturated by
    the end of its grid, so appended marginals are zero, which preserves both
    monotonicity and concavity)."""
    if budget <= curve.grid[-1]:
        return curve
    return dc_replace(
        curve,
        grid=np.append(curve.grid, budget),
        raw_values=np.append(curve.raw_values, curve.raw_values[-1]),
        values=np.append(curve.values, curve.values[-1]),
        stderr=np.append(curve.stderr, curve.stderr[-1]),
    )


def isotonic_fit(y: np.ndarray) -> np.ndarray:
    """Nondecreasing least-squares fit (pool adjacent violators, equal
    weights)."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    starts = list(range(n))
    vals = list(y)
    wts = [1.0] * n
    merged_vals = []
    merged_wts = []
    merged_starts = []
    for i in range(n):
        cur_v, cur_w, cur_s = vals[i], wts[i], starts[i]
        while merged_vals and merged_vals[-1] > cur_v:
            pv, pw = merged_vals.pop(), merged_wts.pop()
            cur_s = merged_starts.pop()
            cur_v = (pv * pw + cur_v * cur_w) / (pw + cur_w)
            cur_w = pw + cur_w
        merged_vals.append(cur_v)
        merged_wts.append(cur_w)
        merged_starts.append(cur_s)
    out = np.empty(n)
    merged_starts.append(n)
    for j, v in enumerate(merged_vals):
        out[merged_starts[j]:merged_starts[j + 1]] = v
    return out


def concave_majorant(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least concave majorant of the points (x, y), evaluated at x.

    Computed as the upper convex hull (monotone chain); always passes through
    the first and last point and dominates y pointwise.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n <= 2:
        return y.copy()
    hull = []  # indices of upper-hull vertices
    for i in range(n):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies below the chord i0 -> i
            cross = (x[i1] - x[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (x[i] - x[i0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    out = np.empty(n)
    for j in range(len(hull) - 1):
        i0, i1 = hull[j], hull[j + 1]
        seg = slice(i0, i1 + 1)
        t = (x[seg] - x[i0]) / (x[i1] - x[i0])
        out[seg] = y[i0] + t * (y[i1] - y[i0])
    return out


def repair(curve: ValueCurve) -> ValueCurve:
    """Project raw estimates onto the monotone-concave shape.

    Isotonic regression first, then the least concave majorant of the fit;
    the result dominates the isotonic fit pointwise and satisfies both shape
    constraints.  The curve is flagged when the largest adjustment exceeds
    three times the pooled standard error (a raw point that far off usually
    means too few episodes).
    """
    iso = isotonic_fit(curve.raw_values)
    values = concave_majorant(curve.grid.astype(np.float64), iso)
    adjust = values - curve.raw_values
    pooled = float(np.sqrt(np.mean(curve.stderr**2)))
    return dc_replace(
        curve,
        values=values,
        repair_sse=float(np.sum(adjust**2)),
        flagged=bool(np.max(np.abs(adjust), initial=0.0) > 3.0 * pooled),
    )


def estimate_point(
    model: ComponentModel,
    b: int,
    s0: int,
    horizon: int,
    cfg: PlannerConfig,
    n_episodes: int,
    master_seed: int = 0,
):
    """Mean and standard error of collected reward over planned episodes with
    budget ``b``.  Episode seeds do not depend on ``b``, so points of the same
    sweep share environment randomness (common random numbers)."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    policy = _policy_from_config(cfg)
    totals = np.empty(n_episodes)
    for ep in range(n_episodes):
        seed = derive_seed(master_seed, model.name, "curve", ep)
        trace = run_episode(model, policy, b, s0, horizon, seed)
        totals[ep] = trace.total_reward
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / math.sqrt(n_episodes)) if n_episodes > 1 else 0.0
    return mean, stderr


def _policy_from_config(cfg: PlannerConfig, n_particles: int = 1000) -> PomcpPolicy:
    return PomcpPolicy(
        n_simulations=cfg.n_simulations,
        max_depth=cfg.max_depth,
        ucb_c=cfg.ucb_c,
        rollout_policy=cfg.rollout_policy,
        n_particles=n_particles,
    )


def sweep(
    model: ComponentModel,
    grid,
    s0: int,
    horizon: int,
    cfg: PlannerConfig,
    n_episodes: int = 30,
    master_seed: int = 0,
    workers: int = 1,
    n_particles: int = 1000,
) -> ValueCurve:
    """Estimate the raw value curve over a budget grid.

    Work items are (grid point, episode) pairs; results are reduced in fixed
    index order so fan-out does not change the numbers.
    """
    grid = np.asarray(sorted(set(int(b) for b in grid)), dtype=np.int64)
    if grid.size == 0 or grid[0] != 0:
        raise ValueError("budget grid must start at 0")
    policy = _policy_from_config(cfg, n_particles)
    totals = np.zeros((grid.size, n_episodes))

    jobs = [
        (k, ep, int(b)) for k, b in enumerate(grid) for ep in range(n_episodes)
    ]

    def _run(job):
        k, ep, b = job
        seed = derive_seed(master_seed, model.name, "curve", ep)
        trace = run_episode(model, policy, b, s0, horizon, seed)
        return k, ep, trace.total_reward

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, jobs))
    else:
        results = [_run(j) for j in jobs]
    for k, ep, total in results:
        totals[k, ep] = total

    raw = totals.mean(axis=1)
    if n_episodes > 1:
        stderr = totals.std(axis=1, ddof=1) / math.sqrt(n_episodes)
    else:
        stderr = np.zeros(grid.size)
    return ValueCurve(
        name=model.name,
        grid=grid,
        raw_values=raw,
        values=raw.copy(),
        stderr=stderr,
        n_episodes=n_episodes,
    )


def default_grid(model: ComponentModel, total_budget: int, horizon: int) -> np.ndarray:
    """Budget grid concentrated where the curve can still bend.

    The optimal value flattens once the budget covers a replacement every
    other step, so the grid is capped near that scale instead of sweeping
    every budget up to the total: {0, c_q, 2 c_q} plus replacement multiples
    plus a coarse uniform tail.
    """
    k_max = math.ceil(horizon / 2)
    cap = min(total_budget, k_max * (model.cost_m + model.cost_q))
    pts = {0, model.cost_q, 2 * model.cost_q}
    pts.update(k * model.cost_m for k in range(1, k_max + 1))
    if cap >= 1:
        pts.update(int(round(x)) for x in np.linspace(0, cap, 9))
    pts = sorted(p for p in pts if 0 <= p <= cap)
    if pts[0] != 0:
        pts.insert(0, 0)
    return np.asarray(pts, dtype=np.int64)


def curve_to_dict(curve: ValueCurve) -> dict:
    return {
        "schema_version": CURVE_SCHEMA_VERSION,
        "name": curve.name,
        "grid": curve.grid.tolist(),
        "raw_values": curve.raw_values.tolist(),
        "values": curve.values.tolist(),
        "stderr": curve.stderr.tolist(),
        "n_episodes": curve.n_episodes,
        "repair_sse": curve.repair_sse,
        "flagged": curve.flagged,
    }


def curve_from_dict(data: dict) -> ValueCurve:
    return ValueCurve(
        name=data["name"],
        grid=np.asarray(data["grid"], dtype=np.int64),
        raw_values=np.asarray(data["raw_values"], dtype=np.float64),
        values=np.asarray(data["values"], dtype=np.float64),
        stderr=np.asarray(data["stderr"], dtype=np.float64),
        n_episodes=int(data["n_episodes"]),
        repair_sse=float(data.get("repair_sse", 0.0)),
        flagged=bool(data.get("flagged", False)),
    )


def save_curve_json(curve: ValueCurve, path) -> None:
    from .util import atomic_write_text, canonical_json

    atomic_write_text(path, canonical_json(curve_to_dict(curve)))


def load_curve_json(path) -> ValueCurve:
    with open(path) as f:
        return curve_from_dict(json.load(f))


def save_curve_csv(curve: ValueCurve, path) -> None:
    from .util import atomic_write_text

    rows = ["budget,raw_mean,stderr,repaired_value"]
    for b, raw, se, val in zip(curve.grid, curve.raw_values, curve.stderr,
                               curve.values):
        rows.append(f"{int(b)},{raw:.6f},{se:.6f},{val:.6f}")
    atomic_write_text(path, "\n".join(rows) + "\n")


def load_curve_csv(path, name: str = "") -> ValueCurve:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    grid = np.array([int(r["budget"]) for r in rows], dtype=np.int64)
    raw = np.array([float(r["raw_mean"]) for r in rows])
    se = np.array([float(r["stderr"]) for r in rows])
    vals = np.array([float(r["repaired_value"]) for r in rows])
    return ValueCurve(name=name, grid=grid, raw_values=raw, values=vals,
                      stderr=se, n_episodes=0)
