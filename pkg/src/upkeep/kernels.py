"""Hot numeric kernels: tree search and closed-loop episode simulation.

Everything in this module is written in plain loop-over-ndarray style so the
same source runs on two backends:

* compiled with ``numba.njit`` (the default, and roughly 100x faster), or
* as ordinary Python, selected by setting ``UPKEEP_NO_NUMBA=1`` before import.

``benchmarks/compare_backends.py`` measures the two paths against each other.

Randomness comes from an explicit xorshift128 generator whose state is a
2-element ``uint64`` array threaded through every call.  The update uses only
xor/shift operations, which keeps the fallback path free of numpy overflow
warnings and makes both backends produce bit-identical streams.  Like the
Mersenne Twister it is GF(2)-linear; that is plenty for Monte-Carlo sampling
of discrete transitions.

Action encoding used throughout: 0 = leave alone (decay), 1 = inspect,
2 = replace.  Observation encoding in traces: the observed state, or -1 for
the uninformative observation after action 0, or -2 for "no step taken".
"""

from __future__ import annotations

import math
import os

import numpy as np

NUMBA_DISABLED = os.environ.get("UPKEEP_NO_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if not NUMBA_DISABLED:
    from numba import njit as _njit

    def kernel(func):
        return _njit(cache=True, nogil=True)(func)

else:

    def kernel(func):
        return func


BACKEND = "python" if NUMBA_DISABLED else "numba"

U64 = np.uint64

# Episode termination flags.
END_HORIZON = 0
END_FAILED = 1
END_BUDGET = 2

_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


@kernel
def rng_next(state):
    """Advance a 2-word xorshift128 state and return 64 pseudo-random bits."""
    s0 = state[0]
    s1 = state[1]
    s1 ^= s1 << U64(23)
    s1 ^= s1 >> U64(18)
    s1 ^= s0 ^ (s0 >> U64(5))
    state[0] = s1
    state[1] = s0
    return s1 ^ s0


@kernel
def rng_uniform(state):
    # top 53 bits -> double in [0, 1)
    return (rng_next(state) >> U64(11)) * _INV_2_53


@kernel
def rng_below(state, n):
    """Uniform integer in [0, n)."""
    return int(rng_uniform(state) * n)


@kernel
def reseed_step(state, base0, base1, step):
    """Per-step planner stream: mix the base seed with the step index."""
    t = U64(step)
    state[0] = base0 ^ (t << U64(32)) ^ t
    state[1] = base1 ^ (t << U64(17)) ^ (t << U64(47))
    if state[0] == U64(0) and state[1] == U64(0):
        state[0] = U64(0x9E3779B97F4A7C15)
    for _ in range(8):
        rng_next(state)


@kernel
def state_from_u(decay_cdf, s, u):
    """Invert the decay CDF of row ``s`` at quantile ``u``."""
    if s == 0:
        return 0
    lo = 0
    hi = s
    while lo < hi:
        mid = (lo + hi) // 2
        if decay_cdf[s, mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@kernel
def sample_decay(decay_cdf, s, state):
    return state_from_u(decay_cdf, s, rng_uniform(state))


@kernel
def rollout_value(decay_cdf, costs, budget, c, s, steps, rollout_random, state):
    """Total reward of a rollout policy from (s, c) for at most ``steps`` steps."""
    s_max = decay_cdf.shape[0] - 1
    total = 0.0
    for _ in range(steps):
        if s == 0:
            break
        f0 = c + costs[0] <= budget
        f1 = c + costs[1] <= budget
        f2 = c + costs[2] <= budget
        a = -1
        if rollout_random:
            nf = 0
            if f0:
                nf += 1
            if f1:
                nf += 1
            if f2:
                nf += 1
            if nf == 0:
                break
            k = rng_below(state, nf)
            if f0:
                if k == 0:
                    a = 0
                k -= 1
            if a < 0 and f1:
                if k == 0:
                    a = 1
                k -= 1
            if a < 0:
                a = 2
        else:
            if not f0:
                break
            a = 0
        if a == 2:
            s2 = s_max if s > 0 else 0
        else:
            s2 = sample_decay(decay_cdf, s, state)
        c += costs[a]
        if s2 > 0:
            total += 1.0
        s = s2
    return total


@kernel
def pomcp_search(
    decay_cdf,
    costs,
    budget,
    c0,
    particles,
    horizon_remaining,
    n_sims,
    max_depth,
    ucb_c,
    rollout_random,
    state,
    n_eval,
):
    """UCB tree search over action-observation histories from a particle belief.

    Each iteration samples a particle, walks the tree selecting actions by
    UCB1 (untried feasible actions first), expands one new history node,
    estimates the remainder with the rollout policy, and backs the
    undiscounted return up the path.  Only actions that fit the remaining
    budget are ever expanded, so any action this returns is affordable.

    Returns ``(action, q_value, eval_value)``.  ``q_value`` is the in-tree
    mean return of the chosen root action; with ``n_eval > 0`` an extra
    evaluation pass follows the greedy (argmax, no exploration bonus) tree
    policy for ``n_eval`` runs and ``eval_value`` is its mean return - an
    estimate of the recommended policy's value that is not dragged down by
    returns collected while the tree was still cold.  ``action`` is -1 when
    nothing is affordable.
    """
    s_max = decay_cdf.shape[0] - 1
    n_obs = s_max + 2
    null_col = s_max + 1

    feasible_any = False
    first_feasible = -1
    for a in range(3):
        if c0 + costs[a] <= budget:
            feasible_any = True
            if first_feasible < 0:
                first_feasible = a
    if not feasible_any:
        return -1, 0.0, 0.0

    depth_cap = min(max_depth, horizon_remaining)
    if depth_cap <= 0:
        return first_feasible, 0.0, 0.0

    max_nodes = n_sims + 2
    children = np.full((max_nodes, 3, n_obs), -1, np.int32)
    n_sa = np.zeros((max_nodes, 3), np.int64)
    q_sa = np.zeros((max_nodes, 3), np.float64)
    node_cost = np.zeros(max_nodes, np.int64)
    node_cost[0] = c0
    n_nodes = 1

    path_nodes = np.empty(depth_cap, np.int64)
    path_acts = np.empty(depth_cap, np.int64)
    path_rew = np.empty(depth_cap, np.float64)
    n_part = particles.shape[0]

    for _ in range(n_sims):
        s = particles[rng_below(state, n_part)]
        node = 0
        plen = 0
        tail = 0.0
        for depth in range(depth_cap):
            c = node_cost[node]
            f0 = c + costs[0] <= budget
            f1 = c + costs[1] <= budget
            f2 = c + costs[2] <= budget
            if not (f0 or f1 or f2):
                break

            n_untried = 0
            if f0 and n_sa[node, 0] == 0:
                n_untried += 1
            if f1 and n_sa[node, 1] == 0:
                n_untried += 1
            if f2 and n_sa[node, 2] == 0:
                n_untried += 1

            a = -1
            if n_untried > 0:
                k = rng_below(state, n_untried)
                cnt = 0
                for cand in range(3):
                    if c + costs[cand] <= budget and n_sa[node, cand] == 0:
                        if cnt == k:
                            a = cand
                            break
                        cnt += 1
            else:
                n_tot = 0
                for cand in range(3):
                    if c + costs[cand] <= budget:
                        n_tot += n_sa[node, cand]
                log_n = math.log(float(n_tot))
                best = -1.0e300
                for cand in range(3):
                    if c + costs[cand] <= budget:
                        u = q_sa[node, cand] + ucb_c * math.sqrt(
                            log_n / n_sa[node, cand]
                        )
                        if u > best:
                            best = u
                            a = cand

            if a == 2:
                s2 = s_max if s > 0 else 0
            else:
                s2 = sample_decay(decay_cdf, s, state)
            c2 = c + costs[a]
            r = 1.0 if s2 > 0 else 0.0
            obs = null_col if a == 0 else s2

            path_nodes[plen] = node
            path_acts[plen] = a
            path_rew[plen] = r
            plen += 1

            child = children[node, a, obs]
            if child < 0:
                child = n_nodes
                n_nodes += 1
                children[node, a, obs] = child
                node_cost[child] = c2
                if s2 > 0 and depth + 1 < depth_cap:
                    tail = rollout_value(
                        decay_cdf,
                        costs,
                        budget,
                        c2,
                        s2,
                        depth_cap - depth - 1,
                        rollout_random,
                        state,
                    )
                break
            node = child
            s = s2
            if s == 0:
                break

        g = tail
        for i in range(plen - 1, -1, -1):
            g += path_rew[i]
            nd = path_nodes[i]
            ac = path_acts[i]
            n_sa[nd, ac] += 1
            q_sa[nd, ac] += (g - q_sa[nd, ac]) / n_sa[nd, ac]

    best_a = -1
    best_q = 0.0
    for a in range(3):
        if c0 + costs[a] <= budget and n_sa[0, a] > 0:
            if best_a < 0 or q_sa[0, a] > best_q:
                best_a = a
                best_q = q_sa[0, a]
    if best_a < 0:
        return first_feasible, 0.0, 0.0

    eval_value = 0.0
    if n_eval > 0:
        acc = 0.0
        for _ in range(n_eval):
            s = particles[rng_below(state, n_part)]
            node = 0
            c = c0
            total = 0.0
            for depth in range(depth_cap):
                a_g = -1
                q_best = -1.0e300
                if node >= 0:
                    for a in range(3):
                        if (
                            c + costs[a] <= budget
                            and n_sa[node, a] > 0
                            and q_sa[node, a] > q_best
                        ):
                            q_best = q_sa[node, a]
                            a_g = a
                if a_g < 0:
                    if s > 0:
                        total += rollout_value(
                            decay_cdf,
                            costs,
                            budget,
                            c,
                            s,
                            depth_cap - depth,
                            rollout_random,
                            state,
                        )
                    break
                if a_g == 2:
                    s2 = s_max if s > 0 else 0
                else:
                    s2 = sample_decay(decay_cdf, s, state)
                c += costs[a_g]
                if s2 > 0:
                    total += 1.0
                obs = null_col if a_g == 0 else s2
                node = children[node, a_g, obs]
                s = s2
                if s == 0:
                    break
            acc += total
        eval_value = acc / n_eval
    return best_a, best_q, eval_value


@kernel
def run_episode_planned(
    decay_cdf,
    costs,
    budget,
    s0,
    horizon,
    n_sims,
    max_depth,
    ucb_c,
    rollout_random,
    n_particles,
    env0,
    env1,
    plan0,
    plan1,
):
    """Closed loop: replan with tree search each step, track a particle belief.

    The environment stream consumes exactly one draw per step regardless of
    the action taken, so runs with the same environment seed stay aligned
    across policies and budgets (common random numbers).  The planner stream
    is reseeded from (plan seed, step) each decision.
    """
    s_max = decay_cdf.shape[0] - 1
    length = horizon + 1
    states = np.zeros(length, np.int64)
    actions = np.full(length, -1, np.int64)
    observations = np.full(length, -2, np.int64)
    step_costs = np.zeros(length, np.int64)
    cum_costs = np.zeros(length, np.int64)
    rewards = np.zeros(length, np.int64)
    belief_means = np.zeros(length, np.float64)

    env_state = np.empty(2, np.uint64)
    env_state[0] = env0
    env_state[1] = env1
    plan_state = np.empty(2, np.uint64)

    particles = np.full(n_particles, s0, np.int64)
    s = s0
    c = 0
    states[0] = s0
    rewards[0] = 1 if s0 > 0 else 0
    belief_means[0] = float(s0)
    n_steps = 0
    flag = END_HORIZON
    if s0 == 0:
        flag = END_FAILED
        return (
            states,
            actions,
            observations,
            step_costs,
            cum_costs,
            rewards,
            belief_means,
            n_steps,
            flag,
        )

    for t in range(1, horizon + 1):
        reseed_step(plan_state, plan0, plan1, t)
        a, _q, _ev = pomcp_search(
            decay_cdf,
            costs,
            budget,
            c,
            particles,
            horizon - t + 1,
            n_sims,
            max_depth,
            ucb_c,
            rollout_random,
            plan_state,
            0,
        )
        if a < 0:
            flag = END_BUDGET
            break

        u = rng_uniform(env_state)
        if a == 2:
            s2 = s_max if s > 0 else 0
        else:
            s2 = state_from_u(decay_cdf, s, u)
        c += costs[a]

        if a == 0:
            for i in range(n_particles):
                particles[i] = sample_decay(decay_cdf, particles[i], plan_state)
        else:
            for i in range(n_particles):
                particles[i] = s2

        states[t] = s2
        actions[t] = a
        observations[t] = -1 if a == 0 else s2
        step_costs[t] = costs[a]
        cum_costs[t] = c
        rewards[t] = 1 if s2 > 0 else 0
        acc = 0.0
        for i in range(n_particles):
            acc += particles[i]
        belief_means[t] = acc / n_particles

        s = s2
        n_steps = t
        if s == 0:
            flag = END_FAILED
            break

    return (
        states,
        actions,
        observations,
        step_costs,
        cum_costs,
        rewards,
        belief_means,
        n_steps,
        flag,
    )


@kernel
def run_episode_scheduled(
    decay_cdf,
    costs,
    most_probable,
    budget,
    s0,
    horizon,
    inspect_every,
    replace_threshold,
    env0,
    env1,
):
    """Closed loop for the fixed inspection schedule policy.

    Inspects every ``inspect_every`` steps when affordable, replaces when the
    tracked point estimate falls below ``replace_threshold``, otherwise does
    nothing.  Between inspections the estimate advances along the most
    probable transition (``most_probable[s]``).
    """
    s_max = decay_cdf.shape[0] - 1
    length = horizon + 1
    states = np.zeros(length, np.int64)
    actions = np.full(length, -1, np.int64)
    observations = np.full(length, -2, np.int64)
    step_costs = np.zeros(length, np.int64)
    cum_costs = np.zeros(length, np.int64)
    rewards = np.zeros(length, np.int64)
    belief_means = np.zeros(length, np.float64)

    env_state = np.empty(2, np.uint64)
    env_state[0] = env0
    env_state[1] = env1

    s = s0
    c = 0
    estimate = s0
    states[0] = s0
    rewards[0] = 1 if s0 > 0 else 0
    belief_means[0] = float(s0)
    n_steps = 0
    flag = END_HORIZON
    if s0 == 0:
        flag = END_FAILED
        return (
            states,
            actions,
            observations,
            step_costs,
            cum_costs,
            rewards,
            belief_means,
            n_steps,
            flag,
        )

    for t in range(1, horizon + 1):
        if t % inspect_every == 0 and c + costs[1] <= budget:
            a = 1
        elif estimate < replace_threshold and c + costs[2] <= budget:
            a = 2
        elif c + costs[0] <= budget:
            a = 0
        else:
            flag = END_BUDGET
            break

        u = rng_uniform(env_state)
        if a == 2:
            s2 = s_max if s > 0 else 0
        else:
            s2 = state_from_u(decay_cdf, s, u)
        c += costs[a]

        if a == 0:
            estimate = most_probable[estimate]
        else:
            estimate = s2

        states[t] = s2
        actions[t] = a
        observations[t] = -1 if a == 0 else s2
        step_costs[t] = costs[a]
        cum_costs[t] = c
        rewards[t] = 1 if s2 > 0 else 0
        belief_means[t] = float(estimate)

        s = s2
        n_steps = t
        if s == 0:
            flag = END_FAILED
            break

    return (
        states,
        actions,
        observations,
        step_costs,
        cum_costs,
        rewards,
        belief_means,
        n_steps,
        flag,
    )
