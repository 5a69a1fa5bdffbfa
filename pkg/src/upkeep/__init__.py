"""Budget-constrained maintenance planning for fleets of deteriorating
components.

The pieces, bottom to top:

* :mod:`upkeep.model` - per-component deterioration model with a
  budget-augmented, partially observable state;
* :mod:`upkeep.exact` - exact dynamic programming and property checks for the
  deterministic fully observable special case;
* :mod:`upkeep.planner` - online tree-search planning for one component;
* :mod:`upkeep.curves` - value-of-budget curve estimation and shape repair;
* :mod:`upkeep.alloc` - exact greedy welfare-maximizing budget split;
* :mod:`upkeep.sim` - closed-loop simulation and policy evaluation;
* :mod:`upkeep.scenario` / :mod:`upkeep.cli` - scenario files and the
  pipeline commands.

Hot loops live in :mod:`upkeep.kernels`, compiled with numba by default; set
``UPKEEP_NO_NUMBA=1`` to run the same source as plain Python.
"""

__version__ = "0.1.0"

from .alloc import (
    AllocationPlan,
    allocate_baseline,
    allocate_bruteforce,
    allocate_greedy,
    mttf,
)
from .curves import ValueCurve, default_grid, estimate_point, repair, sweep, value_at
from .exact import (
    PropertyReport,
    ReplacementMDP,
    ValueTable,
    brute_force_value,
    check_properties,
    exact_value,
    saturation_budget,
    value_table,
)
from .model import (
    Action,
    Belief,
    BudgetedState,
    BudgetExceededError,
    ComponentModel,
    Observation,
    action_cost,
    feasible_actions,
    initial_belief,
    observe,
    step,
    transition_prob,
    update_belief,
)
from .planner import PlannerConfig, plan, root_value
from .scenario import Scenario, ScenarioError, generate_scenario, load_scenario, save_scenario
from .sim import (
    BaselinePolicy,
    BaselinePolicyConfig,
    EpisodeTrace,
    PomcpPolicy,
    baseline_step,
    evaluate,
    most_probable_next,
    run_episode,
)

__all__ = [
    "Action",
    "AllocationPlan",
    "BaselinePolicy",
    "BaselinePolicyConfig",
    "Belief",
    "BudgetExceededError",
    "BudgetedState",
    "ComponentModel",
    "EpisodeTrace",
    "Observation",
    "PlannerConfig",
    "PomcpPolicy",
    "PropertyReport",
    "ReplacementMDP",
    "Scenario",
    "ScenarioError",
    "ValueCurve",
    "ValueTable",
    "action_cost",
    "allocate_baseline",
    "allocate_bruteforce",
    "allocate_greedy",
    "baseline_step",
    "brute_force_value",
    "check_properties",
    "default_grid",
    "estimate_point",
    "evaluate",
    "exact_value",
    "feasible_actions",
    "generate_scenario",
    "initial_belief",
    "load_scenario",
    "most_probable_next",
    "mttf",
    "observe",
    "plan",
    "repair",
    "root_value",
    "run_episode",
    "saturation_budget",
    "save_scenario",
    "step",
    "sweep",
    "transition_prob",
    "update_belief",
    "value_at",
    "value_table",
]
