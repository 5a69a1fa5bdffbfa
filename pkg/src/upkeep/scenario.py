"""Scenario files: a fleet of components sharing one budget and horizon.

Scenarios are JSON.  Each component carries either an explicit decay matrix
or a named generator that expands to one at load time; everything is
validated up front with messages that name the offending component and row.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ComponentModel
from .util import atomic_write_text, canonical_json

SCENARIO_SCHEMA_VERSION = 1

# cost bands for synthetic scenarios, as fractions of the total budget
REPLACE_COST_BAND = (0.0015, 0.03)
INSPECT_COST_BAND = (0.0001, 0.0003)

BUILTIN_SCENARIOS = ("building-20",)


class ScenarioError(ValueError):
    """A scenario file failed validation."""


@dataclass
class Scenario:
    name: str
    total_budget: int
    horizon: int
    components: list  # ComponentModel
    initial_states: dict  # name -> int
    decay_specs: dict = field(default_factory=dict)  # name -> generator dict
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.total_budget < 0:
            raise ScenarioError(f"{self.name}: total_budget must be >= 0")
        if self.horizon < 0:
            raise ScenarioError(f"{self.name}: horizon must be >= 0")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ScenarioError(f"{self.name}: duplicate component name {dup!r}")
        for c in self.components:
            s0 = self.initial_states.get(c.name, c.s_max)
            if not 0 <= s0 <= c.s_max:
                raise ScenarioError(
                    f"{self.name}: initial state {s0} of {c.name!r} outside "
                    f"0..{c.s_max}"
                )
            self.initial_states[c.name] = int(s0)

    def initial_state(self, name: str) -> int:
        return self.initial_states[name]

    def component(self, name: str) -> ComponentModel:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)


def decay_rows(kind: str, s_max: int, params: dict) -> np.ndarray:
    """Expand a named decay generator to the full square matrix.

    ``deterministic``: drop exactly d0 per step.
    ``binomial``: drop ~ Binomial(max_drop, drop_prob).
    ``mixture``: binomial drop plus a rare shock of ``shock_drop`` with
    probability ``shock_prob`` (the tail that a most-probable tracker misses).
    """
    drop_pmf = np.zeros(s_max + 1)
    if kind == "deterministic":
        d0 = int(params["d0"])
        if not 1 <= d0 <= s_max:
            raise ScenarioError(f"deterministic decay needs 1 <= d0 <= {s_max}")
        drop_pmf[d0] = 1.0
    elif kind in ("binomial", "mixture"):
        k = int(params["max_drop"])
        q = float(params["drop_prob"])
        if not 0 <= q <= 1 or not 0 <= k <= s_max:
            raise ScenarioError(f"bad binomial decay parameters {params}")
        for d in range(k + 1):
            drop_pmf[d] = math.comb(k, d) * q**d * (1 - q) ** (k - d)
        if kind == "mixture":
            eps = float(params["shock_prob"])
            shock = int(params["shock_drop"])
            if not 0 <= eps <= 1 or not 0 <= shock <= s_max:
                raise ScenarioError(f"bad shock parameters {params}")
            drop_pmf *= 1 - eps
            drop_pmf[shock] += eps
    else:
        raise ScenarioError(f"unknown decay generator {kind!r}")

    decay = np.zeros((s_max + 1, s_max + 1))
    decay[0, 0] = 1.0
    for s in range(1, s_max + 1):
        for d, p in enumerate(drop_pmf):
            if p == 0.0:
                continue
            decay[s, max(s - d, 0)] += p
    return decay


def _component_from_dict(scenario_name: str, entry: dict):
    name = entry.get("name")
    if not name:
        raise ScenarioError(f"{scenario_name}: component without a name")
    try:
        s_max = int(entry["s_max"])
        costs = {
            "cost_d": int(entry.get("cost_d", 0)),
            "cost_q": int(entry["cost_q"]),
            "cost_m": int(entry["cost_m"]),
        }
        decay_spec = entry["decay"]
    except KeyError as exc:
        raise ScenarioError(f"{scenario_name}: component {name!r} missing {exc}")

    if decay_spec.get("kind", "explicit") == "explicit":
        rows = decay_spec["rows"]
        if len(rows) != s_max:
            raise ScenarioError(
                f"{scenario_name}: component {name!r} needs {s_max} decay rows, "
                f"got {len(rows)}"
            )
        try:
            model = ComponentModel.from_decay_rows(name, rows, **costs)
        except ValueError as exc:
            raise ScenarioError(f"{scenario_name}: {exc}") from exc
    else:
        kind = decay_spec["kind"]
        params = {k: v for k, v in decay_spec.items() if k != "kind"}
        decay = decay_rows(kind, s_max, params)
        try:
            model = ComponentModel(name=name, s_max=s_max, decay=decay, **costs)
        except ValueError as exc:
            raise ScenarioError(f"{scenario_name}: {exc}") from exc
    s0 = int(entry.get("initial_state", s_max))
    return model, s0, dict(decay_spec)


def scenario_from_dict(data: dict) -> Scenario:
    name = data.get("name", "scenario")
    components = []
    initial = {}
    specs = {}
    warnings = []
    for entry in data.get("components", []):
        model, s0, spec = _component_from_dict(name, entry)
        components.append(model)
        initial[model.name] = s0
        specs[model.name] = spec
        if np.any(np.diag(model.decay)[1:] >= 1.0):
            warnings.append(
                f"component {model.name!r} can never fail (a state never decays); "
                "its mean time to failure is infinite"
            )
    scenario = Scenario(
        name=name,
        total_budget=int(data["total_budget"]),
        horizon=int(data["horizon"]),
        components=components,
        initial_states=initial,
        decay_specs=specs,
        warnings=warnings,
    )
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    comps = []
    for c in scenario.components:
        spec = scenario.decay_specs.get(c.name)
        if not spec or spec.get("kind", "explicit") == "explicit":
            rows = [c.decay[s, : s + 1].tolist() for s in range(1, c.s_max + 1)]
            spec = {"kind": "explicit", "rows": rows}
        comps.append(
            {
                "name": c.name,
                "s_max": c.s_max,
                "cost_d": c.cost_d,
                "cost_q": c.cost_q,
                "cost_m": c.cost_m,
                "initial_state": scenario.initial_state(c.name),
                "decay": spec,
            }
        )
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "name": scenario.name,
        "total_budget": scenario.total_budget,
        "horizon": scenario.horizon,
        "components": comps,
    }


def load_scenario(path) -> Scenario:
    """Load and validate a scenario; built-in names resolve to packaged
    files."""
    if isinstance(path, str) and path in BUILTIN_SCENARIOS:
        text = (
            resources.files("upkeep").joinpath(f"data/{path}.json").read_text()
        )
        data = json.loads(text)
    else:
        path = Path(path)
        if not path.exists():
            raise ScenarioError(f"scenario file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    atomic_write_text(path, canonical_json(scenario_to_dict(scenario)))


def generate_scenario(
    n_components: int,
    total_budget: int,
    horizon: int,
    seed: int,
    name: str = "synthetic",
    s_max: int = 100,
) -> Scenario:
    """Deterministic synthetic fleet with costs inside the standard bands.

    Replacement costs span REPLACE_COST_BAND of the total budget and
    inspection costs INSPECT_COST_BAND (both at least 1 unit); deterioration
    is a binomial drop with an occasional larger shock, with per-component
    rates.
    """
    rng = np.random.default_rng(seed)
    comps = []
    for i in range(n_components):
        cost_m = int(rng.integers(
            max(1, round(REPLACE_COST_BAND[0] * total_budget)),
            max(2, round(REPLACE_COST_BAND[1] * total_budget)) + 1,
        ))
        cost_q = int(rng.integers(
            max(1, round(INSPECT_COST_BAND[0] * total_budget)),
            max(1, round(INSPECT_COST_BAND[1] * total_budget)) + 1,
        ))
        decay = {
            "kind": "mixture",
            "max_drop": int(rng.integers(4, 9)),
            "drop_prob": round(float(rng.uniform(0.25, 0.55)), 3),
            "shock_drop": int(rng.integers(20, 41)),
            "shock_prob": round(float(rng.uniform(0.04, 0.09)), 3),
        }
        comps.append(
            {
                "name": f"component-{i + 1:02d}",
                "s_max": s_max,
                "cost_d": 0,
                "cost_q": cost_q,
                "cost_m": cost_m,
                "initial_state": s_max,
                "decay": decay,
            }
        )
    data = {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "name": name,
        "total_budget": int(total_budget),
        "horizon": int(horizon),
        "components": comps,
    }
    return scenario_from_dict(data)
