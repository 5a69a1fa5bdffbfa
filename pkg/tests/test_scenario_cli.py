import json
import math

import numpy as np
import pytest

from upkeep.alloc import mttf
from upkeep.cli import main
from upkeep.scenario import (
    INSPECT_COST_BAND,
    REPLACE_COST_BAND,
    ScenarioError,
    decay_rows,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
)
from upkeep.util import sha256_file


class TestDecayGenerators:
    def test_deterministic(self):
        decay = decay_rows("deterministic", 5, {"d0": 2})
        assert decay[5, 3] == 1.0
        assert decay[1, 0] == 1.0  # clamped at failure
        assert decay[0, 0] == 1.0

    def test_binomial_rows_normalize(self):
        decay = decay_rows("binomial", 30, {"max_drop": 4, "drop_prob": 0.35})
        np.testing.assert_allclose(decay.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.triu(decay, k=1) == 0.0)

    def test_mixture_adds_shock_mass(self):
        params = dict(max_drop=3, drop_prob=0.4, shock_drop=10,
                      shock_prob=0.05)
        decay = decay_rows("mixture", 30, params)
        assert decay[30, 20] == pytest.approx(0.05)
        np.testing.assert_allclose(decay.sum(axis=1), 1.0, atol=1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ScenarioError, match="unknown decay generator"):
            decay_rows("levy", 10, {})


class TestScenarioValidation:
    def base_dict(self):
        return {
            "name": "t",
            "total_budget": 100,
            "horizon": 10,
            "components": [
                {"name": "a", "s_max": 3, "cost_q": 1, "cost_m": 5,
                 "decay": {"kind": "deterministic", "d0": 1}},
            ],
        }

    def test_minimal_loads(self):
        sc = scenario_from_dict(self.base_dict())
        assert sc.total_budget == 100
        assert sc.initial_state("a") == 3  # defaults to s_max

    def test_bad_row_sum_names_row(self):
        data = self.base_dict()
        data["components"][0]["decay"] = {
            "kind": "explicit",
            "rows": [[0.9, 0.0], [0.5, 0.3, 0.2], [0.1, 0.3, 0.3, 0.3]],
        }
        with pytest.raises(ScenarioError, match="row 1"):
            scenario_from_dict(data)

    def test_duplicate_names_rejected(self):
        data = self.base_dict()
        data["components"].append(dict(data["components"][0]))
        with pytest.raises(ScenarioError, match="duplicate"):
            scenario_from_dict(data)

    def test_bad_initial_state_rejected(self):
        data = self.base_dict()
        data["components"][0]["initial_state"] = 9
        with pytest.raises(ScenarioError, match="initial state"):
            scenario_from_dict(data)

    def test_never_failing_component_flagged(self):
        data = self.base_dict()
        data["components"][0]["decay"] = {
            "kind": "explicit",
            "rows": [[0.0, 1.0], [0.5, 0.3, 0.2], [0.1, 0.3, 0.3, 0.3]],
        }
        sc = scenario_from_dict(data)
        assert sc.warnings and "never fail" in sc.warnings[0]

    def test_roundtrip_identity(self, tmp_path):
        sc = generate_scenario(4, 1000, 20, seed=5, name="round")
        path = tmp_path / "round.json"
        save_scenario(sc, path)
        back = load_scenario(path)
        assert back.name == sc.name
        assert back.total_budget == sc.total_budget
        assert back.horizon == sc.horizon
        assert [c.name for c in back.components] == \
            [c.name for c in sc.components]
        for c1, c2 in zip(sc.components, back.components):
            np.testing.assert_array_equal(c1.decay, c2.decay)
            assert (c1.cost_d, c1.cost_q, c1.cost_m) == \
                (c2.cost_d, c2.cost_q, c2.cost_m)
        assert back.initial_states == sc.initial_states

    def test_missing_file_raises(self):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario("/nonexistent/path.json")


class TestGeneration:
    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        save_scenario(generate_scenario(6, 5000, 50, seed=9), a)
        save_scenario(generate_scenario(6, 5000, 50, seed=9), b)
        assert a.read_bytes() == b.read_bytes()
        assert sha256_file(a) == sha256_file(b)

    def test_costs_within_bands(self):
        sc = generate_scenario(20, 10000, 100, seed=3)
        for c in sc.components:
            assert 1 <= c.cost_m <= round(REPLACE_COST_BAND[1] * 10000)
            assert c.cost_m >= round(REPLACE_COST_BAND[0] * 10000)
            assert 1 <= c.cost_q <= max(1, round(INSPECT_COST_BAND[1] * 10000))

    def test_all_components_mortal(self):
        sc = generate_scenario(20, 10000, 100, seed=3)
        assert all(math.isfinite(mttf(c)) for c in sc.components)


class TestBuiltinScenario:
    def test_building20_contents(self):
        sc = load_scenario("building-20")
        assert len(sc.components) == 20
        assert sc.total_budget == 10000
        assert sc.horizon == 100
        names = {c.name for c in sc.components}
        assert {"air-handling-unit", "boiler", "lighting-equipment"} <= names
        assert sc.component("air-handling-unit").cost_m == 250
        assert sc.component("boiler").cost_m == 45
        assert sc.component("boiler").cost_q == 1
        assert sc.component("lighting-equipment").cost_m == 24
        for c in sc.components:
            assert 15 <= c.cost_m <= 300   # 0.15% to 3% of 10,000
            assert 1 <= c.cost_q <= 3      # 0.01% to 0.03%, floor 1 unit


@pytest.fixture(scope="module")
def tiny_scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scen") / "tiny.json"
    data = {
        "name": "tiny",
        "total_budget": 12,
        "horizon": 8,
        "components": [
            {"name": "alpha", "s_max": 5, "cost_q": 1, "cost_m": 3,
             "decay": {"kind": "binomial", "max_drop": 2, "drop_prob": 0.5}},
            {"name": "beta", "s_max": 4, "cost_q": 1, "cost_m": 2,
             "decay": {"kind": "deterministic", "d0": 1}},
        ],
    }
    path.write_text(json.dumps(data))
    return path


class TestCli:
    def test_usage_error_exit_code(self, capsys):
        assert main(["no-such-command"]) == 1

    def test_validation_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["curves", "--scenario", str(bad), "--out",
                     str(tmp_path / "out")])
        assert code == 2

    def test_verify_reports_and_exits_by_violations(self, tmp_path, capsys):
        out = tmp_path / "v"
        code = main(["verify", "--grid", "smax=2:5,d0=1:1,h=0:8,b=0:6",
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "verify-report.json").read_text())
        assert report["ok"] is True
        assert report["n_violations"] == 0

        code = main(["verify", "--grid", "smax=1:1,d0=1:1,h=0:6,b=0:6",
                     "--out", str(tmp_path / "v2")])
        assert code == 3  # degenerate pair: flatness claim genuinely fails

    def test_full_pipeline(self, tiny_scenario_file, tmp_path, capsys):
        scen = str(tiny_scenario_file)
        curves_dir = tmp_path / "curves"
        code = main(["curves", "--scenario", scen, "--out", str(curves_dir),
                     "--n-sims", "150", "--episodes", "4", "--particles",
                     "60", "--seed", "7"])
        assert code == 0
        assert (curves_dir / "alpha.csv").exists()
        assert (curves_dir / "alpha.json").exists()
        manifest = json.loads((curves_dir / "manifest.json").read_text())
        for rel, digest in manifest["artifacts"].items():
            assert sha256_file(curves_dir / rel) == digest

        plan_dir = tmp_path / "plan"
        code = main(["allocate", "--curves", str(curves_dir), "--scenario",
                     scen, "--method", "greedy", "--budget", "12", "--out",
                     str(plan_dir)])
        assert code == 0
        plan = json.loads((plan_dir / "plan.json").read_text())
        assert sum(plan["budgets"].values()) == 12
        assert plan["wall_time_s"] >= 0

        brute_dir = tmp_path / "plan-bf"
        code = main(["allocate", "--curves", str(curves_dir), "--method",
                     "bruteforce", "--budget", "12", "--grid-step", "2", "--out",
                     str(brute_dir)])
        assert code == 0

        base_dir = tmp_path / "plan-base"
        code = main(["allocate", "--scenario", scen, "--method", "baseline",
                     "--budget", "12", "--out", str(base_dir)])
        assert code == 0
        base_plan = json.loads((base_dir / "plan.json").read_text())
        assert sum(base_plan["budgets"].values()) == 12

        sim_dir = tmp_path / "sim"
        code = main(["simulate", "--scenario", scen, "--plan",
                     str(plan_dir / "plan.json"), "--policy", "pomcp",
                     "--seeds", "3", "--n-sims", "100", "--particles", "50",
                     "--out", str(sim_dir), "--seed", "5"])
        assert code == 0
        metrics = (sim_dir / "metrics.csv").read_text()
        assert metrics.splitlines()[0] == \
            "component,policy,budget,mean_ttf,std_ttf,n_seeds"
        traces = (sim_dir / "traces.jsonl").read_text().strip().splitlines()
        assert len(traces) == 6  # 2 components x 3 seeds
        for line in traces:
            t = json.loads(line)
            assert t["cum_costs"][-1] <= t["budget"]

        sim_b = tmp_path / "sim-b"
        code = main(["simulate", "--scenario", scen, "--plan",
                     str(plan_dir / "plan.json"), "--policy", "baseline",
                     "--seeds", "3", "--out", str(sim_b), "--seed", "5"])
        assert code == 0

        report_dir = tmp_path / "report"
        code = main(["report", "--runs", str(sim_dir), str(sim_b),
                     str(plan_dir), "--out", str(report_dir)])
        assert code == 0
        merged = (report_dir / "metrics_merged.csv").read_text()
        assert "schema_version" in merged.splitlines()[0]
        assert len(merged.strip().splitlines()) == 1 + 4
        assert (report_dir / "ci_history.csv").exists()
        assert (report_dir / "allocation_comparison.csv").exists()

    def test_simulate_reproducible_metrics(self, tiny_scenario_file,
                                           tmp_path, capsys):
        scen = str(tiny_scenario_file)
        plan = tmp_path / "p.json"
        plan.write_text(json.dumps({"budgets": {"alpha": 6, "beta": 6}}))
        outs = []
        for tag in ("one", "two"):
            out = tmp_path / tag
            code = main(["simulate", "--scenario", scen, "--plan", str(plan),
                         "--policy", "pomcp", "--seeds", "2", "--n-sims",
                         "80", "--particles", "40", "--out", str(out),
                         "--seed", "21"])
            assert code == 0
            outs.append((out / "metrics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_simulate_missing_plan_message(self, tiny_scenario_file,
                                           tmp_path, capsys):
        code = main(["simulate", "--scenario", str(tiny_scenario_file),
                     "--plan", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")])
        assert code == 2
        assert "allocate" in capsys.readouterr().err

    def test_allocate_missing_curves_message(self, tmp_path, capsys):
        code = main(["allocate", "--curves", str(tmp_path / "empty"),
                     "--method", "greedy", "--budget", "5",
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_report_with_no_artifacts(self, tmp_path, capsys):
        (tmp_path / "r").mkdir()
        code = main(["report", "--runs", str(tmp_path / "r"), "--out",
                     str(tmp_path / "o")])
        assert code == 2
        assert "simulate" in capsys.readouterr().err

    def test_gen_scenario_cli(self, tmp_path, capsys):
        out = tmp_path / "gen.json"
        code = main(["gen-scenario", "--components", "3", "--budget", "900",
                     "--horizon", "30", "--seed", "4", "--out", str(out)])
        assert code == 0
        sc = load_scenario(out)
        assert len(sc.components) == 3
