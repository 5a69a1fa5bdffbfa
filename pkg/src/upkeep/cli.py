"""Command-line pipeline: verify -> curves -> allocate -> simulate -> report.

Every subcommand writes its artifacts plus a run manifest (seed, config,
artifact hashes, timings) into its output directory, so a finished run can be
checked for integrity and reproduced byte for byte.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 value-function
property violation (verify only).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .alloc import allocate_baseline, allocate_bruteforce, allocate_greedy, plan_welfare
from .curves import (
    default_grid,
    extend_to,
    load_curve_json,
    repair,
    save_curve_csv,
    save_curve_json,
    sweep,
)
from .exact import check_properties
from .planner import PlannerConfig
from .scenario import (
    ScenarioError,
    generate_scenario,
    load_scenario,
    save_scenario,
)
from .sim import BaselinePolicy, BaselinePolicyConfig, PomcpPolicy, evaluate
from .util import atomic_write_text, canonical_json, sha256_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_VIOLATION = 3

MANIFEST_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

OUT_ROOT_ENV = "UPKEEP_OUT_ROOT"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this pipeline reserves 2 for
    # validation failures
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _out_dir(args, default_name: str) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
        path = root / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out_dir: Path, command: str, config: dict, artifacts,
                    timings: dict, master_seed=None) -> None:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "master_seed": master_seed,
        "config": config,
        "artifacts": {
            str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(artifacts)
        },
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    atomic_write_text(out_dir / "manifest.json", canonical_json(manifest))


def _parse_grid(text: str) -> dict:
    """Parse 'smax=1:6,d0=1:3,h=0:12,b=0:10' into range bounds."""
    out = {}
    for part in text.split(","):
        key, _, span = part.partition("=")
        lo, _, hi = span.partition(":")
        out[key.strip()] = (int(lo), int(hi))
    return out


def cmd_verify(args) -> int:
    bounds = {"smax": (1, 6), "d0": (1, 3), "h": (0, 12), "b": (0, 10)}
    if args.grid:
        try:
            bounds.update(_parse_grid(args.grid))
        except ValueError:
            print(f"unparseable --grid value: {args.grid!r}", file=sys.stderr)
            return EXIT_USAGE
    t0 = time.perf_counter()
    report = check_properties(
        s_max_values=range(bounds["smax"][0], bounds["smax"][1] + 1),
        d0_values=range(bounds["d0"][0], bounds["d0"][1] + 1),
        h_max=bounds["h"][1],
        b_max=bounds["b"][1],
    )
    elapsed = time.perf_counter() - t0
    out_dir = _out_dir(args, "verify")
    report_path = out_dir / "verify-report.json"
    atomic_write_text(report_path, canonical_json(report.to_dict()))
    _write_manifest(out_dir, "verify", {"grid": bounds}, [report_path],
                    {"check": elapsed})
    status = "ok" if report.ok else f"{len(report.violations)} violations"
    print(
        f"checked {report.n_values} values across {report.n_tables} tables "
        f"in {elapsed:.2f}s: {status}"
    )
    print(f"report: {report_path}")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_curves(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = _out_dir(args, f"curves-{scenario.name}")
    cfg = PlannerConfig(
        horizon_remaining=scenario.horizon,
        total_budget=scenario.total_budget,
        n_simulations=args.n_sims,
        max_depth=args.depth,
        ucb_c=args.ucb_c,
    )
    artifacts = []
    timings = {}
    for comp in scenario.components:
        grid = default_grid(comp, scenario.total_budget, scenario.horizon)
        t0 = time.perf_counter()
        curve = sweep(
            comp,
            grid,
            scenario.initial_state(comp.name),
            scenario.horizon,
            cfg,
            n_episodes=args.episodes,
            master_seed=args.seed,
            workers=args.workers,
            n_particles=args.particles,
        )
        curve = repair(curve)
        timings[comp.name] = time.perf_counter() - t0
        json_path = out_dir / f"{comp.name}.json"
        csv_path = out_dir / f"{comp.name}.csv"
        save_curve_json(curve, json_path)
        save_curve_csv(curve, csv_path)
        artifacts += [json_path, csv_path]
        note = " (flagged)" if curve.flagged else ""
        print(
            f"{comp.name}: {len(curve.grid)} grid points, "
            f"value {curve.values[0]:.1f} -> {curve.values[-1]:.1f}"
            f" in {timings[comp.name]:.1f}s{note}"
        )
    _write_manifest(
        out_dir,
        "curves",
        {
            "scenario": scenario.name,
            "n_sims": args.n_sims,
            "episodes": args.episodes,
            "depth": args.depth,
            "ucb_c": args.ucb_c,
            "particles": args.particles,
        },
        artifacts,
        timings,
        master_seed=args.seed,
    )
    print(f"curves written to {out_dir}")
    return EXIT_OK


def _load_curve_dir(path: Path):
    files = sorted(Path(path).glob("*.json"))
    files = [f for f in files if f.name != "manifest.json"]
    if not files:
        raise FileNotFoundError(
            f"no curve JSON files in {path}; run the curves subcommand first"
        )
    return [load_curve_json(f) for f in files]


def cmd_allocate(args) -> int:
    scenario = None
    if args.scenario:
        try:
            scenario = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return EXIT_VALIDATION

    if args.method in ("greedy", "bruteforce"):
        if not args.curves:
            print("--curves is required for greedy/bruteforce", file=sys.stderr)
            return EXIT_USAGE
        try:
            curves = _load_curve_dir(args.curves)
        except FileNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_VALIDATION
        step = args.grid_step
        if step is None:
            step = 1
            if scenario is not None:
                costs = []
                for c in scenario.components:
                    costs += [c.cost_q, c.cost_m] + ([c.cost_d] if c.cost_d else [])
                step = int(np.gcd.reduce(costs)) if costs else 1
        curves = [extend_to(c, args.budget) for c in curves]
        if args.method == "greedy":
            plan = allocate_greedy(curves, args.budget, step=step)
        else:
            plan = allocate_bruteforce(curves, args.budget, step=step)
    else:  # baseline
        if scenario is None:
            print("--scenario is required for the baseline method",
                  file=sys.stderr)
            return EXIT_USAGE
        t0 = time.perf_counter()
        plan = allocate_baseline(scenario.components, args.budget)
        plan.wall_time_s = time.perf_counter() - t0
        if args.curves:
            try:
                curves = _load_curve_dir(args.curves)
                by_name = {c.name: extend_to(c, args.budget) for c in curves}
                ordered = [by_name[n] for n in plan.components]
                plan.welfare = plan_welfare(ordered, plan.budgets)
            except (FileNotFoundError, KeyError):
                pass

    out_dir = _out_dir(args, f"allocate-{plan.method}")
    plan_path = out_dir / "plan.json"
    atomic_write_text(plan_path, canonical_json(plan.to_dict()))
    _write_manifest(
        out_dir,
        "allocate",
        {"method": args.method, "budget": args.budget,
         "grid_step": args.grid_step},
        [plan_path],
        {"allocate": plan.wall_time_s},
    )
    welfare = "n/a" if plan.welfare is None else f"{plan.welfare:.2f}"
    print(
        f"{plan.method}: split {args.budget} across {len(plan.components)} "
        f"components in {plan.wall_time_s * 1000:.1f} ms (welfare {welfare})"
    )
    print(f"plan: {plan_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        plan_data = json.loads(Path(args.plan).read_text())
        budgets = {k: int(v) for k, v in plan_data["budgets"].items()}
    except FileNotFoundError:
        print(
            f"plan file not found: {args.plan}; run the allocate subcommand "
            "first",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    except (json.JSONDecodeError, KeyError) as exc:
        print(f"unreadable plan file {args.plan}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    missing = [c.name for c in scenario.components if c.name not in budgets]
    if missing:
        print(
            f"plan does not cover components: {', '.join(missing)}",
            file=sys.stderr,
        )
        return EXIT_VALIDATION

    if args.policy == "pomcp":
        policy = PomcpPolicy(
            n_simulations=args.n_sims,
            max_depth=args.depth,
            ucb_c=args.ucb_c,
            n_particles=args.particles,
        )
    else:
        policy = BaselinePolicy(
            BaselinePolicyConfig(
                inspect_every=args.inspect_every,
                replace_threshold=args.replace_threshold,
            )
        )

    t0 = time.perf_counter()
    result = evaluate(
        scenario,
        budgets,
        policy,
        n_seeds=args.seeds,
        master_seed=args.seed,
        workers=args.workers,
    )
    elapsed = time.perf_counter() - t0

    out_dir = _out_dir(args, f"simulate-{args.policy}")
    traces_path = out_dir / "traces.jsonl"
    lines = [json.dumps(t.to_dict(), sort_keys=True) for t in result.traces]
    atomic_write_text(traces_path, "\n".join(lines) + "\n")

    metrics_path = out_dir / "metrics.csv"
    rows = ["component,policy,budget,mean_ttf,std_ttf,n_seeds"]
    for m in result.metrics_rows(args.policy):
        rows.append(
            f"{m['component']},{m['policy']},{m['budget']},"
            f"{m['mean_ttf']:.4f},{m['std_ttf']:.4f},{m['n_seeds']}"
        )
    atomic_write_text(metrics_path, "\n".join(rows) + "\n")

    _write_manifest(
        out_dir,
        "simulate",
        {
            "scenario": scenario.name,
            "policy": args.policy,
            "seeds": args.seeds,
            "n_sims": args.n_sims,
            "depth": args.depth,
            "ucb_c": args.ucb_c,
        },
        [traces_path, metrics_path],
        {"simulate": elapsed},
        master_seed=args.seed,
    )
    print(
        f"{args.policy}: overall mean TTF {result.overall_ttf:.1f} over "
        f"{len(scenario.components)} components x {args.seeds} seeds "
        f"({elapsed:.1f}s)"
    )
    print(f"metrics: {metrics_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = _out_dir(args, "report")
    metrics_rows = []
    ci_rows = []
    alloc_rows = []
    for run in args.runs:
        run = Path(run)
        name = run.name
        metrics = run / "metrics.csv"
        if metrics.exists():
            header, *rows = metrics.read_text().strip().split("\n")
            for row in rows:
                metrics_rows.append(f"{REPORT_SCHEMA_VERSION},{name},{row}")
        traces = run / "traces.jsonl"
        if traces.exists():
            for ep, line in enumerate(traces.read_text().strip().split("\n")):
                t = json.loads(line)
                for step, (s, a, cc) in enumerate(
                    zip(t["states"], t["actions"], t["cum_costs"])
                ):
                    ci_rows.append(
                        f"{REPORT_SCHEMA_VERSION},{name},{t['component']},"
                        f"{ep},{step},{s},{a},{cc}"
                    )
        plan = run / "plan.json"
        if plan.exists():
            p = json.loads(plan.read_text())
            for comp, b in sorted(p["budgets"].items()):
                welfare = p.get("welfare")
                alloc_rows.append(
                    f"{REPORT_SCHEMA_VERSION},{name},{p['method']},{comp},{b},"
                    f"{'' if welfare is None else welfare}"
                )
    if not (metrics_rows or ci_rows or alloc_rows):
        print(
            "no metrics.csv, traces.jsonl or plan.json under the given runs; "
            "run simulate/allocate first",
            file=sys.stderr,
        )
        return EXIT_VALIDATION

    artifacts = []
    if metrics_rows:
        path = out_dir / "metrics_merged.csv"
        atomic_write_text(
            path,
            "schema_version,run,component,policy,budget,mean_ttf,std_ttf,n_seeds\n"
            + "\n".join(metrics_rows) + "\n",
        )
        artifacts.append(path)
    if ci_rows:
        path = out_dir / "ci_history.csv"
        atomic_write_text(
            path,
            "schema_version,run,component,episode,t,state,action,cum_cost\n"
            + "\n".join(ci_rows) + "\n",
        )
        artifacts.append(path)
    if alloc_rows:
        path = out_dir / "allocation_comparison.csv"
        atomic_write_text(
            path,
            "schema_version,run,method,component,budget,welfare\n"
            + "\n".join(alloc_rows) + "\n",
        )
        artifacts.append(path)
    _write_manifest(out_dir, "report", {"runs": [str(r) for r in args.runs]},
                    artifacts, {})
    for p in artifacts:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    scenario = generate_scenario(
        n_components=args.components,
        total_budget=args.budget,
        horizon=args.horizon,
        seed=args.seed,
        name=args.name,
    )
    for w in scenario.warnings:
        print(f"warning: {w}", file=sys.stderr)
    save_scenario(scenario, args.out)
    print(f"scenario with {args.components} components written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="upkeep", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check value-function structure exactly")
    p.add_argument("--grid", help="e.g. smax=1:6,d0=1:3,h=0:12,b=0:10")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curves", help="estimate value-of-budget curves")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.add_argument("--n-sims", type=int, default=10000,
                   help="tree-search iterations per decision (default 10000)")
    p.add_argument("--episodes", type=int, default=30)
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--ucb-c", type=float, default=10.0)
    p.add_argument("--particles", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("allocate", help="split the budget across components")
    p.add_argument("--curves", help="directory of curve JSON files")
    p.add_argument("--scenario")
    p.add_argument("--method", choices=("greedy", "bruteforce", "baseline"),
                   default="greedy")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--grid-step", type=int, default=None,
                   help="allocation granularity (default: gcd of action costs)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="run policies against a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--policy", choices=("pomcp", "baseline"), default="pomcp")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-sims", type=int, default=1000)
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--ucb-c", type=float, default=10.0)
    p.add_argument("--particles", type=int, default=1000)
    p.add_argument("--inspect-every", type=int, default=5)
    p.add_argument("--replace-threshold", type=int, default=15)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="merge run artifacts into plot-ready CSVs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gen-scenario", help="write a synthetic scenario file")
    p.add_argument("--components", type=int, default=20)
    p.add_argument("--budget", type=int, default=10000)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scenario)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
