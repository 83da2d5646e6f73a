"""Command line entry point: ``rpc run|plan|plot``.

``run`` plans a waypoint path, drives the bicycle along it with the outer
loop and writes logs, a summary and SVG plots into the output directory.
Exit codes: 0 goal reached, 1 configuration or planning error, 2 unsafe,
3 stalled.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, MissingLog
from .planner import Scenario, WaypointPath, optimize_path
from .plant import TrajectoryLog, bicycle_plant
from .rpc import Outcome, RunResult, algorithm2, min_clearance
from .svgplot import clouds_svg, path_svg, velocity_svg

logger = logging.getLogger("reachpc")

EXIT_CODES = {Outcome.GOAL_REACHED: 0, Outcome.UNSAFE: 2, Outcome.STALLED: 3}
EXIT_CONFIG = 1

RUN_FILES = ("scenario.json", "path.json", "trajectory.csv")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _error(key: str, message: str) -> None:
    print(json.dumps({"error": "config", "key": key, "message": message}), file=sys.stderr)


def summarize(result: RunResult, scenario: Scenario) -> dict:
    states = result.log.states
    pos = states[:, 2:4]
    clearance = min_clearance(pos, scenario) if len(pos) else math.inf
    goal_error = float(np.linalg.norm(pos[-1] - np.asarray(scenario.goal))) if len(pos) else None
    return {
        "outcome": result.outcome.value,
        "goal_error": goal_error,
        "min_clearance": None if math.isinf(clearance) else float(clearance),
        "v_min": float(states[:, 1].min()) if len(states) else None,
        "v_max": float(states[:, 1].max()) if len(states) else None,
        "wall_per_iteration_s": result.wall_per_iteration,
        "wall_max_iteration_s": result.wall_max,
        "outer_iterations": len(result.outer),
        "inner_cycles": len(result.cycles),
        "relearned": result.relearned,
        "final_time_s": float(result.log.t[-1]) if len(result.log) else 0.0,
        "cause": result.cause,
    }


def plan(cfg: RunConfig, out: Path) -> tuple[Scenario, WaypointPath]:
    scenario = cfg.build_scenario()
    path = optimize_path(scenario)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "scenario.json", scenario.to_json())
    _write_json(out / "path.json", path.to_json())
    return scenario, path


def execute(cfg: RunConfig, out: Path) -> tuple[int, dict | None]:
    """Plan, run the outer loop and write every artifact; returns (exit code, summary)."""
    scenario, path = plan(cfg, out)
    (out / "config.yaml").write_text(dump_config(cfg))
    if not path.feasible:
        _error("scenario", "waypoint planner found no feasible path")
        return EXIT_CONFIG, None
    plant = bicycle_plant(cfg.bicycle(), scenario.terrain, cfg.initial_state(), h=cfg.plant.h)
    result = algorithm2(
        plant, scenario, path, cfg.synth_config(), cfg.bounds(), cfg.horizon, cfg.n_tilde, cfg.seed,
        cfg.strategy, cfg.n_samples, cfg.max_outer, cfg.enforce_convergence,
    )
    result.log.to_csv(out / "trajectory.csv")
    _write_jsonl(out / "outer.jsonl", (rec.to_json() for rec in result.outer))
    _write_jsonl(out / "cycles.jsonl", result.cycles)
    _write_jsonl(out / "clouds.jsonl", result.clouds)
    summary = summarize(result, scenario)
    _write_json(out / "summary.json", summary)
    write_plots(out)
    return EXIT_CODES[result.outcome], summary


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def write_plots(run_dir, out_dir=None) -> list[Path]:
    """Render path, velocity and cloud SVGs from the files of a run directory."""
    run_dir = Path(run_dir)
    missing = [name for name in RUN_FILES if not (run_dir / name).exists()]
    if missing:
        raise MissingLog(f"{run_dir} lacks {', '.join(missing)}")
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = Scenario.from_json(json.loads((run_dir / "scenario.json").read_text()))
    path = WaypointPath.from_json(json.loads((run_dir / "path.json").read_text()))
    log = TrajectoryLog.from_csv(run_dir / "trajectory.csv")
    snapshots = [
        {"unactuated": c["unactuated"]["points"], "lookahead": c["lookahead"]["points"]}
        for c in _read_jsonl(run_dir / "clouds.jsonl")
    ]
    figures = {
        "path.svg": path_svg(scenario, path.points, log.states, [s["unactuated"] for s in snapshots]),
        "velocity.svg": velocity_svg(log.t, log.states[:, 1] if len(log) else [], scenario.velocity_corridor),
        "clouds.svg": clouds_svg(log.states, snapshots),
    }
    written = []
    for name, text in figures.items():
        target = out_dir / name
        target.write_text(text)
        written.append(target)
    return written


def _load(config_path: str) -> RunConfig:
    return load_config(config_path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="rpc", description="Reachability-based predictive control runs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="plan and drive the scenario of a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", help="override output_dir from the config")
    p_plan = sub.add_parser("plan", help="run the waypoint planner only")
    p_plan.add_argument("config")
    p_plan.add_argument("--output-dir", help="override output_dir from the config")
    p_plot = sub.add_parser("plot", help="render SVG plots from a run directory")
    p_plot.add_argument("run_dir")
    p_plot.add_argument("--out", help="plot directory (default <run_dir>/plots)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "plot":
        try:
            for written in write_plots(args.run_dir, args.out):
                print(written)
        except MissingLog as exc:
            print(json.dumps({"error": "missing_log", "message": str(exc)}), file=sys.stderr)
            return EXIT_CONFIG
        return 0

    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        _error(exc.key, str(exc))
        return EXIT_CONFIG
    out = Path(args.output_dir or cfg.output_dir)

    if args.command == "plan":
        _, path = plan(cfg, out)
        print(json.dumps({"feasible": path.feasible, "objective": path.objective, "output_dir": str(out)}))
        if not path.feasible:
            _error("scenario", "waypoint planner found no feasible path")
            return EXIT_CONFIG
        return 0

    code, summary = execute(cfg, out)
    if summary is not None:
        print(json.dumps(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
