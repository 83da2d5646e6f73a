import json
import re

import numpy as np
import pytest
import yaml

from reachpc.cli import main, write_plots
from reachpc.errors import MissingLog
from reachpc.plant import TrajectoryLog

from test_config import course_data


def small_config(tmp_path, **scenario) -> str:
    """Short flat corridor with rolling resistance; runs in a few seconds."""
    data = course_data()
    data["output_dir"] = str(tmp_path / "out")
    data["n_samples"] = 128
    data["scenario"].update(
        goal=[6.0, 0.0],
        n_waypoints=10,
        terrain={"default_rc": 0.2, "bands": []},
        obstacles=[],
        random_obstacles=None,
    )
    data["scenario"].update(scenario)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def fake_run_dir(tmp_path, n_states=50) -> str:
    """Planned scenario plus a synthetic straight trajectory."""
    cfg = small_config(tmp_path, goal=[12.0, 0.0], n_waypoints=20, obstacles=[{"center": [6.0, 0.4], "radius": 0.8}])
    assert main(["plan", cfg]) == 0
    out = tmp_path / "out"
    t = np.linspace(0.0, 4.0, n_states)
    states = np.column_stack([np.zeros_like(t), np.full_like(t, 2.5), 2.5 * t, np.zeros_like(t)])
    TrajectoryLog(t, states, np.zeros((n_states, 2)), 2).to_csv(out / "trajectory.csv")
    return str(out)


def test_plan_command(tmp_path, capsys):
    cfg = small_config(tmp_path, obstacles=[{"center": [3.0, 0.0], "radius": 0.5}])
    assert main(["plan", cfg]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["feasible"] is True
    path = json.loads((tmp_path / "out" / "path.json").read_text())
    assert len(path["points"]) == 10 and path["feasible"]
    scenario = json.loads((tmp_path / "out" / "scenario.json").read_text())
    assert scenario["obstacles"] == [{"center": [3.0, 0.0], "radius": 0.5}]


def test_run_command_writes_artifacts(tmp_path, capsys):
    cfg = small_config(tmp_path)
    code = main(["run", cfg])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0 and summary["outcome"] == "GoalReached"
    assert summary["v_min"] >= 2.2 and summary["v_max"] <= 2.8
    assert summary["min_clearance"] is None
    out = tmp_path / "out"
    for name in ("config.yaml", "trajectory.csv", "outer.jsonl", "cycles.jsonl", "summary.json"):
        assert (out / name).exists(), name
    for name in ("path.svg", "velocity.svg", "clouds.svg"):
        assert (out / "plots" / name).read_text().rstrip().endswith("</svg>")
    first = json.loads((out / "outer.jsonl").read_text().splitlines()[0])
    assert {"n_hat", "anchor", "target", "r", "r_bar", "rule_fired", "wall_time_s"} <= set(first)


def test_output_dir_flag(tmp_path):
    cfg = small_config(tmp_path)
    assert main(["plan", cfg, "--output-dir", str(tmp_path / "other")]) == 0
    assert (tmp_path / "other" / "path.json").exists()


def test_config_error_exit_code(tmp_path, capsys):
    data = course_data()
    data["scenario"]["clearance"] = -1.0
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    assert main(["run", str(path)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and "clearance" in err["key"]


def test_goal_inside_obstacle_exit_code(tmp_path, capsys):
    cfg = small_config(tmp_path, obstacles=[{"center": [6.0, 0.0], "radius": 0.5}])
    assert main(["run", cfg]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["key"] == "scenario.goal"


def test_plot_counts_scenario_elements(tmp_path):
    run_dir = fake_run_dir(tmp_path)
    assert main(["plot", run_dir]) == 0
    svg = (tmp_path / "out" / "plots" / "path.svg").read_text()
    assert svg.count("<circle") == 1
    assert svg.count("<ellipse") == 1
    assert svg.count("<polyline") == 3


def test_plot_is_byte_deterministic(tmp_path):
    run_dir = fake_run_dir(tmp_path)
    first = [p.read_bytes() for p in write_plots(run_dir, tmp_path / "a")]
    second = [p.read_bytes() for p in write_plots(run_dir, tmp_path / "b")]
    assert first == second


def test_plot_empty_trajectory_gives_axes_only(tmp_path):
    run_dir = fake_run_dir(tmp_path, n_states=0)
    write_plots(run_dir)
    svg = (tmp_path / "out" / "plots" / "path.svg").read_text()
    assert "<polyline" not in svg and "<circle" not in svg
    assert re.search(r"<line", svg)
    velocity = (tmp_path / "out" / "plots" / "velocity.svg").read_text()
    assert "<polyline" not in velocity


def test_plot_missing_logs(tmp_path, capsys):
    with pytest.raises(MissingLog):
        write_plots(tmp_path)
    assert main(["plot", str(tmp_path)]) == 1
    assert "trajectory.csv" in capsys.readouterr().err
