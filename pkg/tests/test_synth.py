import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachpc.core import LipschitzBounds, LocalModel, partition
from reachpc.errors import NoIntersection, ZeroDisplacement
from reachpc.learn import CycleRecord
from reachpc.plant import Plant
from reachpc.reach import ProxyParams
from reachpc.synth import (
    SynthConfig,
    SynthState,
    Termination,
    algorithm1,
    argmin_simplex,
    initial_control,
    next_waypoint,
    simplex_vertex,
    step_radius,
    tube_deviation,
)

from conftest import reduced_actuated_plant

X0 = (0.0, 1.0)


def model_at(x0, G=np.eye(2), c=3.0):
    return LocalModel(partition(list(x0), 2), [0.0, 0.0], G, [], c=c)


def integrator_plant(x0=X0):
    return Plant(lambda z, u: np.asarray(u, dtype=float), list(x0), m=2, h=5e-3)


def state_at(theta=0.0):
    return SynthState(0, theta, np.zeros(2), np.zeros(2), np.zeros(2))


# ---------------------------------------------------------------------------
# building blocks


def test_initial_control_examples():
    assert initial_control(model_at(X0), [1.0, 1.0], 0.1) == pytest.approx([0.9, 0.0])
    assert initial_control(model_at(X0, np.diag([1.0, 2.0])), [0.0, 2.0], 0.1) == pytest.approx([0.0, 0.45])


def test_initial_control_zero_displacement():
    with pytest.raises(ZeroDisplacement):
        initial_control(model_at(X0), X0, 0.1)


@settings(max_examples=50, deadline=None)
@given(
    g=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    d=st.lists(st.floats(-2, 2), min_size=2, max_size=2),
    eps=st.floats(0.01, 0.5),
)
def test_initial_control_norm_bound(g, d, eps):
    G = np.reshape(g, (2, 2)) + 2 * np.eye(2)
    if np.linalg.norm(d) < 1e-6 or np.linalg.svd(G, compute_uv=False)[-1] < 1e-3:
        return
    u = initial_control(model_at(X0, G), np.add(X0, d), eps)
    assert np.linalg.norm(u) <= 1 - eps + 1e-12


def test_step_radius_examples():
    assert step_radius(ProxyParams([0.0, 0.0], 1.0, 0.0, X0), 0.015, 5, 2) == pytest.approx(0.225)
    frozen = (1 / 3) * (1 - math.exp(-0.675))
    assert frozen == pytest.approx(0.163615, abs=1e-6)
    assert step_radius(ProxyParams([0.0, 0.0], 1.0, 3.0, X0), 0.015, 5, 2) == pytest.approx(frozen, abs=1e-12)
    assert step_radius(ProxyParams([0.0, 0.0], 1.0, 3.0, X0), 1e-9, 5, 2) < 1e-7


def test_step_radius_counts_drift():
    p = ProxyParams([0.3, 0.4], 1.0, 0.0, X0)
    assert step_radius(p, 0.01, 2, 1) == pytest.approx(1.5 * 0.04)


def test_next_waypoint_collinear():
    theta, z = next_waypoint(state_at(0.0), [0.3, 0.0], [1.0, 0.0], 0.1)
    assert theta == pytest.approx(0.4)
    assert z == pytest.approx([0.4, 0.0])


def test_next_waypoint_tangent():
    theta, _ = next_waypoint(state_at(0.0), [0.5, 0.1], [1.0, 0.0], 0.1)
    assert theta == pytest.approx(0.5, abs=1e-6)


def test_next_waypoint_no_intersection():
    with pytest.raises(NoIntersection):
        next_waypoint(state_at(0.0), [0.5, 0.2], [1.0, 0.0], 0.1)


def test_next_waypoint_never_regresses():
    theta, _ = next_waypoint(state_at(0.9), [0.3, 0.0], [1.0, 0.0], 0.1)
    assert theta == pytest.approx(0.9 + 1e-9, abs=1e-15)
    assert theta > 0.9


def test_next_waypoint_scaled_target():
    theta, z = next_waypoint(state_at(0.0), [0.0, 1.0], [0.0, 2.0], 0.2)
    assert theta == pytest.approx(0.6)
    assert z == pytest.approx([0.0, 1.2])


def _cycle(states, inputs=None):
    if inputs is None:
        inputs = [[0.9, 0.0], [1.0, 0.0], [0.9, 0.1]]
    return CycleRecord(0.0, inputs, states, 2)


def test_argmin_simplex_picks_descending_piece():
    # frak_x - z = (-1, 0): steps with positive x descend
    cyc = _cycle([[0, 0], [-0.1, 0], [0.0, 0], [-0.1, 0.05]])
    assert simplex_vertex([0.0, 0.0], [1.0, 0.0], cyc) == 1
    assert argmin_simplex([0.0, 0.0], [1.0, 0.0], cyc, 0.1) == pytest.approx([0.9, 0.0])


def test_argmin_simplex_tie_break():
    cyc = _cycle([[0, 0], [0.1, 0], [0.2, 0], [0.3, 0]])
    assert simplex_vertex([0.0, 0.0], [1.0, 0.0], cyc) == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_argmin_simplex_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    cyc = _cycle(rng.standard_normal((4, 2)))
    fx, z = rng.standard_normal(2), rng.standard_normal(2)
    steps = np.diff(cyc.actuated, axis=0)
    n = 141  # about 10^4 simplex points
    best = math.inf
    for i in range(n):
        for j in range(n - i):
            lam = np.array([i, j, n - 1 - i - j]) / (n - 1)
            best = min(best, float(2 * (fx - z) @ (lam @ steps)))
    vertex = simplex_vertex(fx, z, cyc)
    assert float(2 * (fx - z) @ steps[vertex]) == pytest.approx(best, abs=1e-12)


def test_tube_deviation():
    d = tube_deviation([[0.5, 0.2], [-1.0, 0.0], [2.0, 0.0]], [0.0, 0.0], [1.0, 0.0])
    assert d == pytest.approx([0.2, 1.0, 1.0])
    assert tube_deviation([[3.0, 4.0]], [0.0, 0.0], [0.0, 0.0]) == pytest.approx([5.0])


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(eps=1.0)
    with pytest.raises(ValueError):
        SynthConfig(k=0)
    assert SynthConfig().cycle_time == pytest.approx(0.045)


# ---------------------------------------------------------------------------
# algorithm 1


@pytest.mark.parametrize("target", [(0.5, 1.0), (0.3, 1.4), (-0.35, 0.65)])
def test_algorithm1_integrator_reaches_target(target):
    plant = integrator_plant()
    res = algorithm1(plant, model_at(X0), LipschitzBounds(0.0, 3.0, 0.1), target, SynthConfig(), warn=False)
    assert res.termination is Termination.REACHED
    states = plant.log.states
    # the stop rule puts z within r of the target while the state trails z by r
    assert np.linalg.norm(states[-1] - np.asarray(target)) <= 2 * res.r
    assert tube_deviation(states, res.origin, res.target).max() <= res.r
    assert np.all(np.linalg.norm(plant.log.inputs, axis=1) <= 1 + 1e-12)
    thetas = [c.theta_n for c in res.cycles]
    assert all(b > a for a, b in zip(thetas, thetas[1:]))


def test_algorithm1_target_at_anchor():
    plant = integrator_plant()
    res = algorithm1(plant, model_at(X0), LipschitzBounds(0.0, 3.0, 0.1), X0, SynthConfig())
    assert res.termination is Termination.REACHED
    assert res.cycles == [] and len(plant.log) == 1


def test_algorithm1_descends_when_condition_holds():
    # without Lipschitz slack and with a long waypoint horizon the convergence condition holds
    plant = integrator_plant()
    cfg = SynthConfig(eps=0.01, k=20)
    res = algorithm1(plant, model_at(X0, c=0.0), LipschitzBounds(0.0, 0.0, 0.1), (3.0, 1.0), cfg)
    assert res.termination is Termination.REACHED
    checked = [c for c in res.cycles if c.conv_ok and c.n >= 1]
    assert len(checked) >= 10
    assert all(c.d_z_after < c.d_z_before for c in checked)


def test_algorithm1_bicycle_block_tube():
    plant = reduced_actuated_plant()
    target = (0.12, 1.05)
    res = algorithm1(plant, model_at(X0), LipschitzBounds(0.0, 3.0, 0.1), target, SynthConfig(), warn=False)
    assert res.termination is Termination.REACHED
    assert tube_deviation(plant.log.states, res.origin, res.target).max() <= res.r
    assert np.all(np.linalg.norm(plant.log.inputs, axis=1) <= 1 + 1e-12)


def test_cycle_log_json_fields():
    plant = integrator_plant()
    res = algorithm1(plant, model_at(X0), LipschitzBounds(0.0, 3.0, 0.1), (0.5, 1.0), SynthConfig(), warn=False)
    row = res.cycles[0].to_json()
    for key in ("n", "tau_n", "theta_n", "z_n", "u_base", "frak_x", "d_z_before", "d_z_after", "conv_ok"):
        assert key in row
