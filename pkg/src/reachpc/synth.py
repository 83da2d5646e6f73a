"""Inner-loop tracking of a straight reachable path through learning cycles.

Each cycle applies the base input and its axis perturbations, re-identifies
the local model, advances the waypoint ``z = theta * x_f`` a distance ``r``
ahead of the current state, and picks the next base input from the simplex
of the inputs just applied. Geometry is in displacement coordinates relative
to the state at invocation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import LipschitzBounds, LocalModel
from .errors import NoIntersection, ZeroDisplacement
from .learn import CycleRecord, identify_local_model, run_cycle
from .reach import ProxyParams, convergence_condition, perturbation_budget, radial_envelope

logger = logging.getLogger(__name__)

THETA_CLAMP = 1e-9


@dataclass(frozen=True)
class SynthConfig:
    """Cycle knobs: piece length ``dt``, perturbation amplitude ``eps``, waypoint
    horizon ``k`` (in cycles) and input dimension ``m``."""

    dt: float = 0.015
    eps: float = 0.1
    k: int = 5
    m: int = 2
    l_d: float | None = None
    c4_over_c3: float = 1.0
    budget_factor: int = 10

    def __post_init__(self):
        if not (self.dt > 0 and 0 < self.eps < 1):
            raise ValueError("dt must be positive and eps in (0, 1)")
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")

    @property
    def cycle_time(self) -> float:
        return (self.m + 1) * self.dt

    def radius(self, p: ProxyParams) -> float:
        return step_radius(p, self.dt, self.k, self.m)


@dataclass
class SynthState:
    n: int
    theta_n: float
    z_n: np.ndarray
    u_base: np.ndarray
    frak_x: np.ndarray


class Termination(str, Enum):
    REACHED = "Reached"
    NO_INTERSECTION = "NoIntersection"
    BUDGET_EXCEEDED = "BudgetExceeded"


@dataclass
class CycleLog:
    n: int
    tau_n: float
    theta_n: float
    z_n: list
    u_base: list
    frak_x: list
    d_z_before: float
    d_z_after: float
    conv_ok: bool
    vertex: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "tau_n": self.tau_n,
            "theta_n": self.theta_n,
            "z_n": self.z_n,
            "u_base": self.u_base,
            "frak_x": self.frak_x,
            "d_z_before": self.d_z_before,
            "d_z_after": self.d_z_after,
            "conv_ok": self.conv_ok,
            "vertex": self.vertex,
        }


@dataclass
class TrackingResult:
    termination: Termination
    origin: np.ndarray
    target: np.ndarray
    r: float
    model: LocalModel
    cycles: list[CycleLog] = field(default_factory=list)
    records: list[CycleRecord] = field(default_factory=list)
    t_start: float = 0.0
    t_end: float = 0.0


def initial_control(model: LocalModel, target, eps: float) -> np.ndarray:
    """Pseudoinverse-steered base input toward ``target``, scaled to norm at most ``1 - eps``."""
    delta = np.asarray(target, dtype=float) - model.anchor.actuated
    dist = float(np.linalg.norm(delta))
    if dist <= 1e-12:
        raise ZeroDisplacement("target coincides with the anchor")
    G_pinv = np.linalg.pinv(model.input_matrix)
    return (1.0 - eps) * (G_pinv @ delta) / (np.linalg.norm(G_pinv, 2) * dist)


def step_radius(p: ProxyParams, dt: float, k: int, m: int) -> float:
    """Worst-case proxy displacement after ``k`` cycles (drift aligned with the input)."""
    return radial_envelope(p.a_norm + p.b, p.c, k * (m + 1) * dt)


def next_waypoint(state: SynthState, frak_x_next, target, r: float) -> tuple[float, np.ndarray]:
    """Larger root of ``||theta x_f - frak_x||^2 = r^2`` (displacement coordinates).

    The parameter never regresses: a root at or below ``theta_n`` is clamped
    just above it.
    """
    xf = np.asarray(target, dtype=float)
    xk = np.asarray(frak_x_next, dtype=float)
    A = float(xf @ xf)
    if A <= 0:
        raise ZeroDisplacement("target displacement is zero")
    B = -2.0 * float(xf @ xk)
    C = float(xk @ xk) - r * r
    disc = B * B - 4.0 * A * C
    if disc < 0:
        if disc > -1e-12 * max(B * B, 4.0 * A * abs(C), 1e-300):
            disc = 0.0
        else:
            raise NoIntersection("state drifted more than r away from the reference path")
    theta = (-B + math.sqrt(disc)) / (2.0 * A)
    if theta <= state.theta_n:
        theta = state.theta_n + THETA_CLAMP
    return theta, theta * xf


def simplex_scores(frak_x_next, z_next, cycle: CycleRecord) -> np.ndarray:
    """``<2 (frak_x - z), x_{j+1} - x_j>`` for every piece ``j`` of the cycle."""
    steps = np.diff(cycle.actuated, axis=0)
    return steps @ (2.0 * (np.asarray(frak_x_next, dtype=float) - np.asarray(z_next, dtype=float)))


def simplex_vertex(frak_x_next, z_next, cycle: CycleRecord) -> int:
    # the objective is linear in lambda, so a vertex is optimal; argmin keeps the lowest index on ties
    return int(np.argmin(simplex_scores(frak_x_next, z_next, cycle)))


def argmin_simplex(frak_x_next, z_next, cycle: CycleRecord, eps: float) -> np.ndarray:
    """Next base input: ``(1 - eps)`` times the cycle input whose piece descended most toward ``z``."""
    j = simplex_vertex(frak_x_next, z_next, cycle)
    return (1.0 - eps) * cycle.inputs[j]


def tube_deviation(points, origin, target) -> np.ndarray:
    """Distance from each point to the segment ``[origin, target]``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    o = np.asarray(origin, dtype=float)
    d = np.asarray(target, dtype=float) - o
    dd = float(d @ d)
    if dd == 0:
        return np.linalg.norm(points - o, axis=1)
    s = np.clip((points - o) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(points - (o + s[:, None] * d), axis=1)


def algorithm1(
    plant,
    model: LocalModel,
    bounds: LipschitzBounds,
    target,
    cfg: SynthConfig,
    warn: bool = True,
) -> TrackingResult:
    """Track the straight path from the current state to ``target``.

    ``model`` must be anchored at the plant's current state. Returns after
    ``Reached`` (waypoint within ``r`` of the target) or ``BudgetExceeded``;
    ``NoIntersection``, ``InadmissibleBase`` and ``DegenerateGain`` propagate.
    """
    m = cfg.m
    origin = model.anchor.actuated.copy()
    target = np.asarray(target, dtype=float)
    xf = target - origin
    p = ProxyParams.from_model(model)
    r = step_radius(p, cfg.dt, cfg.k, m)
    t_start = plant.t
    result = TrackingResult(Termination.REACHED, origin, target, r, model, t_start=t_start, t_end=t_start)
    dist = float(np.linalg.norm(xf))
    if dist <= 1e-12:
        return result

    u_base = initial_control(model, target, cfg.eps)
    state = SynthState(0, 0.0, np.zeros(m), u_base, np.zeros(m))
    n_max = cfg.budget_factor * math.ceil(dist / r)
    current = model
    warned = not warn
    termination = Termination.BUDGET_EXCEEDED
    for n in range(n_max):
        budget = perturbation_budget(current, bounds, cfg.dt, cfg.eps, m, r, cfg.l_d, cfg.c4_over_c3)
        x_disp = float(np.linalg.norm(state.frak_x))
        conv_ok = convergence_condition(budget, ProxyParams.from_model(current), x_disp, r, cfg.eps)
        if not conv_ok and not warned:
            logger.warning("convergence condition fails at cycle %d (dt=%g, eps=%g)", n, cfg.dt, cfg.eps)
            warned = True
        plant.mark(kind="cycle", n=n)
        rec = run_cycle(plant, state.u_base, cfg.eps, cfg.dt)
        frak_next = rec.actuated[-1] - origin
        d_before = float(np.sum((state.frak_x - state.z_n) ** 2))
        d_after = float(np.sum((frak_next - state.z_n) ** 2))
        current = identify_local_model(rec, cfg.dt, bounds)
        theta, z = next_waypoint(state, frak_next, xf, r)
        vertex = simplex_vertex(frak_next, z, rec)
        result.cycles.append(
            CycleLog(
                n,
                rec.tau_n,
                state.theta_n,
                (origin + state.z_n).tolist(),
                state.u_base.tolist(),
                (origin + state.frak_x).tolist(),
                d_before,
                d_after,
                bool(conv_ok),
                vertex,
            )
        )
        result.records.append(rec)
        u_next = (1.0 - cfg.eps) * rec.inputs[vertex]
        state = SynthState(n + 1, theta, z, u_next, frak_next)
        if np.linalg.norm(z - xf) < r:
            termination = Termination.REACHED
            break
    result.termination = termination
    result.model = current
    result.t_end = plant.t
    return result
