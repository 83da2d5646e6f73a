"""Outer loop: choose targets from fresh reachable sets and track them.

Every outer iteration re-anchors at the current state, recomputes the
actuated cloud, the unactuated cloud and a multi-horizon lookahead of
positions, picks the next actuated target with a rule table, and hands it
to the inner tracker.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .core import LipschitzBounds, LocalModel, PartitionedState
from .errors import DegenerateGain, DriftDominates, EmptyCloud, ReachPCError, RestViolation, Unsafe
from .learn import identify_local_model, run_cycle
from .planner import Scenario, WaypointPath
from .plant import Plant, TrajectoryLog
from .reach import (
    CloudKind,
    ProxyParams,
    ReachCloud,
    convergence_condition,
    grs_actuated,
    grs_unactuated,
    perturbation_budget,
    spherical_radius,
)
from .seeding import derive_seed
from .synth import SynthConfig, algorithm1, step_radius

logger = logging.getLogger(__name__)


class Condition(str, Enum):
    INTERSECT_SLOW = "PathIntersectAndSlow"
    INTERSECT_FAST = "PathIntersectAndFast"
    LEFT = "LeftOfPath"
    RIGHT = "RightOfPath"


class Action(str, Enum):
    INCREASE_V = "IncreaseV"
    ZERO_INPUT = "ZeroInput"
    INCREASE_THETA = "IncreaseTheta"
    DECREASE_THETA = "DecreaseTheta"
    HOLD_ALIGN = "HoldAndAlign"


@dataclass(frozen=True)
class StrategyRule:
    condition: Condition
    action: Action


# Evaluated in order, first match wins. Headings are counter-clockwise, so a
# vehicle left of its path turns back by decreasing the heading.
RULES = (
    StrategyRule(Condition.INTERSECT_SLOW, Action.INCREASE_V),
    StrategyRule(Condition.INTERSECT_FAST, Action.ZERO_INPUT),
    StrategyRule(Condition.LEFT, Action.DECREASE_THETA),
    StrategyRule(Condition.RIGHT, Action.INCREASE_THETA),
)


@dataclass(frozen=True)
class StrategyConfig:
    """Thresholds of the rule table and gains of the steering targets."""

    v_slow: float = 2.3
    v_fast: float = 2.7
    v_ref: float = 2.55
    intersect_tol: float = 0.2
    pursuit_distance: float = 2.0
    k_theta: float = 6.0
    k_v: float = 4.0
    theta_rate_max: float = 4.0
    coast_steer_rate: float = 2.0
    remark_tol: float = 0.05
    lookahead_anchors: int = 8
    inner_budget_factor: int = 1


@dataclass
class RpcState:
    n_hat: int
    anchor: PartitionedState
    actuated_target: np.ndarray
    r_bar: float
    lookahead: int
    horizon: float


class Outcome(str, Enum):
    GOAL_REACHED = "GoalReached"
    UNSAFE = "Unsafe"
    STALLED = "Stalled"


@dataclass
class OuterRecord:
    n_hat: int
    anchor: list
    target: list
    r: float
    r_bar: float
    rule_fired: str
    wall_time_s: float

    def to_json(self) -> dict:
        return {
            "n_hat": self.n_hat,
            "anchor": self.anchor,
            "target": self.target,
            "r": self.r,
            "r_bar": self.r_bar,
            "rule_fired": self.rule_fired,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class RunResult:
    outcome: Outcome
    log: TrajectoryLog
    outer: list[OuterRecord] = field(default_factory=list)
    cycles: list[dict] = field(default_factory=list)
    clouds: list[dict] = field(default_factory=list)
    cause: str | None = None
    relearned: int = 0

    @property
    def wall_per_iteration(self) -> float:
        if not self.outer:
            return 0.0
        return float(np.mean([rec.wall_time_s for rec in self.outer]))

    @property
    def wall_max(self) -> float:
        return max((rec.wall_time_s for rec in self.outer), default=0.0)


# ---------------------------------------------------------------------------
# path geometry


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def nearest_on_path(path_points, position) -> tuple[int, float, np.ndarray, float]:
    """Closest point of the polyline: ``(segment index, fraction, foot, distance)``."""
    pts = np.asarray(path_points, dtype=float)
    a, b = pts[:-1], pts[1:]
    d = b - a
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    s = np.clip(np.einsum("ij,ij->i", np.asarray(position) - a, d) / dd, 0.0, 1.0)
    feet = a + s[:, None] * d
    dist = np.linalg.norm(feet - np.asarray(position), axis=1)
    i = int(np.argmin(dist))
    return i, float(s[i]), feet[i], float(dist[i])


def distance_to_path(points, path_points) -> np.ndarray:
    """Distance from each point to the polyline."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    path = np.asarray(path_points, dtype=float)
    a, b = path[:-1], path[1:]
    d = b - a
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    rel = pts[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("pkj,kj->pk", rel, d) / dd, 0.0, 1.0)
    feet = a[None] + s[..., None] * d[None]
    return np.min(np.linalg.norm(pts[:, None, :] - feet, axis=2), axis=1)


def cloud_meets_path(points, path_points, tol: float = 1e-2) -> bool:
    return bool(np.any(distance_to_path(points, path_points) <= tol))


def path_side(path_points, position) -> int:
    """``+1`` when ``position`` is left of the path (counter-clockwise side), ``-1`` when right."""
    pts = np.asarray(path_points, dtype=float)
    i, _, foot, _ = nearest_on_path(pts, position)
    seg = pts[i + 1] - pts[i]
    offset = np.asarray(position, dtype=float) - foot
    cross = seg[0] * offset[1] - seg[1] * offset[0]
    return 1 if cross > 0 else -1


def pursuit_point(path_points, position, distance: float) -> np.ndarray:
    """Point ``distance`` further along the path from the foot of ``position``."""
    pts = np.asarray(path_points, dtype=float)
    i, s, foot, _ = nearest_on_path(pts, position)
    remaining = distance
    current = foot
    for j in range(i, len(pts) - 1):
        nxt = pts[j + 1]
        seg_len = float(np.linalg.norm(nxt - current))
        if seg_len >= remaining:
            return current + (nxt - current) * (remaining / max(seg_len, 1e-300))
        remaining -= seg_len
        current = nxt
    return pts[-1].copy()


# ---------------------------------------------------------------------------
# lookahead


def _spread_indices(points: np.ndarray, count: int) -> np.ndarray:
    """Indices of ``count`` points spread along the principal axis of ``points``."""
    if len(points) <= count:
        return np.arange(len(points))
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    order = np.argsort(centered @ vt[0], kind="stable")
    return order[np.linspace(0, len(points) - 1, count).round().astype(int)]


def lookahead_cloud(
    model: LocalModel,
    bounds: LipschitzBounds,
    T: float,
    n_tilde: int,
    seed: int,
    n_samples: int = 512,
    n_anchors: int = 8,
    remark_tol: float = 0.05,
) -> ReachCloud:
    """Union of unactuated clouds chained over ``n_tilde`` horizons.

    Each horizon re-anchors at points spread over the previous cloud and adds
    the single-horizon displacement set. The displacement set is reused by
    translation when the actuated norm can change by at most ``remark_tol``
    (relative) over the whole lookahead; otherwise it is recomputed per horizon
    with the actuated anchor shrunk by the worst-case radius, which lowers the
    guaranteed gain. Chaining stops early once the shrunk anchor would reach
    rest; the returned horizon counts the layers actually chained.
    """
    if n_tilde < 1:
        raise ValueError("n_tilde must be >= 1")
    base = grs_unactuated(model, bounds, T, n_samples=n_samples, rng_seed=seed)
    if n_tilde == 1:
        return base
    xb0 = model.anchor.unactuated
    s0 = float(np.linalg.norm(model.anchor.actuated))
    p = ProxyParams.from_model(model)
    bt_T = spherical_radius(p, T)
    translate = n_tilde * bt_T <= remark_tol * s0
    displacement = base.points - xb0
    rng = np.random.default_rng(derive_seed(seed, 1))
    layers = [base.points]
    previous = base.points
    for i in range(1, n_tilde):
        if translate:
            disp_i = displacement
        else:
            scale = (s0 - i * bt_T) / s0
            if scale * s0 < bt_T:
                # the worst-case speed reaches rest: no guaranteed motion beyond this horizon
                logger.debug("lookahead truncated after %d of %d horizons", i, n_tilde)
                break
            shrunk = LocalModel(
                PartitionedState(model.anchor.actuated * scale, xb0),
                model.drift,
                model.input_matrix,
                model.unactuated_drift * scale,
                model.c,
            )
            cloud_i = grs_unactuated(
                shrunk, bounds, T, bt=lambda t: spherical_radius(p, t), n_samples=n_samples,
                rng_seed=derive_seed(seed, 2, i),
            )
            disp_i = cloud_i.points - xb0
        anchors = previous[_spread_indices(previous, n_anchors)]
        layer = (anchors[:, None, :] + disp_i[None, :, :]).reshape(-1, xb0.size)
        keep = _spread_indices(layer, 2)
        extra = rng.choice(len(layer), size=min(n_samples, len(layer)) - len(keep), replace=False)
        layer = layer[np.unique(np.concatenate([keep, extra]))]
        layers.append(layer)
        previous = layer
    return ReachCloud(CloudKind.UNACTUATED, len(layers) * T, xb0, np.vstack(layers), seed, model.anchor.full())


# ---------------------------------------------------------------------------
# target selection


def _best_aligned(
    cloud_points: np.ndarray, anchor: np.ndarray, direction: np.ndarray, cone: float = math.radians(15.0)
) -> np.ndarray:
    """Farthest cloud point whose bearing from ``anchor`` is within ``cone`` of ``direction``.

    Inner tracking only terminates when the target lies beyond one cycle of
    motion, so boundary points are preferred over interior points. Falls
    back to the best-aligned point when the cone holds no sample.
    """
    d = np.asarray(direction, dtype=float)
    d = d / max(np.linalg.norm(d), 1e-300)
    rel = cloud_points - anchor
    norms = np.linalg.norm(rel, axis=1)
    cos = np.where(norms > 1e-12, (rel @ d) / np.maximum(norms, 1e-300), -1.0)
    inside = cos >= math.cos(cone)
    if not np.any(inside):
        return cloud_points[int(np.argmax(cos))].copy()
    return cloud_points[int(np.argmax(np.where(inside, rel @ d, -np.inf)))].copy()


def _rate_target(
    cloud: ReachCloud,
    model: LocalModel,
    theta_rate: float,
    v_rate: float,
    drive: bool,
    coast_steer_rate: float,
) -> np.ndarray:
    """Target whose tracking input best realizes the desired actuated rates.

    The first tracking input points along the target direction with fixed
    magnitude, so the realized rate is ``a + 0.9 b d`` for a unit direction
    ``d``, or ``a`` when the target is the anchor. When driving, ``d`` points
    from the drift to the desired rate. When coasting, the anchor is returned
    unless the heading demand exceeds ``coast_steer_rate``; then ``d`` is
    tilted so the speed rate stays as close as possible to ``v_rate``.
    """
    anchor = model.anchor.actuated
    a = model.a
    gain = 0.9 * model.b
    if drive:
        direction = np.array([theta_rate - a[0], v_rate - a[1]])
        if np.linalg.norm(direction) <= 1e-12:
            return anchor.copy()
    elif abs(theta_rate) >= coast_steer_rate:
        cos_phi = float(np.clip((v_rate - a[1]) / gain, -1.0, 1.0))
        direction = np.array([math.copysign(math.sqrt(1.0 - cos_phi**2), theta_rate), cos_phi])
    else:
        return anchor.copy()
    return _best_aligned(cloud.points, anchor, direction)


def choose_target(
    cloud_actuated: ReachCloud,
    lookahead: ReachCloud,
    path: WaypointPath,
    state: PartitionedState,
    corridor: tuple[float, float],
    model: LocalModel | None = None,
    strategy: StrategyConfig = StrategyConfig(),
) -> tuple[np.ndarray, str]:
    """Apply the rule table and return ``(target, rule name)``.

    Actuated states are ``[theta, v]``. Steering rules (and the fallback)
    need ``model`` to compensate for the learned drift.
    """
    if len(cloud_actuated) == 0 or len(lookahead) == 0:
        raise EmptyCloud("empty reach cloud")
    theta, v = float(state.actuated[0]), float(state.actuated[1])
    position = state.unactuated
    meets = cloud_meets_path(lookahead.points, path.points, strategy.intersect_tol)
    if meets and v <= strategy.v_slow:
        pts = cloud_actuated.points
        return pts[int(np.argmax(pts[:, 1]))].copy(), Action.INCREASE_V.value
    if meets and v >= strategy.v_fast:
        return state.actuated.copy(), Action.ZERO_INPUT.value

    aim = pursuit_point(path.points, position, strategy.pursuit_distance)
    heading_error = _wrap(math.atan2(aim[1] - position[1], aim[0] - position[0]) - theta)
    theta_rate = float(np.clip(strategy.k_theta * heading_error, -strategy.theta_rate_max, strategy.theta_rate_max))
    if not meets:
        action = Action.DECREASE_THETA if path_side(path.points, position) > 0 else Action.INCREASE_THETA
        theta_rate = min(theta_rate, 0.0) if action is Action.DECREASE_THETA else max(theta_rate, 0.0)
    else:
        action = Action.HOLD_ALIGN
    if model is None:
        raise ValueError("steering rules need the local model")
    v_rate = strategy.k_v * (strategy.v_ref - v)
    target = _rate_target(cloud_actuated, model, theta_rate, v_rate, v < strategy.v_ref, strategy.coast_steer_rate)
    return target, action.value


# ---------------------------------------------------------------------------
# safety


def min_clearance(positions, scenario: Scenario) -> float:
    """Smallest ``||p - c_k|| - r_k - safety_margin`` over all positions and obstacles."""
    if not scenario.obstacles:
        return math.inf
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    dist = np.linalg.norm(pos[:, None, :] - scenario.centers[None], axis=2)
    radii = np.array([o.radius for o in scenario.obstacles]) + scenario.safety_margin
    return float(np.min(dist - radii[None, :]))


def safety_monitor(scenario: Scenario):
    """Per-step check of the unsafe set: speed outside the corridor or a hit obstacle."""
    v_lo, v_hi = scenario.velocity_corridor
    centers = scenario.centers
    radii = np.array([o.radius for o in scenario.obstacles]) + scenario.safety_margin

    def monitor(t: float, z: np.ndarray) -> None:
        v = z[1]
        if v < v_lo or v > v_hi:
            raise Unsafe(f"speed {v:.4f} left the corridor at t={t:.3f}", t, "velocity")
        if len(radii):
            d = np.hypot(centers[:, 0] - z[2], centers[:, 1] - z[3])
            if np.any(d < radii):
                raise Unsafe(f"obstacle contact at t={t:.3f}", t, "obstacle")

    return monitor


def unsafe_samples(log: TrajectoryLog, scenario: Scenario) -> np.ndarray:
    """Indices of logged samples inside the unsafe set."""
    v = log.states[:, 1]
    v_lo, v_hi = scenario.velocity_corridor
    bad = (v < v_lo) | (v > v_hi)
    if scenario.obstacles:
        pos = log.states[:, 2:4]
        dist = np.linalg.norm(pos[:, None, :] - scenario.centers[None], axis=2)
        radii = np.array([o.radius for o in scenario.obstacles]) + scenario.safety_margin
        bad |= np.any(dist < radii[None, :], axis=1)
    return np.where(bad)[0]


# ---------------------------------------------------------------------------
# outer loop


def _shrunk_config(cfg: SynthConfig, plant: Plant, model: LocalModel, bounds: LipschitzBounds, attempts: int = 4):
    """Halve the piece length until the convergence condition holds (at most ``attempts`` times)."""
    current = cfg
    for _ in range(attempts + 1):
        p = ProxyParams.from_model(model)
        r = step_radius(p, current.dt, current.k, current.m)
        budget = perturbation_budget(model, bounds, current.dt, current.eps, current.m, r, current.l_d, current.c4_over_c3)
        if convergence_condition(budget, p, 0.0, r, current.eps):
            while round(current.dt / plant.h) * plant.h - current.dt > 1e-12 or current.dt / plant.h % 1 > 1e-9:
                plant.h /= 2.0
            return current
        current = replace(current, dt=current.dt / 2.0)
    return None


def gain_consistent(trusted: LocalModel, candidate: LocalModel, bounds: LipschitzBounds, tol: float) -> bool:
    """Whether the identified input matrices respect the known Lipschitz bound ``l_g``.

    A learning cycle that straddles a jump in the drift (a terrain change)
    corrupts the finite differences and shows up as a gain jump far larger
    than ``l_g`` times the distance between the anchors. ``tol`` absorbs
    finite-difference error and input nonlinearity of the true plant.
    """
    dist = float(np.linalg.norm(candidate.anchor.full() - trusted.anchor.full()))
    jump = float(np.linalg.norm(candidate.input_matrix - trusted.input_matrix, 2))
    return jump <= bounds.l_g * dist + tol


def _learning_input(trusted: LocalModel | None, v: float, strategy: StrategyConfig, eps: float) -> np.ndarray:
    """Base input of an extra learning cycle: push speed up when slow, coast otherwise."""
    m = 2 if trusted is None else trusted.anchor.m
    if trusted is None or v >= strategy.v_ref:
        return np.zeros(m)
    u = np.linalg.pinv(trusted.input_matrix) @ np.eye(m)[1]
    return (1.0 - eps) * u / max(np.linalg.norm(u), 1e-300)


class _Learner:
    """Identification with gain-consistency screening against the last trusted model."""

    def __init__(self, plant: Plant, cfg: SynthConfig, bounds: LipschitzBounds, strategy: StrategyConfig,
                 attempts: int, gain_tol: float):
        self.plant, self.cfg, self.bounds, self.strategy = plant, cfg, bounds, strategy
        self.attempts, self.gain_tol = attempts, gain_tol
        self.trusted: LocalModel | None = None
        self.relearned = 0

    def cycle(self, u_base) -> LocalModel:
        """One learning cycle at ``u_base``; an unusable gain triggers extra cycles."""
        rec = run_cycle(self.plant, u_base, self.cfg.eps, self.cfg.dt)
        try:
            return identify_local_model(rec, self.cfg.dt, self.bounds)
        except DegenerateGain:
            return self.relearn("DegenerateGain")

    def relearn(self, cause: str, **info) -> LocalModel:
        for attempt in range(self.attempts):
            self.relearned += 1
            self.plant.mark(kind="relearn", cause=cause, **info)
            v = float(self.plant.state.actuated[1])
            rec = run_cycle(self.plant, _learning_input(self.trusted, v, self.strategy, self.cfg.eps), self.cfg.eps, self.cfg.dt)
            try:
                return identify_local_model(rec, self.cfg.dt, self.bounds)
            except DegenerateGain:
                if attempt == self.attempts - 1:
                    raise
                cause = "DegenerateGain"
        raise DegenerateGain("no usable gain after re-learning")

    def accept(self, model: LocalModel) -> LocalModel:
        """Screen ``model``; re-learn up to ``attempts`` times while its gain is inconsistent."""
        for _ in range(self.attempts):
            if self.trusted is None or gain_consistent(self.trusted, model, self.bounds, self.gain_tol):
                break
            model = self.relearn("inconsistent gain")
        self.trusted = model
        return model


def algorithm2(
    plant: Plant,
    scenario: Scenario,
    path: WaypointPath,
    cfg: SynthConfig,
    bounds: LipschitzBounds,
    T: float = 0.1,
    n_tilde: int = 5,
    seed: int = 0,
    strategy: StrategyConfig = StrategyConfig(),
    n_samples: int = 512,
    max_outer: int = 10_000,
    enforce_convergence: bool = False,
    cloud_every: int = 10,
    relearn_attempts: int = 3,
    gain_tol: float = 5.0,
) -> RunResult:
    """Drive ``plant`` along ``path`` to the goal neighborhood.

    The safety monitor is attached to the plant for the whole run; the run
    ends ``Unsafe`` at the first offending integrator step, ``Stalled`` when
    the position stops moving or an inner step fails, and ``GoalReached``
    once the goal lies within ``r_bar`` of the position.

    Each inner run is capped at ``inner_budget_factor * ceil(d / r)`` cycles;
    hitting the cap re-anchors instead of failing, because a target closer
    than one cycle of motion can be overshot and the waypoint never regresses.

    Every identified model is screened against the last trusted one with
    ``gain_consistent``; failures, and models whose reach sets cannot be
    formed, trigger up to ``relearn_attempts`` extra learning cycles.
    """
    if not path.feasible:
        raise ValueError("refusing to run on an infeasible path")
    plant.monitor = safety_monitor(scenario)
    goal = np.asarray(scenario.goal, dtype=float)
    result = RunResult(Outcome.STALLED, plant.log)
    learner = _Learner(plant, cfg, bounds, strategy, relearn_attempts, gain_tol)
    last_positions: list[np.ndarray] = []
    outcome, cause = Outcome.STALLED, "iteration cap reached"
    warned = False
    try:
        # the local values at the start state come from one coasting learning cycle
        model = learner.accept(learner.cycle(np.zeros(cfg.m)))
        for n_hat in range(max_outer):
            t0 = time.perf_counter()
            for attempt in range(relearn_attempts + 1):
                try:
                    p = ProxyParams.from_model(model)
                    act = grs_actuated(p, T, n_samples, derive_seed(seed, 10, n_hat, attempt))
                    unact = grs_unactuated(
                        model, bounds, T, n_samples=n_samples, rng_seed=derive_seed(seed, 11, n_hat, attempt)
                    )
                    look = lookahead_cloud(
                        model, bounds, T, n_tilde, derive_seed(seed, 12, n_hat, attempt), n_samples,
                        strategy.lookahead_anchors, strategy.remark_tol,
                    )
                    break
                except (DriftDominates, RestViolation) as exc:
                    if attempt == relearn_attempts:
                        raise
                    model = learner.relearn(type(exc).__name__, n_hat=n_hat)
                    learner.trusted = model
            anchor = model.anchor
            r_bar = float(np.max(np.linalg.norm(unact.points - anchor.unactuated, axis=1)))
            r = step_radius(p, cfg.dt, cfg.k, cfg.m)
            if np.linalg.norm(anchor.unactuated - goal) <= r_bar:
                result.outer.append(
                    OuterRecord(
                        n_hat, anchor.full().tolist(), anchor.actuated.tolist(), r, r_bar, "Goal",
                        time.perf_counter() - t0,
                    )
                )
                outcome, cause = Outcome.GOAL_REACHED, None
                break
            target, rule = choose_target(act, look, path, anchor, scenario.velocity_corridor, model, strategy)
            if n_hat % cloud_every == 0:
                result.clouds.append({"n_hat": n_hat, "unactuated": unact.to_json(), "lookahead": look.to_json()})
            run_cfg = replace(cfg, budget_factor=strategy.inner_budget_factor)
            if enforce_convergence:
                run_cfg = _shrunk_config(run_cfg, plant, model, bounds)
                if run_cfg is None:
                    outcome, cause = Outcome.STALLED, "convergence condition unattainable by shrinking dt"
                    break
            elif not warned:
                budget = perturbation_budget(model, bounds, cfg.dt, cfg.eps, cfg.m, r, cfg.l_d, cfg.c4_over_c3)
                if not convergence_condition(budget, p, 0.0, r, cfg.eps):
                    logger.warning("convergence condition fails at the first anchor; continuing (diagnostic only)")
                warned = True
            plant.mark(kind="target", n_hat=n_hat, rule=rule)
            try:
                inner = algorithm1(plant, model, bounds, target, run_cfg, warn=False)
            except DegenerateGain:
                # an inner cycle straddled a drift jump; its cycles are in the plant log
                model = learner.accept(learner.relearn("DegenerateGain", n_hat=n_hat))
                inner = None
            if inner is not None:
                for c in inner.cycles:
                    result.cycles.append({"n_hat": n_hat, **c.to_json()})
                # an exhausted inner budget only means the target was not reached; re-anchor
                # a zero-input target runs no cycle; one coasting cycle refreshes the model
                model = learner.accept(inner.model if inner.cycles else learner.cycle(np.zeros(cfg.m)))
            result.outer.append(
                OuterRecord(
                    n_hat, anchor.full().tolist(), np.asarray(target).tolist(), r, r_bar, rule,
                    time.perf_counter() - t0,
                )
            )
            last_positions.append(model.anchor.unactuated.copy())
            if len(last_positions) >= 4:
                moves = [np.linalg.norm(last_positions[-k] - last_positions[-k - 1]) for k in (1, 2, 3)]
                if max(moves) < 1e-4:
                    outcome, cause = Outcome.STALLED, "no progress over three outer iterations"
                    break
    except Unsafe as exc:
        outcome, cause = Outcome.UNSAFE, str(exc)
    except ReachPCError as exc:
        outcome, cause = Outcome.STALLED, f"{type(exc).__name__}: {exc}"
    result.outcome = outcome
    result.cause = cause
    result.log = plant.log
    result.relearned = learner.relearned
    return result
