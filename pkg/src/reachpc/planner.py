"""Offline waypoint path: shortest (squared-length) path whose front points clear obstacles.

The problem is

    min_W  sum_i ||w_{i+1} - w_i||^2
    s.t.   ||p_i - c_k|| >= r_k + clearance   for all i >= 1, k

where ``p_i = w_i + offset * (w_i - w_{i-1}) / ||w_i - w_{i-1}||`` is the
vehicle front point. It is solved by sequential quadratic programming with a
damped-BFGS Lagrangian Hessian, a step-length cap and an l1 merit line search.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSegment
from .plant import TerrainBand, TerrainMap

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class Scenario:
    """Geometry, terrain and speed limits of one run."""

    obstacles: tuple[Obstacle, ...]
    clearance: float
    n_waypoints: int
    start: tuple[float, float]
    goal: tuple[float, float]
    velocity_corridor: tuple[float, float] = (2.2, 2.8)
    terrain: TerrainMap = field(default_factory=TerrainMap)
    front_offset: float = 1.0
    seed: int = 0
    v0: float = 2.5
    safety_margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        object.__setattr__(self, "velocity_corridor", tuple(float(v) for v in self.velocity_corridor))
        if self.clearance < 0:
            raise ValueError("clearance must be non-negative")
        if self.velocity_corridor[0] >= self.velocity_corridor[1]:
            raise ValueError("velocity corridor must satisfy v_lo < v_hi")
        if self.n_waypoints < 3:
            raise ValueError("n_waypoints must be >= 3")

    @property
    def centers(self) -> np.ndarray:
        return np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def inflated_radii(self) -> np.ndarray:
        return np.array([o.radius + self.clearance for o in self.obstacles], dtype=float)

    def endpoint_conflicts(self) -> list[str]:
        """Names of the endpoints that lie inside an inflated obstacle."""
        bad = []
        for name, point in (("start", self.start), ("goal", self.goal)):
            if self.obstacles and np.any(
                np.linalg.norm(self.centers - np.asarray(point), axis=1) < self.inflated_radii
            ):
                bad.append(name)
        return bad

    def to_json(self) -> dict:
        return {
            "obstacles": [{"center": list(o.center), "radius": o.radius} for o in self.obstacles],
            "clearance": self.clearance,
            "n_waypoints": self.n_waypoints,
            "start": list(self.start),
            "goal": list(self.goal),
            "velocity_corridor": list(self.velocity_corridor),
            "terrain": {
                "default_rc": self.terrain.default_rc,
                "bands": [
                    {"x_min": b.x_min, "x_max": b.x_max, "r_c": b.r_c, "name": b.name} for b in self.terrain.regions
                ],
            },
            "front_offset": self.front_offset,
            "seed": self.seed,
            "v0": self.v0,
            "safety_margin": self.safety_margin,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        terrain = data.get("terrain", {})
        return cls(
            obstacles=tuple(Obstacle(tuple(o["center"]), o["radius"]) for o in data["obstacles"]),
            clearance=data["clearance"],
            n_waypoints=data["n_waypoints"],
            start=tuple(data["start"]),
            goal=tuple(data["goal"]),
            velocity_corridor=tuple(data["velocity_corridor"]),
            terrain=TerrainMap(
                tuple(TerrainBand(**b) for b in terrain.get("bands", [])), terrain.get("default_rc", 0.0)
            ),
            front_offset=data.get("front_offset", 1.0),
            seed=data.get("seed", 0),
            v0=data.get("v0", 2.5),
            safety_margin=data.get("safety_margin", 0.0),
        )


@dataclass
class WaypointPath:
    points: np.ndarray
    feasible: bool
    objective: float
    iterations: int = 0
    max_violation: float = 0.0
    merit_trace: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"points": np.asarray(self.points).tolist(), "feasible": bool(self.feasible), "objective": float(self.objective)}

    @classmethod
    def from_json(cls, data: dict) -> "WaypointPath":
        return cls(np.asarray(data["points"], dtype=float), bool(data["feasible"]), float(data["objective"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def front_point(points, i: int, offset: float) -> np.ndarray:
    """Waypoint ``i`` advanced by ``offset`` along its incoming segment."""
    points = np.asarray(points, dtype=float)
    if i < 1:
        raise ValueError("front point needs an incoming segment (i >= 1)")
    seg = points[i] - points[i - 1]
    length = float(np.linalg.norm(seg))
    if length <= DEGENERATE_TOL:
        raise DegenerateSegment(f"waypoints {i - 1} and {i} coincide")
    return points[i] + offset * seg / length


def front_points(points, offset: float) -> np.ndarray:
    """All front points; waypoint 0 has no incoming segment and stands for itself."""
    points = np.asarray(points, dtype=float)
    seg = np.diff(points, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    if np.any(lengths <= DEGENERATE_TOL):
        raise DegenerateSegment("consecutive waypoints coincide")
    out = points.copy()
    out[1:] += offset * seg / lengths[:, None]
    return out


def path_objective(points) -> float:
    return float(np.sum(np.diff(np.asarray(points, dtype=float), axis=0) ** 2))


def clearance_margins(points, scenario: Scenario) -> np.ndarray:
    """``||p_i - c_k|| - (r_k + clearance)`` for every front point and obstacle, shape ``(N, K)``."""
    fronts = front_points(points, scenario.front_offset)
    if not scenario.obstacles:
        return np.zeros((len(fronts), 0))
    dist = np.linalg.norm(fronts[:, None, :] - scenario.centers[None, :, :], axis=2)
    return dist - scenario.inflated_radii[None, :]


# ---------------------------------------------------------------------------
# SQP internals. Decision vector x stacks interior waypoints 1..N-2.


def _unpack(x, start, goal):
    return np.vstack([start, x.reshape(-1, 2), goal])


def _objective_hessian(n_int: int) -> np.ndarray:
    lap = 2.0 * np.eye(n_int) - np.eye(n_int, k=1) - np.eye(n_int, k=-1)
    return 2.0 * np.kron(lap, np.eye(2))


def _objective_grad(points) -> np.ndarray:
    # d/dw_i of sum ||w_{i+1}-w_i||^2 = 2(2 w_i - w_{i-1} - w_{i+1})
    g = 2.0 * (2.0 * points[1:-1] - points[:-2] - points[2:])
    return g.reshape(-1)


def _constraints(points, scenario: Scenario, lateral: np.ndarray, side: np.ndarray):
    """Constraint values and Jacobian rows for front points 1..N-1.

    Outside an inflated disc the constraint is linearized exactly. Inside it
    the radial normal is replaced by a fixed lateral normal; the halfspace
    ``n^T (p - c) >= R`` implies ``||p - c|| >= R`` for any unit ``n``, so this
    is a conservative choice that also breaks the symmetry of obstacles
    centered on the current path.
    """
    N = len(points)
    n_int = N - 2
    off = scenario.front_offset
    centers, radii = scenario.centers, scenario.inflated_radii
    K = len(radii)
    seg = np.diff(points, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    if np.any(lengths <= DEGENERATE_TOL):
        raise DegenerateSegment("consecutive waypoints coincide")
    dirs = seg / lengths[:, None]
    fronts = points[1:] + off * dirs
    values = np.empty((N - 1) * K)
    rows = np.zeros(((N - 1) * K, 2 * n_int))
    exact = np.empty((N - 1) * K)
    eye = np.eye(2)
    for i in range(1, N):
        u = dirs[i - 1]
        P = off * (eye - np.outer(u, u)) / lengths[i - 1]
        for k in range(K):
            row = (i - 1) * K + k
            rel = fronts[i - 1] - centers[k]
            dist = float(np.linalg.norm(rel))
            exact[row] = dist - radii[k]
            if dist >= radii[k]:
                normal = rel / dist
                values[row] = dist - radii[k]
            else:
                normal = side[k] * lateral
                values[row] = float(normal @ rel) - radii[k]
            # p_i depends on w_i (if interior) and w_{i-1} (if interior)
            if 1 <= i <= n_int:
                rows[row, 2 * (i - 1) : 2 * i] = normal @ (eye + P)
            if 1 <= i - 1 <= n_int:
                rows[row, 2 * (i - 2) : 2 * (i - 1)] = -(normal @ P)
    return values, rows, exact


def _solve_qp(B_chol, q, A, g, tol=1e-12, max_iter=500):
    """min 1/2 d^T B d + q^T d  s.t.  A d + g >= 0, via an active-set method on the dual.

    The dual is ``min_{lam >= 0} 1/2 lam^T M lam + h^T lam`` with
    ``M = A B^-1 A^T`` and ``h = g - A B^-1 q``.
    """
    def Binv(v):
        return np.linalg.solve(B_chol.T, np.linalg.solve(B_chol, v))

    d0 = -Binv(q)
    if A.shape[0] == 0:
        return d0, np.zeros(0)
    BinvAT = Binv(A.T)
    M = A @ BinvAT
    h = g + A @ d0
    p = len(h)
    lam = np.zeros(p)
    free = np.zeros(p, dtype=bool)
    for _ in range(max_iter):
        w = M @ lam + h
        candidates = np.where(~free & (w < -tol))[0]
        if candidates.size == 0:
            break
        free[candidates[np.argmin(w[candidates])]] = True
        while True:
            idx = np.where(free)[0]
            z = np.zeros(p)
            z[idx] = np.linalg.lstsq(M[np.ix_(idx, idx)], -h[idx], rcond=None)[0]
            if np.all(z[idx] > 0):
                lam = z
                break
            # step from lam toward z until the first free multiplier hits zero
            neg = idx[z[idx] <= 0]
            ratios = lam[neg] / np.maximum(lam[neg] - z[neg], 1e-300)
            alpha = float(np.min(ratios))
            lam = lam + alpha * (z - lam)
            free &= lam > 1e-14
            lam[~free] = 0.0
            if not np.any(free):
                break
    d = d0 + BinvAT @ lam
    return d, lam


def _lateral_frame(scenario: Scenario):
    start, goal = np.asarray(scenario.start), np.asarray(scenario.goal)
    axis = goal - start
    axis = axis / np.linalg.norm(axis)
    lateral = np.array([-axis[1], axis[0]])
    side = []
    for obs in scenario.obstacles:
        offset = float(lateral @ (np.asarray(obs.center) - start))
        # pass on the side away from the obstacle center; ties go left
        side.append(-1.0 if offset > 0 else 1.0)
    return lateral, np.asarray(side)


def optimize_path(
    scenario: Scenario,
    max_iter: int = 200,
    tol_violation: float = 1e-6,
    tol_step: float = 1e-8,
    max_step: float | None = None,
) -> WaypointPath:
    """Solve the waypoint problem starting from the straight start-goal line."""
    N = scenario.n_waypoints
    start = np.asarray(scenario.start, dtype=float)
    goal = np.asarray(scenario.goal, dtype=float)
    straight = start + np.linspace(0.0, 1.0, N)[:, None] * (goal - start)
    if scenario.endpoint_conflicts():
        return WaypointPath(straight, False, path_objective(straight), 0, float("inf"))
    if not scenario.obstacles:
        return WaypointPath(straight, True, path_objective(straight), 0, 0.0)

    n_int = N - 2
    H = _objective_hessian(n_int)
    B = H.copy()
    lateral, side = _lateral_frame(scenario)
    if max_step is None:
        max_step = float(np.max(scenario.inflated_radii))
    x = straight[1:-1].reshape(-1).copy()
    rho = 1.0

    def merit(xv, penalty):
        pts = _unpack(xv, start, goal)
        try:
            viol = np.sum(np.maximum(0.0, -clearance_margins(pts, scenario)[1:]))
        except DegenerateSegment:
            return np.inf
        return path_objective(pts) + penalty * viol

    iterations = 0
    converged = False
    merit_trace: list[tuple[float, float]] = []
    reset = False
    for it in range(1, max_iter + 1):
        iterations = it
        pts = _unpack(x, start, goal)
        grad = _objective_grad(pts)
        values, A, exact = _constraints(pts, scenario, lateral, side)
        violation = float(np.max(np.maximum(0.0, -exact)))
        try:
            L = np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            B = H.copy()
            L = np.linalg.cholesky(B)
        d, lam = _solve_qp(L, grad, A, values)
        step_norm = float(np.linalg.norm(d))
        if violation <= tol_violation and step_norm <= tol_step:
            converged = True
            break
        # cap the largest waypoint move
        largest = float(np.max(np.linalg.norm(d.reshape(-1, 2), axis=1)))
        if largest > max_step:
            d *= max_step / largest
        rho = max(rho, 1.5 * float(np.max(lam, initial=0.0)) + 1e-3)
        phi0 = merit(x, rho)
        slope = float(grad @ d) - rho * float(np.sum(np.maximum(0.0, -exact)))
        alpha = 1.0
        accepted = False
        for _ in range(40):
            x_try = x + alpha * d
            if merit(x_try, rho) <= phi0 + 1e-4 * alpha * min(slope, 0.0):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            logger.debug("line search failed at iteration %d", it)
            if not reset:
                # a stale quasi-Newton matrix can yield non-descent steps; retry from the exact Hessian
                B, reset = H.copy(), True
                continue
            if violation <= tol_violation:
                converged = step_norm <= 1e-6
            break
        reset = False
        x_new = x + alpha * d
        merit_trace.append((phi0, merit(x_new, rho)))
        # damped BFGS update of the Lagrangian Hessian
        pts_new = _unpack(x_new, start, goal)
        _, A_new, _ = _constraints(pts_new, scenario, lateral, side)
        s = x_new - x
        y = (_objective_grad(pts_new) - A_new.T @ lam) - (grad - A.T @ lam)
        Bs = B @ s
        sBs = float(s @ Bs)
        if sBs > 1e-16:
            sy = float(s @ y)
            if sy < 0.2 * sBs:
                theta = 0.8 * sBs / (sBs - sy)
                y = theta * y + (1.0 - theta) * Bs
                sy = float(s @ y)
            B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs
        x = x_new

    pts = _unpack(x, start, goal)
    margins = clearance_margins(pts, scenario)[1:]
    max_violation = float(np.max(np.maximum(0.0, -margins)))
    feasible = max_violation <= tol_violation
    if not converged:
        logger.info("planner stopped after %d iterations (violation %.3g)", iterations, max_violation)
    return WaypointPath(pts, feasible, path_objective(pts), iterations, max_violation, merit_trace)
