"""Ground-truth vehicle simulation: kinematic bicycle, terrain, RK4 integration.

The controller never reads anything from here except measured states; the
dynamics below are the "unknown" system it learns online.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .core import PartitionedState, partition
from .errors import StepMismatch

Vector = np.ndarray
RHS = Callable[[Vector, Vector], Vector]

BICYCLE_COLUMNS = ("t", "theta", "v", "x", "y", "u1", "u2")


@dataclass(frozen=True)
class BicycleParams:
    l_r: float = 1.0
    mu: float = 0.9
    g: float = 9.81
    wheelbase: float = 2.0
    a_max: float = 3.0

    def __post_init__(self):
        for name in ("l_r", "mu", "g", "wheelbase", "a_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TerrainBand:
    """Axis-aligned band ``x_min <= x <= x_max`` with a rolling-resistance coefficient."""

    x_min: float
    x_max: float
    r_c: float
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.r_c < 1.0:
            raise ValueError(f"r_c must lie in [0, 1), got {self.r_c}")
        if self.x_max < self.x_min:
            raise ValueError("band has x_max < x_min")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max


@dataclass(frozen=True)
class TerrainMap:
    regions: tuple[TerrainBand, ...] = ()
    default_rc: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not 0.0 <= self.default_rc < 1.0:
            raise ValueError("default_rc must lie in [0, 1)")


def terrain_rc(terrain: TerrainMap, position) -> float:
    """Rolling-resistance coefficient at ``position``; first matching band wins."""
    x, y = float(position[0]), float(position[1])
    for band in terrain.regions:
        if band.contains(x, y):
            return band.r_c
    return terrain.default_rc


def _as_full(state) -> np.ndarray:
    if isinstance(state, PartitionedState):
        return state.full()
    return np.asarray(state, dtype=float)


def bicycle_rhs(state, u, params: BicycleParams, r_c: float) -> np.ndarray:
    """Kinematic bicycle in canonical order ``[theta, v, x, y]``.

    ``u = (u1, u2)``: ``u1`` is scaled acceleration (multiplied by ``a_max``),
    ``u2`` is the steering angle in radians.
    """
    theta, v = _as_full(state)[:2]
    u1, u2 = float(u[0]), float(u[1])
    return np.array(
        [
            v / params.l_r * math.tan(u2),
            min(params.a_max * u1, params.mu * params.g) - r_c * params.g,
            v * math.cos(theta),
            v * math.sin(theta),
        ]
    )


def reduced_rhs(state, u, params: BicycleParams) -> np.ndarray:
    """Small-angle, control-affine reduction of the bicycle (no terrain term)."""
    theta, v = _as_full(state)[:2]
    u1, u2 = float(u[0]), float(u[1])
    return np.array([v / params.l_r * u2, params.a_max * u1, v, v * theta])


@dataclass
class TrajectoryLog:
    """Time-ordered samples. Row ``k`` holds the state at ``t[k]`` and the input
    that was active during the step ending at ``t[k]`` (zeros for the first row)."""

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    m: int
    events: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.t.size

    def samples(self) -> Iterator[tuple[float, PartitionedState, np.ndarray]]:
        for k in range(self.t.size):
            yield float(self.t[k]), partition(self.states[k], self.m), self.inputs[k]

    @property
    def final_state(self) -> PartitionedState:
        return partition(self.states[-1], self.m)

    def to_csv(self, path, columns: Sequence[str] | None = None) -> None:
        n, m_in = self.states.shape[1], self.inputs.shape[1]
        if columns is None:
            if n == 4 and m_in == 2:
                columns = BICYCLE_COLUMNS
            else:
                columns = ["t"] + [f"x{i}" for i in range(n)] + [f"u{i + 1}" for i in range(m_in)]
        rows = np.column_stack([self.t, self.states, self.inputs])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([f"{value:.9g}" for value in row])

    @classmethod
    def from_csv(cls, path, m: int = 2, n_inputs: int = 2) -> "TrajectoryLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            data = np.array([[float(v) for v in row] for row in reader], dtype=float)
        if data.size == 0:
            width = 1 + 4 + n_inputs
            data = np.empty((0, width))
        return cls(data[:, 0], data[:, 1:-n_inputs], data[:, -n_inputs:], m)


def _rk4_step(rhs: RHS, z: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(z, u)
    k2 = rhs(z + 0.5 * h * k1, u)
    k3 = rhs(z + 0.5 * h * k2, u)
    k4 = rhs(z + h * k3, u)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps_for(duration: float, h: float) -> int:
    steps = int(round(duration / h))
    if steps < 1 or abs(steps * h - duration) > 1e-9:
        raise StepMismatch(f"step {h} does not tile a piece of length {duration}")
    return steps


def integrate(
    rhs: RHS,
    state,
    pieces: Iterable[tuple[float, Sequence[float]]],
    h: float = 1e-3,
    t0: float = 0.0,
    m: int | None = None,
    monitor: Callable[[float, np.ndarray], None] | None = None,
) -> TrajectoryLog:
    """Fixed-step RK4 under a piecewise-constant control.

    ``pieces`` is a sequence of ``(duration, u)``. ``monitor(t, z)`` is called
    after every step and may raise to halt; the log then ends at that step.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    pieces = [(float(d), np.asarray(u, dtype=float)) for d, u in pieces]
    plan = [(_steps_for(d, h), u) for d, u in pieces]
    if isinstance(state, PartitionedState):
        m = state.m
    z = _as_full(state).astype(float).copy()
    if m is None:
        m = z.size
    n_inputs = pieces[0][1].size if pieces else m
    total = sum(s for s, _ in plan)
    ts = np.empty(total + 1)
    zs = np.empty((total + 1, z.size))
    us = np.zeros((total + 1, n_inputs))
    ts[0], zs[0] = t0, z
    k = 0
    t_base = t0
    try:
        for steps, u in plan:
            for i in range(1, steps + 1):
                z = _rk4_step(rhs, z, u, h)
                k += 1
                ts[k] = t_base + i * h
                zs[k] = z
                us[k] = u
                if monitor is not None:
                    monitor(ts[k], z)
            t_base += steps * h
    except Exception as exc:
        # keep the rows integrated before the halt available to the caller
        exc.partial_log = TrajectoryLog(ts[: k + 1].copy(), zs[: k + 1].copy(), us[: k + 1].copy(), m)
        raise
    return TrajectoryLog(ts, zs, us, m)


class Plant:
    """Stateful simulation handle: applies constant inputs and accumulates a log.

    ``monitor(t, z)`` runs after every integrator step and may raise
    :class:`~reachpc.errors.Unsafe`; the rows up to the offending step stay in
    the log.
    """

    def __init__(self, rhs: RHS, x0, m: int, h: float = 1e-3, t0: float = 0.0, monitor=None):
        self.rhs = rhs
        self.m = m
        self.h = h
        self.monitor = monitor
        z0 = _as_full(x0).astype(float)
        self._t = [np.array([t0])]
        self._z = [z0[None, :]]
        self._u: list[np.ndarray] = []
        self._n_inputs: int | None = None
        self.events: list[dict] = []

    @property
    def t(self) -> float:
        return float(self._t[-1][-1])

    @property
    def full(self) -> np.ndarray:
        return self._z[-1][-1].copy()

    @property
    def state(self) -> PartitionedState:
        return partition(self.full, self.m)

    def mark(self, **event) -> None:
        self.events.append({"t": self.t, **event})

    def apply(self, u, duration: float) -> PartitionedState:
        u = np.asarray(u, dtype=float)
        if self._n_inputs is None:
            self._n_inputs = u.size
            self._u.append(np.zeros((1, u.size)))
        try:
            seg = integrate(self.rhs, self.full, [(duration, u)], self.h, self.t, self.m, self.monitor)
        except Exception as exc:
            partial = getattr(exc, "partial_log", None)
            if partial is not None:
                self._append(partial)
            raise
        self._append(seg)
        return self.state

    def _append(self, seg: TrajectoryLog) -> None:
        if len(seg) > 1:
            self._t.append(seg.t[1:])
            self._z.append(seg.states[1:])
            self._u.append(seg.inputs[1:])

    @property
    def log(self) -> TrajectoryLog:
        n_inputs = self._n_inputs or self.m
        inputs = np.concatenate(self._u) if self._u else np.zeros((1, n_inputs))
        return TrajectoryLog(
            np.concatenate(self._t), np.concatenate(self._z), inputs, self.m, list(self.events)
        )


def bicycle_plant(
    params: BicycleParams,
    terrain: TerrainMap,
    x0,
    h: float = 1e-3,
    monitor=None,
) -> Plant:
    """Plant handle for the bicycle with position-dependent rolling resistance."""
    l_r, a_max, mu_g, g = params.l_r, params.a_max, params.mu * params.g, params.g
    regions = [(band.x_min, band.x_max, band.r_c) for band in terrain.regions]
    default = terrain.default_rc

    def rhs(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        theta, v, x = z[0], z[1], z[2]
        r_c = default
        for x_min, x_max, rc in regions:
            if x_min <= x <= x_max:
                r_c = rc
                break
        return np.array(
            [
                v / l_r * math.tan(u[1]),
                min(a_max * u[0], mu_g) - r_c * g,
                v * math.cos(theta),
                v * math.sin(theta),
            ]
        )

    return Plant(rhs, x0, m=2, h=h, monitor=monitor)


def affine_plant(drift: Callable[[np.ndarray], np.ndarray], input_matrix: Callable[[np.ndarray], np.ndarray], x0, m: int, h: float = 1e-3) -> Plant:
    """Plant handle for a generic control-affine system ``x' = f(x) + G(x) u``.

    ``drift`` and ``input_matrix`` receive the full state; ``input_matrix`` must
    return an ``n x m`` matrix (unactuated rows may be zero).
    """

    def rhs(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        return drift(z) + input_matrix(z) @ u

    return Plant(rhs, x0, m=m, h=h)
