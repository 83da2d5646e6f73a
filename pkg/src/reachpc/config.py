"""Run configuration: YAML parsing, validation, serialization and scenario assembly.

Every key is checked against the schema below; errors raise ``ConfigError``
naming the dotted key. Obstacles may be listed explicitly or drawn from a
seeded random layout.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .core import LipschitzBounds
from .errors import ConfigError
from .planner import Obstacle, Scenario
from .plant import BicycleParams, TerrainBand, TerrainMap
from .rpc import StrategyConfig
from .seeding import stream
from .synth import SynthConfig

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "RPC_OUTPUT_DIR"
ENV_SEED = "RPC_SEED"

# random stream keys
OBSTACLE_STREAM = 1


@dataclass(frozen=True)
class SynthSection:
    dt: float = 0.015
    eps: float = 0.1
    k: int = 5
    l_d: float | None = None
    c4_over_c3: float = 1.0
    budget_factor: int = 10


@dataclass(frozen=True)
class LipschitzSection:
    l_f: float = 0.0
    l_g: float = 3.0
    neighborhood_radius: float = 0.5


@dataclass(frozen=True)
class PlantSection:
    l_r: float = 0.35
    mu: float = 0.9
    g: float = 9.81
    wheelbase: float = 2.0
    a_max: float = 6.5
    h: float = 1e-3


@dataclass(frozen=True)
class BandSection:
    x_min: float
    x_max: float
    r_c: float
    name: str = ""


@dataclass(frozen=True)
class TerrainSection:
    default_rc: float = 0.0
    bands: tuple[BandSection, ...] = ()


@dataclass(frozen=True)
class ObstacleSection:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class RandomObstacleSection:
    count: int = 3
    x_range: tuple[float, float] = (6.0, 30.0)
    y_range: tuple[float, float] = (-0.6, 0.6)
    radius_range: tuple[float, float] = (0.8, 1.5)
    min_spacing: float = 6.0


@dataclass(frozen=True)
class ScenarioSection:
    start: tuple[float, float] = (0.0, 0.0)
    goal: tuple[float, float] = (36.0, 0.0)
    theta0: float = 0.0
    v0: float = 2.5
    velocity_corridor: tuple[float, float] = (2.2, 2.8)
    clearance: float = 1.0
    n_waypoints: int = 60
    front_offset: float | None = None
    safety_margin: float = 0.0
    terrain: TerrainSection = field(default_factory=TerrainSection)
    obstacles: tuple[ObstacleSection, ...] = ()
    random_obstacles: RandomObstacleSection | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: str = "runs/default"
    horizon: float = 0.1
    n_tilde: int = 5
    n_samples: int = 512
    max_outer: int = 10_000
    enforce_convergence: bool = False
    synth: SynthSection = field(default_factory=SynthSection)
    lipschitz: LipschitzSection = field(default_factory=LipschitzSection)
    plant: PlantSection = field(default_factory=PlantSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    # --- derived objects -------------------------------------------------

    def synth_config(self) -> SynthConfig:
        s = self.synth
        return SynthConfig(s.dt, s.eps, s.k, 2, s.l_d, s.c4_over_c3, s.budget_factor)

    def bounds(self) -> LipschitzBounds:
        lb = self.lipschitz
        return LipschitzBounds(lb.l_f, lb.l_g, lb.neighborhood_radius)

    def bicycle(self) -> BicycleParams:
        p = self.plant
        return BicycleParams(p.l_r, p.mu, p.g, p.wheelbase, p.a_max)

    def terrain(self) -> TerrainMap:
        t = self.scenario.terrain
        return TerrainMap(tuple(TerrainBand(b.x_min, b.x_max, b.r_c, b.name) for b in t.bands), t.default_rc)

    def obstacles(self) -> tuple[Obstacle, ...]:
        sc = self.scenario
        listed = [Obstacle(o.center, o.radius) for o in sc.obstacles]
        if sc.random_obstacles is not None:
            listed += random_obstacles(sc.random_obstacles, sc.start, sc.goal, sc.clearance, self.seed)
        return tuple(listed)

    def build_scenario(self) -> Scenario:
        sc = self.scenario
        offset = sc.front_offset if sc.front_offset is not None else self.plant.wheelbase / 2.0
        return Scenario(
            obstacles=self.obstacles(),
            clearance=sc.clearance,
            n_waypoints=sc.n_waypoints,
            start=sc.start,
            goal=sc.goal,
            velocity_corridor=sc.velocity_corridor,
            terrain=self.terrain(),
            front_offset=offset,
            seed=self.seed,
            v0=sc.v0,
            safety_margin=sc.safety_margin,
        )

    def initial_state(self) -> np.ndarray:
        sc = self.scenario
        return np.array([sc.theta0, sc.v0, sc.start[0], sc.start[1]], dtype=float)


def random_obstacles(
    layout: RandomObstacleSection, start, goal, clearance: float, seed: int, max_tries: int = 10_000
) -> list[Obstacle]:
    """Seeded obstacle layout with centers at least ``min_spacing`` apart.

    Endpoints always stay outside the inflated discs.
    """
    rng = stream(seed, OBSTACLE_STREAM)
    out: list[Obstacle] = []
    endpoints = np.array([start, goal], dtype=float)
    for _ in range(max_tries):
        if len(out) == layout.count:
            return out
        c = np.array([rng.uniform(*layout.x_range), rng.uniform(*layout.y_range)])
        r = float(rng.uniform(*layout.radius_range))
        if np.any(np.linalg.norm(endpoints - c, axis=1) <= r + clearance):
            continue
        if any(np.linalg.norm(c - np.array(o.center)) < layout.min_spacing for o in out):
            continue
        out.append(Obstacle((float(c[0]), float(c[1])), r))
    raise ConfigError("scenario.random_obstacles", f"could not place {layout.count} obstacles")


# ---------------------------------------------------------------------------
# parsing


def _check_keys(data: dict, cls, key: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(key or "<root>", "expected a mapping")
    allowed = {f.name for f in fields(cls)}
    for name in data:
        if name not in allowed:
            raise ConfigError(f"{key}.{name}" if key else str(name), "unknown key")


def _number(value, key: str, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    if positive and not value > 0:
        raise ConfigError(key, f"must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(key, f"must be non-negative, got {value}")
    return int(value) if integer else float(value)


def _pair(value, key: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(key, "expected a pair [a, b]")
    return (_number(value[0], f"{key}[0]"), _number(value[1], f"{key}[1]"))


def _range(value, key: str) -> tuple[float, float]:
    lo, hi = _pair(value, key)
    if lo > hi:
        raise ConfigError(key, "range must satisfy lo <= hi")
    return lo, hi


def _section(data, cls, key: str, converters: dict):
    """Build dataclass ``cls`` from ``data`` with per-field converters in ``converters``."""
    data = {} if data is None else data
    _check_keys(data, cls, key)
    kwargs = {}
    for name, convert in converters.items():
        if name in data:
            kwargs[name] = convert(data[name], f"{key}.{name}" if key else name)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(key or "<root>", str(exc)) from None


def _pos(v, k):
    return _number(v, k, positive=True)


def _nonneg(v, k):
    return _number(v, k, nonneg=True)


def _posint(v, k):
    return _number(v, k, positive=True, integer=True)


def _optional(conv):
    return lambda v, k: None if v is None else conv(v, k)


def _bool(v, k):
    if not isinstance(v, bool):
        raise ConfigError(k, f"expected true/false, got {v!r}")
    return v


def _rc(v, k):
    value = _number(v, k, nonneg=True)
    if value >= 1:
        raise ConfigError(k, "must lie in [0, 1)")
    return value


def _band(v, k):
    band = _section(
        v, BandSection, k, {"x_min": _number, "x_max": _number, "r_c": _rc, "name": lambda s, _: str(s)}
    )
    if band.x_max < band.x_min:
        raise ConfigError(k, "x_max < x_min")
    return band


def _list(conv):
    def parse(v, k):
        if not isinstance(v, list):
            raise ConfigError(k, "expected a list")
        return tuple(conv(item, f"{k}[{i}]") for i, item in enumerate(v))

    return parse


def _terrain(v, k):
    return _section(v, TerrainSection, k, {"default_rc": _rc, "bands": _list(_band)})


def _obstacle(v, k):
    return _section(v, ObstacleSection, k, {"center": _pair, "radius": _pos})


def _random_obstacles(v, k):
    if v is None:
        return None
    return _section(
        v,
        RandomObstacleSection,
        k,
        {
            "count": _posint,
            "x_range": _range,
            "y_range": _range,
            "radius_range": lambda x, kk: _positive_range(x, kk),
            "min_spacing": _nonneg,
        },
    )


def _positive_range(v, k):
    lo, hi = _range(v, k)
    if not lo > 0:
        raise ConfigError(k, "radii must be positive")
    return lo, hi


def _corridor(v, k):
    lo, hi = _pair(v, k)
    if not lo < hi:
        raise ConfigError(k, "corridor must satisfy v_lo < v_hi")
    return lo, hi


def _clearance(v, k):
    value = _number(v, k)
    if value < 0:
        raise ConfigError(k, f"must be non-negative, got {value}")
    return value


def _scenario(v, k):
    return _section(
        v,
        ScenarioSection,
        k,
        {
            "start": _pair,
            "goal": _pair,
            "theta0": _number,
            "v0": _pos,
            "velocity_corridor": _corridor,
            "clearance": _clearance,
            "n_waypoints": _posint,
            "front_offset": _optional(_nonneg),
            "safety_margin": _nonneg,
            "terrain": _terrain,
            "obstacles": _list(_obstacle),
            "random_obstacles": _random_obstacles,
        },
    )


def _synth(v, k):
    return _section(
        v,
        SynthSection,
        k,
        {
            "dt": _pos,
            "eps": _pos,
            "k": _posint,
            "l_d": _optional(_pos),
            "c4_over_c3": _pos,
            "budget_factor": _posint,
        },
    )


def _lipschitz(v, k):
    return _section(v, LipschitzSection, k, {"l_f": _nonneg, "l_g": _nonneg, "neighborhood_radius": _pos})


def _plant(v, k):
    return _section(
        v, PlantSection, k, {"l_r": _pos, "mu": _pos, "g": _pos, "wheelbase": _pos, "a_max": _pos, "h": _pos}
    )


def _strategy(v, k):
    converters = {f.name: (_posint if f.type in ("int",) else _number) for f in fields(StrategyConfig)}
    return _section(v, StrategyConfig, k, converters)


def parse_config(data: dict, env: dict | None = None) -> RunConfig:
    """Validate a raw mapping (as loaded from YAML) into a ``RunConfig``.

    ``env`` (default ``os.environ``) may override ``output_dir`` and ``seed``.
    """
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    data = dict(data)
    if ENV_SEED in env:
        try:
            data["seed"] = int(env[ENV_SEED])
        except ValueError:
            raise ConfigError("seed", f"{ENV_SEED}={env[ENV_SEED]!r} is not an integer") from None
    if ENV_OUTPUT_DIR in env:
        data["output_dir"] = env[ENV_OUTPUT_DIR]
    if "seed" not in data:
        raise ConfigError("seed", "missing (a seed is mandatory)")
    cfg = _section(
        data,
        RunConfig,
        "",
        {
            "seed": lambda v, k: _number(v, k, nonneg=True, integer=True),
            "output_dir": lambda v, k: str(v),
            "horizon": _pos,
            "n_tilde": _posint,
            "n_samples": _posint,
            "max_outer": _posint,
            "enforce_convergence": _bool,
            "synth": _synth,
            "lipschitz": _lipschitz,
            "plant": _plant,
            "scenario": _scenario,
            "strategy": _strategy,
        },
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Cross-field checks that single-key converters cannot do."""
    sc = cfg.scenario
    if not 0 < cfg.synth.eps < 1:
        raise ConfigError("synth.eps", "must lie in (0, 1)")
    steps = cfg.synth.dt / cfg.plant.h
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError("plant.h", f"must divide synth.dt={cfg.synth.dt}")
    if sc.n_waypoints < 3:
        raise ConfigError("scenario.n_waypoints", "must be >= 3")
    lo, hi = sc.velocity_corridor
    if not lo <= sc.v0 <= hi:
        raise ConfigError("scenario.v0", f"{sc.v0} lies outside the velocity corridor [{lo}, {hi}]")
    obstacles = cfg.obstacles()
    for label, point in (("start", sc.start), ("goal", sc.goal)):
        for i, o in enumerate(obstacles):
            if math.dist(point, o.center) <= o.radius + sc.clearance:
                raise ConfigError(f"scenario.{label}", f"lies inside inflated obstacle {i}")
    if obstacles:
        seg = math.dist(sc.start, sc.goal) / (sc.n_waypoints - 1)
        r_min = min(o.radius for o in obstacles)
        if seg > r_min:
            logger.warning(
                "waypoint spacing %.3g exceeds the smallest obstacle radius %.3g; thin obstacles may be crossed",
                seg,
                r_min,
            )


def load_config(path, env: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("<file>", f"{path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"YAML parse error: {exc}") from None
    return parse_config(data if data is not None else {}, env)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    return _plain(asdict(cfg))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
