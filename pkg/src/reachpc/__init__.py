"""Reachability-based predictive control for control-affine systems with unknown dynamics.

Local models are learned from short input perturbations, guaranteed reachable
sets are underapproximated from Lipschitz bounds, and an outer loop picks
targets inside those sets while an inner loop tracks them.
"""

from .core import LipschitzBounds, LocalModel, PartitionedState, partition
from .errors import ReachPCError
from .planner import Obstacle, Scenario, WaypointPath, optimize_path
from .plant import Plant, TrajectoryLog, bicycle_plant
from .reach import ReachCloud, grs_actuated, grs_unactuated
from .rpc import Outcome, RunResult, algorithm2
from .synth import SynthConfig, algorithm1

__version__ = "0.1.0"

__all__ = [
    "LipschitzBounds",
    "LocalModel",
    "Obstacle",
    "Outcome",
    "PartitionedState",
    "Plant",
    "ReachCloud",
    "ReachPCError",
    "RunResult",
    "Scenario",
    "SynthConfig",
    "TrajectoryLog",
    "WaypointPath",
    "algorithm1",
    "algorithm2",
    "bicycle_plant",
    "grs_actuated",
    "grs_unactuated",
    "optimize_path",
    "partition",
]
