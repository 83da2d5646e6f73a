"""Local model identification from one learning cycle.

A cycle applies ``m + 1`` constant inputs for ``dt`` each: the base input and
the base perturbed by ``+-eps`` along each coordinate axis. Finite differences
of the measured actuated states then give the drift and input matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LipschitzBounds, LocalModel, PartitionedState, partition
from .errors import DegenerateGain, InadmissibleBase, SingularExcitation

ADMISSIBLE_TOL = 1e-12


def cycle_inputs(u_base, eps: float, m: int) -> np.ndarray:
    """Return the ``(m + 1, m)`` array of cycle inputs.

    Row 0 is ``u_base``; row ``j`` adds ``+eps`` on axis ``j - 1`` unless that
    leaves the unit ball, in which case the sign flips.
    """
    u_base = np.asarray(u_base, dtype=float).reshape(-1)
    if u_base.size != m:
        raise ValueError(f"base input has dimension {u_base.size}, expected {m}")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if np.linalg.norm(u_base) > 1.0 - eps + ADMISSIBLE_TOL:
        raise InadmissibleBase(f"||u_base|| = {np.linalg.norm(u_base):.6g} exceeds 1 - eps")
    inputs = np.tile(u_base, (m + 1, 1))
    for j in range(m):
        candidate = u_base.copy()
        candidate[j] += eps
        if np.linalg.norm(candidate) > 1.0 + ADMISSIBLE_TOL:
            candidate[j] -= 2.0 * eps
        inputs[j + 1] = candidate
    return inputs


@dataclass(frozen=True, eq=False)
class CycleRecord:
    """Inputs and piece-boundary states of one learning cycle.

    ``states`` holds ``m + 2`` full states; ``states[m + 1]`` is the state at
    the end of the cycle.
    """

    tau_n: float
    inputs: np.ndarray
    states: np.ndarray
    m: int

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float, ndmin=2)
        states = np.array(self.states, dtype=float, ndmin=2)
        if inputs.shape != (self.m + 1, self.m) or states.shape[0] != self.m + 2:
            raise ValueError("cycle record needs m + 1 inputs and m + 2 states")
        inputs.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "states", states)

    @property
    def actuated(self) -> np.ndarray:
        return self.states[:, : self.m]

    @property
    def unactuated(self) -> np.ndarray:
        return self.states[:, self.m :]

    @property
    def perturbations(self) -> np.ndarray:
        """Row ``j`` is ``inputs[j + 1] - inputs[0]``."""
        return self.inputs[1:] - self.inputs[0]

    @property
    def signs(self) -> np.ndarray:
        return np.sign(np.diag(self.perturbations))

    @property
    def end_state(self) -> PartitionedState:
        return partition(self.states[-1], self.m)


def run_cycle(plant, u_base, eps: float, dt: float) -> CycleRecord:
    """Drive ``plant`` through one learning cycle and record it."""
    m = plant.m
    inputs = cycle_inputs(u_base, eps, m)
    tau = plant.t
    states = [plant.full]
    for u in inputs:
        plant.apply(u, dt)
        states.append(plant.full)
    return CycleRecord(tau, inputs, np.array(states), m)


def estimate_velocities(rec: CycleRecord, dt: float) -> np.ndarray:
    """Forward differences of the actuated states, one row per piece."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return np.diff(rec.actuated, axis=0) / dt


def estimate_unactuated_drift(rec: CycleRecord, dt: float, piece: int = -1) -> np.ndarray:
    """Forward difference of the unactuated states over one piece (default: the last)."""
    return np.diff(rec.unactuated, axis=0)[piece] / dt


def identify_local_model(
    rec: CycleRecord,
    dt: float,
    bounds: LipschitzBounds,
    unactuated_drift_est=None,
) -> LocalModel:
    """Solve ``v_j - v_0 = G (u_j - u_0)`` for ``G``, then ``f = v_0 - G u_0``.

    The returned model is anchored at the end-of-cycle state.
    """
    m = rec.m
    velocities = estimate_velocities(rec, dt)
    dU = rec.perturbations
    if np.linalg.matrix_rank(dU, tol=1e-12) < m:
        raise SingularExcitation("perturbation directions do not span the input space")
    dV = velocities[1:] - velocities[0]
    # rows: dV[j] = G @ dU[j]  <=>  dU @ G.T = dV
    G = np.linalg.solve(dU, dV).T
    f = velocities[0] - G @ rec.inputs[0]
    if unactuated_drift_est is None:
        unactuated_drift_est = estimate_unactuated_drift(rec, dt)
    model = LocalModel.from_bounds(rec.end_state, f, G, unactuated_drift_est, bounds)
    if model.b <= model.c * bounds.neighborhood_radius:
        raise DegenerateGain(
            f"b = {model.b:.6g} <= c * radius = {model.c * bounds.neighborhood_radius:.6g}"
        )
    return model
