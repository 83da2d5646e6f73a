"""Partitioned states, Lipschitz bounds, local models and matrix primitives.

States are stored in canonical order ``[actuated, unactuated]``; for the
bicycle that is ``[theta, v, x, y]``. All matrix norms are spectral norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroMatrix

SINGULAR_RTOL = 1e-12
ZERO_ATOL = 1e-12


def _frozen_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


def pinv_norm_inverse(M) -> float:
    """Return ``1 / ||M^+||``, i.e. the smallest nonzero singular value of ``M``.

    Singular values below ``1e-12 * sigma_max`` count as zero.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0 or np.max(np.abs(M)) <= ZERO_ATOL:
        raise ZeroMatrix("matrix is zero within tolerance")
    s = np.linalg.svd(M, compute_uv=False)
    nonzero = s[s > SINGULAR_RTOL * s[0]]
    return float(nonzero[-1])


def admissible(u, tol: float = 1e-9) -> bool:
    """Whether ``u`` lies in the closed unit ball of inputs."""
    return float(np.linalg.norm(u)) <= 1.0 + tol


@dataclass(frozen=True, eq=False)
class PartitionedState:
    """Full state split into the actuated block and the unactuated block."""

    actuated: np.ndarray
    unactuated: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "actuated", _frozen_vector(self.actuated))
        object.__setattr__(self, "unactuated", _frozen_vector(self.unactuated))
        if self.actuated.size < 1:
            raise DimensionMismatch("actuated block must have dimension >= 1")

    @property
    def m(self) -> int:
        return self.actuated.size

    @property
    def n(self) -> int:
        return self.actuated.size + self.unactuated.size

    def full(self) -> np.ndarray:
        return np.concatenate([self.actuated, self.unactuated])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartitionedState):
            return NotImplemented
        return np.array_equal(self.actuated, other.actuated) and np.array_equal(
            self.unactuated, other.unactuated
        )

    def __repr__(self) -> str:
        return f"PartitionedState(actuated={self.actuated.tolist()}, unactuated={self.unactuated.tolist()})"


def partition(full, m: int) -> PartitionedState:
    """Split a full state vector; the first ``m`` entries are actuated."""
    full = np.asarray(full, dtype=float).reshape(-1)
    if m < 1 or full.size < m:
        raise DimensionMismatch(f"cannot split a {full.size}-vector with m={m}")
    return PartitionedState(full[:m], full[m:])


@dataclass(frozen=True)
class LipschitzBounds:
    """Known Lipschitz constants of the drift and input matrix on a neighborhood."""

    l_f: float
    l_g: float
    neighborhood_radius: float = 0.1

    def __post_init__(self):
        for name in ("l_f", "l_g"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if not self.neighborhood_radius > 0:
            raise ValueError("neighborhood_radius must be positive")

    @property
    def c(self) -> float:
        return self.l_f + self.l_g


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Local drift and input matrix at an anchor state, plus derived proxy constants.

    ``a`` is the actuated drift, ``b = 1/||G^+||``, ``c = l_f + l_g`` and
    ``b_tilde = b - ||a||``.
    """

    anchor: PartitionedState
    drift: np.ndarray
    input_matrix: np.ndarray
    unactuated_drift: np.ndarray
    c: float
    b: float = field(init=False)

    def __post_init__(self):
        drift = _frozen_vector(self.drift)
        G = np.array(self.input_matrix, dtype=float, ndmin=2)
        G.setflags(write=False)
        fbar = _frozen_vector(self.unactuated_drift)
        m = self.anchor.m
        if drift.size != m or G.shape != (m, m) or fbar.size != self.anchor.n - m:
            raise DimensionMismatch("model blocks do not match the anchor partition")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "input_matrix", G)
        object.__setattr__(self, "unactuated_drift", fbar)
        object.__setattr__(self, "b", pinv_norm_inverse(G))

    @classmethod
    def from_bounds(cls, anchor, drift, input_matrix, unactuated_drift, bounds: LipschitzBounds) -> "LocalModel":
        return cls(anchor, drift, input_matrix, unactuated_drift, c=bounds.c)

    @property
    def a(self) -> np.ndarray:
        return self.drift

    @property
    def b_tilde(self) -> float:
        return self.b - float(np.linalg.norm(self.drift))

    def with_anchor(self, anchor: PartitionedState) -> "LocalModel":
        return LocalModel(anchor, self.drift, self.input_matrix, self.unactuated_drift, self.c)
