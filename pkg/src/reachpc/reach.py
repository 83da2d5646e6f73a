"""Guaranteed reachable set underapproximations from local values and Lipschitz bounds.

The actuated block is handled through the proxy system
``x' = a + (b - c ||x - x0||) u`` and its spherical variant
``z' = (b_tilde - c ||z - x0||) u``; the unactuated block through the
velocity-gain construction driven by the spherical radius ``b(t)``.
Clouds are Monte Carlo endpoint samples under piecewise-constant
unit-norm inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .core import LipschitzBounds, LocalModel, pinv_norm_inverse
from .errors import (
    AnchorMismatch,
    DriftDominates,
    EmptyCloud,
    InvalidInputBall,
    NearRest,
    OutsideDomain,
    RestViolation,
    ZeroMatrix,
)

DOMAIN_RTOL = 1e-9
DEFAULT_SAMPLES = 512
DEFAULT_PIECES = 10
DEFAULT_SUBSTEPS = 10


class CloudKind(str, Enum):
    ACTUATED = "ActuatedProxy"
    SPHERICAL = "SphericalProxy"
    UNACTUATED = "Unactuated"
    UNION = "Union"


@dataclass(frozen=True, eq=False)
class ProxyParams:
    """Constants of the actuated proxy system, centered at ``center``."""

    a: np.ndarray
    b: float
    c: float
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.b > 0:
            raise ValueError("b must be positive")
        if self.c < 0:
            raise ValueError("c must be non-negative")

    @classmethod
    def from_model(cls, model: LocalModel) -> "ProxyParams":
        return cls(model.a, model.b, model.c, model.anchor.actuated)

    @property
    def a_norm(self) -> float:
        return float(np.linalg.norm(self.a))

    @property
    def b_tilde(self) -> float:
        return self.b - self.a_norm

    @property
    def domain_radius(self) -> float:
        return self.b / self.c if self.c > 0 else math.inf

    def shifted(self, center) -> "ProxyParams":
        return ProxyParams(self.a, self.b, self.c, center)


@dataclass(frozen=True, eq=False)
class ReachCloud:
    """Sampled endpoint set of an underapproximated reachable set.

    For ``kind == Union`` the two block clouds are kept in ``parts`` and
    ``points`` is their product (actuated coordinates first).
    """

    kind: CloudKind
    horizon: float
    center: np.ndarray
    points: np.ndarray
    seed: int | None = None
    anchor: np.ndarray | None = None
    parts: tuple["ReachCloud", "ReachCloud"] | None = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float, ndmin=2)
        if points.shape[0] == 0:
            raise EmptyCloud("reach cloud has no points")
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if points.shape[1] != center.size:
            raise ValueError("points and center have different dimensions")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "kind", CloudKind(self.kind))
        if self.anchor is not None:
            object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return self.points.shape[0]

    def radius(self) -> float:
        """Largest distance from the center to a sample."""
        return float(np.max(np.linalg.norm(self.points - self.center, axis=1)))

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "horizon": self.horizon,
            "center": self.center.tolist(),
            "points": self.points.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ReachCloud":
        return cls(CloudKind(data["kind"]), float(data["horizon"]), data["center"], data["points"], data.get("seed"))


# ---------------------------------------------------------------------------
# proxy vector fields and closed forms


def proxy_rhs(p: ProxyParams, x, u) -> np.ndarray:
    """``a + (b - c ||x - center||) u``, defined on the domain ball ``||x - center|| <= b/c``."""
    x = np.asarray(x, dtype=float)
    disp = float(np.linalg.norm(x - p.center))
    if disp > p.domain_radius * (1.0 + DOMAIN_RTOL):
        raise OutsideDomain(f"displacement {disp:.6g} exceeds domain radius {p.domain_radius:.6g}")
    return p.a + (p.b - p.c * disp) * np.asarray(u, dtype=float)


def radial_envelope(rate: float, c: float, t):
    """Solution of ``r' = rate - c r``, ``r(0) = 0``; linear when ``c == 0``."""
    t = np.asarray(t, dtype=float)
    z = c * t
    # (1 - e^{-z}) / z written to stay finite as c t underflows
    safe = np.where(z > 1e-300, z, 1.0)
    phi = np.where(z > 1e-300, -np.expm1(-safe) / safe, 1.0)
    out = rate * t * phi
    return float(out) if out.ndim == 0 else out


def spherical_radius(p: ProxyParams, t):
    """Radius ``b(t)`` of the ball reachable by the spherical proxy."""
    if p.b_tilde <= 0:
        raise DriftDominates(f"b_tilde = {p.b_tilde:.6g} <= 0: drift reaches the input authority")
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return radial_envelope(p.b_tilde, p.c, t)


def spherical_tracking_input(p: ProxyParams, x, u) -> np.ndarray:
    """Input of the drifted proxy that reproduces the spherical proxy's velocity.

    At displacement ``rho`` the spherical proxy moves with
    ``(b_tilde - c rho) u``; the returned ``w`` satisfies
    ``a + (b - c rho) w = (b_tilde - c rho) u`` and ``||w|| <= 1`` whenever
    ``||u|| <= 1`` and ``b - c rho > 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    rho = np.linalg.norm(x - p.center, axis=1)[:, None]
    gain = p.b - p.c * rho
    return ((p.b_tilde - p.c * rho) * u - p.a) / gain


# ---------------------------------------------------------------------------
# Monte Carlo sampling


def sample_input_signals(n_samples: int, m: int, n_pieces: int, seed: int) -> np.ndarray:
    """Unit-norm piecewise-constant input signals, shape ``(n_samples, n_pieces, m)``.

    The first ``(n_samples + 1) // 2`` signals keep one direction over the whole
    horizon (they reach the outer boundary); the rest switch direction on
    every piece.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_samples, n_pieces, m))
    n_const = (n_samples + 1) // 2
    dirs[:n_const] = dirs[:n_const, :1, :]
    norms = np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs / norms


def _integrate_batch(rhs, y0: np.ndarray, signals: np.ndarray, T: float, substeps: int, check=None):
    """RK4 over a batch: ``rhs(t, y, u)`` with ``y`` of shape ``(S, d)``."""
    n_pieces = signals.shape[1]
    h = T / (n_pieces * substeps)
    y = y0.copy()
    t = 0.0
    for k in range(n_pieces):
        u = signals[:, k, :]
        for _ in range(substeps):
            k1 = rhs(t, y, u)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1, u)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2, u)
            k4 = rhs(t + h, y + h * k3, u)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            if check is not None:
                check(y)
    return y


def _domain_check(p: ProxyParams):
    limit = p.domain_radius * (1.0 + DOMAIN_RTOL)

    def check(y):
        if np.max(np.linalg.norm(y, axis=1)) > limit:
            raise DriftDominates("a proxy trajectory left the domain ball")

    return check


def grs_actuated(
    p: ProxyParams,
    T: float,
    n_samples: int = DEFAULT_SAMPLES,
    rng_seed: int = 0,
    n_pieces: int = DEFAULT_PIECES,
    substeps: int = DEFAULT_SUBSTEPS,
) -> ReachCloud:
    """Endpoint cloud of the drifted proxy at time ``T``.

    Integration runs in displacement coordinates, so the sampled set depends
    on the anchor only through a translation.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    m = p.a.size
    signals = sample_input_signals(n_samples, m, n_pieces, rng_seed)
    a, b, c = p.a, p.b, p.c

    def rhs(t, y, u):
        rho = np.sqrt(np.einsum("ij,ij->i", y, y))[:, None]
        return a + (b - c * rho) * u

    y = _integrate_batch(rhs, np.zeros((n_samples, m)), signals, T, substeps, _domain_check(p))
    return ReachCloud(CloudKind.ACTUATED, T, p.center, p.center + y, rng_seed)


def grs_spherical(
    p: ProxyParams,
    T: float,
    n_samples: int = DEFAULT_SAMPLES,
    rng_seed: int = 0,
    n_pieces: int = DEFAULT_PIECES,
    substeps: int = DEFAULT_SUBSTEPS,
) -> ReachCloud:
    """Endpoint cloud of the spherical proxy (a ball of radius ``b(T)``)."""
    spherical_radius(p, T)
    m = p.a.size
    signals = sample_input_signals(n_samples, m, n_pieces, rng_seed)
    bt, c = p.b_tilde, p.c

    def rhs(t, y, u):
        rho = np.sqrt(np.einsum("ij,ij->i", y, y))[:, None]
        return (bt - c * rho) * u

    y = _integrate_batch(rhs, np.zeros((n_samples, m)), signals, T, substeps)
    return ReachCloud(CloudKind.SPHERICAL, T, p.center, p.center + y, rng_seed)


# ---------------------------------------------------------------------------
# guaranteed velocity sets


def velocity_membership(model: LocalModel, bounds: LipschitzBounds, x_disp: float, k: float) -> bool:
    """Whether speed ``|k|`` along any unit direction is guaranteed at displacement ``x_disp``."""
    if x_disp < 0:
        raise ValueError("x_disp must be non-negative")
    return abs(k) <= model.b - bounds.c * x_disp + 1e-12


def velocity_membership_scaled(
    model: LocalModel, bounds: LipschitzBounds, x_disp: float, radius_ct: float, k: float
) -> bool:
    """Guaranteed speed when the inputs are restricted to a ball of radius ``radius_ct``.

    The bound is ``radius_ct (b - l_g x) - l_f x``: the input-matrix
    perturbation shrinks the usable gain, while the drift perturbation must
    be cancelled out of the scaled input budget.
    """
    if x_disp < 0:
        raise ValueError("x_disp must be non-negative")
    if radius_ct < 0:
        raise InvalidInputBall(f"input-ball radius {radius_ct:.6g} is negative")
    bound = radius_ct * (model.b - bounds.l_g * x_disp) - bounds.l_f * x_disp
    return abs(k) <= bound + 1e-12


# ---------------------------------------------------------------------------
# unactuated block


def lipschitz_F_bound(model: LocalModel, bounds: LipschitzBounds, bt: float, x_disp: float) -> float:
    """Growth-rate bound ``L_F(x_disp)`` for the rank-one map ``F(x) = fbar(x) xt^T / ||xt||^2``."""
    s0 = float(np.linalg.norm(model.anchor.actuated))
    alpha_min, alpha_max = s0 - bt, s0 + bt
    if alpha_min <= 0:
        raise NearRest(f"alpha_min = {alpha_min:.6g} <= 0")
    fbar = float(np.linalg.norm(model.unactuated_drift))
    lf = bounds.l_f
    lead = (lf * alpha_min * alpha_max + fbar * (1.0 + 2.0 * alpha_max)) / alpha_min**3
    slope = lf * (alpha_min + 2.0 * alpha_max) / alpha_min**3
    return lead + slope * x_disp


def lipschitz_F_sufficiency(model: LocalModel, bt: float) -> float:
    """Coefficient whose value ``<= 1`` lets ``l_f`` stand in for ``L_F``."""
    s0 = float(np.linalg.norm(model.anchor.actuated))
    alpha_min, alpha_max = s0 - bt, s0 + bt
    if alpha_min <= 0:
        raise NearRest(f"alpha_min = {alpha_min:.6g} <= 0")
    fbar = float(np.linalg.norm(model.unactuated_drift))
    return (alpha_min * alpha_max + fbar * (1.0 + 2.0 * alpha_max)) / alpha_min**3


def unactuated_gain_map(model: LocalModel) -> tuple[np.ndarray, float]:
    """Rank-one ``F(x0) = fbar xt0^T / ||xt0||^2`` and ``1/||F(x0)^+||``."""
    xt0 = model.anchor.actuated
    s0 = float(np.linalg.norm(xt0))
    if s0 == 0:
        raise RestViolation("actuated anchor is zero")
    F0 = np.outer(model.unactuated_drift, xt0) / s0**2
    return F0, pinv_norm_inverse(F0)


def grs_unactuated(
    model: LocalModel,
    bounds: LipschitzBounds,
    T: float,
    bt: Callable[[float], float] | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    rng_seed: int = 0,
    n_pieces: int = DEFAULT_PIECES,
    substeps: int = DEFAULT_SUBSTEPS,
) -> ReachCloud:
    """Endpoint cloud of the unactuated positions at time ``T``.

    The actuated state is represented by samples ``xi(t) = xt0 + bt(t) w(t)``
    on the boundary of the spherical-proxy ball, ``w`` unit and piecewise
    constant. The unactuated velocity is ``(h / h0) F(x0) xi`` with
    ``h = (||xt0|| - ||xi - xt0||)(sigma_F - L ||x - x0||)`` and its nominal
    value ``h0 = ||xt0|| sigma_F``, so a zero radius reproduces the drift
    ``fbar(x0)`` exactly. ``L`` is ``l_f`` when the sufficiency coefficient
    is at most one and the growth-rate bound otherwise.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if bt is None:
        p = ProxyParams.from_model(model)
        bt = lambda t: spherical_radius(p, t)  # noqa: E731
    xt0 = model.anchor.actuated
    xb0 = model.anchor.unactuated
    s0 = float(np.linalg.norm(xt0))
    bt_T = float(bt(T))
    if s0 <= 0 or s0 < bt_T:
        raise RestViolation(f"||xt0|| = {s0:.6g} below the actuated radius {bt_T:.6g}")
    anchor = model.anchor.full()
    try:
        F0, sigma_F = unactuated_gain_map(model)
    except ZeroMatrix:
        # no unactuated drift: the guaranteed set collapses onto the anchor
        points = np.tile(xb0, (n_samples, 1))
        return ReachCloud(CloudKind.UNACTUATED, T, xb0, points, rng_seed, anchor)

    if lipschitz_F_sufficiency(model, bt_T) <= 1.0:
        lead, slope = bounds.l_f, 0.0
    else:
        lead = lipschitz_F_bound(model, bounds, bt_T, 0.0)
        slope = lipschitz_F_bound(model, bounds, bt_T, 1.0) - lead
    m = xt0.size
    signals = sample_input_signals(n_samples, m, n_pieces, rng_seed)
    h0 = s0 * sigma_F

    def rhs(t, y, w):
        rho = float(bt(t))
        xi = xt0 + rho * w
        disp = np.sqrt(rho**2 + np.einsum("ij,ij->i", y, y))
        L = lead + slope * disp
        gain = (s0 - rho) * np.maximum(sigma_F - L * disp, 0.0) / h0
        return gain[:, None] * (xi @ F0.T)

    y = _integrate_batch(rhs, np.zeros((n_samples, xb0.size)), signals, T, substeps)
    return ReachCloud(CloudKind.UNACTUATED, T, xb0, xb0 + y, rng_seed, anchor)


def grs_full(actuated: ReachCloud, unactuated: ReachCloud) -> ReachCloud:
    """Product of the actuated and unactuated clouds computed at the same anchor."""
    if abs(actuated.horizon - unactuated.horizon) > 1e-12:
        raise AnchorMismatch("clouds have different horizons")
    if unactuated.anchor is not None:
        m = actuated.center.size
        if not np.allclose(unactuated.anchor[:m], actuated.center, rtol=0, atol=1e-12):
            raise AnchorMismatch("clouds were computed at different anchors")
    A, U = actuated.points, unactuated.points
    points = np.hstack([np.repeat(A, len(U), axis=0), np.tile(U, (len(A), 1))])
    center = np.concatenate([actuated.center, unactuated.center])
    return ReachCloud(CloudKind.UNION, actuated.horizon, center, points, actuated.seed, center, (actuated, unactuated))


def translate_cloud(cloud: ReachCloud, new_anchor) -> ReachCloud:
    """Shift every point so that the center moves to ``new_anchor``."""
    new_anchor = np.asarray(new_anchor, dtype=float).reshape(-1)
    shift = new_anchor - cloud.center
    return ReachCloud(cloud.kind, cloud.horizon, new_anchor, cloud.points + shift, cloud.seed, None, None)


# ---------------------------------------------------------------------------
# perturbation budget and convergence condition


@dataclass(frozen=True)
class PerturbationBudget:
    m0: float
    l0: float
    c0: float
    c1: float
    c2: float
    c3: float
    e_r: float
    e_n: float
    e_lambda: float
    e_mu: float
    dt: float
    eps: float


def perturbation_budget(
    model: LocalModel,
    bounds: LipschitzBounds,
    dt: float,
    eps: float,
    m: int,
    r: float = 0.0,
    l_d: float | None = None,
    c4_over_c3: float = 1.0,
) -> PerturbationBudget:
    """Learning and suboptimality error terms for one cycle configuration.

    ``M0`` bounds ``||f||`` and ``||G||`` over the domain ball through the
    Lipschitz envelope. ``L_d`` defaults to ``2 (R + r)``, the Lipschitz
    constant of ``||x - z||^2`` on the working ball.
    """
    if not (dt > 0 and eps > 0):
        raise ValueError("dt and eps must be positive")
    R = model.b / model.c if model.c > 0 else math.inf
    if not math.isfinite(R):
        # vanishing c leaves the domain ball unbounded; the bounds only hold on the neighborhood
        R = bounds.neighborhood_radius
    m0 = max(
        float(np.linalg.norm(model.a)) + bounds.l_f * R,
        float(np.linalg.norm(model.input_matrix, 2)) + bounds.l_g * R,
    )
    l0 = max(bounds.l_f, bounds.l_g)
    c0 = m0 * (m + 1)
    c1 = m0 * (m + 1) ** 2
    c2 = 2.0 * m0 * l0 * (m + 1) ** 2
    c3 = m0 * l0 * (m + 1) ** 3
    e_r = c2 * dt + eps * m0
    e_n = 2.0 * m0 * c1 * dt + c1 * e_r
    e_lambda = 2.0 * ((4.0 * m**1.5 + eps) / eps) * c3 * dt
    if l_d is None:
        l_d = 2.0 * (R + r)
    e_mu = (3.0 * l_d * c4_over_c3 * e_lambda + l_d * c0 * dt) / 2.0
    return PerturbationBudget(m0, l0, c0, c1, c2, c3, e_r, e_n, e_lambda, e_mu, dt, eps)


def convergence_condition(budget: PerturbationBudget, p: ProxyParams, x_disp: float, r: float, eps: float) -> bool:
    """Sufficient condition for the waypoint distance to decrease over a cycle."""
    if not r > 0:
        raise ValueError("r must be positive")
    lhs = budget.e_n + budget.e_mu
    rhs = r * (p.b - p.c * x_disp - p.a_norm - budget.e_r + eps * budget.m0)
    return lhs <= rhs
