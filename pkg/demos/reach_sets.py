"""Guaranteed reachable sets of a unit-gain model against simulated true endpoints.

Prints the proxy radius, the Monte Carlo cloud radius and the fraction of true
endpoints (random admissible constant inputs) that the cloud covers.
"""

import numpy as np

from reachpc.core import partition
from reachpc.reach import ProxyParams, grs_actuated, spherical_radius

X0 = np.array([0.0, 1.0])


def true_endpoints(T: float, n: int, seed: int, h: float = 1e-3) -> np.ndarray:
    """RK4 of theta' = v u2, v' = u1 from [0, 1] under random unit-ball constant inputs."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, 2))
    u *= (rng.uniform(size=n) ** 0.5 / np.linalg.norm(u, axis=1))[:, None]
    z = np.tile(X0, (n, 1))

    def rhs(z):
        return np.column_stack([z[:, 1] * u[:, 1], u[:, 0]])

    for _ in range(int(round(T / h))):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


def main() -> None:
    p = ProxyParams([0.0, 0.0], 1.0, 3.0, partition(X0, 2).actuated)
    for T in (0.05, 0.1, 0.2, 0.5):
        cloud = grs_actuated(p, T, n_samples=512, rng_seed=0)
        ends = true_endpoints(T, 2000, seed=1)
        inside = np.mean(np.linalg.norm(ends - X0, axis=1) <= cloud.radius())
        print(
            f"T={T:4.2f}  proxy radius {spherical_radius(p, T):.4f}  cloud radius {cloud.radius():.4f}  "
            f"true reach {np.linalg.norm(ends - X0, axis=1).max():.4f}  endpoints inside {inside:.0%}"
        )


if __name__ == "__main__":
    main()
