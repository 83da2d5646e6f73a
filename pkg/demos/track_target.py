"""Inner tracking loop driving the reduced bicycle block to a target in its reachable set."""

import numpy as np

from reachpc.core import LipschitzBounds, LocalModel, partition
from reachpc.plant import BicycleParams, Plant, reduced_rhs
from reachpc.synth import SynthConfig, algorithm1, tube_deviation

X0 = [0.0, 1.0]


def main() -> None:
    params = BicycleParams(l_r=1.0, a_max=1.0)
    plant = Plant(lambda z, u: reduced_rhs(np.r_[z, 0.0, 0.0], u, params)[:2], X0, m=2, h=1e-3)
    # the controller only knows the input matrix at the start point and the Lipschitz bound
    model = LocalModel(partition(X0, 2), [0.0, 0.0], np.array([[0.0, 1.0], [1.0, 0.0]]), [], c=3.0)
    target = np.array([0.4, 1.3])
    res = algorithm1(plant, model, LipschitzBounds(0.0, 3.0, 0.1), target, SynthConfig(), warn=False)
    print(f"step radius r = {res.r:.4f}, outcome {res.termination.value}")
    for c in res.cycles:
        print(
            f"cycle {c.n:2d}  t={c.tau_n:.3f}  waypoint {np.round(c.z_n, 3).tolist()}  "
            f"distance {c.d_z_before:.4f} -> {c.d_z_after:.4f}  vertex {c.vertex}"
        )
    tube = tube_deviation(plant.log.states, res.origin, res.target).max()
    final = np.linalg.norm(plant.log.states[-1] - target)
    # the waypoint leads the state by about r, so Reached leaves the state within 2 r of the target
    print(f"final distance {final:.4f} (bound 2 r = {2 * res.r:.4f}), max deviation from the straight line {tube:.4f}")


if __name__ == "__main__":
    main()
