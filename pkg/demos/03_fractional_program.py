"""The optimization behind the small-uniform statistic.

L(b) = <theta, b> / (sqrt(sum psi_j^2 b_j^2) + a_n) over the unit ball.
For a_n -> 0 the maximum is sqrt(sum (theta_j / psi_j)^2) by Cauchy-Schwarz;
for positive a_n the maximizer sits on the sphere.
"""

import numpy as np

from flmsup.smalluniform import FractionalObjective, OptimizerConfig, maximize, objective

rng = np.random.default_rng(3)
theta = rng.normal(size=5)
psi = rng.uniform(0.3, 2.0, size=5)
limit = np.sqrt(np.sum((theta / psi) ** 2))
print(f"a_n -> 0 limit: {limit:.8f}")

for a_n in (1e-1, 1e-2, 1e-4, 1e-8, 1e-12):
    obj = FractionalObjective(theta, psi, a_n)
    cart = maximize(obj, OptimizerConfig(method="cartesian"), np.random.default_rng(0))
    sph = maximize(obj, OptimizerConfig(method="spherical"), np.random.default_rng(0))
    print(f"a_n = {a_n:.0e}: cartesian {cart.best_value:.8f} (|b| = {np.linalg.norm(cart.best_point):.6f}, "
          f"{cart.converged_starts}/{cart.starts} converged)  spherical {sph.best_value:.8f}")

# the naive direction theta / |theta| is never better
obj = FractionalObjective(theta, psi, 1e-2)
print(f"L(theta/|theta|) = {objective(obj, theta / np.linalg.norm(theta)):.6f}")
