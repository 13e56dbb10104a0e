"""Estimating the slope of a scalar-on-function regression.

rho1 is a combination of the first three Brownian eigenfunctions.  We draw
n curves, fit the spectral estimator with the simple and the ridge
reciprocal, and watch the quadratic error fall as n grows.
"""

import math

import numpy as np

from flmsup import fpca
from flmsup.fnspace import Grid, brownian_eigenvalue, coefficient_function, generate_dataset, snr_sigma
from flmsup.harness import deterministic_k, error_measure
from flmsup.testing import schedule_params

grid = Grid.uniform(100)
rho = coefficient_function("rho1", grid)
sigma = snr_sigma(rho, 0.10)
print(f"noise sd for snr = 10%: {sigma:.4f}")

rng = np.random.default_rng(1)
for n in (50, 200, 1000, 5000):
    data = generate_dataset(n, rho, sigma, rng)
    s = schedule_params(n, float(brownian_eigenvalue(1)) ** 4)
    k = deterministic_k(n, 4)
    row = [f"n = {n:5d}  k = {k}"]
    for kind in ("simple", "ridge"):
        scheme = fpca.RegularizationScheme(kind, s.c_n, s.alpha_n if kind == "ridge" else 0.0)
        fit = fpca.fit(data, scheme, s.a_n, k=k)
        row.append(f"{kind}: log err {math.log(error_measure(rho, fit)):6.2f}, sigma_hat {fit.sigma_eps:.3f}")
    print("  ".join(row))

# predictions are inner products with the estimated slope
x = generate_dataset(3, rho, 0.0, rng)
print("true <rho, X>:", np.round(x.Y, 3))
print("predicted    :", np.round([fpca.predict(fit, x.curve(i)) for i in range(3)], 3))
