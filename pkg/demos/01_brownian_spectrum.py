"""Eigen-decomposition of the Brownian covariance on a 100-point grid.

The operator with kernel min(s, t) has eigenvalues 4 / ((2j - 1) pi)^2 and
eigenfunctions sqrt(2) sin((2j - 1) pi t / 2).  We discretize it with
trapezoid weights, solve, and compare.
"""

import numpy as np

from flmsup.fnspace import Grid, brownian_eigenelements, brownian_kernel
from flmsup.fpca import eigensolve, truncation

grid = Grid.uniform(100)
eig = eigensolve(brownian_kernel(grid), grid)

print(" j   lambda_hat      lambda       rel.err   max|e_hat - e|")
for j in range(1, 7):
    lam, e = brownian_eigenelements(j, grid)
    ehat = eig.eigenfunction(j).values
    ehat = ehat * np.sign(ehat @ (grid.weights * e.values))
    print(f"{j:2d}  {eig.eigenvalues[j-1]:.8f}  {lam:.8f}  {abs(eig.eigenvalues[j-1]/lam - 1):.2e}"
          f"   {np.max(np.abs(ehat - e.values)):.2e}")

# the truncation keeps every p with lambda_p + gap_p / 2 >= c_n
for c_n in (0.3, 0.05, 0.01, 0.001):
    print(f"c_n = {c_n:<6} -> k = {truncation(eig, c_n)}")
