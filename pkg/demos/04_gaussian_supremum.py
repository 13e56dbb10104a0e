"""Critical values from the supremum of the limiting Gaussian process.

With one retained mode the index set is {-1, +1} plus interior points, so
the supremum is |Z| and the 95% quantile should be close to 1.96.  With
more modes the supremum grows roughly like the norm of a K-dim Gaussian.
"""

import numpy as np
from scipy import stats

from flmsup import fpca
from flmsup.fnspace import brownian_eigenvalue
from flmsup.gproc import quantile
from flmsup.testing import GpSettings, null_kernel, simulate_null

gp = GpSettings(reps=20_000)
for K in (1, 2, 3, 5, 10):
    lam = brownian_eigenvalue(np.arange(1, K + 1))
    kern = null_kernel(lam, fpca.RegularizationScheme("ridge", float(lam[-1]), 1e-3), 1e-6)
    res = simulate_null(kern, gp, seed=K)
    qs = [quantile(res, 1.0, a) for a in (0.10, 0.05, 0.01)]
    print(f"K = {K:2d}: q90 {qs[0]:.3f}  q95 {qs[1]:.3f}  q99 {qs[2]:.3f}   "
          f"(chi_K q95 = {np.sqrt(stats.chi2.ppf(0.95, K)):.3f}, jitter {res.meta['jitter']:.0e})")

# the test divides by beta_n = (log n)^2, which shrinks the critical value
print(f"q95 / beta_n at n = 1000: {quantile(res, np.log(1000) ** 2, 0.05):.4f}")
