"""
How estimation error reaches the Shapley value
==============================================

The Shapley map is linear, so errors in coalition values pass through a fixed
n x 2^n matrix.  Its spectrum gives worst-case and average-case factors.
"""

import numpy as np

from cgakit import NoiseExperiment, l1_bounds, l2_worst_bound, mc_average_case, spectrum
from cgakit.analysis import top_singular_direction

for n in (4, 8, 12):
    s = spectrum(n)
    print(f"n={n}: sigma_max^2 {s.sigma_max_sq:.4f} (2/n = {2 / n:.4f}), "
          f"other eigenvalues {s.d1 - s.d2:.2e}")

# The worst-case L2 factor is attained along the top singular direction.
n = 8
u = top_singular_direction(n)
print("L2 worst case:", l2_worst_bound(u, np.zeros(1 << n)))

# All error on the grand coalition attains the general L1 bound.
dv = np.zeros(1 << n)
dv[-1] = 1.0
print("L1 general:", l1_bounds(dv, np.zeros(1 << n)).general)

# Random noise of fixed norm does far better than the worst case.
res = mc_average_case(NoiseExperiment(n, "L2", radius=1.0, trials=20_000, seed=0))
print(f"average L2: {res.empirical_mean:.3e} +- {res.standard_error:.1e}, "
      f"trace prediction {res.exact_mean:.3e}, bound {res.bound:.3e}")
