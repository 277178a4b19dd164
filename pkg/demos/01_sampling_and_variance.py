"""Sampling the sine process and checking the variance of a linear statistic.

Draws configurations on a window, compares the point-count moments with the
trace and the exact variance, then watches the variance of a smooth
statistic settle at its limit as the scale grows.

Run with ``python3 demos/01_sampling_and_variance.py``.
"""

import math

import numpy as np

from sinelab import cltlab as cl
from sinelab import sinedpp as sd
from sinelab.descriptors import gaussian, indicator

# A window of half-width 5 holds 10 points on average.
es = sd.build_kernel_eigensystem(5.0, 200)
print(f"trace of the discretized kernel: {sd.expected_count(es):.8f}")

N = 5000
_, counts = sd.linear_statistics(es, np.zeros(es.n_nodes), N, seed=1)
exact = cl.exact_variance(indicator(-5.0, 5.0))
print(f"mean count   {counts.mean():.4f} +- {counts.std(ddof=1) / math.sqrt(N):.4f}  (exact 10)")
print(f"count var    {counts.var(ddof=1):.4f}  (exact {exact:.4f})")
# The count variance grows only logarithmically with the window: compare
# with the Poisson value 10.

# For a smooth statistic the variance has a finite limit.
limit = cl.limit_variance(gaussian())
print(f"\ngaussian limit variance {limit:.6f}")
for R in (0.25, 0.5, 1.0, 2.0):
    v = cl.exact_variance(gaussian().dilate(R))
    print(f"  R = {R:<5g} variance {v:.6f}  relative gap {abs(v - limit) / limit:.2e}")

s = cl.monte_carlo_statistics(gaussian(), 4.0, N, seed=2)
print(f"\nsampled at R = 4: variance {s.variance:.4f} +- {s.stderr_variance:.4f}, "
      f"mean {s.mean:+.4f} +- {s.stderr_mean:.4f}")
