"""Kolmogorov-Smirnov rates from the Esseen smoothing bound.

Evaluates ``kappa0 + kappa1 + 4 / T`` for a lorentzian over several scales,
fits the two rate models and compares with the empirical distance of a
modest Monte Carlo sample.  The hat function is included to show that its
bound stays above 1 at these scales.

Run with ``python3 demos/03_rates.py`` (a few minutes).
"""

import math

from sinelab import cltlab as cl
from sinelab.descriptors import hat, lorentzian

Rs = [5.0, 10.0, 20.0, 40.0]
N = 2000
rows = []
for R in Rs:
    rep = cl.esseen_bound(lorentzian(), R)
    s = cl.monte_carlo_statistics(lorentzian(), R, N, seed=3, margin=4.0)
    ks = cl.ks_distance(s.values, rep.sigma)
    rows.append((R, ks, rep.bound))
    print(f"R = {R:>4g}: bound {rep.bound:.4f} at T = {rep.T:g}, empirical d_KS {ks:.4f} "
          f"(slack {3 * 0.8 / math.sqrt(N):.4f})")

pts = [(R, b) for R, _, b in rows]
for model in ("inverse_linear", "inverse_log"):
    fit = cl.rate_fit(pts, model)
    print(f"{model:>14}: c = {fit.c:.4g}, residual {fit.residual_norm:.2e}")
print(f"log-log slope {cl.rate_fit(pts, 'inverse_linear').loglog_slope:.3f}")

for R in Rs:
    print(f"hat R = {R:>4g}: bound {cl.esseen_bound(hat(), R).bound:.6f}")
