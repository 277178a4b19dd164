"""The moment generating function as a Fredholm determinant.

For a statistic of the sine process, ``E exp(lam S)`` splits into a Gaussian
factor and a determinant ``V(lam)`` of a product of Hankel operators.  This
script checks the Hilbert-Schmidt factors of a lorentzian two ways, shows
where ``V`` departs from 1, and compares the product with a Monte Carlo
estimate.

Run with ``python3 demos/02_determinant_identity.py``.
"""

import numpy as np

from sinelab import cltlab as cl
from sinelab import hankel as hk
from sinelab.descriptors import hat, lorentzian

f = lorentzian()
ring = hk.ring_grid_function(f)
print(f"sup of the conjugate part: {np.max(np.abs(ring.values)):.6f}")

R = 2.0
for lam in (0.5, 1.0):
    sym = hk.build_symbol(ring, lam, R)
    h = hk.hankel_hs_norm(sym, "plus")
    print(f"lam = {lam}: HS factor {h.value:.6e} (spectral) vs {h.nystrom:.6e} (Nystrom)")

# V departs from 1 only at small scales: exponentially fast for the
# lorentzian, only algebraically for the hat.
hat_ring = hk.ring_grid_function(hat())
for Rs in (0.25, 0.5, 1.0, 2.0):
    vl = hk.fredholm_det_V(ring, 1.0, Rs).value.real
    vh = hk.fredholm_det_V(hat_ring, 1.0, Rs).value.real
    print(f"R = {Rs:<4g} 1 - V(1): lorentzian {1 - vl:.3e}, hat {1 - vh:.3e}")

ev = hk.fredholm_det_V(ring, 1.0, 0.25, check_doubling=True)
print(f"change of V under doubled quadrature at R = 0.25: {ev.diagnostics['doubling_difference']:.1e}")

# The determinant is what separates the MGF from the Gaussian one.
chk = cl.mgf_check(f, R, [-1.0, -0.5, 0.5, 1.0], 20000, seed=5)
for lam, emp, pred, z in zip(chk.lam.real, chk.empirical.real, chk.predicted.real, chk.z):
    print(f"  lam = {lam:+.1f}: empirical {emp:.5f}, predicted {pred:.5f}, z = {z:.2f}")

# Derivative in lam by the Cauchy formula, against a finite difference.
c = hk.cauchy_derivative(hat_ring, 0.5, 0.25)
fd = (hk.fredholm_det_V(hat_ring, 0.501, 0.25).value - hk.fredholm_det_V(hat_ring, 0.499, 0.25).value) / 2e-3
print(f"hat, R = 0.25, V'(0.5): Cauchy {c.derivative.real:+.6e}, finite difference {fd.real:+.6e}")
