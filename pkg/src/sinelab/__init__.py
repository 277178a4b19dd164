"""Numerical laboratory for linear statistics of the sine process.

Modules
-------
funcspace
    Sampled functions, unitary Fourier transforms, Sobolev norms, the
    Hardy split and the strip norm.
hankel
    Hankel symbols, Hilbert-Schmidt norms and the Fredholm determinant ``V``.
sinedpp
    Nystrom eigensystems of the sine kernel and exact projection sampling.
cltlab
    Exact variances, Monte Carlo statistics, MGF checks, Esseen bounds and
    rate fits.
cli
    The ``sinelab`` command.
"""

from . import cltlab, descriptors, errors, funcspace, hankel, sinedpp
from .descriptors import Descriptor, gaussian, hat, indicator, lorentzian

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "cltlab",
    "descriptors",
    "errors",
    "funcspace",
    "hankel",
    "sinedpp",
    "Descriptor",
    "gaussian",
    "lorentzian",
    "hat",
    "indicator",
]
