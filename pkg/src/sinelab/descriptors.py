"""Closed-form test functions and their Hilbert-side companions.

Every descriptor is a name plus numeric parameters.  The registry below knows,
for each name, the real-line values, the Hilbert transform (so that the
ring part ``-i * Hf`` is available exactly), the unitary Fourier transform,
closed-form norms where they exist, and where the function continues
holomorphically into the complex plane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import dawsn

from .errors import DomainError

__all__ = ["Descriptor", "RingDescriptor", "KNOWN", "gaussian", "lorentzian", "hat", "indicator", "custom"]

KNOWN = ("gaussian", "lorentzian", "hat", "indicator", "custom")

_DEFAULTS = {
    "gaussian": {"width": 1.0, "amplitude": 1.0},
    "lorentzian": {"width": 1.0, "amplitude": 1.0},
    "hat": {"width": 1.0, "amplitude": 1.0},
    "indicator": {"left": -1.0, "right": 1.0, "amplitude": 1.0},
    "custom": {},
}


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    out = np.zeros_like(u)
    nz = au > 0
    out[nz] = u[nz] * np.log(au[nz])
    return out


@dataclass(frozen=True)
class Descriptor:
    """A named closed form with numeric parameters.

    ``custom`` descriptors carry a Python callable in ``func`` and are not
    serializable beyond their name.
    """

    name: str
    params: dict = field(default_factory=dict)
    func: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.name not in KNOWN:
            raise DomainError(f"unknown descriptor {self.name!r}; expected one of {KNOWN}")
        merged = dict(_DEFAULTS[self.name])
        merged.update(self.params)
        for k, v in merged.items():
            merged[k] = float(v)
            if not math.isfinite(merged[k]):
                raise DomainError(f"parameter {k} of {self.name} is not finite")
        object.__setattr__(self, "params", merged)
        if self.name in ("gaussian", "lorentzian", "hat") and merged["width"] <= 0:
            raise DomainError("width must be positive")
        if self.name == "indicator" and not merged["left"] < merged["right"]:
            raise DomainError("indicator needs left < right")
        if self.name == "custom" and not callable(self.func):
            raise DomainError("custom descriptor needs a callable")

    # -- parameters ---------------------------------------------------------
    @property
    def amplitude(self):
        return self.params.get("amplitude", 1.0)

    @property
    def width(self):
        if self.name == "indicator":
            return 0.5 * (self.params["right"] - self.params["left"])
        return self.params.get("width", 1.0)

    def dilate(self, R):
        """Descriptor of ``t -> f(t / R)``."""
        if self.name == "custom":
            base = self.func
            return Descriptor("custom", {}, func=lambda t: base(np.asarray(t) / R))
        p = dict(self.params)
        if self.name == "indicator":
            p["left"] *= R
            p["right"] *= R
        else:
            p["width"] *= R
        return Descriptor(self.name, p)

    def scaled(self, c):
        """Descriptor of ``c * f``."""
        if self.name == "custom":
            base = self.func
            return Descriptor("custom", {}, func=lambda t: c * base(t))
        p = dict(self.params)
        p["amplitude"] *= c
        return Descriptor(self.name, p)

    # -- serialization ------------------------------------------------------
    def to_record(self):
        return {"name": self.name, "params": dict(self.params)}

    @classmethod
    def from_record(cls, rec):
        if isinstance(rec, str):
            rec = json.loads(rec)
        return cls(rec["name"], dict(rec.get("params", {})))

    # -- real-line values ---------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        A = self.amplitude
        if self.name == "gaussian":
            return A * np.exp(-(t / self.width) ** 2)
        if self.name == "lorentzian":
            return A / (1.0 + (t / self.width) ** 2)
        if self.name == "hat":
            return A * np.maximum(0.0, 1.0 - np.abs(t) / self.width)
        if self.name == "indicator":
            a, b = self.params["left"], self.params["right"]
            return A * ((t >= a) & (t <= b)).astype(float)
        return np.asarray(self.func(t))

    # -- holomorphic continuation -------------------------------------------
    @property
    def is_holomorphic(self):
        return self.name in ("gaussian", "lorentzian")

    @property
    def singular_distance(self):
        """Distance from the real axis to the nearest singularity (inf if entire)."""
        if self.name == "gaussian":
            return math.inf
        if self.name == "lorentzian":
            return self.width
        return 0.0

    def complex_value(self, z):
        z = np.asarray(z, dtype=complex)
        A = self.amplitude
        if self.name == "gaussian":
            return A * np.exp(-(z / self.width) ** 2)
        if self.name == "lorentzian":
            return A / (1.0 + (z / self.width) ** 2)
        raise DomainError(f"{self.name} has no holomorphic continuation")

    def hilbert(self, t):
        """Hilbert transform (multiplier ``-i sgn xi``) on the real line."""
        if self.name == "custom":
            raise DomainError("custom descriptors have no closed-form Hilbert transform")
        t = np.asarray(t, dtype=float)
        A = self.amplitude
        if self.name == "gaussian":
            return A * (2.0 / math.sqrt(math.pi)) * dawsn(t / self.width)
        if self.name == "lorentzian":
            u = t / self.width
            return A * u / (1.0 + u * u)
        if self.name == "hat":
            u = t / self.width
            return A / math.pi * (_xlogx(u + 1.0) - 2.0 * _xlogx(u) + _xlogx(u - 1.0))
        a, b = self.params["left"], self.params["right"]
        with np.errstate(divide="ignore"):
            return A / math.pi * np.log(np.abs((t - a) / (t - b)))

    def ring(self, z):
        """``f_- - f_+ = -i Hf``; accepts complex ``z`` for holomorphic forms."""
        A = self.amplitude
        if self.name == "gaussian":
            z = np.asarray(z, dtype=complex)
            return -1j * A * (2.0 / math.sqrt(math.pi)) * dawsn(z / self.width)
        if self.name == "lorentzian":
            u = np.asarray(z, dtype=complex) / self.width
            return -1j * A * u / (1.0 + u * u)
        return -1j * self.hilbert(np.real(z))

    # -- integrals and transforms -------------------------------------------
    @property
    def integral(self):
        A, w = self.amplitude, self.width
        if self.name == "gaussian":
            return A * w * math.sqrt(math.pi)
        if self.name == "lorentzian":
            return A * w * math.pi
        if self.name == "hat":
            return A * w
        if self.name == "indicator":
            return A * (self.params["right"] - self.params["left"])
        raise DomainError("custom descriptors have no closed-form integral")

    @property
    def first_moment(self):
        if self.name == "indicator":
            a, b = self.params["left"], self.params["right"]
            return self.amplitude * (b * b - a * a) / 2.0
        if self.name == "custom":
            raise DomainError("custom descriptors have no closed-form moment")
        return 0.0

    def fourier(self, xi):
        """Unitary transform ``(2 pi)^{-1/2} int f(t) exp(-i xi t) dt``."""
        xi = np.asarray(xi, dtype=float)
        A, w = self.amplitude, self.width
        if self.name == "gaussian":
            return A * w / math.sqrt(2.0) * np.exp(-(w * xi) ** 2 / 4.0)
        if self.name == "lorentzian":
            return A * w * math.sqrt(math.pi / 2.0) * np.exp(-w * np.abs(xi))
        if self.name == "hat":
            return A * w / math.sqrt(2 * math.pi) * np.sinc(w * xi / (2 * math.pi)) ** 2
        if self.name == "indicator":
            a, b = self.params["left"], self.params["right"]
            xi_c = xi.astype(complex)
            out = np.empty_like(xi_c)
            small = np.abs(xi) < 1e-12
            out[small] = b - a
            xs = xi_c[~small]
            out[~small] = (np.exp(-1j * xs * a) - np.exp(-1j * xs * b)) / (1j * xs)
            return A * out / math.sqrt(2 * math.pi)
        raise DomainError("custom descriptors have no closed-form transform")

    def hdot_half_sq(self):
        """Closed-form squared homogeneous H^{1/2} norm (dilation invariant)."""
        A = self.amplitude
        if self.name == "gaussian":
            return A * A
        if self.name == "lorentzian":
            return A * A * math.pi / 4.0
        if self.name == "hat":
            return A * A * 4.0 * math.log(2.0) / math.pi
        if self.name == "indicator":
            return math.inf
        raise DomainError("custom descriptors have no closed-form norm")

    def hdot_one_sq(self):
        """Closed-form ``int |f'|^2``."""
        A, w = self.amplitude, self.width
        if self.name == "gaussian":
            return A * A * math.sqrt(math.pi / 2.0) / w
        if self.name == "lorentzian":
            return A * A * math.pi / (4.0 * w)
        if self.name == "hat":
            return 2.0 * A * A / w
        if self.name == "indicator":
            return math.inf
        raise DomainError("custom descriptors have no closed-form norm")

    def piecewise_linear(self):
        """Knots and linear pieces ``(t, alpha, beta)`` with ``f = alpha_j + beta_j t`` on
        the ``j``-th of the ``len(t) + 1`` intervals cut out by the knots.

        Only continuous, compactly supported piecewise-linear forms qualify.
        """
        if self.name != "hat":
            raise DomainError(f"{self.name} is not a continuous piecewise-linear form")
        A, w = self.amplitude, self.width
        t = np.array([-w, 0.0, w])
        alpha = np.array([0.0, A, A, 0.0])
        beta = np.array([0.0, A / w, -A / w, 0.0])
        return t, alpha, beta

    def ring_descriptor(self):
        return RingDescriptor(self)

    # -- geometry -----------------------------------------------------------
    @property
    def is_even(self):
        if self.name == "indicator":
            return self.params["left"] == -self.params["right"]
        return self.name != "custom"

    @property
    def support(self):
        if self.name == "hat":
            return (-self.width, self.width)
        if self.name == "indicator":
            return (self.params["left"], self.params["right"])
        return None

    @property
    def breakpoints(self):
        if self.name == "hat":
            return (-self.width, 0.0, self.width)
        if self.name == "indicator":
            return (self.params["left"], self.params["right"])
        return ()

    def tail_radius(self, tol=1e-10):
        """Half-width beyond which ``|f| < tol * sup|f|``."""
        w = self.width
        if self.name == "gaussian":
            return w * math.sqrt(math.log(1.0 / tol))
        if self.name == "lorentzian":
            return w * math.sqrt(1.0 / tol)
        if self.support is not None:
            lo, hi = self.support
            return max(abs(lo), abs(hi))
        raise DomainError("custom descriptors need an explicit grid")


@dataclass(frozen=True)
class RingDescriptor:
    """Closed form of ``f_- - f_+`` for a base descriptor ``f``.

    Behaves like a descriptor for grid sampling: calling it on real points
    returns the (purely imaginary) ring values.
    """

    base: Descriptor

    @property
    def name(self):
        return f"ring[{self.base.name}]"

    def __call__(self, t):
        return self.base.ring(np.asarray(t, dtype=float))

    def complex_value(self, z):
        if not self.base.is_holomorphic:
            raise DomainError(f"ring of {self.base.name} has no holomorphic continuation")
        return self.base.ring(z)

    @property
    def is_holomorphic(self):
        return self.base.is_holomorphic

    @property
    def singular_distance(self):
        return self.base.singular_distance

    @property
    def is_piecewise_linear(self):
        return self.base.name == "hat"

    @property
    def moments(self):
        """``(int f, int t f)``, which fix the ``1/t`` and ``1/t^2`` tails of the ring."""
        return self.base.integral, self.base.first_moment

    def to_record(self):
        return {"name": "ring", "base": self.base.to_record()}


def gaussian(width=1.0, amplitude=1.0):
    return Descriptor("gaussian", {"width": width, "amplitude": amplitude})


def lorentzian(width=1.0, amplitude=1.0):
    return Descriptor("lorentzian", {"width": width, "amplitude": amplitude})


def hat(width=1.0, amplitude=1.0):
    return Descriptor("hat", {"width": width, "amplitude": amplitude})


def indicator(left=-1.0, right=1.0, amplitude=1.0):
    return Descriptor("indicator", {"left": left, "right": right, "amplitude": amplitude})


def custom(func):
    return Descriptor("custom", {}, func=func)
