"""Sampled functions, continuous Fourier transforms and the norms built on them.

Transforms use the unitary convention

    f_hat(xi) = (2 pi)^{-1/2} int f(t) exp(-i xi t) dt,

under which ``int |xi|^2 |f_hat|^2 = int |f'|^2``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.signal import fftconvolve

from .descriptors import Descriptor
from .errors import DomainError, RangeError, SpectralTailWarning, TailTruncationError

__all__ = [
    "GridFunction",
    "SpectrumGrid",
    "HolomorphicDescriptor",
    "make_grid_function",
    "default_grid",
    "fourier_transform",
    "inverse_transform",
    "sobolev_norm",
    "h1_seminorm_direct",
    "hardy_split",
    "hl_norm",
    "shifted_tail_seminorm",
    "write_csv",
    "read_grid_csv",
]

UNITARY = "unitary"


@dataclass(frozen=True)
class GridFunction:
    grid_start: float
    grid_step: float
    values: np.ndarray
    descriptor: Descriptor | None = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.size == 0:
            raise DomainError("values must be a nonempty 1-d sequence")
        if not self.grid_step > 0:
            raise DomainError("grid_step must be positive")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.values.size

    @property
    def t(self):
        return self.grid_start + self.grid_step * np.arange(self.n)

    @property
    def grid_end(self):
        return self.grid_start + self.grid_step * (self.n - 1)

    def __call__(self, x):
        """Closed form if a descriptor is attached, else linear interpolation."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.grid_start - 1e-12) or np.any(x > self.grid_end + 1e-12):
            raise RangeError("evaluation point outside the grid")
        if self.descriptor is not None:
            return self.descriptor(x)
        v = self.values
        if np.iscomplexobj(v):
            return np.interp(x, self.t, v.real) + 1j * np.interp(x, self.t, v.imag)
        return np.interp(x, self.t, v)

    def with_values(self, values, descriptor=None):
        return GridFunction(self.grid_start, self.grid_step, values, descriptor)


@dataclass(frozen=True)
class SpectrumGrid:
    """Samples of a unitary transform on ``freq_start + k * freq_step``.

    ``origin`` and ``n_signal`` remember the time grid so the transform can be
    inverted back onto it.
    """

    freq_start: float
    freq_step: float
    amplitudes: np.ndarray
    convention: str = UNITARY
    origin: float = 0.0
    n_signal: int | None = None
    real_source: bool = False

    def __post_init__(self):
        if self.convention != UNITARY:
            raise DomainError("only the unitary convention is supported")
        if not self.freq_step > 0:
            raise DomainError("freq_step must be positive")
        amps = np.asarray(self.amplitudes, dtype=complex).copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def xi(self):
        return self.freq_start + self.freq_step * np.arange(self.amplitudes.size)

    @property
    def time_step(self):
        return 2 * math.pi / (self.amplitudes.size * self.freq_step)

    def l2_norm(self):
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2) * self.freq_step))

    def __call__(self, xi):
        """Linear interpolation; zero outside the grid."""
        xi = np.asarray(xi, dtype=float)
        a = self.amplitudes
        g = self.xi
        return np.interp(xi, g, a.real, left=0.0, right=0.0) + 1j * np.interp(
            xi, g, a.imag, left=0.0, right=0.0
        )


@dataclass(frozen=True)
class HolomorphicDescriptor:
    """A closed form continued into the strip ``|Im z| < delta``.

    ``part`` selects the function itself (``"f"``) or its ring part
    (``"ring"``, i.e. ``f_- - f_+``).
    """

    descriptor: Descriptor
    delta: float
    part: str = "f"

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("strip half-width must be positive")
        if self.part not in ("f", "ring"):
            raise DomainError("part must be 'f' or 'ring'")
        if not self.descriptor.is_holomorphic:
            raise DomainError(f"{self.descriptor.name} is not holomorphic in a strip")
        if self.delta >= self.descriptor.singular_distance:
            raise DomainError(
                f"strip {self.delta} reaches a singularity at distance "
                f"{self.descriptor.singular_distance}"
            )

    def __call__(self, z):
        if self.part == "f":
            return self.descriptor.complex_value(z)
        return self.descriptor.ring(z)

    def scaled(self, c):
        return HolomorphicDescriptor(self.descriptor.scaled(c), self.delta, self.part)


def _pow2_at_least(n):
    return 1 << max(1, int(math.ceil(math.log2(n))))


def default_grid(descriptor, R=1.0, step=1 / 64, tail_tol=1e-10, max_points=1 << 22):
    """Grid ``(start, step, n)`` wide enough that the tails of ``f(./R)`` drop below
    ``tail_tol``; ``n`` is a power of two and the step grows if ``max_points`` would
    be exceeded."""
    half = descriptor.tail_radius(tail_tol) * R
    step = step * R
    n = _pow2_at_least(2 * half / step + 1)
    while n > max_points:
        step *= 2
        n = _pow2_at_least(2 * half / step + 1)
    start = -step * (n // 2)
    return start, step, n


def make_grid_function(descriptor, grid_start, grid_step, n_points):
    if n_points < 2:
        raise DomainError("need at least two grid points")
    if not grid_step > 0:
        raise DomainError("grid_step must be positive")
    t = grid_start + grid_step * np.arange(n_points)
    values = descriptor(t)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"non-finite sample of {descriptor.name}")
    return GridFunction(float(grid_start), float(grid_step), values, descriptor)


def _check_tails(values, tol):
    scale = np.max(np.abs(values))
    if scale == 0:
        return
    k = max(1, values.size // 200)
    edge = max(np.max(np.abs(values[:k])), np.max(np.abs(values[-k:])))
    if edge > tol * scale:
        raise TailTruncationError(
            f"function has not decayed at the grid ends: |edge| / sup = {edge / scale:.2e} > {tol:.1e}"
        )


def fourier_transform(g, pad=1, tail_tol=1e-6, max_freq_step=0.05):
    """Unitary transform of ``g`` by FFT.

    The signal is zero-padded to a power of two at least ``(1 + pad) * n`` long,
    so ``pad=1`` appends one window length of zeros.  Padding is increased
    further until the frequency step is at most ``max_freq_step``.
    """
    vals = np.asarray(g.values)
    _check_tails(vals, tail_tol)
    n = vals.size
    h = g.grid_step
    N = _pow2_at_least(max((1 + pad) * n, 2 * math.pi / (h * max_freq_step)))
    buf = np.zeros(N, dtype=complex)
    buf[:n] = vals
    F = np.fft.fftshift(np.fft.fft(buf))
    dxi = 2 * math.pi / (N * h)
    xi = (np.arange(N) - N // 2) * dxi
    F *= np.exp(-1j * xi * g.grid_start) * (h / math.sqrt(2 * math.pi))
    return SpectrumGrid(
        float(xi[0]), dxi, F, UNITARY, g.grid_start, n, real_source=not np.iscomplexobj(vals)
    )


def inverse_transform(spec, descriptor=None, real=None):
    """Back onto the original time grid; ``real`` drops the imaginary part."""
    N = spec.amplitudes.size
    h = spec.time_step
    xi = spec.xi
    buf = np.fft.ifftshift(spec.amplitudes * np.exp(1j * xi * spec.origin))
    vals = np.fft.ifft(buf) * N * spec.freq_step / math.sqrt(2 * math.pi)
    n = spec.n_signal or N
    vals = vals[:n]
    if real is None:
        real = spec.real_source
    if real:
        vals = vals.real
    return GridFunction(spec.origin, h, vals, descriptor)


def sobolev_norm(spec, order, tail_tol=1e-6, strict=False):
    """``(int |xi|^{2 order} |f_hat|^2 dxi)^{1/2}`` on the frequency grid.

    For order 1/2 the weight ``|xi|`` has a kink at the origin; the leading
    Euler-Maclaurin term for that kink, ``step^2 |f_hat(0)|^2 / 6``, is added
    to the trapezoidal sum.

    If the weighted spectrum is still above ``tail_tol`` (relative) at the edge
    of the grid a :class:`SpectralTailWarning` is issued, or
    :class:`TailTruncationError` raised when ``strict``.
    """
    if order not in (0.5, 1, 1.0):
        raise DomainError("order must be 1/2 or 1")
    xi = spec.xi
    dens = np.abs(xi) ** (2 * order) * np.abs(spec.amplitudes) ** 2
    peak = dens.max()
    if peak > 0:
        edge = max(dens[:4].max(), dens[-4:].max()) / peak
        if edge > tail_tol:
            msg = f"weighted spectrum at grid edge is {edge:.1e} of its peak"
            if strict:
                raise TailTruncationError(msg)
            warnings.warn(msg, SpectralTailWarning, stacklevel=2)
    total = float(np.sum(dens) * spec.freq_step)
    if order == 0.5:
        k0 = int(np.argmin(np.abs(xi)))
        if abs(xi[k0]) < 0.25 * spec.freq_step:
            total += spec.freq_step**2 * abs(spec.amplitudes[k0]) ** 2 / 6.0
    return math.sqrt(total)


def h1_seminorm_direct(g):
    """``(int |f'|^2)^{1/2}`` from grid differences (exact for piecewise-linear
    functions whose kinks sit on grid nodes)."""
    d = np.diff(np.asarray(g.values)) / g.grid_step
    return math.sqrt(float(np.sum(np.abs(d) ** 2) * g.grid_step))


def _periodization_defect(f, h, period):
    """``h * sum_m f_m c(t_j - s_m)`` with the smooth kernel
    ``c(u) = cot(pi u / P) / P - 1 / (pi u)``.

    The FFT applies the periodic Hilbert kernel ``cot(pi u / P) / P``; subtracting
    this convolution leaves the Hilbert transform on the line.
    """
    n = f.size
    u = h * np.arange(-(n - 1), n)
    c = np.zeros_like(u)
    nz = u != 0
    c[nz] = 1.0 / (period * np.tan(math.pi * u[nz] / period)) - 1.0 / (math.pi * u[nz])
    if np.iscomplexobj(f):
        out = fftconvolve(f.real, c, mode="full") + 1j * fftconvolve(f.imag, c, mode="full")
    else:
        out = fftconvolve(f, c, mode="full")
    return h * out[n - 1 : 2 * n - 1]


def hardy_split(spec):
    """Return ``(f_plus, f_minus, f_ring)`` on the original time grid.

    The zero-frequency and Nyquist bins are shared equally between the two
    halves, which keeps ``f_ring`` purely imaginary for real input.  The
    wrap-around of the slowly decaying ``1/t`` tails inherent to the FFT is
    removed by a smooth correction convolution.
    """
    xi = spec.xi
    plus = np.where(xi > 0, 1.0, 0.0)
    half = np.isclose(xi, 0.0, atol=0.25 * spec.freq_step)
    plus[half] = 0.5
    plus[0] = 0.5  # Nyquist bin
    minus = 1.0 - plus
    fp = inverse_transform(_with_amps(spec, spec.amplitudes * plus), real=False)
    fm = inverse_transform(_with_amps(spec, spec.amplitudes * minus), real=False)
    if spec.n_signal is not None and spec.n_signal < spec.amplitudes.size:
        f = inverse_transform(spec, real=False).values
        d = 0.5j * _periodization_defect(f, spec.time_step, spec.amplitudes.size * spec.time_step)
        fp = fp.with_values(fp.values - d)
        fm = fm.with_values(fm.values + d)
    ring = fm.values - fp.values
    return fp, fm, fp.with_values(ring)


def _with_amps(spec, amps):
    return SpectrumGrid(
        spec.freq_start, spec.freq_step, amps, spec.convention, spec.origin, spec.n_signal, False
    )


@dataclass(frozen=True)
class HLNormReport:
    value: float
    sup_term: float
    derivative_term: float
    sup_line: float
    derivative_line: float
    lines: np.ndarray = field(repr=False)


def hl_norm(h, n_lines=33, grid=None, report=False):
    """Norm of the strip space: sup of ``|f|`` over the strip plus the sup over
    horizontal lines of ``(int |f'(t + i d)|^2 dt)^{1/2}``.

    Both suprema run over ``n_lines`` equally spaced lines ``Im z = d`` with
    ``|d| <= delta``, boundary lines included.  Derivatives are central
    differences along each line.
    """
    if grid is None:
        start, step, n = default_grid(h.descriptor, tail_tol=1e-8, step=1 / 32, max_points=1 << 18)
    else:
        start, step, n = grid
    t = start + step * np.arange(n)
    lines = np.linspace(-h.delta, h.delta, n_lines)
    sup_vals = np.empty(n_lines)
    der_vals = np.empty(n_lines)
    for j, d in enumerate(lines):
        vals = np.asarray(h(t + 1j * d))
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"evaluation failed on the line Im z = {d}")
        sup_vals[j] = np.max(np.abs(vals))
        der = np.gradient(vals, step)
        der_vals[j] = math.sqrt(float(np.sum(np.abs(der) ** 2) * step))
    js, jd = int(np.argmax(sup_vals)), int(np.argmax(der_vals))
    value = float(sup_vals[js] + der_vals[jd])
    if not report:
        return value
    return HLNormReport(value, float(sup_vals[js]), float(der_vals[jd]), lines[js], lines[jd], lines)


def shifted_tail_seminorm(spec, R, lower=1.0, tail_tol=1e-6):
    """``(int_lower^inf xi |h_hat(xi + R)|^2 dxi)^{1/2}`` by Simpson's rule.

    The default ``lower=1`` is the seminorm itself.  ``lower=0`` gives the
    integral that equals the squared Hilbert-Schmidt norm of the truncated
    Hankel operator, up to the factor ``1/(2 pi)``.
    """
    if R < 0:
        raise DomainError("R must be nonnegative")
    xi = spec.xi
    a = np.abs(spec.amplitudes) ** 2
    x0 = R + lower
    if xi[-1] <= x0 + 2 * spec.freq_step:
        raise RangeError(f"spectrum grid ends at {xi[-1]:.4g}, below R + lower = {x0:.4g}")
    peak = a.max()
    if peak > 0 and a[-1] > tail_tol * peak:
        raise TailTruncationError("spectrum has not decayed at the upper end of the grid")
    k = int(np.searchsorted(xi, x0))
    # integrand (xi - R) |h|^2: Simpson's rule from the first node at or above
    # x0, the partial cell below it from the cubic through four nearby nodes
    f = (xi - R) * a
    total = float(simpson(f[k:], x=xi[k:])) if xi.size - k > 2 else 0.0
    if xi[k] > x0:
        j = min(max(k - 1, 0), xi.size - 4)
        c = np.polyfit(xi[j : j + 4] - x0, f[j : j + 4], 3)
        P = np.polyint(c)
        total += float(np.polyval(P, xi[k] - x0) - np.polyval(P, 0.0))
    return math.sqrt(max(total, 0.0))


def write_csv(obj, path):
    """Two-column export ``coordinate, value``; complex values as ``re, im``."""
    if isinstance(obj, GridFunction):
        x, v, head = obj.t, np.asarray(obj.values), "t"
    elif isinstance(obj, SpectrumGrid):
        x, v, head = obj.xi, obj.amplitudes, "xi"
    else:
        raise DomainError("can only export GridFunction or SpectrumGrid")
    cplx = np.iscomplexobj(v)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([head, "re", "im"] if cplx else [head, "value"])
        for xi, vi in zip(x, v):
            w.writerow([repr(float(xi)), repr(float(vi.real)), repr(float(vi.imag))] if cplx
                       else [repr(float(xi)), repr(float(vi))])


def read_grid_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x = data[:, 0]
    vals = data[:, 1] + 1j * data[:, 2] if data.shape[1] == 3 else data[:, 1]
    step = (x[-1] - x[0]) / (x.size - 1)
    return GridFunction(float(x[0]), float(step), vals)
