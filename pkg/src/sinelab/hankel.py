"""Hankel operators with exponential symbols and the determinant ``V_f``.

Notation.  For a real test function ``f`` with ring part ``r = f_- - f_+``
(purely imaginary on the line) and a complex parameter ``lam`` put

    B(t) = exp(lam * r(t)) - 1,      C(t) = exp(-lam * r(t)) - 1,

and ``a = 2 pi R``.  The Hankel operator of a symbol ``h`` acts on
``L^2(0, inf)`` with kernel ``(2 pi)^{-1/2} h_hat(s + t)`` (unitary transform).
The determinant

    V(lam) = det(1 - chi_(a,inf) H(B) H(C~) chi_(a,inf)),   C~(t) = C(-t),

is the factor by which the moment generating function of the centered
statistic of ``f(./R)`` differs from the Gaussian one.  Working with ``f``
itself and truncation point ``a`` is unitarily equivalent to working with
the dilated symbol ``exp(lam * r(./(2 pi R)))`` and truncation point 1; the
latter form is what :attr:`SymbolSpectrum.spectrum` stores.

Three ways to obtain the transforms are provided.  Symbols of functions that
continue holomorphically into a strip (gaussian, lorentzian) are transformed
by shifting the integration contour below the real axis, which keeps full
relative accuracy where the transform is exponentially small.  For
continuous piecewise-linear ``f`` (hat) the contour is pushed down onto
vertical branch cuts under the knots; the transform becomes a sum of
exponentials and the determinant reduces to a finite matrix.  Everything
else goes through a tail-corrected FFT.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import roots_laguerre, roots_legendre

from .descriptors import RingDescriptor
from .errors import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    OverflowGuardError,
    RangeError,
    ResolutionError,
)
from .funcspace import GridFunction, SpectrumGrid, fourier_transform, make_grid_function, shifted_tail_seminorm

__all__ = [
    "SymbolSpectrum",
    "DeterminantEvaluation",
    "HSNorm",
    "CauchyResult",
    "ScalingReport",
    "HalfLineTransform",
    "seminorm_scaling",
    "build_symbol",
    "ring_grid_function",
    "hankel_hs_norm",
    "fredholm_det_V",
    "cauchy_derivative",
    "FFT_GUARD",
    "HARD_GUARD",
]

FFT_GUARD = 30.0
HARD_GUARD = 600.0
_SQ2PI = math.sqrt(2 * math.pi)
_DECAY_DEPTH = 40.0
_CUT_SPAN = 40.0
_CUT_STEP = 0.2


# ---------------------------------------------------------------------------
# ring part on a grid
# ---------------------------------------------------------------------------


def ring_grid_function(f, step=1 / 64, half_width=None):
    """Sample the ring part of a descriptor-backed ``f`` on a uniform grid.

    ``f`` is a :class:`GridFunction` with a closed-form descriptor or the
    descriptor itself.  The grid covers ``[-half_width, half_width]`` (default:
    the descriptor's 1e-10 tail radius, at least 1024).
    """
    d = f.descriptor if isinstance(f, GridFunction) else f
    if d is None:
        raise DomainError("ring_grid_function needs a closed-form descriptor")
    if half_width is None:
        half_width = max(1024.0, min(d.tail_radius(1e-10), 4096.0))
    n = int(2 * math.ceil(half_width / step)) + 1
    rd = d.ring_descriptor()
    return make_grid_function(rd, -step * (n // 2), step, n)


def _ring_moments(f_ring):
    d = f_ring.descriptor
    if isinstance(d, RingDescriptor):
        return d.moments
    # estimate from the 1/t tail at the grid ends: i pi t r(t) ~ m0 + m1 / t
    t = f_ring.t
    v = np.asarray(f_ring.values)
    k = max(8, t.size // 20)
    tt = np.concatenate([t[:k], t[-k:]])
    yy = (1j * math.pi * tt * np.concatenate([v[:k], v[-k:]])).real
    A = np.stack([np.ones_like(tt), 1.0 / tt], axis=1)
    m0, m1 = np.linalg.lstsq(A, yy, rcond=None)[0]
    return float(m0), float(m1)


# ---------------------------------------------------------------------------
# transforms on the half line [a, a + span]
# ---------------------------------------------------------------------------


@dataclass
class HalfLineTransform:
    """Unitary transform of one symbol on ``[a, a + span]``; zero beyond.

    ``pieces`` holds ``(lo, hi, cheb_coeffs, envelope_poly)`` for the contour
    method, where the value is ``cheb(v) * exp(envelope(v))``.  For the FFT
    method ``grid`` / ``values`` are used with linear interpolation.
    """

    a: float
    span: float
    method: str
    pieces: list = field(default_factory=list)
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    exponents: np.ndarray | None = None
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape, dtype=complex)
        if self.method == "zero":
            return out
        if self.method == "cut":
            flat = v.ravel()
            res = np.empty(flat.size, dtype=complex)
            for i in range(0, flat.size, 4096):
                blk = flat[i : i + 4096]
                res[i : i + 4096] = np.exp(-np.outer(blk - self.a, self.exponents)) @ self.weights
            return res.reshape(v.shape) / _SQ2PI
        if self.method == "fft":
            inside = (v >= self.a) & (v <= self.a + self.span)
            vv = v[inside]
            out[inside] = np.interp(vv, self.grid, self.values.real) + 1j * np.interp(vv, self.grid, self.values.imag)
            return out
        for lo, hi, coef, env in self.pieces:
            m = (v >= lo) & (v <= hi)
            if not np.any(m):
                continue
            x = (2 * v[m] - (lo + hi)) / (hi - lo)
            out[m] = C.chebval(x, coef) * np.exp(np.polyval(env, v[m] - self.a))
        return out

    def sampled(self, step):
        """The transform on a uniform grid from ``a`` to ``a + span``."""
        n = int(math.ceil(self.span / step)) + 1
        v = self.a + step * np.arange(n)
        return v, self(v)


def _symbol(ring, mu, sign):
    """``z -> exp(mu * ring(sign * z)) - 1`` evaluated stably with a phase factor."""

    def ev(z, phase_exp=0.0):
        e = mu * ring.complex_value(sign * z)
        return np.exp(e + phase_exp) - np.exp(phase_exp)

    return ev


def _log_envelope(ring, mu, sign, y, X, sing):
    """``max_s log|exp(mu ring(sign(s - i y))) - 1|`` on a graded s-grid."""
    t = np.linspace(-1, 1, 801)
    s = X * np.sinh(6 * t) / math.sinh(6)
    z = s - 1j * y
    e = mu * ring.complex_value(sign * z)
    with np.errstate(over="ignore", divide="ignore"):
        re = e.real
        # log|e^e - 1| without overflow
        big = re > 30
        lv = np.empty_like(re)
        lv[big] = re[big]
        lv[~big] = np.log(np.abs(np.expm1(e[~big])) + 1e-300)
    return float(lv.max())


def _y_candidates(sing):
    if math.isinf(sing):
        return np.linspace(0.0, 6.0, 121)
    frac = 1.0 - np.geomspace(1e-4, 1.0, 80)[::-1]
    return np.unique(np.concatenate([[0.0], sing * frac[frac < 0.9999]]))


class _ContourEngine:
    """Transforms ``g(z) = exp(mu ring(sign z)) - 1`` at positive frequencies."""

    def __init__(self, ring, mu, sign, X0=6.0, n_gl=16, n_lag=40):
        self.ring = ring
        self.mu = complex(mu)
        self.sign = sign
        self.sing = ring.singular_distance
        self.ycand = _y_candidates(self.sing)
        self.X0 = X0
        self.gl = roots_legendre(n_gl)
        self.lag = roots_laguerre(n_lag)
        self._env_cache = {}

    def _X(self, v, y):
        if math.isinf(self.sing):
            reach = y + self.lag[0][-1] / v
            return max(self.X0, math.sqrt(reach * reach + 60.0))
        return self.X0

    def envelope_table(self, y):
        key = float(y)
        if key not in self._env_cache:
            self._env_cache[key] = _log_envelope(self.ring, self.mu, self.sign, y, self.X0 + 10, self.sing)
        return self._env_cache[key]

    def best_y(self, v):
        # stay a saddle-point distance away from a singularity of exp(mu ring)
        ymax = self.sing - max(0.5 * math.sqrt(abs(self.mu) / (2.0 * v)), 1e-3)
        best, by = math.inf, 0.0
        for y in self.ycand:
            if y > ymax:
                break
            val = self.envelope_table(y) - v * y
            if val < best:
                best, by = val, y
        return by, best

    def _panels(self, v, y, X):
        dist_cap = 8.0 / (v + 2.0 * y + 1.0)
        edges = [-X]
        s = -X
        while s < X:
            d = math.hypot(s, self.sing - y) if not math.isinf(self.sing) else math.inf
            # local phase rate of mu * ring near a pole is about |mu| / (2 d^2)
            w = min(dist_cap, 0.3 * d, 8.0 * d * d / max(abs(self.mu), 1e-12)) if not math.isinf(d) else dist_cap
            w = max(w, 1e-6)
            s = min(X, s + w)
            edges.append(s)
        return np.asarray(edges)

    def transform(self, v):
        y, _ = self.best_y(v)
        X = self._X(v, y)
        g = _symbol(self.ring, self.mu, self.sign)
        edges = self._panels(v, y, X)
        xg, wg = self.gl
        lo, hi = edges[:-1, None], edges[1:, None]
        s = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xg[None, :]
        w = 0.5 * (hi - lo) * wg[None, :]
        z = s - 1j * y
        seg = np.sum(w * g(z, -1j * v * z))
        # vertical rays z = +-X - i (y + t / v), t >= 0, weight exp(-t) absorbed by Laguerre
        tl, wl = self.lag
        u = y + tl / v
        zr = X - 1j * u
        zl = -X - 1j * u
        # e^{-i v z} on the ray = e^{-i v (+-X)} e^{-v y} e^{-t}; the e^{-t} is the Laguerre weight
        ph = -v * y
        right = np.sum(wl * g(zr, -1j * v * X + ph)) * (-1j) / v
        left = np.sum(wl * g(zl, 1j * v * X + ph)) * (1j) / v
        return (seg + right + left) / _SQ2PI


def _contour_transform(ring, mu, sign, a, n_cheb=40, max_pieces=64, tol=1e-12):
    eng = _ContourEngine(ring, mu, sign)
    # span: where the envelope has fallen by the decay depth
    e_a = eng.best_y(a)[1]
    span, step = 0.0, 1.0
    while True:
        span += step
        if eng.best_y(a + span)[1] < e_a - _DECAY_DEPTH:
            break
        step *= 1.25
        if span > 1e6:
            raise ResolutionError("symbol transform does not decay")
    # smooth log-envelope model: quadratic through three sampled points
    vs = a + span * np.array([0.0, 0.5, 1.0])
    es = np.array([eng.best_y(v)[1] for v in vs])
    env = np.polyfit(vs - a, es, 2)

    pieces = []
    queue = [(a, a + span)]
    xk = np.cos(np.pi * (np.arange(n_cheb) + 0.5) / n_cheb)
    calls = 0
    while queue:
        lo, hi = queue.pop(0)
        v = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xk
        vals = np.array([eng.transform(vv) for vv in v]) * np.exp(-np.polyval(env, v - a))
        calls += n_cheb
        coef = C.chebfit(xk, vals, n_cheb - 1)
        scale = np.max(np.abs(coef))
        if scale == 0 or np.max(np.abs(coef[-4:])) <= tol * scale or len(pieces) + len(queue) >= max_pieces:
            pieces.append((lo, hi, coef, env))
        else:
            mid = 0.5 * (lo + hi)
            queue.extend([(lo, mid), (mid, hi)])
    pieces.sort(key=lambda p: p[0])
    tail = max(np.max(np.abs(p[2][-4:])) / max(np.max(np.abs(p[2])), 1e-300) for p in pieces)
    return HalfLineTransform(
        a, span, "contour", pieces=pieces,
        diagnostics={"chebyshev_pieces": len(pieces), "chebyshev_tail": float(tail), "contour_evaluations": calls},
    )


class _PiecewiseLinear:
    """Continuous compactly supported piecewise-linear ``f`` (knots ``t``,
    pieces ``alpha_j + beta_j z`` on the ``len(t) + 1`` intervals)."""

    def __init__(self, t, alpha, beta):
        self.t = np.asarray(t, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.c = np.diff(self.beta)

    def reflected(self):
        return _PiecewiseLinear(-self.t[::-1], self.alpha[::-1], -self.beta[::-1])

    def psi(self, z):
        """``(1/pi) sum_j c_j (z - t_j) Log(z - t_j)``; on the line from below this
        is ``Hf + i f``."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for cj, tj in zip(self.c, self.t):
            w = z - tj
            nz = w != 0
            out[nz] += cj * w[nz] * np.log(w[nz])
        return out / math.pi

    def ring_below(self, z, j):
        """Continuation of the ring part into the lower half plane from interval ``j``."""
        return -1j * self.psi(z) - (self.alpha[j] + self.beta[j] * z)


def _cut_transform(pl, mu, a, n_nodes, growth_margin=0.2):
    """Transform of ``exp(mu r) - 1`` for piecewise-linear ``f`` as an exponential sum.

    Deforming the Fourier integral into the lower half plane leaves one
    vertical branch cut under every knot ``t_k``, so for ``v >= a``

        B_hat(v) = (2 pi)^{-1/2} sum_k exp(-i v t_k) int_0^inf exp(-v u) J_k(u) du.

    The ``u``-integrals are discretized by the trapezoid rule in ``log u``,
    which turns the transform into ``sum_r W_r exp(-p_r v)``.
    """
    g = abs(mu.imag) * float(np.max(np.abs(pl.beta)))
    a_eff = a - g
    if a_eff < growth_margin * a:
        raise RangeError(f"cut representation needs a = {a:.4g} well above the growth rate {g:.4g}")
    u_max = 50.0 / a_eff
    s = np.linspace(math.log(u_max * 1e-11), math.log(u_max), n_nodes)
    h = s[1] - s[0]
    u = np.exp(s)
    exps, wts = [], []
    for k, tk in enumerate(pl.t):
        z = tk - 1j * u
        psi = pl.psi(z)
        e_left = mu * (-1j * psi - (pl.alpha[k] + pl.beta[k] * z))
        e_right = mu * (-1j * psi - (pl.alpha[k + 1] + pl.beta[k + 1] * z))
        J = 1j * (np.exp(e_left) - np.exp(e_right))
        p = u + 1j * tk
        exps.append(p)
        wts.append(h * u * J * np.exp(-a * p))
    p = np.concatenate(exps)
    W = np.concatenate(wts)
    # leading large-v behaviour: B_hat ~ (2 pi)^{-1/2} sum_k j_k exp(-i v t_k) / v^2
    jk = []
    for k, tk in enumerate(pl.t):
        rk = -1j * pl.psi(np.array([tk - 1e-300j]))[0] - (pl.alpha[k] + pl.beta[k] * tk)
        jk.append(mu * pl.c[k] * np.exp(mu * rk))
    return HalfLineTransform(
        a, float("inf"), "cut", exponents=p, weights=W,
        diagnostics={"laplace_nodes": int(n_nodes), "rank": int(p.size), "growth": g,
                     "tail_coefficients": [complex(x) for x in jk]},
    )


def _fft_full(f_ring, mu, moments, step, half_width):
    """Unitary transform of ``exp(mu r) - 1`` on the whole line by FFT with the
    ``1/t`` and ``1/t^2`` tails handled analytically."""
    # symmetric about 0 so that kinks at the origin sample evenly
    n_half = int(math.floor(half_width / step))
    n = 2 * n_half + 1
    t_lo = -step * n_half
    t = t_lo + step * np.arange(n)
    d = f_ring.descriptor
    if d is not None:
        r = d(t)
    else:
        if t[0] < f_ring.grid_start or t[-1] > f_ring.grid_end:
            raise RangeError("ring grid too short for the requested transform")
        r = f_ring(t)
    e = mu * r
    if np.max(np.real(e)) > FFT_GUARD:
        raise OverflowGuardError(f"Re(lam * ring) reaches {np.max(np.real(e)):.3g} > {FFT_GUARD}")
    m0, m1 = moments
    c1 = -1j * mu * m0 / math.pi
    c2 = -1j * mu * m1 / math.pi - 0.5 * (mu * m0 / math.pi) ** 2
    vals = np.expm1(e) - (c1 * t + c2) / (t * t + 1.0)
    g = GridFunction(t_lo, step, vals)
    spec = fourier_transform(g, pad=1, tail_tol=1.0, max_freq_step=0.05)
    xi = spec.xi
    amps = spec.amplitudes + math.sqrt(math.pi / 2) * np.exp(-np.abs(xi)) * (c1 * (-1j) * np.sign(xi) + c2)
    return SpectrumGrid(spec.freq_start, spec.freq_step, amps, origin=t_lo, n_signal=n)


def _fft_halfline(spec, a, sign, span=None):
    xi = spec.xi
    if sign < 0:
        xi = -xi[::-1]
        amps = spec.amplitudes[::-1]
    else:
        amps = spec.amplitudes
    top = xi[-1]
    if span is None:
        span = 0.9 * top - a
    if span <= 0 or a + span > top:
        raise ResolutionError(f"FFT frequency range {top:.4g} does not reach past a = {a:.4g}")
    m = (xi >= a - 2 * spec.freq_step) & (xi <= a + span + 2 * spec.freq_step)
    return HalfLineTransform(a, span, "fft", grid=xi[m], values=amps[m],
                             diagnostics={"fft_freq_step": spec.freq_step, "fft_top": float(top)})


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


@dataclass
class SymbolSpectrum:
    """Exponential symbols of one ring part at one ``(lam, R)``.

    ``plus`` is the transform of ``B = exp(lam r) - 1`` and ``minus`` that of
    the reflected ``C~(t) = exp(-lam r(-t)) - 1``, both in the undilated
    frequency variable on ``[a, a + span]``.
    """

    f_ring: GridFunction
    lam: complex
    R: float
    plus: HalfLineTransform
    minus: HalfLineTransform
    method: str
    moments: tuple
    fft_step: float = 1 / 64

    @property
    def a(self):
        return 2 * math.pi * self.R

    @cached_property
    def spectrum(self):
        """Whole-line transform of ``exp(lam r(./(2 pi R))) - 1`` by FFT.

        Raises :class:`OverflowGuardError` when ``|Re(lam r)| > 30``.
        """
        if self.lam == 0:
            n = 1024
            return SpectrumGrid(-n // 2 * 0.01, 0.01, np.zeros(n))
        hw = min(self.f_ring.grid_end, -self.f_ring.grid_start)
        sp = _fft_full(self.f_ring, self.lam, self.moments, self.fft_step, hw)
        c = self.a
        return SpectrumGrid(sp.freq_start / c, sp.freq_step / c, sp.amplitudes * c,
                            origin=sp.origin * c, n_signal=sp.n_signal)

    def tail_spectrum(self, side="plus", step=None):
        """Transform of the dilated symbol on ``[1, 1 + span / a]`` (uniform grid).

        For ``side="minus"`` the reflected symbol is used.
        """
        ht = self.plus if side == "plus" else self.minus
        if ht.method == "cut":
            # exponential sums never vanish; sample a fixed multiple of a
            span = _CUT_SPAN * self.a
            step = step or min(_CUT_STEP, span / 65536)
            v = self.a + step * np.arange(int(math.ceil(span / step)) + 1)
            vals = ht(v)
        else:
            if step is None:
                step = ht.span / 65536
            v, vals = ht.sampled(step)
        c = self.a
        return SpectrumGrid(v[0] / c, step / c, vals * c)

    def to_record(self):
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "R": self.R,
            "method": self.method,
            "span_plus": self.plus.span,
            "span_minus": self.minus.span,
            "plus": self.plus.diagnostics,
            "minus": self.minus.diagnostics,
        }


def _max_re(f_ring, lam):
    v = np.asarray(f_ring.values)
    return max(float(np.max(np.real(lam * v))), float(np.max(np.real(-lam * v))))


def build_symbol(f_ring, lam, R, method="auto", fft_step=None, span=None, n_laplace=128):
    """Transforms of the symbols ``exp(+-lam r)`` truncated at ``a = 2 pi R``.

    ``method`` is ``"contour"`` (closed form holomorphic in a strip needed),
    ``"cut"`` (continuous piecewise-linear closed form), ``"fft"`` or
    ``"auto"``; ``n_laplace`` is the number of nodes per branch cut.  On the FFT route ``|Re(lam r)|`` must stay below
    30 on the line; the contour route only refuses values beyond 600.
    """
    lam = complex(lam)
    if R <= 0:
        raise DomainError("R must be positive")
    vals = np.asarray(f_ring.values)
    if np.max(np.abs(vals.real)) > 1e-8 * max(1.0, np.max(np.abs(vals))):
        raise DomainError("ring part must be purely imaginary")
    moments = _ring_moments(f_ring)
    a = 2 * math.pi * R
    if lam == 0:
        z = HalfLineTransform(a, 1.0, "zero")
        return SymbolSpectrum(f_ring, lam, float(R), z, z, "zero", moments)
    d = f_ring.descriptor
    holo = isinstance(d, RingDescriptor) and d.is_holomorphic
    plin = isinstance(d, RingDescriptor) and d.is_piecewise_linear
    top = _max_re(f_ring, lam)
    if method == "auto":
        if holo:
            method = "contour"
        elif plin:
            g = abs(lam.imag) * float(np.max(np.abs(d.base.piecewise_linear()[2])))
            method = "cut" if a - g >= 0.2 * a else "fft"
        else:
            method = "fft"
    if method == "cut":
        if not plin:
            raise DomainError("cut method needs a continuous piecewise-linear closed form")
        if top > HARD_GUARD:
            raise OverflowGuardError(f"Re(lam * ring) reaches {top:.3g} > {HARD_GUARD}")
        pl = _PiecewiseLinear(*d.base.piecewise_linear())
        plus = _cut_transform(pl, lam, a, n_laplace)
        minus = plus if d.base.is_even else _cut_transform(pl.reflected(), lam, a, n_laplace)
        return SymbolSpectrum(f_ring, lam, float(R), plus, minus, method, moments)
    if method == "contour":
        if not holo:
            raise DomainError("contour method needs a holomorphic closed form")
        if top > HARD_GUARD:
            raise OverflowGuardError(f"Re(lam * ring) reaches {top:.3g} > {HARD_GUARD}")
        plus = _contour_transform(d, lam, 1, a)
        # an even f has an odd ring part, and then C~ = B
        minus = plus if d.base.is_even else _contour_transform(d, -lam, -1, a)
        return SymbolSpectrum(f_ring, lam, float(R), plus, minus, method, moments)
    if method != "fft":
        raise DomainError(f"unknown method {method!r}")
    if top > FFT_GUARD:
        raise OverflowGuardError(f"Re(lam * ring) reaches {top:.3g} > {FFT_GUARD}")
    if fft_step is None:
        fft_step = f_ring.grid_step
        if d is not None:
            fft_step = min(fft_step, math.pi / (8.0 * (a + 16.0)))
    if math.pi / fft_step < 1.5 * a:
        raise ResolutionError(f"grid step {fft_step:.3g} cannot resolve frequencies near a = {a:.4g}")
    hw = min(f_ring.grid_end, -f_ring.grid_start)
    sp_p = _fft_full(f_ring, lam, moments, fft_step, hw)
    plus = _fft_halfline(sp_p, a, 1, span)
    if isinstance(d, RingDescriptor) and d.base.is_even:
        minus = plus
    else:
        minus = _fft_halfline(_fft_full(f_ring, -lam, moments, fft_step, hw), a, -1, span)
    return SymbolSpectrum(f_ring, lam, float(R), plus, minus, method, moments, fft_step)


# ---------------------------------------------------------------------------
# Nystrom discretization
# ---------------------------------------------------------------------------


def _nodes(n, scale):
    u, w = roots_legendre(n)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    x = scale * u / (1.0 - u)
    wx = scale * w / (1.0 - u) ** 2
    return x, wx


def _default_scale(sym):
    sp = max(sym.plus.span, sym.minus.span)
    return sp / 4.0


def _nystrom(ht, x, wx):
    sw = np.sqrt(wx)
    k = ht(ht.a + x[:, None] + x[None, :])
    return sw[:, None] * k * sw[None, :] / _SQ2PI


@dataclass(frozen=True)
class HSNorm:
    value: float
    spectral: float
    nystrom: float
    printed_seminorm: float
    side: str
    relative_gap: float

    def to_record(self):
        return dict(self.__dict__)


def hankel_hs_norm(sym, side="plus", n_quad=128, scale=None, rtol=1e-4, check=True):
    """Hilbert-Schmidt norm of ``chi_(1,inf) H(h)`` for one symbol.

    Route (a) integrates ``(2 pi)^{-1} int_0^inf xi |h_hat(xi + 1)|^2`` on the
    dilated spectrum; route (b) is the Frobenius norm of the Nystrom matrix.
    ``printed_seminorm`` is ``(int_1^inf xi |h_hat(xi + 1)|^2)^{1/2}`` taken
    literally, reported for comparison.  Returns route (a).
    """
    if side not in ("plus", "minus"):
        raise DomainError("side must be 'plus' or 'minus'")
    if sym.method == "zero":
        return HSNorm(0.0, 0.0, 0.0, 0.0, side, 0.0)
    ht = sym.plus if side == "plus" else sym.minus
    spec = sym.tail_spectrum(side)
    a_sq = shifted_tail_seminorm(spec, 1.0, lower=0.0, tail_tol=1.0) ** 2
    if ht.method == "cut":
        # oscillation-averaged tail of |h_hat|^2 ~ |sum_k j_k e^{-i v t_k}|^2 / v^4
        # beyond the sampled range; V is the last sampled point in dilated units
        c = sym.a
        V = spec.xi[-1]
        q = sum(abs(j) ** 2 for j in ht.diagnostics["tail_coefficients"]) / (2 * math.pi * c * c)
        a_sq += q * (1 / (2 * V * V) - 1 / (3 * V**3))
    a_val = math.sqrt(a_sq) / _SQ2PI
    printed = _tail_or_zero(spec, 1.0)
    if ht.method == "cut":
        b_val = _cut_hs(ht)
    else:
        if scale is None:
            scale = _default_scale(sym)
        x, wx = _nodes(n_quad, scale)
        b_val = float(np.linalg.norm(_nystrom(ht, x, wx)))
    gap = abs(a_val - b_val) / max(abs(a_val), 1e-300)
    if check and gap > rtol:
        raise ConsistencyError(f"HS routes disagree: spectral {a_val:.10g} vs Nystrom {b_val:.10g} (rel {gap:.2e})")
    return HSNorm(a_val, a_val, b_val, printed, side, gap)


@dataclass(frozen=True)
class ScalingReport:
    """Both sides of the dilation relation for the tail seminorm.

    ``undilated`` is ``||h||_(R)`` with ``h = exp(lam r(./2pi)) - 1`` and
    ``dilated`` is ``||h(./R)||_(1)``, both with the lower limit 1 taken
    literally.  Substitution shows ``dilated^2 = int_R^inf xi |h_hat(xi + R)|^2``,
    so the two agree only at ``R = 1``.
    """

    R: float
    undilated: float
    dilated: float
    discrepancy: float

    def to_record(self):
        return dict(self.__dict__)


def _tail_or_zero(spec, shift):
    # the transform is stored only where it is not negligible
    try:
        return shifted_tail_seminorm(spec, shift, lower=1.0, tail_tol=1.0)
    except RangeError:
        return 0.0


def seminorm_scaling(sym, side="plus", step=None):
    """Evaluate both sides of the seminorm dilation relation numerically."""
    if sym.method == "zero":
        return ScalingReport(sym.R, 0.0, 0.0, 0.0)
    ht = sym.plus if side == "plus" else sym.minus
    span = _CUT_SPAN * sym.a if math.isinf(ht.span) else ht.span
    # h_hat(eta) = 2 pi B_hat(2 pi eta); tabulate on [R, R + span / 2 pi]
    step = step or min(_CUT_STEP, span / 65536) / (2 * math.pi)
    eta = sym.R + step * np.arange(int(math.ceil(span / (2 * math.pi) / step)) + 1)
    spec = SpectrumGrid(eta[0], step, 2 * math.pi * ht(2 * math.pi * eta))
    lhs = _tail_or_zero(spec, sym.R)
    rhs = _tail_or_zero(sym.tail_spectrum(side), 1.0)
    return ScalingReport(sym.R, lhs, rhs, abs(lhs - rhs))


# ---------------------------------------------------------------------------
# the determinant
# ---------------------------------------------------------------------------


@dataclass
class DeterminantEvaluation:
    lam: complex
    R: float
    n_quad: int
    value: complex
    hs_norm_plus: float
    hs_norm_minus: float
    diagnostics: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "lambda": {"re": self.lam.real, "im": self.lam.imag},
            "R": self.R,
            "n_quad": self.n_quad,
            "value": {"re": self.value.real, "im": self.value.imag},
            "hs_norm_plus": self.hs_norm_plus,
            "hs_norm_minus": self.hs_norm_minus,
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True)


def _cut_coeffs(ht):
    """Kernel ``(2 pi)^{-1/2} B_hat(a + x + y) = sum_r D_r exp(-p_r (x + y))``."""
    return ht.exponents, ht.weights / (2 * math.pi)


def _cut_hs(ht):
    p, D = _cut_coeffs(ht)
    G = 1.0 / (p[:, None] + np.conj(p)[None, :])
    return math.sqrt(max(float(np.real(D @ (G * G) @ np.conj(D))), 0.0))


def _cut_det(sym):
    # with U_r(x) = exp(-p_r x) the operators are U D U^T and Y E Y^T, and
    # det(1 - U D U^T Y E Y^T) = det(1 - D G E G^T) with G = U^T Y
    p, D = _cut_coeffs(sym.plus)
    q, E = _cut_coeffs(sym.minus)
    P = np.sqrt(D)[:, None] / (p[:, None] + q[None, :]) * np.sqrt(E)[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        sign, logdet = np.linalg.slogdet(np.eye(p.size) - P @ P.T)
        value = complex(sign * np.exp(logdet))
    return value, _cut_hs(sym.plus), _cut_hs(sym.minus)


def _det_from_symbol(sym, n_quad, scale):
    if sym.method == "cut":
        return _cut_det(sym)
    x, wx = _nodes(n_quad, scale)
    A = _nystrom(sym.plus, x, wx)
    Bm = _nystrom(sym.minus, x, wx)
    M = A @ Bm
    with np.errstate(over="ignore", invalid="ignore"):
        sign, logdet = np.linalg.slogdet(np.eye(n_quad) - M)
        value = complex(sign * np.exp(logdet))
    return value, float(np.linalg.norm(A)), float(np.linalg.norm(Bm))


def _as_ring(f):
    if isinstance(f, GridFunction) and isinstance(f.descriptor, RingDescriptor):
        return f
    return ring_grid_function(f)


def fredholm_det_V(f, lam, R, n_quad=128, check_doubling=False, tol=1e-6, max_condition=50.0,
                   method="auto", scale=None, symbol=None):
    """``V(lam)`` for ``f(./R)`` by Nystrom quadrature on mapped Gauss-Legendre nodes.

    ``f`` is a :class:`GridFunction` with a closed-form descriptor (or an already
    sampled ring part).  For piecewise-linear ``f`` the kernel is an exact
    sum of exponentials and ``n_quad`` counts Laplace nodes per branch cut.
    With ``check_doubling`` the evaluation is repeated
    with ``2 n_quad`` nodes and :class:`ResolutionError` is raised if the two
    differ by more than ``tol``.
    """
    lam = complex(lam)
    if n_quad < 32:
        raise DomainError("n_quad must be at least 32")
    if lam == 0:
        return DeterminantEvaluation(lam, float(R), n_quad, 1 + 0j, 0.0, 0.0, {"method": "zero"})
    if symbol is None:
        symbol = build_symbol(_as_ring(f), lam, R, method=method, n_laplace=n_quad)
    sym = symbol
    if scale is None and sym.method != "cut":
        scale = _default_scale(sym)
    value, hp, hm = _det_from_symbol(sym, n_quad, scale)
    diag = {"method": sym.method, "scale": scale, **{f"symbol_{k}": v for k, v in sym.to_record().items() if k in ("span_plus", "span_minus")}}
    if hp * hm > max_condition:
        raise ConditioningError(f"HS factor product {hp * hm:.3g} exceeds {max_condition}")
    if not np.isfinite(value):
        raise ConditioningError("determinant is not finite")
    if check_doubling:
        if sym.method == "cut":
            sym2 = build_symbol(sym.f_ring, lam, R, method="cut", n_laplace=2 * n_quad)
            v2, _, _ = _det_from_symbol(sym2, 2 * n_quad, scale)
        else:
            v2, _, _ = _det_from_symbol(sym, 2 * n_quad, scale)
        diff = abs(v2 - value)
        diag["doubling_difference"] = diff
        if diff > tol:
            raise ResolutionError(f"V changed by {diff:.2e} under doubling n_quad={n_quad}")
    return DeterminantEvaluation(lam, float(R), n_quad, value, hp, hm, diag)


# ---------------------------------------------------------------------------
# derivative by the Cauchy formula
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CauchyResult:
    derivative: complex
    max_modulus: float
    lam0: complex
    radius: float
    n_circle: int


def cauchy_derivative(f, lam0, R, n_circle=64, radius=1.0, integrand=None, center=None, **det_kwargs):
    """``V'(lam0) = (2 pi i)^{-1} oint V(z) / (z - lam0)^2 dz`` on a circle.

    The circle has the given ``radius`` around ``center`` (default ``lam0``);
    with an explicit centre ``lam0`` may be an array of points inside it and
    the derivative is returned at each of them from the same samples.
    ``integrand`` replaces ``V`` (a callable of complex ``z``); this is the
    self-test mode.  Returns the derivative and ``max |V|`` on the circle.
    """
    lam0_arr = np.asarray(lam0, dtype=complex)
    c = complex(lam0) if center is None else complex(center)
    if np.any(np.abs(lam0_arr - c) >= radius):
        raise DomainError("evaluation points must lie inside the circle")
    th = 2 * np.pi * np.arange(n_circle) / n_circle
    e = np.exp(1j * th)
    z = c + radius * e
    if integrand is None:
        vals = np.array([fredholm_det_V(f, zz, R, **det_kwargs).value for zz in z])
    else:
        vals = np.asarray([integrand(zz) for zz in z], dtype=complex)
    # dz = i r e^{i th} dth
    kern = radius * e[None, :] / (z[None, :] - lam0_arr.reshape(-1, 1)) ** 2
    der = np.mean(vals[None, :] * kern, axis=1)
    der = complex(der[0]) if lam0_arr.ndim == 0 else der.reshape(lam0_arr.shape)
    return CauchyResult(der, float(np.max(np.abs(vals))), lam0 if lam0_arr.ndim else complex(lam0),
                        float(radius), int(n_circle))
