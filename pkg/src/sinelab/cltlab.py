"""Linear statistics of the sine process: variance, Monte Carlo, MGF and rates.

For a real test function ``g`` the statistic is ``S_g = sum_x g(x)`` over the
points of a configuration and ``S_g - E S_g`` its centered version.  Its
variance has the exact spectral form

    Var S_g = int |g_hat(xi)|^2 min(|xi| / (2 pi), 1) d xi      (unitary g_hat),

which is the Fourier side of the double integral of
``|g(x) - g(y)|^2 K(x, y)^2 / 2``.  For ``g = f(./R)`` the weight becomes
``|xi| / (2 pi)`` as ``R`` grows and the variance tends to
``sigma^2 = ||f||^2_{H^{1/2}} / (2 pi)``.

The Esseen pipeline writes the characteristic function of ``S / sigma`` as
``exp(-xi^2 / 2) W(xi)`` with ``W(xi) = V(i xi / sigma)`` and turns bounds on
``W - 1`` and ``W'`` into a Kolmogorov-Smirnov bound.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, sici

from . import hankel, sinedpp
from .descriptors import Descriptor
from .errors import ConditioningError, DomainError, ResolutionError
from .funcspace import GridFunction, fourier_transform, sobolev_norm

__all__ = [
    "additive_functional",
    "exact_variance",
    "limit_variance",
    "SampleSummary",
    "monte_carlo_statistics",
    "ECDF",
    "ks_distance",
    "BoundReport",
    "esseen_bound",
    "RateReport",
    "rate_fit",
    "MGFCheck",
    "mgf_check",
    "write_rate_table",
    "default_T_grid",
]


# ---------------------------------------------------------------------------
# additive functionals and variance
# ---------------------------------------------------------------------------


def additive_functional(cfg, g):
    """``sum_x g(x)`` over the points of ``cfg``.

    ``g`` is evaluated through :class:`GridFunction`: its closed form when a
    descriptor is attached, linear interpolation of the samples otherwise.
    """
    pts = np.asarray(cfg.points if hasattr(cfg, "points") else cfg, dtype=float)
    if pts.size == 0:
        return 0.0
    return float(np.sum(np.real(g(pts))))


def _l2_sq(d):
    A, w = d.amplitude, d.width
    if d.name == "gaussian":
        return A * A * w * math.sqrt(math.pi / 2)
    if d.name == "lorentzian":
        return A * A * w * math.pi / 2
    if d.name == "hat":
        return 2 * A * A * w / 3
    if d.name == "indicator":
        return A * A * (d.params["right"] - d.params["left"])
    raise DomainError("no closed-form L2 norm")


def _variance_closed_form(d, panels):
    # Var = ||g||^2 - 2 int_0^{2 pi} |g_hat|^2 (1 - xi / 2 pi) d xi   (|g_hat| even)
    edges = np.linspace(0.0, 2 * math.pi, panels + 1)
    u, wu = np.polynomial.legendre.leggauss(16)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    xi = (mid[:, None] + half[:, None] * u[None, :]).ravel()
    w = (half[:, None] * wu[None, :]).ravel()
    amp2 = np.abs(d.fourier(xi)) ** 2
    return _l2_sq(d) - 2.0 * float(np.sum(w * amp2 * (1.0 - xi / (2 * math.pi))))


def _sinc2_tail(a):
    """``int_a^inf sinc(u)^2 du`` for ``a >= 0``."""
    a = np.asarray(a, dtype=float)
    si, _ = sici(2 * math.pi * a)
    with np.errstate(invalid="ignore", divide="ignore"):
        lead = np.where(a > 0, np.sin(math.pi * a) ** 2 / (math.pi**2 * np.where(a > 0, a, 1.0)), 0.0)
    return lead + (math.pi / 2 - si) / math.pi


def _tensor_variance(g, lo, hi, breaks, per_unit):
    edges = np.unique(np.concatenate([np.linspace(lo, hi, int(math.ceil(hi - lo)) + 1), [b for b in breaks if lo < b < hi]]))
    u, wu = np.polynomial.legendre.leggauss(per_unit)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    x = (mid[:, None] + half[:, None] * u[None, :]).ravel()
    w = (half[:, None] * wu[None, :]).ravel()
    gx = np.real(g(x))
    inner = 0.0
    for i in range(0, x.size, 2048):
        xi = x[i : i + 2048]
        d = (gx[i : i + 2048, None] - gx[None, :]) ** 2 * np.sinc(xi[:, None] - x[None, :]) ** 2
        inner += float(w[i : i + 2048] @ d @ w)
    # pairs with one point outside [lo, hi], where g vanishes
    outer = float(np.sum(w * gx**2 * (_sinc2_tail(hi - x) + _sinc2_tail(x - lo))))
    return 0.5 * inner + outer


def exact_variance(g, method="auto", rtol=1e-8):
    """Variance of ``S_g`` under the sine process.

    ``method="spectral"`` integrates the spectral form: in closed form when
    ``g`` carries a descriptor with a known transform, from the FFT of the
    samples otherwise.  ``method="quadrature"`` applies tensor Gauss-Legendre
    quadrature to the double integral over the support of ``g`` (or the grid),
    with the pairs that leave it integrated exactly.  Every route is repeated
    at higher resolution and :class:`ResolutionError` is raised if the two
    differ by more than ``rtol`` (relative; at least ``1e-6`` for sampled data).
    """
    d = g.descriptor if isinstance(g, GridFunction) else g
    vals = np.asarray(g.values) if isinstance(g, GridFunction) else None
    if vals is not None and not np.any(vals):
        return 0.0
    if method == "auto":
        method = "spectral"
    if method == "spectral":
        if isinstance(d, Descriptor) and d.name != "custom":
            scale = max(d.width, 1.0)
            m = int(math.ceil(8 * scale)) + 64
            v1, v2 = _variance_closed_form(d, m), _variance_closed_form(d, 2 * m)
        else:
            if not isinstance(g, GridFunction):
                raise DomainError("sampled spectral route needs a GridFunction")

            def from_fft(pad):
                sp = fourier_transform(g, pad=pad, tail_tol=1.0)
                a2 = np.abs(sp.amplitudes) ** 2
                wgt = np.minimum(np.abs(sp.xi) / (2 * math.pi), 1.0)
                # Euler-Maclaurin correction for the kink of |xi| at the origin
                a0 = float(np.interp(0.0, sp.xi, a2))
                return float(np.sum(a2 * wgt) * sp.freq_step) + sp.freq_step**2 * a0 / (12 * math.pi)

            v1, v2 = from_fft(2), from_fft(5)
            # sampled data: spectral accuracy is limited by the grid itself
            rtol = max(rtol, 1e-6)
    elif method == "quadrature":
        if isinstance(d, Descriptor) and d.support is not None:
            lo, hi = d.support
            breaks = d.breakpoints
            fun = d
        elif isinstance(g, GridFunction):
            lo, hi, breaks, fun = g.grid_start, g.grid_end, (), g
        else:
            raise DomainError("quadrature route needs a compact support or a grid")
        v1 = _tensor_variance(fun, lo, hi, breaks, 12)
        v2 = _tensor_variance(fun, lo, hi, breaks, 24)
    else:
        raise DomainError(f"unknown method {method!r}")
    if abs(v1 - v2) > rtol * max(abs(v2), 1e-300):
        raise ResolutionError(f"variance not converged under refinement: {v1:.12g} vs {v2:.12g}")
    return max(v2, 0.0)


def limit_variance(f):
    """``sigma^2 = ||f||^2_{H^{1/2}} / (2 pi)``: the limit of ``Var S_{f(./R)}``."""
    d = f.descriptor if isinstance(f, GridFunction) else f
    if isinstance(d, Descriptor) and d.name not in ("custom",):
        n2 = d.hdot_half_sq()
    elif isinstance(f, GridFunction):
        n2 = sobolev_norm(fourier_transform(f), 0.5) ** 2
    else:
        raise DomainError("need a descriptor or a sampled function")
    if not math.isfinite(n2):
        raise DomainError(f"{d.name} has infinite H^1/2 norm")
    return n2 / (2 * math.pi)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class ECDF:
    """Empirical distribution function of a sample."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.sort(np.asarray(self.x, dtype=float))

    @property
    def n(self):
        return self.x.size

    def __call__(self, t):
        return np.searchsorted(self.x, t, side="right") / self.n


@dataclass
class SampleSummary:
    R: float
    N: int
    values: np.ndarray
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    lam_grid: np.ndarray
    mgf: np.ndarray
    mgf_stderr: np.ndarray
    xi_grid: np.ndarray
    charfn: np.ndarray
    seed: int
    window: dict = field(default_factory=dict)

    @property
    def ecdf(self):
        return ECDF(self.values)

    def to_record(self, include_values=False):
        rec = {
            "R": self.R,
            "N": self.N,
            "mean": self.mean,
            "variance": self.variance,
            "stderr_mean": self.stderr_mean,
            "stderr_variance": self.stderr_variance,
            "lambda": self.lam_grid.tolist(),
            "mgf": [[z.real, z.imag] for z in self.mgf],
            "mgf_stderr": self.mgf_stderr.tolist(),
            "xi": self.xi_grid.tolist(),
            "charfn": [[z.real, z.imag] for z in self.charfn],
            "seed": self.seed,
            "window": self.window,
        }
        if include_values:
            rec["values"] = self.values.tolist()
        return rec


def _as_descriptor(f):
    if isinstance(f, Descriptor):
        return f
    if isinstance(f, GridFunction) and isinstance(f.descriptor, Descriptor):
        return f.descriptor
    raise DomainError("need a closed-form descriptor")


def _moments(values, lam):
    e = np.exp(np.multiply.outer(values, lam))
    m = e.mean(axis=0)
    se = np.sqrt(np.mean(np.abs(e - m) ** 2, axis=0) / values.size)
    return m, se


def monte_carlo_statistics(f, R, N, seed, margin=8.0, n_nodes=None, workers=None,
                           lam_grid=None, xi_grid=None):
    """``N`` replicates of the centered statistic of ``f(./R)``.

    The window is ``[-L, L]`` from :func:`sinedpp.window_policy`; centering is
    by the quadrature integral of ``f(./R)`` over the window, which is the
    exact mean of the discretized process.
    """
    if N < 2:
        raise DomainError("N must be at least 2")
    d = _as_descriptor(f)
    gR = d.dilate(R)
    L, trunc = sinedpp.window_policy(d, R, margin)
    es = sinedpp.build_kernel_eigensystem(L, n_nodes)
    node_vals = np.real(gR(es.nodes))
    centre = float(np.sum(es.weights * node_vals))
    sums, counts = sinedpp.linear_statistics(es, node_vals, N, seed, workers=workers)
    s = sums - centre
    lam_grid = np.linspace(-1.0, 1.0, 9) if lam_grid is None else np.asarray(lam_grid, dtype=complex)
    xi_grid = np.linspace(0.0, 4.0, 17) if xi_grid is None else np.asarray(xi_grid, dtype=float)
    mgf, mgf_se = _moments(s, lam_grid)
    cf, _ = _moments(s, 1j * xi_grid)
    var = float(s.var(ddof=1))
    m4 = float(np.mean((s - s.mean()) ** 4))
    return SampleSummary(
        float(R), int(N), s, float(s.mean()), var, math.sqrt(var / N), math.sqrt(max(m4 - var * var, 0.0) / N),
        lam_grid, mgf, mgf_se, xi_grid, cf, seed,
        {"L": L, "n_nodes": es.n_nodes, "margin": margin, "truncated_mass": trunc,
         "centre": centre, "mean_count": float(counts.mean())},
    )


def ks_distance(sample, sigma):
    """``sup_x |F_n(x) - Phi(x / sigma)|`` over both one-sided limits at the sample points."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    x = sample.x if isinstance(sample, ECDF) else np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("empty sample")
    F = ndtr(x / sigma)
    k = np.arange(1, n + 1)
    return float(max(np.max(k / n - F), np.max(F - (k - 1) / n)))


# ---------------------------------------------------------------------------
# MGF identity
# ---------------------------------------------------------------------------


@dataclass
class MGFCheck:
    R: float
    lam: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    gaussian_factor: np.ndarray
    V: np.ndarray
    predicted: np.ndarray
    z: np.ndarray
    sigma2: float

    def to_record(self):
        c = lambda a: [[complex(v).real, complex(v).imag] for v in a]
        return {"R": self.R, "lambda": c(self.lam), "empirical": c(self.empirical),
                "stderr": self.stderr.tolist(), "V": c(self.V), "predicted": c(self.predicted),
                "z": self.z.tolist(), "sigma2": self.sigma2}


def mgf_check(f, R, lams, N, seed, summary=None, n_quad=128, **mc_kwargs):
    """Empirical ``E exp(lam S)`` against ``exp(lam^2 sigma^2 / 2) V(lam)``.

    ``lams`` may be complex; on the imaginary axis this compares the empirical
    characteristic function with the determinant.  ``z`` is the discrepancy in
    units of the Monte Carlo standard error.
    """
    d = _as_descriptor(f)
    lams = np.asarray(lams, dtype=complex)
    if summary is None:
        summary = monte_carlo_statistics(d, R, N, seed, lam_grid=lams, **mc_kwargs)
    emp, se = _moments(summary.values, lams)
    s2 = limit_variance(d)
    ring = hankel.ring_grid_function(d)
    V = np.array([hankel.fredholm_det_V(ring, lam, R, n_quad=n_quad).value for lam in lams])
    gfac = np.exp(lams**2 * s2 / 2)
    pred = gfac * V
    return MGFCheck(float(R), lams, emp, se, gfac, V, pred, np.abs(emp - pred) / se, s2)


# ---------------------------------------------------------------------------
# Esseen bound
# ---------------------------------------------------------------------------


def default_T_grid():
    return tuple(2.0**k for k in range(1, 10))


@dataclass
class BoundReport:
    R: float
    sigma: float
    T: float
    kappa0: float
    kappa1: float
    bound: float
    diagnostics: dict = field(default_factory=dict)

    def to_record(self):
        return {"R": self.R, "sigma": self.sigma, "T": self.T, "kappa0": self.kappa0,
                "kappa1": self.kappa1, "bound": self.bound, "diagnostics": self.diagnostics}


def esseen_bound(f, R, T_grid=None, xi_step=0.05, n_circle=64, circle_radius=2.0, n_kappa1=41,
                 W=None, sigma=None, n_quad=128):
    """``kappa0 + kappa1 + 4 / T`` minimized over ``T`` in ``T_grid``.

    ``kappa0(T) = max_{|xi| <= T} |W(xi) - 1|`` on a grid of spacing ``xi_step``
    and ``kappa1 = max_{|xi| <= 1} |W'(xi)|`` from the Cauchy formula on one
    circle of radius ``circle_radius`` around 0.  Since ``W(-xi)`` is the
    conjugate of ``W(xi)`` only ``xi >= 0`` is scanned; the scan stops once
    ``kappa0 + kappa1`` exceeds the best bound found, as larger ``T`` cannot
    do better.  If the determinant becomes ill-conditioned at some ``xi``
    the scan also stops there and ``T`` is restricted to the values already
    covered; the offending ``xi`` is reported in the diagnostics.  ``W`` (a
    callable of complex ``xi``) replaces the determinant in self-test mode.
    """
    T_grid = sorted(float(t) for t in (T_grid or default_T_grid()))
    if not T_grid or T_grid[0] <= 0:
        raise DomainError("T_grid must hold positive values")
    if sigma is None:
        sigma = math.sqrt(limit_variance(_as_descriptor(f)))
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if W is None:
        ring = hankel.ring_grid_function(_as_descriptor(f))
        if R <= 0:
            raise DomainError("R must be positive")

        def W(xi):
            return hankel.fredholm_det_V(ring, 1j * xi / sigma, R, n_quad=n_quad).value

    pts = np.linspace(0.0, 1.0, n_kappa1)
    cres = hankel.cauchy_derivative(None, pts, R, n_circle=n_circle, radius=circle_radius,
                                    integrand=W, center=0.0)
    kappa1 = float(np.max(np.abs(cres.derivative)))
    best = (math.inf, None, None)
    kappa0 = 0.0
    xi = 0.0
    evals = 0
    barrier = None
    for T in T_grid:
        n_T = int(round(T / xi_step))
        k = int(round(xi / xi_step))
        while k < n_T:
            k += 1
            try:
                w = W(k * xi_step)
            except ConditioningError as exc:
                barrier = (k * xi_step, str(exc))
                break
            xi = k * xi_step
            evals += 1
            kappa0 = max(kappa0, abs(w - 1.0))
            if kappa0 + kappa1 >= best[0]:
                break
        if barrier is not None or kappa0 + kappa1 >= best[0]:
            break
        b = kappa0 + kappa1 + 4.0 / T
        if b < best[0]:
            best = (b, T, kappa0)
    bound, T, k0 = best
    if T is None:
        # not even the smallest T could be covered
        raise ConditioningError(f"at xi = {barrier[0]:.4g}: {barrier[1]}")
    diag = {"xi_step": xi_step, "evaluations": evals, "xi_reached": xi,
            "circle_radius": circle_radius, "n_circle": n_circle, "circle_max_abs_W": cres.max_modulus,
            "T_grid": T_grid, "conditioning_barrier": None if barrier is None else barrier[0],
            "conditioning_message": None if barrier is None else barrier[1]}
    return BoundReport(float(R), float(sigma), float(T), float(k0), kappa1, float(bound), diag)


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------


@dataclass
class RateReport:
    model: str
    R: np.ndarray
    values: np.ndarray
    c: float
    residuals: np.ndarray
    loglog_slope: float
    loglog_intercept: float

    @property
    def residual_norm(self):
        return float(np.sqrt(np.sum(self.residuals**2)))

    def to_record(self):
        return {"model": self.model, "R": self.R.tolist(), "values": self.values.tolist(), "c": self.c,
                "residuals": self.residuals.tolist(), "residual_norm": self.residual_norm,
                "loglog_slope": self.loglog_slope, "loglog_intercept": self.loglog_intercept}


_MODELS = {"inverse_log": lambda R: 1.0 / np.log(R), "inverse_linear": lambda R: 1.0 / R}


def rate_fit(points, model):
    """Least squares of ``value = c * x(R)`` through the origin, with
    ``x = 1 / log R`` or ``x = 1 / R``; a free log-log line is fitted alongside."""
    if model not in _MODELS:
        raise DomainError(f"model must be one of {sorted(_MODELS)}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise DomainError("need at least four (R, value) points")
    R, v = pts[:, 0], pts[:, 1]
    if np.any(R <= 1) or np.unique(R).size != R.size:
        raise DomainError("R values must be distinct and greater than 1")
    x = _MODELS[model](R)
    c = float(x @ v / (x @ x))
    res = v - c * x
    if np.all(v > 0):
        slope, icpt = np.polyfit(np.log(R), np.log(v), 1)
    else:
        slope, icpt = math.nan, math.nan
    return RateReport(model, R, v, c, res, float(slope), float(icpt))


def write_rate_table(path, rows, fits=()):
    """CSV with columns R, empirical_ks, bound and one fitted column per model."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "empirical_ks", "bound"] + [f"fit_{r.model}" for r in fits])
        for R, ks, b in rows:
            extra = [r.c * float(_MODELS[r.model](np.array(R))) for r in fits]
            w.writerow([R, "" if ks is None else ks, b] + extra)


def to_json(obj):
    return json.dumps(obj.to_record(), sort_keys=True)
