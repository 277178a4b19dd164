"""Sampling the sine process restricted to a window ``[-L, L]``.

The sine kernel ``K(x, y) = sin(pi (x - y)) / (pi (x - y))`` is discretized on
Gauss-Legendre nodes; the symmetrized matrix ``sqrt(w_i) K(x_i, x_j) sqrt(w_j)``
is the marginal kernel of a determinantal process on the nodes, whose points
approximate the continuous process at node resolution.

Sampling follows the spectral scheme: each eigenvector is kept independently
with probability equal to its eigenvalue, and the points of the resulting
projection process are drawn one at a time.  The sequential step is run with
stale (upper bound) residual norms and rejection, so that the projections can
be applied in blocks through matrix products.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import quad

from .errors import DegeneracyError, DomainError, ResolutionError

__all__ = [
    "sine_kernel",
    "KernelEigensystem",
    "Configuration",
    "build_kernel_eigensystem",
    "rng_stream",
    "sample_configuration",
    "sample_batch",
    "linear_statistics",
    "expected_count",
    "window_policy",
    "batch_sample",
    "BatchResult",
]

CLIP_TOL = 1e-8
POSITIVITY_TOL = 1e-10


def sine_kernel(x, y):
    """``sin(pi (x - y)) / (pi (x - y))`` with the value 1 on the diagonal."""
    return np.sinc(np.subtract(x, y))


@dataclass(frozen=True)
class KernelEigensystem:
    """Eigen-decomposition of the discretized sine kernel on ``[-L, L]``.

    ``eigenvectors[:, k]`` holds the values of the k-th eigenfunction at the
    nodes, orthonormal for the weighted inner product ``sum_i w_i u_i v_i``.
    """

    L: float
    nodes: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clip_excess: float = 0.0
    _unit: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self):
        return self.nodes.size

    def unit_vectors(self):
        """Eigenvectors of the symmetrized matrix (Euclidean orthonormal)."""
        return self._unit

    def orthonormality_error(self):
        G = self.eigenvectors.T @ (self.weights[:, None] * self.eigenvectors)
        return float(np.max(np.abs(G - np.eye(self.n_nodes))))


@dataclass(frozen=True)
class Configuration:
    """Sorted point set from one replicate."""

    points: np.ndarray
    L: float
    seed: int | None = None
    replicate: int | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1:
            raise DomainError("points must be one-dimensional")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise DomainError("points must be strictly increasing")
        if p.size and (p[0] < -self.L or p[-1] > self.L):
            raise DomainError("points must lie in the window")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"])
            for x in self.points:
                w.writerow([repr(float(x))])

    @classmethod
    def from_csv(cls, path, L, seed=None, replicate=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([float(r[0]) for r in rows]), L, seed, replicate)


def build_kernel_eigensystem(L, n_nodes=None):
    """Nystrom eigen-decomposition of the sine kernel on ``n_nodes`` Gauss-Legendre nodes.

    ``n_nodes`` defaults to ``max(32, ceil(4 L) + 16)``; fewer than ``4 L``
    nodes raise :class:`ResolutionError`.
    """
    L = float(L)
    if not L > 0:
        raise DomainError("L must be positive")
    if n_nodes is None:
        n_nodes = max(32, int(math.ceil(4 * L)) + 16)
    n_nodes = int(n_nodes)
    if n_nodes < 4 * L:
        raise ResolutionError(f"n_nodes={n_nodes} below the guard 4L={4 * L:g}")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    x = x * L
    w = w * L
    sw = np.sqrt(w)
    A = sw[:, None] * sine_kernel(x[:, None], x[None, :]) * sw[None, :]
    lam, U = np.linalg.eigh(A)
    excess = float(max(0.0, -lam.min(), lam.max() - 1.0))
    if excess > CLIP_TOL:
        raise DegeneracyError(f"eigenvalues leave [0, 1] by {excess:.3g}")
    lam = np.clip(lam, 0.0, 1.0)
    U = np.ascontiguousarray(U)
    phi = U / sw[:, None]
    for arr in (x, w, lam, U, phi):
        arr.setflags(write=False)
    return KernelEigensystem(L, x, w, lam, phi, excess, U)


def expected_count(es):
    """Mean number of points in the window: the trace of the kernel."""
    return float(np.sum(es.eigenvalues))


def rng_stream(seed, replicate):
    """Counter-based generator owned by one replicate."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(int(replicate),))))


@numba.njit(cache=True)
def _projection_sample(U, lam, rng):
    """Node indices of one sample; also the most negative residual seen."""
    n = U.shape[0]
    sel = np.empty(n, np.int64)
    k = 0
    for j in range(n):
        if rng.random() < lam[j]:
            sel[k] = j
            k += 1
    out = np.empty(k, np.int64)
    worst = 0.0
    if k == 0:
        return out, worst
    V = np.empty((n, k))
    for i in range(n):
        for c in range(k):
            V[i, c] = U[i, sel[c]]
    N = np.empty(n)
    for i in range(n):
        s = 0.0
        for c in range(k):
            s += V[i, c] * V[i, c]
        N[i] = s
    # N[i] has the first lev[i] directions of Qt removed
    lev = np.zeros(n, np.int64)
    Qt = np.zeros((k, k))
    # C[i, c] = V[i] . Qt[c] for the applied directions c < p0
    C = np.empty((n, k))
    coef = np.empty(k)
    m = 0
    p0 = 0
    while m < k:
        if m - p0 >= max(1, (k - m) // 4):
            Qb = np.ascontiguousarray(Qt[p0:m].T)
            Cm = np.dot(V, Qb)
            C[:, p0:m] = Cm
            for i in range(n):
                if lev[i] >= m:
                    continue
                s = N[i]
                for c in range(lev[i] - p0 if lev[i] > p0 else 0, m - p0):
                    s -= Cm[i, c] * Cm[i, c]
                if s < worst:
                    worst = s
                N[i] = s if s > 0.0 else 0.0
                lev[i] = m
            p0 = m
        total = 0.0
        for i in range(n):
            total += N[i]
        u = rng.random() * total
        i = 0
        acc = N[0]
        while acc <= u and i < n - 1:
            i += 1
            acc += N[i]
        vi = V[i]
        r = N[i]
        for c in range(p0, m):
            d = 0.0
            for q in range(k):
                d += vi[q] * Qt[c, q]
            coef[c] = d
            if c >= lev[i]:
                r -= d * d
        if r < worst:
            worst = r
        if r < 0.0:
            r = 0.0
        if rng.random() * N[i] < r:
            w = vi.copy()
            if m > 0:
                coef[:p0] = C[i, :p0]
                w = w - np.dot(coef[:m], Qt[:m])
                if np.dot(w, w) < 0.5 * r:
                    # cancellation: one more orthogonalization pass
                    w = w - np.dot(np.dot(Qt[:m], w), Qt[:m])
            nrm = math.sqrt(np.dot(w, w))
            for q in range(k):
                Qt[m, q] = w[q] / nrm
            out[m] = i
            m += 1
            N[i] = 0.0
            lev[i] = k
        else:
            N[i] = r
            lev[i] = m
    return np.sort(out), worst


def sample_configuration(es, rng, seed=None, replicate=None):
    """One draw of the discretized process; ``rng`` is a numpy ``Generator``."""
    idx, worst = _projection_sample(es.unit_vectors(), es.eigenvalues, rng)
    if worst < -POSITIVITY_TOL:
        raise DegeneracyError(f"conditional density reached {worst:.3g}")
    return Configuration(es.nodes[idx], es.L, seed, replicate)


def _statistics_range(es, node_values, seed, start, stop):
    U, lam = es.unit_vectors(), es.eigenvalues
    out = np.empty((stop - start, node_values.shape[1]))
    counts = np.empty(stop - start, np.int64)
    for r in range(start, stop):
        idx, worst = _projection_sample(U, lam, rng_stream(seed, r))
        if worst < -POSITIVITY_TOL:
            raise DegeneracyError(f"conditional density reached {worst:.3g} in replicate {r}")
        out[r - start] = node_values[idx].sum(axis=0)
        counts[r - start] = idx.size
    return out, counts


def linear_statistics(es, node_values, N, seed, workers=None, start=0):
    """Sums ``sum_x g(x)`` over sampled configurations without materializing them.

    ``node_values`` has shape ``(n_nodes,)`` or ``(n_nodes, m)`` (``m`` functions
    at once).  Returns the sums (shape ``(N,)`` or ``(N, m)``) and the point
    counts; replicate ``r`` uses :func:`rng_stream` ``(seed, r)``, exactly as in
    :func:`sample_batch`.
    """
    v = np.asarray(node_values, dtype=float)
    flat = v.ndim == 1
    v = v.reshape(es.n_nodes, -1)
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or N < 256:
        sums, counts = _statistics_range(es, v, seed, start, start + N)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_statistics_range, es, v, seed, a, b) for a, b in _chunks(start, N, workers)]
            parts = [f.result() for f in futs]
        sums = np.concatenate([p[0] for p in parts])
        counts = np.concatenate([p[1] for p in parts])
    return (sums[:, 0] if flat else sums), counts


def _sample_range(es, seed, start, stop):
    return [sample_configuration(es, rng_stream(seed, r), seed, r) for r in range(start, stop)]


def _chunks(start, N, workers):
    edges = np.linspace(start, start + N, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def sample_batch(es, N, seed, workers=None, start=0):
    """Replicates ``start, ..., start + N - 1``; each owns its generator, so the
    result does not depend on ``workers``."""
    if N < 0:
        raise DomainError("N must be nonnegative")
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or N < 64:
        return _sample_range(es, seed, start, start + N)
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_sample_range, es, seed, a, b) for a, b in _chunks(start, N, workers)]
        for f in futs:
            out.extend(f.result())
    return out


def window_policy(descriptor, R, margin=8.0):
    """Window half-width for ``f(./R)`` and the mass ``int_{|x|>L} |f(x/R)| dx`` left out.

    Compactly supported descriptors get the exact support; the others
    ``L = margin * R``.
    """
    sup = descriptor.support
    if sup is not None:
        return R * max(abs(sup[0]), abs(sup[1])), 0.0
    L = margin * R
    g = lambda t: abs(descriptor(np.array([t]))[0])
    tail = quad(g, margin, np.inf, limit=200)[0] + quad(g, -np.inf, -margin, limit=200)[0]
    return L, R * tail


@dataclass
class BatchResult:
    eigensystem: KernelEigensystem
    configurations: list
    manifest: dict


def batch_sample(L, n_nodes, N, seed, out_dir=None, workers=None):
    """Sample ``N`` replicates and optionally write ``samples.csv`` (replicate, x)
    plus a ``manifest.json`` with every parameter."""
    es = build_kernel_eigensystem(L, n_nodes)
    cfgs = sample_batch(es, N, seed, workers=workers)
    counts = np.array([len(c) for c in cfgs])
    manifest = {
        "L": float(L),
        "n_nodes": es.n_nodes,
        "N": int(N),
        "seed": seed,
        "rng": "Philox, SeedSequence(seed, spawn_key=(replicate,))",
        "expected_count": expected_count(es),
        "mean_count": float(counts.mean()) if N else 0.0,
        "eigenvalue_clip_excess": es.clip_excess,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "samples.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "x"])
            for c in cfgs:
                for x in c.points:
                    w.writerow([c.replicate, repr(float(x))])
        manifest["samples_file"] = "samples.csv"
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return BatchResult(es, cfgs, manifest)
