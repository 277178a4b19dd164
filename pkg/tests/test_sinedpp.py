import dataclasses
import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from sinelab import sinedpp as sd
from sinelab.descriptors import gaussian, hat, indicator, lorentzian
from sinelab.errors import DomainError, ResolutionError


@pytest.fixture(scope="module")
def small():
    return sd.build_kernel_eigensystem(1.5)


def marginal_kernel(es):
    sw = np.sqrt(es.weights)
    return sw[:, None] * sd.sine_kernel(es.nodes[:, None], es.nodes[None, :]) * sw[None, :]


# -- kernel and eigensystem --------------------------------------------------


def test_kernel_values():
    assert sd.sine_kernel(0.0, 0.0) == 1.0
    assert abs(sd.sine_kernel(0.0, 1.0)) < 1e-16
    assert sd.sine_kernel(2.5, 2.0) == pytest.approx(2 / math.pi)


@pytest.mark.parametrize("L, n, expected", [(5.0, 200, 10.0), (0.5, None, 1.0), (20.0, None, 40.0)])
def test_trace(L, n, expected):
    es = sd.build_kernel_eigensystem(L, n)
    # oracle: the quadrature sum of the diagonal K(x, x) = 1 is 2L
    assert float(np.sum(es.weights)) == pytest.approx(2 * L, abs=1e-12)
    assert sd.expected_count(es) == pytest.approx(expected, abs=1e-6)


def test_eigensystem_invariants():
    es = sd.build_kernel_eigensystem(5.0, 200)
    assert es.clip_excess <= sd.CLIP_TOL
    assert es.eigenvalues.min() >= 0 and es.eigenvalues.max() <= 1
    assert es.orthonormality_error() < 1e-10
    U = es.unit_vectors()
    assert np.allclose(U @ np.diag(es.eigenvalues) @ U.T, marginal_kernel(es), atol=1e-12)


def test_eigensystem_guards():
    with pytest.raises(ResolutionError):
        sd.build_kernel_eigensystem(10.0, 39)
    with pytest.raises(DomainError):
        sd.build_kernel_eigensystem(0.0)
    assert sd.build_kernel_eigensystem(10.0).n_nodes == 56


# -- sampling ----------------------------------------------------------------


def test_all_rejected_gives_empty(small):
    zero = dataclasses.replace(small, eigenvalues=np.zeros_like(small.eigenvalues))
    assert sd.expected_count(zero) == 0.0
    assert len(sd.sample_configuration(zero, sd.rng_stream(1, 0))) == 0


def test_full_projection_takes_every_node(small):
    full = dataclasses.replace(small, eigenvalues=np.ones_like(small.eigenvalues))
    cfg = sd.sample_configuration(full, sd.rng_stream(1, 0))
    assert np.array_equal(cfg.points, np.sort(small.nodes))


def test_count_distribution(small):
    # the count is a sum of independent Bernoulli(lambda_k)
    N = 20000
    _, counts = sd.linear_statistics(small, np.zeros(small.n_nodes), N, seed=3, workers=1)
    lam = small.eigenvalues
    mean, var = lam.sum(), float(np.sum(lam * (1 - lam)))
    assert abs(counts.mean() - mean) < 4 * math.sqrt(var / N)
    m4 = np.mean((counts - counts.mean()) ** 4)
    assert abs(counts.var(ddof=1) - var) < 4 * math.sqrt((m4 - var**2) / N)


def test_mean_of_statistics():
    # E S_f is the integral of f; on the discretized window that integral is
    # the quadrature sum, which is the oracle here
    es = sd.build_kernel_eigensystem(4.0)
    fs_ = [gaussian(width=1.5), hat(width=2.0), indicator(-1.0, 2.5)]
    vals = np.column_stack([np.real(f(es.nodes)) for f in fs_])
    N = 10000
    sums, _ = sd.linear_statistics(es, vals, N, seed=13, workers=1)
    exact = es.weights @ vals
    se = sums.std(axis=0, ddof=1) / math.sqrt(N)
    assert np.all(np.abs(sums.mean(axis=0) - exact) <= 3 * se)
    assert exact[0] == pytest.approx(1.5 * math.sqrt(math.pi) * math.erf(4.0 / 1.5), rel=1e-10)


def test_count_stable_under_node_doubling():
    N = 10000
    stats = []
    for n in (40, 80):
        es = sd.build_kernel_eigensystem(5.0, n)
        _, c = sd.linear_statistics(es, np.zeros(n), N, seed=17 + n, workers=1)
        c = c.astype(float)
        v = c.var(ddof=1)
        stats.append((c.mean(), v, v / N, (np.mean((c - c.mean()) ** 4) - v * v) / N))
    (m1, v1, sm1, sv1), (m2, v2, sm2, sv2) = stats
    assert abs(m1 - m2) <= 3 * math.sqrt(sm1 + sm2)
    assert abs(v1 - v2) <= 3 * math.sqrt(sv1 + sv2)


def test_inclusion_probabilities(small):
    # one- and two-point inclusion probabilities of a discrete DPP are
    # A_ii and A_ii A_jj - A_ij^2 for its marginal kernel A
    N = 20000
    n = small.n_nodes
    hits = np.zeros(n)
    pairs = np.zeros((n, n))
    for cfg in sd.sample_batch(small, N, seed=11, workers=1):
        ind = np.isin(small.nodes, cfg.points).astype(float)
        hits += ind
        pairs += np.outer(ind, ind)
    A = marginal_kernel(small)
    p1 = np.diag(A)
    z1 = (hits / N - p1) / np.sqrt(p1 * (1 - p1) / N)
    i, j = np.triu_indices(n, 1)
    p2 = (np.outer(p1, p1) - A**2)[i, j]
    z2 = (pairs[i, j] / N - p2) / np.sqrt(p2 * (1 - p2) / N)
    # Bonferroni over all tested cells at overall level 1e-3
    crit1 = norm.isf(1e-3 / (2 * n))
    crit2 = norm.isf(1e-3 / (2 * i.size))
    assert np.max(np.abs(z1)) < crit1
    assert np.max(np.abs(z2)) < crit2


def test_reproducible_and_worker_independent(small):
    a = sd.sample_batch(small, 80, seed=5, workers=1)
    b = sd.sample_batch(small, 80, seed=5, workers=2)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))
    assert [c.replicate for c in a] == list(range(80))
    c = sd.sample_batch(small, 80, seed=6, workers=1)
    assert not all(np.array_equal(x.points, y.points) for x, y in zip(a, c))


def test_offset_replicates(small):
    whole = sd.sample_batch(small, 10, seed=2, workers=1)
    tail = sd.sample_batch(small, 4, seed=2, workers=1, start=6)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(whole[6:], tail))


def test_statistics_match_configurations(small):
    g = gaussian(width=0.7)
    vals = np.column_stack([g(small.nodes), np.ones(small.n_nodes)])
    sums, counts = sd.linear_statistics(small, vals, 300, seed=9, workers=2)
    cfgs = sd.sample_batch(small, 300, seed=9, workers=1)
    assert np.allclose(sums[:, 0], [g(c.points).sum() for c in cfgs], atol=1e-13)
    assert np.array_equal(counts, [len(c) for c in cfgs])
    assert np.array_equal(sums[:, 1], counts)


# -- configurations and batch output -----------------------------------------


def test_configuration_validation(tmp_path):
    with pytest.raises(DomainError):
        sd.Configuration(np.array([1.0, 0.0]), L=2.0)
    with pytest.raises(DomainError):
        sd.Configuration(np.array([3.0]), L=2.0)
    cfg = sd.Configuration(np.array([-1.25, 0.1, 1.9]), L=2.0, seed=4, replicate=7)
    cfg.to_csv(tmp_path / "c.csv")
    back = sd.Configuration.from_csv(tmp_path / "c.csv", L=2.0, seed=4, replicate=7)
    assert np.array_equal(back.points, cfg.points)
    assert (back.L, back.seed, back.replicate) == (2.0, 4, 7)


def test_batch_sample_files(tmp_path):
    res = sd.batch_sample(2.0, None, 25, seed=1, out_dir=tmp_path, workers=1)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["N"] == 25 and man["seed"] == 1 and man["n_nodes"] == res.eigensystem.n_nodes
    assert man["expected_count"] == pytest.approx(4.0, abs=1e-6)
    rows = (tmp_path / "samples.csv").read_text().splitlines()
    assert rows[0] == "replicate,x"
    assert len(rows) - 1 == sum(len(c) for c in res.configurations)


# -- windows -----------------------------------------------------------------


def test_window_policy():
    assert sd.window_policy(hat(width=2.0), 3.0) == (6.0, 0.0)
    L, tail = sd.window_policy(lorentzian(), 5.0, margin=8.0)
    assert L == 40.0
    assert tail == pytest.approx(5.0 * 2 * (math.pi / 2 - math.atan(8.0)), rel=1e-8)
    L, tail = sd.window_policy(gaussian(), 2.0, margin=4.0)
    assert L == 8.0 and tail == pytest.approx(2.0 * math.sqrt(math.pi) * math.erfc(4.0), rel=1e-6)
