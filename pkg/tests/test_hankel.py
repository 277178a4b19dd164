import json
import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from sinelab import hankel as hk
from sinelab.descriptors import gaussian, hat, lorentzian
from sinelab.errors import ConditioningError, ConsistencyError, DomainError, OverflowGuardError, ResolutionError


@pytest.fixture(scope="module")
def rings():
    return {d.name: hk.ring_grid_function(d) for d in (gaussian(), lorentzian(), hat())}


def window_mgf(f, lam, R, n):
    """Independent oracle for compactly supported ``f``: the exact moment generating
    function of the centered statistic of ``f(./R)`` as a finite Fredholm
    determinant of the sine kernel on the support, by Gauss-Legendre on each half."""
    x, w = leggauss(n)
    x = np.concatenate([(x - 1) / 2 * R, (x + 1) / 2 * R])
    w = np.concatenate([w, w]) * R / 2
    K = np.sinc(x[:, None] - x[None, :])
    sw = np.sqrt(w)
    g = f(x / R)
    M = np.eye(x.size) + sw[:, None] * K * sw[None, :] * (np.exp(lam * g) - 1)[None, :]
    sign, logdet = np.linalg.slogdet(M)
    return sign * np.exp(logdet - lam * np.sum(w * g))


# -- symbols -----------------------------------------------------------------


def test_zero_lambda_symbol(rings):
    sym = hk.build_symbol(rings["lorentzian"], 0.0, 2.0)
    assert sym.method == "zero"
    assert not np.any(sym.spectrum.amplitudes)
    assert hk.hankel_hs_norm(sym).value == 0.0


def test_real_lambda_symbol_is_unimodular(rings):
    r = rings["lorentzian"].values
    for lam in (0.5, -1.0, 3.0):
        s = np.exp(lam * r)
        assert np.max(np.abs(np.abs(s) - 1)) < 1e-14
        assert np.max(np.abs(s - 1)) <= 2


def test_spectrum_two_resolutions(rings):
    ring = rings["lorentzian"]
    a = hk.build_symbol(ring, 0.5, 2.0, method="fft", fft_step=1 / 64).spectrum
    b = hk.build_symbol(ring, 0.5, 2.0, method="fft", fft_step=1 / 32).spectrum
    xi = np.linspace(-3, 3, 241)
    assert np.max(np.abs(a(xi) - b(xi))) < 1e-6


def test_contour_and_fft_tails_agree(rings):
    ring = rings["lorentzian"]
    c = hk.build_symbol(ring, 1.0, 1.0, method="contour")
    f = hk.build_symbol(ring, 1.0, 1.0, method="fft")
    v = np.linspace(c.a, c.a + 6.0, 25)
    assert np.max(np.abs(c.plus(v) - f.plus(v))) < 1e-7


def test_cut_and_fft_tails_agree(rings):
    ring = rings["hat"]
    c = hk.build_symbol(ring, 1.0, 1.0, method="cut")
    f = hk.build_symbol(ring, 1.0, 1.0, method="fft")
    v = np.linspace(c.a, c.a + 6.0, 25)
    # the cut route is exact; the FFT route only sees the 1/t ring tail out to |t| = 1024
    assert np.max(np.abs(c.plus(v) - f.plus(v))) < 2e-4 * np.max(np.abs(c.plus(v)))


def test_build_symbol_errors(rings):
    with pytest.raises(DomainError):
        hk.build_symbol(rings["lorentzian"], 1.0, -1.0)
    with pytest.raises(DomainError):
        hk.build_symbol(rings["hat"], 1.0, 1.0, method="contour")
    with pytest.raises(DomainError):
        hk.build_symbol(rings["lorentzian"], 1.0, 1.0, method="cut")
    # the ring is imaginary, so only imaginary lambda makes Re(lam r) large
    with pytest.raises(OverflowGuardError):
        hk.build_symbol(rings["lorentzian"], 100j, 1.0, method="fft")
    with pytest.raises(OverflowGuardError):
        hk.build_symbol(rings["lorentzian"], 2000j, 1.0)
    real_part = rings["lorentzian"].with_values(np.abs(rings["lorentzian"].values))
    with pytest.raises(DomainError):
        hk.build_symbol(real_part, 1.0, 1.0)


# -- Hilbert-Schmidt norms ---------------------------------------------------


@pytest.mark.parametrize("name", ["gaussian", "lorentzian", "hat"])
@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_hs_dual_routes(rings, name, lam):
    sym = hk.build_symbol(rings[name], lam, 1.0)
    for side in ("plus", "minus"):
        h = hk.hankel_hs_norm(sym, side)
        assert h.spectral == pytest.approx(h.nystrom, rel=1e-4)


def test_hs_decays_with_R(rings):
    for name in ("gaussian", "lorentzian", "hat"):
        small = hk.hankel_hs_norm(hk.build_symbol(rings[name], 1.0, 1.0)).value
        large = hk.hankel_hs_norm(hk.build_symbol(rings[name], 1.0, 16.0)).value
        assert large <= small


def test_hs_consistency_error(rings):
    sym = hk.build_symbol(rings["hat"], 1.0, 1.0)
    with pytest.raises(ConsistencyError):
        hk.hankel_hs_norm(sym, rtol=1e-12)
    with pytest.raises(DomainError):
        hk.hankel_hs_norm(sym, side="left")


def test_seminorm_scaling_report(rings):
    one = hk.seminorm_scaling(hk.build_symbol(rings["hat"], 1.0, 1.0))
    assert one.discrepancy < 1e-6 * one.undilated
    two = hk.seminorm_scaling(hk.build_symbol(rings["hat"], 1.0, 2.0))
    assert two.discrepancy > 0.1 * two.undilated


# -- the determinant ---------------------------------------------------------


def test_determinant_at_zero(rings):
    for ring in rings.values():
        assert hk.fredholm_det_V(ring, 0.0, 3.0).value == 1 + 0j


@pytest.mark.parametrize("name", ["gaussian", "lorentzian", "hat"])
def test_real_lambda_gives_real_determinant(rings, name):
    for lam in (-1.0, 0.5, 1.0):
        assert abs(hk.fredholm_det_V(rings[name], lam, 1.0).value.imag) <= 1e-8


@pytest.mark.parametrize("lam", [1.0, -1.0])
@pytest.mark.parametrize("R", [2.0, 5.0])
def test_determinant_bound(rings, lam, R):
    ev = hk.fredholm_det_V(rings["lorentzian"], lam, R)
    # for even f and real lam the kernel is real symmetric, tr A equals the HS
    # product and the estimate is attained to first order; the slack covers
    # the discretization of the two sides
    assert abs(ev.value - 1) <= math.expm1(ev.hs_norm_plus * ev.hs_norm_minus) * (1 + 1e-5)


@pytest.mark.parametrize("R", [1.0, 4.0])
@pytest.mark.parametrize("lam", [1.0, -1.0, 2.0, 3j, 0.5 + 1j])
def test_hat_determinant_matches_window_oracle(rings, R, lam):
    sigma2 = hat().hdot_half_sq() / (2 * math.pi)
    oracle = window_mgf(hat(), lam, R, int(80 * R + 200)) / np.exp(lam**2 * sigma2 / 2)
    assert hk.fredholm_det_V(rings["hat"], lam, R).value == pytest.approx(oracle, abs=1e-11)


def test_routes_agree_for_lorentzian(rings):
    for lam in (1.0, 1j):
        c = hk.fredholm_det_V(rings["lorentzian"], lam, 1.0, method="contour").value
        f = hk.fredholm_det_V(rings["lorentzian"], lam, 1.0, method="fft").value
        assert abs(c - f) < 1e-7


def test_doubling_check(rings):
    ev = hk.fredholm_det_V(rings["lorentzian"], 1.0, 1.0, check_doubling=True)
    assert ev.diagnostics["doubling_difference"] <= 1e-6
    ev = hk.fredholm_det_V(rings["hat"], 1.0, 2.0, n_quad=64, check_doubling=True)
    assert ev.diagnostics["doubling_difference"] <= 1e-6
    with pytest.raises(ResolutionError):
        hk.fredholm_det_V(rings["hat"], 1.0, 1.0, n_quad=32, check_doubling=True, tol=1e-300)


def test_determinant_errors(rings):
    with pytest.raises(DomainError):
        hk.fredholm_det_V(rings["hat"], 1.0, 1.0, n_quad=16)
    with pytest.raises(ConditioningError):
        hk.fredholm_det_V(rings["lorentzian"], 1.0, 1.0, max_condition=1e-12)


def test_determinant_record_roundtrip(rings):
    ev = hk.fredholm_det_V(rings["lorentzian"], 0.5 + 0.25j, 2.0)
    rec = json.loads(ev.to_json())
    assert complex(rec["value"]["re"], rec["value"]["im"]) == ev.value
    assert rec["lambda"] == {"re": 0.5, "im": 0.25}


# -- Cauchy derivative -------------------------------------------------------


def test_cauchy_polynomials():
    c = hk.cauchy_derivative(None, 0.3, 1.0, integrand=lambda z: 1.0 + 0j)
    assert abs(c.derivative) < 1e-10 and c.max_modulus == 1.0
    assert abs(hk.cauchy_derivative(None, 0.0, 1.0, integrand=lambda z: z * z).derivative) < 1e-10
    assert abs(hk.cauchy_derivative(None, 1.0, 1.0, integrand=lambda z: z * z).derivative - 2) < 1e-10


def test_cauchy_points_inside_a_shared_circle():
    pts = np.linspace(-0.5, 0.5, 5)
    res = hk.cauchy_derivative(None, pts, 1.0, radius=1.0, center=0.0, integrand=lambda z: np.exp(z))
    assert np.max(np.abs(res.derivative - np.exp(pts))) < 1e-10
    with pytest.raises(DomainError):
        hk.cauchy_derivative(None, 2.0, 1.0, center=0.0, integrand=lambda z: z)


@pytest.mark.parametrize("R", [1.0, 5.0])
def test_cauchy_matches_finite_difference(rings, R):
    ring = rings["lorentzian"]
    h = 1e-3
    fd = (hk.fredholm_det_V(ring, h, R).value - hk.fredholm_det_V(ring, -h, R).value) / (2 * h)
    c = hk.cauchy_derivative(ring, 0.0, R, n_circle=32)
    assert abs(c.derivative - fd) < 1e-4
    assert c.max_modulus >= 1.0 - 1e-3
