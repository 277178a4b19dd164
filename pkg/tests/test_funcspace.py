import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sinelab import funcspace as fs
from sinelab.descriptors import Descriptor, gaussian, hat, indicator, lorentzian
from sinelab.errors import DomainError, RangeError, SpectralTailWarning, TailTruncationError


def grid_of(d, **kw):
    return fs.make_grid_function(d, *fs.default_grid(d, **kw))


def quad_transform(f, xi):
    """Independent oracle: the unitary transform of an even f by adaptive quadrature."""
    if xi == 0:
        re = quad(f, 0, np.inf)[0]
    else:
        re = quad(f, 0, np.inf, weight="cos", wvar=xi)[0]
    return 2 * re / math.sqrt(2 * math.pi)


# -- descriptors and sampling ------------------------------------------------


def test_closed_form_values():
    g = fs.make_grid_function(gaussian(), -8.0, 1 / 64, 1025)
    assert g.values[512] == 1.0 and g.t[512] == 0.0
    assert lorentzian()(1.0) == 0.5
    assert hat()(1.0) == 0.0 and hat()(-1.0) == 0.0


def test_descriptor_validation():
    with pytest.raises(DomainError):
        Descriptor("sech")
    with pytest.raises(DomainError):
        gaussian(width=0.0)
    with pytest.raises(DomainError):
        indicator(2.0, 1.0)
    with pytest.raises(DomainError):
        fs.make_grid_function(gaussian(), 0.0, -1.0, 10)


def test_record_roundtrip():
    d = lorentzian(width=2.5, amplitude=-1.0)
    assert Descriptor.from_record(d.to_record()) == d


def test_dilation_matches_composition():
    d = hat(width=1.5)
    t = np.linspace(-10, 10, 101)
    assert np.allclose(d.dilate(3.0)(t), d(t / 3.0))


def test_grid_evaluation_range():
    g = fs.make_grid_function(gaussian(), -1.0, 0.5, 5)
    with pytest.raises(RangeError):
        g(2.0)
    raw = g.with_values(g.values)
    assert raw(0.25) == pytest.approx(0.5 * (g.values[2] + g.values[3]))


# -- transforms --------------------------------------------------------------


def test_gaussian_transform_pointwise():
    spec = fs.fourier_transform(grid_of(gaussian()))
    m = np.abs(spec.xi) < 12
    exact = 2**-0.5 * np.exp(-spec.xi[m] ** 2 / 4)
    assert np.max(np.abs(spec.amplitudes[m] - exact)) < 1e-8
    for xi in (0.0, 0.7, 2.3):
        assert quad_transform(gaussian(), xi) == pytest.approx(2**-0.5 * math.exp(-xi * xi / 4), abs=1e-10)


def test_lorentzian_transform_pointwise():
    # the 1/t^2 tail is cut at the grid ends, which costs a few 1e-6
    spec = fs.fourier_transform(grid_of(lorentzian()))
    m = np.abs(spec.xi) < 10
    exact = math.sqrt(math.pi / 2) * np.exp(-np.abs(spec.xi[m]))
    assert np.max(np.abs(spec.amplitudes[m] - exact)) < 1e-5
    for xi in (0.5, 1.0, 3.0):
        assert quad_transform(lorentzian(), xi) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-xi), abs=1e-8)


def test_transform_of_zero():
    spec = fs.fourier_transform(fs.make_grid_function(gaussian(amplitude=0.0), -8.0, 1 / 64, 1024))
    assert not np.any(spec.amplitudes)


def test_descriptor_fourier_agrees_with_fft():
    for d in (gaussian(width=0.7), hat(width=2.0), lorentzian(width=1.3)):
        spec = fs.fourier_transform(grid_of(d))
        m = np.abs(spec.xi) < 5
        assert np.max(np.abs(spec.amplitudes[m] - d.fourier(spec.xi[m]))) < 2e-5


def test_inverse_transform_roundtrip():
    g = grid_of(gaussian(width=1.3))
    back = fs.inverse_transform(fs.fourier_transform(g))
    assert np.max(np.abs(back.values - g.values)) < 1e-13


def test_tail_check():
    g = fs.make_grid_function(gaussian(), -1.0, 1 / 64, 128)
    with pytest.raises(TailTruncationError):
        fs.fourier_transform(g)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-3.0, 3.0))
def test_parseval(width, amplitude):
    g = grid_of(gaussian(width=width, amplitude=amplitude))
    spec = fs.fourier_transform(g)
    time_side = float(np.sum(np.abs(g.values) ** 2) * g.grid_step)
    assert spec.l2_norm() ** 2 == pytest.approx(time_side, rel=1e-12, abs=1e-14)
    assert time_side == pytest.approx(amplitude**2 * width * math.sqrt(math.pi / 2), rel=1e-12, abs=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_transform_is_linear(a, b):
    start, step, n = fs.default_grid(gaussian(width=2.0))
    f = fs.make_grid_function(gaussian(), start, step, n)
    g = fs.make_grid_function(hat(), start, step, n)
    h = f.with_values(a * f.values + b * g.values)
    lhs = fs.fourier_transform(h).amplitudes
    rhs = a * fs.fourier_transform(f).amplitudes + b * fs.fourier_transform(g).amplitudes
    assert np.max(np.abs(lhs - rhs)) < 1e-13


# -- Sobolev norms -----------------------------------------------------------


def test_half_norm_gaussian():
    spec = fs.fourier_transform(grid_of(gaussian()))
    oracle = quad(lambda x: x * np.exp(-x * x / 2), 0, np.inf)[0]  # 2 * int_0^inf xi |f_hat|^2
    assert oracle == pytest.approx(1.0, abs=1e-12)
    assert fs.sobolev_norm(spec, 0.5) ** 2 == pytest.approx(1.0, abs=1e-6)
    assert gaussian().hdot_half_sq() == 1.0


def test_half_norm_lorentzian():
    spec = fs.fourier_transform(grid_of(lorentzian()))
    oracle = 2 * quad(lambda x: x * (math.pi / 2) * np.exp(-2 * x), 0, np.inf)[0]
    assert oracle == pytest.approx(math.pi / 4, abs=1e-12)
    assert fs.sobolev_norm(spec, 0.5) ** 2 == pytest.approx(math.pi / 4, abs=1e-6)


def test_hat_one_norm_two_routes():
    g = grid_of(hat())
    assert fs.h1_seminorm_direct(g) ** 2 == pytest.approx(2.0, abs=1e-12)
    assert hat().hdot_one_sq() == 2.0
    # the transform decays like xi^-2, so the spectral route only sees most of the mass
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectralTailWarning)
        spectral = fs.sobolev_norm(fs.fourier_transform(g), 1) ** 2
    assert spectral == pytest.approx(2.0, rel=2e-2)


def test_one_norm_closed_forms_against_quadrature():
    h = 1e-6
    for d in (gaussian(width=0.8), lorentzian(width=1.7)):
        oracle = quad(lambda t, d=d: ((d(t + h) - d(t - h)) / (2 * h)) ** 2, -np.inf, np.inf, limit=400)[0]
        assert d.hdot_one_sq() == pytest.approx(oracle, rel=1e-6)


def test_half_norm_is_dilation_invariant():
    for R in (0.5, 4.0):
        spec = fs.fourier_transform(grid_of(gaussian(width=R)))
        assert fs.sobolev_norm(spec, 0.5) ** 2 == pytest.approx(1.0, abs=1e-5)


def test_sobolev_tail_warning_and_strict():
    g = fs.make_grid_function(hat(), -2.0, 1 / 4, 16)
    spec = fs.fourier_transform(g)
    with pytest.warns(SpectralTailWarning):
        fs.sobolev_norm(spec, 1)
    with pytest.raises(TailTruncationError):
        fs.sobolev_norm(spec, 1, strict=True)
    with pytest.raises(DomainError):
        fs.sobolev_norm(spec, 2)


# -- Hardy split -------------------------------------------------------------


@pytest.mark.parametrize("d, tol", [(gaussian(), 1e-10), (lorentzian(), 1e-9)])
def test_ring_is_imaginary(d, tol):
    fp, fm, ring = fs.hardy_split(fs.fourier_transform(grid_of(d)))
    assert np.max(np.abs(ring.values.real)) < 1e-10
    # the lorentzian's 1/t tail correction leaves ~1e-10 at the far grid ends
    g = grid_of(d)
    assert np.max(np.abs(fp.values + fm.values - g.values)) < tol


def test_ring_of_zero():
    spec = fs.fourier_transform(fs.make_grid_function(gaussian(amplitude=0.0), -8.0, 1 / 64, 1024))
    assert not np.any(fs.hardy_split(spec)[2].values)


def test_lorentzian_ring_closed_form():
    g = grid_of(lorentzian())
    _, _, ring = fs.hardy_split(fs.fourier_transform(g))
    t = g.t
    m = np.abs(t) < 200
    assert np.max(np.abs(ring.values[m] + 1j * t[m] / (1 + t[m] ** 2))) < 1e-6
    assert np.max(np.abs(ring.values)) == pytest.approx(0.5, abs=1e-6)


def test_hat_ring_matches_closed_form():
    g = grid_of(hat(), step=1 / 256)
    _, _, ring = fs.hardy_split(fs.fourier_transform(g, pad=3))
    m = np.abs(g.t) < 4
    assert np.max(np.abs(ring.values[m] - hat().ring(g.t[m]))) < 1e-3


# -- strip norm --------------------------------------------------------------


def test_strip_norm_of_zero():
    assert fs.hl_norm(fs.HolomorphicDescriptor(lorentzian(amplitude=0.0), 0.5)) == 0.0


def test_strip_norm_lorentzian_sup_on_boundary():
    rep = fs.hl_norm(fs.HolomorphicDescriptor(lorentzian(), 0.5), report=True)
    assert math.isfinite(rep.value)
    assert abs(rep.sup_line) == pytest.approx(0.5)
    assert rep.lines.min() == -0.5 and rep.lines.max() == 0.5
    # |f| peaks at z = 0.5 i where it equals 1 / (1 - 0.25)
    assert rep.sup_term == pytest.approx(4 / 3, rel=1e-12)


def test_strip_norm_homogeneous():
    h = fs.HolomorphicDescriptor(lorentzian(), 0.5)
    assert fs.hl_norm(h.scaled(2.0)) == pytest.approx(2 * fs.hl_norm(h), rel=1e-12)


def test_strip_must_avoid_singularities():
    with pytest.raises(DomainError):
        fs.HolomorphicDescriptor(lorentzian(), 1.0)
    with pytest.raises(DomainError):
        fs.HolomorphicDescriptor(hat(), 0.1)


# -- shifted tail seminorm ---------------------------------------------------


def test_band_limited_symbol_has_zero_seminorm():
    xi = np.linspace(-10, 10, 2001)
    spec = fs.SpectrumGrid(xi[0], xi[1] - xi[0], np.where(np.abs(xi) <= 3, 1.0, 0.0))
    assert fs.shifted_tail_seminorm(spec, 3.0, tail_tol=1.0) == 0.0


def test_gaussian_seminorm_two_resolutions():
    coarse = fs.fourier_transform(grid_of(gaussian()))
    fine = fs.fourier_transform(grid_of(gaussian(), step=1 / 128), pad=3)
    a = fs.shifted_tail_seminorm(coarse, 1.0, tail_tol=1.0)
    b = fs.shifted_tail_seminorm(fine, 1.0, tail_tol=1.0)
    assert a == pytest.approx(b, abs=1e-6)
    oracle = math.sqrt(quad(lambda x: x * 0.5 * math.exp(-((x + 1) ** 2) / 2), 1, np.inf)[0])
    assert a == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("R", [1, 4, 16])
def test_seminorm_below_sobolev_estimate(R):
    spec = fs.fourier_transform(grid_of(gaussian()))
    value = fs.shifted_tail_seminorm(spec, R, tail_tol=1.0)
    assert value <= math.sqrt(gaussian().hdot_one_sq()) / math.sqrt(R)


def test_seminorm_range_errors():
    spec = fs.fourier_transform(grid_of(gaussian()))
    with pytest.raises(RangeError):
        fs.shifted_tail_seminorm(spec, spec.xi[-1])
    with pytest.raises(DomainError):
        fs.shifted_tail_seminorm(spec, -1.0)


# -- export ------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    g = fs.make_grid_function(lorentzian(), -4.0, 0.25, 33)
    fs.write_csv(g, tmp_path / "g.csv")
    back = fs.read_grid_csv(tmp_path / "g.csv")
    assert back.grid_step == pytest.approx(0.25) and np.array_equal(back.values, g.values)
    spec = fs.fourier_transform(g, tail_tol=1.0)
    fs.write_csv(spec, tmp_path / "s.csv")
    back = fs.read_grid_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, spec.amplitudes)
