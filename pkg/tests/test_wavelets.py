import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

import classical
from matwave.cone import cone_quadrature
from matwave.errors import BadBand, IncompatibleParams, ResolutionError
from matwave.fields import fourier_transform
from matwave.special import stiefel_volume
from matwave.transforms import check_radial
from matwave.wavelets import (
    Bump,
    calderon_constant,
    make_band_wavelet,
    pair_constant,
    read_wavelet_spec,
    ridgelet_constant,
    riesz_inversion_constant,
    spatial_wavelet,
    spectral_integral,
    write_wavelet_spec,
)


def _random_spd(gen, m, count):
    x = gen.normal(size=(count, m, m))
    return x @ np.swapaxes(x, 1, 2) + 0.1 * np.eye(m)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_symmetry_on_random_pairs(m):
    gen = np.random.default_rng(m)
    w = make_band_wavelet(m)
    r, s = _random_spd(gen, m, 100), _random_spd(gen, m, 100)
    assert w.symmetry_defect(r, s) < 1e-10


def test_vanishes_below_band():
    w = make_band_wavelet(2)
    q = np.linalg.qr(np.random.default_rng(0).normal(size=(2, 2)))[0]
    r = q @ np.diag([0.125, 1.0]) @ q.T  # λ_min = δ/2
    assert w.profile(r) == 0.0
    assert w.profile(np.eye(2)) == 1.0
    assert w.profile(np.diag([1.0, 5.0])) == 0.0


def test_rank_one_profile_is_classical_bump():
    w = make_band_wavelet(1)
    lam = np.geomspace(0.1, 10, 301)
    np.testing.assert_allclose(w.profile_eigs(lam[:, None]), classical.bump(lam), rtol=0, atol=1e-15)


def test_bad_band():
    with pytest.raises(BadBand):
        make_band_wavelet(1, 2.0, 1.0)
    with pytest.raises(BadBand):
        Bump(0.0, 1.0)
    with pytest.raises(BadBand):
        Bump(0.5, 1.0, degree=4)


def test_spatial_wavelet_round_trip_and_mean():
    w = make_band_wavelet(1, rows=2)
    g = spatial_wavelet(w, 64, 16.0)
    # the synthesis is periodic on the box, so the edge-mass guard does not apply
    ft = fourier_transform(g, check_tail=False)
    assert np.max(np.abs(ft.values - w.fourier(ft.points()).reshape(ft.values.shape))) < 1e-6
    h = 2 * g.L / g.N
    assert abs(g.values.sum() * h**2) < 1e-6
    check_radial(g)


def test_spatial_wavelet_resolution():
    with pytest.raises(ResolutionError):
        spatial_wavelet(make_band_wavelet(1, rows=2), 16, 16.0)
    with pytest.raises(ResolutionError):
        spatial_wavelet(make_band_wavelet(1, rows=2), 64, 4.0)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_calderon_rank_one_matches_classical(n):
    w = make_band_wavelet(1, rows=n)
    val, report = calderon_constant(w, n, 1)
    # (2/σ_n) ∫ u(|z|²) |z|^{-n} dz in polar coordinates
    sigma = stiefel_volume(n, 1)
    radial = integrate.quad(lambda r: classical.bump(r * r) / r, 0.5, 2.0, limit=200, epsabs=1e-14)[0]
    assert val == pytest.approx(2 / sigma * sigma * radial, rel=1e-8)
    assert val == pytest.approx(classical.log_integral(classical.bump, 0.25, 4.0), rel=1e-8)
    assert report.converged


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.5])
def test_riesz_constant_rank_one_matches_classical(alpha):
    n = 3
    w = make_band_wavelet(1, rows=n)
    ref = 2 * integrate.quad(lambda r: classical.bump(r * r) * r ** (-1 - alpha), 0.5, 2.0, limit=200,
                             epsabs=1e-14)[0]
    assert riesz_inversion_constant(w, n, 1, alpha) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_riesz_constant_at_zero_is_calderon(m):
    w = make_band_wavelet(m, 0.3, 5.0, rows=m + 2)
    assert abs(riesz_inversion_constant(w, m + 2, m, 0) - calderon_constant(w, m + 2, m)[0]) < 1e-8


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("alpha", [0.5, 1.5 + 0.5j])
def test_band_shift_homogeneity(m, alpha):
    w = make_band_wavelet(m, rows=m + 2)
    shifted = make_band_wavelet(m, 0.5, 8.0, rows=m + 2)
    # ∫ u(s/2)|s|^{-α/2} d_*s = |2I|^{-α/2} ∫ u(s)|s|^{-α/2} d_*s
    expected = 2 ** (-m * complex(alpha) / 2) * riesz_inversion_constant(w, m + 2, m, alpha)
    assert abs(riesz_inversion_constant(shifted, m + 2, m, alpha) - expected) < 1e-8 * abs(expected)


@pytest.mark.parametrize("m", [1, 2])
def test_calderon_stabilizes_once_band_is_covered(m):
    w = make_band_wavelet(m, rows=m + 1)
    full = spectral_integral(w)
    assert calderon_constant(w, m + 1, m, [(0.25, 4.0)])[0] == full
    assert calderon_constant(w, m + 1, m, [(0.1, 10.0), (1e-3, 1e3)])[0] == pytest.approx(full, rel=1e-6)


def test_partial_sums_monotone():
    w = make_band_wavelet(2)
    vals = [spectral_integral(w, 0.0, 1 / c, c) for c in (1.2, 1.5, 2.0, 3.0, 4.0, 8.0)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0


@given(st.floats(0.1, 10.0))
def test_constants_linear_in_profile(c):
    w = make_band_wavelet(2, rows=4)
    assert calderon_constant(w.scale(c), 4, 2)[0] == pytest.approx(c * calderon_constant(w, 4, 2)[0], rel=1e-12)
    v = make_band_wavelet(2, rows=3)
    assert ridgelet_constant(v.scale(c), 4, 2, 1) == pytest.approx(c * ridgelet_constant(v, 4, 2, 1), rel=1e-12)


def test_two_parametrizations_agree():
    w = make_band_wavelet(2)
    spectral = spectral_integral(w)
    full = cone_quadrature(0.25, 4.0, 2, spectral_only=False, breaks=w.breaks).integrate(w.profile)
    assert full == pytest.approx(spectral, rel=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ridgelet_constant_rank_one(n):
    w = make_band_wavelet(1, rows=1)
    sigma = stiefel_volume(n, 1)
    ref = 2**n * math.pi ** (n - 1) / sigma * 2 * integrate.quad(
        lambda z: classical.bump(z * z) * z ** (-n), 0.5, 2.0, limit=200, epsabs=1e-14)[0]
    assert ridgelet_constant(w, n, 1, n - 1) == pytest.approx(ref, rel=1e-8)


def test_ridgelet_constant_dimension_errors():
    with pytest.raises(IncompatibleParams):
        ridgelet_constant(make_band_wavelet(1, rows=2), 3, 1, 2)
    with pytest.raises(IncompatibleParams):
        ridgelet_constant(make_band_wavelet(2, rows=1), 3, 2, 2)


def test_pair_constant_properties():
    u = make_band_wavelet(2, rows=2)
    v = make_band_wavelet(2, 0.5, 6.0, rows=2)
    assert pair_constant(u, v, 4, 2, 2) == pytest.approx(pair_constant(v, u, 4, 2, 2), rel=1e-12)
    assert pair_constant(u, u, 4, 2, 2) == pytest.approx(ridgelet_constant(u.times(u), 4, 2, 2), rel=1e-14)
    far = make_band_wavelet(2, 5.0, 9.0, rows=2)
    assert pair_constant(u, far, 4, 2, 2) == 0.0
    assert pair_constant(u, v, 4, 2, 2) > 0


def test_spec_file_round_trip():
    w = make_band_wavelet(2, 0.3, 5.0, degree=7)
    text = write_wavelet_spec(w, {"c_nu": 1.25})
    assert text.splitlines()[:4] == ["m = 2", "delta = 0.3", "lambda = 5.0", "bump_degree = 7"]
    assert read_wavelet_spec(text) == w
    with pytest.raises(BadBand):
        read_wavelet_spec("m = 2\ndelta = 0.3\n")
