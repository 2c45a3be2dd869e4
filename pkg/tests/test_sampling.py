import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.stats import ortho_group

from matwave.errors import IncompatibleParams, NonFinite
from matwave.linalg import det_power
from matwave.sampling import (
    RngStream,
    integrate_matrix_space,
    integrate_polar,
    sample_polar,
    sample_stiefel,
    verify_smith_solmon,
)


def gauss(x):
    return np.exp(-np.sum(x * x, axis=(1, 2)))


def test_rng_stream_replay():
    a = RngStream(42, 3).generator(1).standard_normal(5)
    b = RngStream(42, 3).generator(1).standard_normal(5)
    c = RngStream(42, 4).generator(1).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(1, 2).child(0) != RngStream(1, 2).child(1)


@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 10_000))
def test_stiefel_orthonormal(n, dq, seed):
    q = max(1, n - dq)
    v = sample_stiefel(n, q, RngStream(seed), size=4)
    assert np.max(np.abs(np.swapaxes(v, 1, 2) @ v - np.eye(q))) < 1e-10


def test_stiefel_rejects_oversized_frame():
    with pytest.raises(IncompatibleParams):
        sample_stiefel(2, 3, RngStream(0))


def test_stiefel_circle_uniform():
    v = sample_stiefel(2, 1, RngStream(11), size=10_000)[:, :, 0]
    angles = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * math.pi)
    assert stats.kstest(angles / (2 * math.pi), "uniform").pvalue > 0.01


def test_stiefel_left_invariance():
    n, q, size = 4, 2, 20_000
    v = sample_stiefel(n, q, RngStream(5), size=size)
    g = ortho_group.rvs(n, random_state=3)
    gv = g @ v
    # a fixed linear functional with non-zero second moment
    c = np.arange(1, n * q + 1, dtype=float).reshape(n, q)
    for vals in (np.sum(v * c, axis=(1, 2)) ** 2,):
        other = np.sum(gv * c, axis=(1, 2)) ** 2
        se = math.hypot(vals.std() / math.sqrt(size), other.std() / math.sqrt(size))
        assert abs(vals.mean() - other.mean()) < 3 * se


@pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (3, 2), (4, 2)])
def test_gaussian_integral(n, m):
    est = integrate_matrix_space(gauss, n, m, RngStream(1, n * 10 + m), 50_000, scale=0.8)
    assert est.agrees(math.pi ** (n * m / 2))
    assert est.stderr < 0.02 * math.pi ** (n * m / 2)


def test_odd_integrand_vanishes():
    est = integrate_matrix_space(lambda x: x[:, 0, 0] * gauss(x), 3, 2, RngStream(2), 50_000, scale=0.8)
    assert abs(est.value) < 3 * est.stderr


def test_non_finite_integrand_raises():
    with pytest.raises(NonFinite):
        integrate_matrix_space(lambda x: np.full(len(x), np.inf), 2, 1, RngStream(0), 100)


def test_det_weighted_gaussian_matches_polar():
    f = lambda x: gauss(x) * det_power(x)  # noqa: E731
    cart = integrate_matrix_space(f, 3, 2, RngStream(3), 100_000, scale=0.8)
    polar = integrate_polar(f, 3, 2, RngStream(4), 100_000)
    # closed form: pi^{nm/2} Gamma_2((n+1)/2) / Gamma_2(n/2) with n = 3
    exact = math.pi**3 * (math.gamma(2) * math.gamma(1.5)) / (math.gamma(1.5) * math.gamma(1.0))
    assert abs(cart.value - polar.value) < 3 * math.hypot(cart.stderr, polar.stderr)
    assert polar.agrees(exact)


def test_replay_bit_for_bit():
    a = integrate_polar(gauss, 3, 2, RngStream(9), 20_000)
    b = integrate_polar(gauss, 3, 2, RngStream(9), 20_000)
    assert a == b


PROFILES = {
    "one": lambda r: np.ones(len(r)),
    "trace": lambda r: np.trace(r, axis1=1, axis2=2),
    "sqrt_det": lambda r: np.sqrt(np.linalg.det(r)),
    "exp_trace": lambda r: np.exp(-np.trace(r, axis1=1, axis2=2)),
    "inverse": lambda r: 1 / (1 + np.trace(r, axis1=1, axis2=2)),
}


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_polar_vs_cartesian_profiles(name):
    g = PROFILES[name]
    f = lambda x: gauss(x) * g(np.swapaxes(x, 1, 2) @ x)  # noqa: E731
    cart = integrate_matrix_space(f, 3, 2, RngStream(20), 100_000, scale=0.8)
    polar = integrate_polar(f, 3, 2, RngStream(21), 100_000)
    assert abs(cart.value - polar.value) / abs(cart.value) < 1e-2


def test_polar_sampler_density():
    # radial part of |y|^{nu-n} exp(-|y|^2/2) in R^3 is chi with nu degrees of freedom
    y = sample_polar(3, 1, 2.5, 1.0, RngStream(6), 20_000)
    r = np.linalg.norm(y[:, :, 0], axis=1)
    assert stats.kstest(r, stats.chi(2.5).cdf).pvalue > 0.01


@pytest.mark.parametrize("n,m,k", [(3, 1, 1), (4, 2, 2), (4, 2, 1)])
def test_smith_solmon(n, m, k):
    lhs, rhs, ok = verify_smith_solmon(gauss, n, m, k, RngStream(7, n + m + k), 50_000, scale=0.75)
    assert ok
    assert lhs.agrees(math.pi ** (n * m / 2))


def test_smith_solmon_zero_and_bad_k():
    lhs, rhs, ok = verify_smith_solmon(lambda x: np.zeros(len(x)), 3, 1, 1, RngStream(0), 1000)
    assert (lhs.value, rhs.value, ok) == (0, 0, True)
    with pytest.raises(IncompatibleParams):
        verify_smith_solmon(gauss, 3, 2, 2, RngStream(0), 10)


def test_polar_gaussian_in_quad_one_dim():
    # m = 1, n = 1: a sanity check of the polar constant against quad
    ref = integrate.quad(lambda t: math.exp(-t * t), -np.inf, np.inf)[0]
    assert integrate_polar(gauss, 1, 1, RngStream(8), 50_000).agrees(ref)
