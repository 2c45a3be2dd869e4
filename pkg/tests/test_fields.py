import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import classical
from matwave.errors import IncompatibleParams, OutOfExtent, TailMass
from matwave.fields import (
    GaussianMixtureField,
    GridField,
    MultipliedField,
    fourier_transform,
    inverse_fourier_transform,
    l2_distance,
    lattice_points,
    parseval_distance,
)
from matwave.sampling import RngStream

seeds = st.integers(0, 2**32 - 1)


def _mixture(seed, n=2, m=1, terms=3):
    g = np.random.default_rng(seed)
    return GaussianMixtureField.from_terms(
        n, m, [(complex(*g.normal(size=2)), g.normal(scale=0.5, size=(n, m)), g.uniform(0.6, 1.4))
               for _ in range(terms)])


def test_centered_gaussian_transform():
    f = GaussianMixtureField.gaussian(2, 1)
    y = np.array([[[0.0], [0.0]], [[1.0], [-0.5]], [[2.0], [1.0]]])
    exact = 2 * math.pi * np.exp(-np.sum(y * y, axis=(1, 2)) / 2)
    np.testing.assert_allclose(f.fourier().evaluate(y), exact, rtol=1e-14)


def test_shifted_gaussian_transform_formula():
    c = np.array([[0.3, -0.1], [0.2, 0.5], [0.0, 0.4]])
    s = 0.8
    f = GaussianMixtureField.gaussian(3, 2, c, s)
    y = np.random.default_rng(0).normal(size=(5, 3, 2))
    exact = ((2 * math.pi * s * s) ** 3 * np.exp(1j * np.sum(y * c, axis=(1, 2)))
             * np.exp(-s * s * np.sum(y * y, axis=(1, 2)) / 2))
    np.testing.assert_allclose(f.fourier().evaluate(y), exact, rtol=1e-13)


@given(seeds)
def test_parseval_on_mixtures(seed):
    f, g = _mixture(seed, 2, 2), _mixture(seed + 1, 2, 2)
    lhs = f.fourier().inner(g.fourier())
    rhs = (2 * math.pi) ** 4 * f.inner(g)
    assert abs(lhs - rhs) <= 1e-6 * abs(rhs) + 1e-12


def test_grid_vs_analytic_transform():
    f = _mixture(3)
    g = GridField.sample(f, 64, 8.0)
    ft = fourier_transform(g)
    exact = f.fourier().evaluate(ft.points()).reshape(ft.values.shape)
    assert np.max(np.abs(ft.values - exact)) / np.max(np.abs(exact)) < 1e-5
    assert ft.L == pytest.approx(64 * math.pi / 16)


def test_grid_matches_classical_dft():
    g = GridField.sample(_mixture(4), 32, 12.0)
    np.testing.assert_allclose(fourier_transform(g).values, classical.dft(g.values, 12.0), rtol=1e-12, atol=1e-14)


@given(seeds)
def test_grid_round_trip(seed):
    g = GridField.sample(_mixture(seed), 32, 12.0)
    back = inverse_fourier_transform(fourier_transform(g))
    assert (back - g).norm() / g.norm() < 1e-8
    assert back.L == g.L


def test_tail_mass_rejected():
    wide = GridField.sample(GaussianMixtureField.gaussian(2, 1, width=3.0), 32, 4.0)
    with pytest.raises(TailMass):
        fourier_transform(wide)


def test_evaluate_examples():
    f = GaussianMixtureField.gaussian(2, 1)
    assert f.evaluate(np.zeros((2, 1))) == 1.0
    g = GridField.sample(f, 64, 8.0)
    pts = np.random.default_rng(1).uniform(-3, 3, size=(20, 2, 1))
    assert np.max(np.abs(g.evaluate(pts) - f.evaluate(pts))) < 1e-4
    with pytest.raises(OutOfExtent):
        g.evaluate(np.array([[9.0], [0.0]]))


@given(seeds)
def test_mixture_linearity(seed):
    f, g = _mixture(seed), _mixture(seed + 7)
    x = np.random.default_rng(seed).normal(size=(6, 2, 1))
    np.testing.assert_allclose((f + g).evaluate(x), f.evaluate(x) + g.evaluate(x), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose((f * (2 - 1j)).evaluate(x), (2 - 1j) * f.evaluate(x), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose((f - g).evaluate(x), f.evaluate(x) - g.evaluate(x), rtol=1e-12, atol=1e-14)


def test_l2_distance_examples():
    f = _mixture(6)
    assert l2_distance(f, f) == 0.0
    assert (f - f).norm() == 0.0 and (f + f).num_terms == f.num_terms
    # two unit Gaussians a distance t apart in R^2: ‖f-g‖² = 2π(1 - exp(-t²/4))
    t = 1.3
    a = GaussianMixtureField.gaussian(2, 1)
    b = GaussianMixtureField.gaussian(2, 1, np.array([[t], [0.0]]))
    exact = math.sqrt(2 * math.pi * (1 - math.exp(-t * t / 4)))
    assert l2_distance(a, b) == pytest.approx(exact, rel=1e-12)
    ga, gb = GridField.sample(a, 64, 8.0), GridField.sample(b, 64, 8.0)
    assert l2_distance(ga, gb) == pytest.approx(exact, rel=1e-10)
    assert l2_distance(ga, b) == pytest.approx(exact, rel=1e-10)


@given(seeds)
def test_triangle_inequality(seed):
    f, g, h = _mixture(seed), _mixture(seed + 1), _mixture(seed + 2)
    assert l2_distance(f, h) <= l2_distance(f, g) + l2_distance(g, h) + 1e-12


def test_incompatible_fields():
    with pytest.raises(IncompatibleParams):
        GaussianMixtureField.gaussian(2, 1) + GaussianMixtureField.gaussian(3, 1)
    with pytest.raises(IncompatibleParams):
        GridField.sample(GaussianMixtureField.gaussian(2, 1), 32, 8.0) + GridField.sample(
            GaussianMixtureField.gaussian(2, 1), 32, 6.0)
    with pytest.raises(IncompatibleParams):
        GridField(3, 2, 64, 8.0, np.zeros(1))


def test_lattice_symmetric():
    pts = lattice_points(1, 1, 8, 2.0)[:, 0, 0]
    np.testing.assert_allclose(pts, [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5])


def test_binary_round_trip():
    g = GridField.sample(_mixture(8), 16, 4.0)
    data = g.to_bytes()
    assert len(data) == 32 + 16 * 16 * 16
    assert data[:8] == (2).to_bytes(8, "little")
    back = GridField.from_bytes(data)
    assert np.array_equal(back.values, g.values) and (back.N, back.L) == (16, 4.0)


def test_csv_layout():
    g = GridField.sample(GaussianMixtureField.gaussian(2, 1), 4, 2.0)
    lines = g.to_csv().splitlines()
    assert lines[0] == "x_1_1,x_2_1,re,im"
    assert len(lines) == 17
    assert lines[1].split(",")[:2] == ["-2.0", "-2.0"]


def test_multiplied_field_identity_and_parseval():
    f = GaussianMixtureField.from_terms(2, 1, [(1.0, None, 1.0), (-0.5, np.array([[0.4], [0.0]]), 0.8)])
    mf = MultipliedField(f)
    pts = np.array([[[0.0], [0.0]], [[0.5], [-0.3]]])
    est = mf.evaluate(pts, RngStream(3), 100_000)
    assert np.all(np.abs(est.values - f.evaluate(pts)) < 4 * est.stderr + 1e-12)
    d = parseval_distance(f, None, RngStream(4), 100_000)
    assert abs(d.value - f.norm()) < 4 * d.stderr
