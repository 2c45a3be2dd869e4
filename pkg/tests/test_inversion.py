import numpy as np
import pytest

import classical
from matwave.errors import IncompatibleParams, NoConvergence, RankDeficient, WallachViolation
from matwave.fields import GaussianMixtureField, GridField
from matwave.inversion import (
    ConvergenceReport,
    TruncationSchedule,
    calderon_multiplier,
    calderon_reconstruct,
    default_schedule,
    geometric_schedule,
    radon_invert_method1,
    radon_invert_method2,
    ridgelet_reproduce,
    riesz_invert,
)
from matwave.linalg import OrderParams
from matwave.multipliers import cone_multiplier, reduced_multiplier, truncated_multiplier
from matwave.radon import default_frames, radon_transform
from matwave.sampling import RngStream
from matwave.wavelets import make_band_wavelet, spectral_integral

SEED = 20240229


def _dog(n, m, center=0.0, N=None, L=None):
    c = np.full((n, m), center)
    f = GaussianMixtureField.gaussian(n, m, c, 0.7, (1 / 0.7) ** n) - GaussianMixtureField.gaussian(n, m, c, 1.0)
    return f if N is None else (f, GridField.sample(f, N, L))


# ---------------------------------------------------------------------------
# multipliers


def test_calderon_multiplier_capture_cases():
    w = make_band_wavelet(2)
    assert calderon_multiplier(w, np.eye(2), 1e-2, 1e2) == spectral_integral(w)
    assert calderon_multiplier(w, np.eye(2), 10.0, 100.0) == 0.0
    assert calderon_multiplier(w, 0.01 * np.eye(2), 0.1, 1.0) == 0.0


@pytest.mark.parametrize("r,eps,rho", [(2.0, 0.5, 1.5), (0.3, 0.2, 5.0), (1.0, 0.01, 100.0)])
def test_calderon_multiplier_rank_one(r, eps, rho):
    w = make_band_wavelet(1)
    ref = classical.log_integral(classical.bump, max(eps * r, 0.25), min(rho * r, 4.0))
    assert calderon_multiplier(w, np.array([[r]]), eps, rho) == pytest.approx(ref, rel=1e-8, abs=1e-14)


def test_calderon_multiplier_rank_deficient():
    with pytest.raises(RankDeficient):
        calderon_multiplier(make_band_wavelet(2), np.array([[1.0, 1.0], [1.0, 1.0]]), 0.1, 10.0)


def _eigs(gen, m, count):
    return np.sort(np.exp(gen.uniform(np.log(0.02), np.log(50.0), size=(count, m))), axis=1)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_uniform_bound_and_monotone_capture(m):
    w = make_band_wavelet(m)
    # the m = 3 rule sums rotations numerically, so it runs on few points and nodes
    # and is only accurate to about 1e-3 there
    mu = _eigs(np.random.default_rng(m), m, 40 if m < 3 else 3)
    slack = 1e-10 if m < 3 else 1e-3
    bound = spectral_integral(w.abs())
    prev = np.zeros(len(mu))
    for eps, rho in default_schedule(4 if m < 3 else 2).pairs:
        cur = reduced_multiplier(w, mu, eps, rho, resolution=12 if m == 3 else 96)
        assert np.all(np.abs(cur) <= bound * (1 + slack))
        assert np.all(cur >= prev - slack * bound)
        prev = cur


def test_reduced_matches_definition_multiplier():
    w = make_band_wavelet(2)
    mu = np.array([[0.3, 0.9], [1.0, 2.0], [0.05, 3.0]])
    for eps, rho in [(0.5, 2.0), (0.1, 10.0)]:
        red = reduced_multiplier(w, mu, eps, rho, resolution=192)
        cone = cone_multiplier(w, mu, eps, rho, resolution=256, rotations=128)
        np.testing.assert_allclose(cone, red, rtol=1e-2, atol=1e-3)


def test_truncated_multiplier_table_matches_direct():
    w = make_band_wavelet(2)
    tab = truncated_multiplier(w, 2, 0.1, 10.0)
    mu = _eigs(np.random.default_rng(5), 2, 30)
    np.testing.assert_allclose(tab(mu), reduced_multiplier(w, mu, 0.1, 10.0), atol=5e-3 * tab.sup)
    assert tab.sup <= tab.bound() * (1 + 1e-10)


# ---------------------------------------------------------------------------
# schedules and reports


@pytest.mark.parametrize("pairs", [[], [(0.0, 1.0)], [(1.0, 0.5)], [(0.1, 10.0), (0.2, 20.0)],
                                   [(0.1, 10.0), (0.01, 5.0)]])
def test_schedule_validation(pairs):
    with pytest.raises(IncompatibleParams):
        TruncationSchedule(pairs)


def test_schedule_builders():
    s = geometric_schedule(0.5, 2.0, 4.0, 3)
    assert s.pairs == ((0.5, 2.0), (0.125, 8.0), (0.03125, 32.0))
    assert default_schedule().pairs[0] == (0.1, 10.0) and len(default_schedule()) == 6
    with pytest.raises(IncompatibleParams):
        TruncationSchedule([(0.1, 10.0)], resolution=2)


def test_calderon_grid_rank_one():
    f, g = _dog(2, 1, 0.2, 64, 8.0)
    out, rep = calderon_reconstruct(g, make_band_wavelet(1, rows=2), reference=f)
    assert rep.converged and rep.final_error < 1e-3
    assert rep.nonincreasing() and np.all(rep.errors >= 0)
    assert rep.sups_bounded()
    assert (rep.normalized * rep.constant - out).norm() < 1e-12 * out.norm()


def test_calderon_definition_path():
    f, g = _dog(2, 1, 0.2, 64, 8.0)
    _, rep = calderon_reconstruct(g, make_band_wavelet(1, rows=2), default_schedule(3), reference=f, definition=True)
    gaps = [r.definition_gap for r in rep.records]
    assert max(gaps) < 1e-4


def test_calderon_zero_field():
    g = GridField.sample(GaussianMixtureField.zero(2, 1), 32, 6.0)
    out, rep = calderon_reconstruct(g, make_band_wavelet(1, rows=2))
    assert np.all(out.values == 0) and np.all(rep.errors == 0)


def test_single_step_schedule_strict():
    _, g = _dog(2, 1, 0.0, 32, 6.0)
    w = make_band_wavelet(1, rows=2)
    _, rep = calderon_reconstruct(g, w, [(1e-3, 1e3)])
    assert rep.converged and len(rep.records) == 1
    with pytest.raises(NoConvergence):
        calderon_reconstruct(g, w, [(0.9, 1.1)], strict=True)


def test_report_csv():
    _, g = _dog(2, 1, 0.0, 32, 6.0)
    _, rep = calderon_reconstruct(g, make_band_wavelet(1, rows=2), default_schedule(2))
    lines = rep.to_csv(timings=False).splitlines()
    assert lines[0] == ",".join(ConvergenceReport.CSV_COLUMNS)
    assert lines[0] == "step,eps,rho,l2_error,multiplier_sup,wall_time_ms"
    assert all(line.endswith(",") for line in lines[1:])
    assert "verdict=" in rep.summary()


def test_riesz_alpha_zero_is_calderon():
    f, g = _dog(2, 1, 0.1, 32, 6.0)
    w = make_band_wavelet(1, rows=2)
    a, rep_a = riesz_invert(g, 0, w, OrderParams(2, 1), default_schedule(3), reference=f)
    b, rep_b = calderon_reconstruct(g, w, default_schedule(3), reference=f)
    assert abs(rep_a.constant - rep_b.constant) < 1e-12
    assert np.max(np.abs(a.values - b.values)) < 1e-12 * np.max(np.abs(b.values))


def test_riesz_invert_rank_one_round_trip():
    from matwave.transforms import riesz_potential_multiplier

    f, g = _dog(2, 1, 0.1, 64, 8.0)
    params = OrderParams(2, 1)
    _, rep = riesz_invert(riesz_potential_multiplier(g, 0.5, params), 0.5, make_band_wavelet(1, rows=2), params,
                          reference=f)
    assert rep.final_error < 1e-2


def test_riesz_invert_preconditions():
    w = make_band_wavelet(2, rows=4)
    g = GaussianMixtureField.gaussian(4, 2)
    with pytest.raises(WallachViolation):
        riesz_invert(g, 0.5, w, OrderParams(4, 2))
    with pytest.raises(IncompatibleParams):
        # 3.5 is in the Wallach set for (4, 2) but no p >= 1 satisfies p < n/(Re α + m - 1)
        riesz_invert(g, 3.5, w, OrderParams(4, 2))


# ---------------------------------------------------------------------------
# Radon inversion


def test_radon_zero_data():
    p = OrderParams(4, 2, 1)
    frames, weights = default_frames(4, 1, 16, SEED)
    data = radon_transform(GaussianMixtureField.zero(4, 2), p, frames, weights)
    out1, rep1 = radon_invert_method1(data, make_band_wavelet(2, rows=4), p, default_schedule(2), rng=RngStream(1))
    out2, rep2 = radon_invert_method2(data, make_band_wavelet(2, rows=3), p, default_schedule(2), rng=RngStream(2))
    assert np.all(rep1.errors == 0) and np.all(rep2.errors == 0)
    pts = np.zeros((2, 4, 2))
    assert np.all(out1.evaluate(pts, RngStream(3), 100).values == 0)


def test_method1_needs_lattice_for_grid_slices():
    p = OrderParams(3, 1, 1)
    frames, weights = default_frames(3, 1, 8)
    _, g = _dog(3, 1, 0.0, 16, 6.0)
    data = radon_transform(g, p, frames, weights)
    with pytest.raises(IncompatibleParams):
        radon_invert_method1(data, make_band_wavelet(1, rows=3), p)


@pytest.fixture(scope="module")
def grid_radon_reports():
    f = _dog(3, 1)
    p = OrderParams(3, 1, 1)
    frames, weights = default_frames(3, 1, 512, SEED)
    data = radon_transform(f, p, frames, weights, slice_grid=(64, 6.0))
    _, rep1 = radon_invert_method1(data, make_band_wavelet(1, rows=3), p, grid=(32, 6.0), rng=RngStream(SEED, 10))
    _, rep2 = radon_invert_method2(data, make_band_wavelet(1, rows=2), p, grid=(32, 6.0), rng=RngStream(SEED, 10))
    return rep1, rep2


def test_grid_radon_both_methods(grid_radon_reports):
    rep1, rep2 = grid_radon_reports
    assert rep1.final_error < 5e-2 and rep2.final_error < 5e-2
    assert rep1.sups_bounded() and rep2.sups_bounded()
    assert rep2.nonincreasing()
    assert rep2.checks["multiplier_form"] < 5e-2


@pytest.mark.xfail(strict=True, reason="lattice back-projection error floor: the last truncation step moves the "
                                       "error from 1.244e-2 to 1.283e-2, above the Cauchy tolerance")
def test_grid_radon_method1_error_nonincreasing(grid_radon_reports):
    assert grid_radon_reports[0].nonincreasing()


def test_ridgelet_disjoint_bands_vanish():
    p = OrderParams(3, 1, 1)
    frames, weights = default_frames(3, 1, 32, SEED)
    data = radon_transform(_dog(3, 1), p, frames, weights, slice_grid=(32, 6.0))
    u = make_band_wavelet(1, 0.25, 1.0, rows=2)
    v = make_band_wavelet(1, 1.0, 4.0, rows=2)
    out, rep = ridgelet_reproduce(data, u, v, p, default_schedule(2), grid=(16, 6.0))
    assert rep.constant == 0 and np.max(np.abs(out.values)) == 0
