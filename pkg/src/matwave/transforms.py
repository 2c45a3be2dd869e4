"""Wavelet transforms and Riesz potentials on ``M_{n,m}``.

Radon-type operators live in :mod:`matwave.radon`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .errors import ConvergenceRegion, IncompatibleParams, NotRadial
from .fields import (
    GaussianMixtureField,
    GridField,
    MultipliedField,
    SampledField,
    apply_grid_multiplier,
    convolve,
    fourier_transform,
    frequency_extent,
    lattice_points,
)
from .linalg import OrderParams, check_spd, det_power, inv_sqrt_spd, sqrt_spd
from .sampling import RngStream, log_polar_density, sample_polar, sample_stiefel
from .special import measure_constant, riesz_normalizer
from .wavelets import SpectralWavelet

RADIAL_TOL = 1e-8


def frequency_points(f: GridField) -> np.ndarray:
    """Frequency lattice paired with a space grid, shape ``(N**nm, n, m)``."""
    return lattice_points(f.n, f.m, f.N, frequency_extent(f.N, f.L))


# ---------------------------------------------------------------------------
# radiality


def check_radial(w, rng: RngStream | None = None, tol: float = RADIAL_TOL) -> None:
    """Raise :class:`NotRadial` unless ``w(γx) = w(x)`` for rotations ``γ``.

    Mixtures are spot-checked at random points and rotations; grids use the
    signed row permutations, which map the lattice to itself.
    """
    if isinstance(w, SpectralWavelet):
        return
    if isinstance(w, GaussianMixtureField):
        gen = (rng or RngStream(7)).generator()
        x = gen.standard_normal((16, w.n, w.m)) * float(np.max(w.widths))
        g = sample_stiefel(w.n, w.n, gen, 16)
        a, b = w.evaluate(x), w.evaluate(g @ x)
        scale = max(float(np.max(np.abs(a))), 1e-300)
        if np.max(np.abs(a - b)) > tol * scale:
            raise NotRadial("wavelet changes under a left rotation")
        return
    if isinstance(w, GridField):
        v = w.values[(slice(1, None),) * w.dim]
        scale = max(float(np.max(np.abs(v))), 1e-300)
        shape = (w.n, w.m)
        for i in range(w.n):
            flipped = np.flip(v, axis=tuple(i * w.m + j for j in range(w.m)))
            if np.max(np.abs(flipped - v)) > tol * scale:
                raise NotRadial(f"grid wavelet is not even in row {i}")
        for i in range(w.n - 1):
            order = np.arange(w.dim).reshape(shape)
            order[[i, i + 1]] = order[[i + 1, i]]
            if np.max(np.abs(np.transpose(v, order.ravel()) - v)) > tol * scale:
                raise NotRadial(f"grid wavelet is not symmetric under swapping rows {i}, {i + 1}")
        return
    raise TypeError(f"unsupported wavelet type {type(w).__name__}")


# ---------------------------------------------------------------------------
# wavelet transform


def scale_wavelet(w: GaussianMixtureField, a: np.ndarray) -> GaussianMixtureField:
    """``w_a(x) = |a|^{-n/2} w(x a^{-1/2})`` for a mixture wavelet."""
    a = np.asarray(a, dtype=float)
    return w.compose_right(inv_sqrt_spd(a)) * float(np.linalg.det(a) ** (-w.n / 2))


def wavelet_transform(f, w, a, check: bool = True):
    """Matrix-scaled wavelet transform ``(W_a f)(x) = ∫ f(x - y a^{1/2}) w(y) dy``.

    Parameters
    ----------
    f : GridField or GaussianMixtureField
    w : SpectralWavelet, GaussianMixtureField or GridField
        Radial wavelet on the same matrix space.
    a : ndarray, shape (m, m)
        Positive definite scale.

    Returns
    -------
    GridField, GaussianMixtureField or MultipliedField
        Grid input gives a grid; a mixture with a mixture wavelet stays a
        mixture; a mixture with a spectral wavelet becomes a multiplied field.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    check_spd(a)
    if check:
        check_radial(w)
    if isinstance(w, SpectralWavelet):
        if (w.rows, w.m) != (f.n, f.m):
            raise IncompatibleParams("wavelet and field live on different matrix spaces")
        if isinstance(f, GridField):
            mult = w.scaled_fourier(frequency_points(f), a).reshape(f.values.shape)
            return apply_grid_multiplier(f, mult)
        if isinstance(f, GaussianMixtureField):
            return MultipliedField(f, gram_fn=lambda r: _scaled_profile(w, r, a))
        raise TypeError(f"unsupported field type {type(f).__name__}")
    if isinstance(w, GaussianMixtureField):
        wa = scale_wavelet(w, a)
        if isinstance(f, GaussianMixtureField):
            return f.convolve(wa)
        mult = wa.fourier().evaluate(frequency_points(f)).reshape(f.values.shape)
        return apply_grid_multiplier(f, mult)
    if isinstance(w, GridField):
        if not isinstance(f, GridField):
            raise TypeError("grid wavelets need grid fields")
        if np.array_equal(a, np.eye(f.m)):
            return convolve(f, w)
        pts = w.points()
        src = pts @ inv_sqrt_spd(a)
        inside = np.all(np.abs(src.reshape(len(src), -1)) <= w.L, axis=1)
        vals = np.zeros(len(pts), dtype=complex)
        vals[inside] = w.evaluate(src[inside]) * np.linalg.det(a) ** (-w.n / 2)
        return convolve(f, w.like(vals))
    raise TypeError(f"unsupported wavelet type {type(w).__name__}")


def _scaled_profile(w: SpectralWavelet, r: np.ndarray, a: np.ndarray) -> np.ndarray:
    lam = np.sort(np.linalg.eigvals(r @ a).real, axis=-1)
    return w.profile_eigs(lam)


# ---------------------------------------------------------------------------
# Riesz potentials


def riesz_multiplier_array(n: int, m: int, freq: np.ndarray, alpha: complex, shape=None):
    """``|y|_m^{-alpha}`` on lattice frequencies with rank-deficient handling.

    Returns
    -------
    values : ndarray
    flagged : ndarray of bool
        Frequencies with ``det(y'y) < 1e-12``.  Their value is 0 when
        ``Re alpha < 0`` and the value at the nearest full-rank lattice
        neighbour when ``Re alpha > 0``.
    """
    alpha = complex(alpha)
    shape = shape or freq.shape[:-2]
    gdet = np.linalg.det(np.swapaxes(freq, -1, -2) @ freq).reshape(shape)
    flagged = gdet < 1e-12
    if alpha == 0:
        return np.ones(shape, dtype=complex), flagged
    vals = np.ones(shape, dtype=complex)
    good = ~flagged
    vals[good] = np.abs(gdet[good]) ** (-alpha / 2)
    if np.any(flagged):
        if alpha.real <= 0:
            vals[flagged] = 0.0
        else:
            idx = ndimage.distance_transform_edt(flagged, return_distances=False, return_indices=True)
            vals[flagged] = vals[tuple(i[flagged] for i in idx)]
    return vals, flagged


def riesz_potential_multiplier(f, alpha: complex, params: OrderParams):
    """``F^{-1}[|y|_m^{-alpha} F f]``; ``alpha = 0`` returns ``f`` itself."""
    alpha = params.require_wallach(alpha)
    if complex(alpha) == 0:
        return f
    if isinstance(f, GaussianMixtureField):
        return MultipliedField(f, alpha)
    if isinstance(f, GridField):
        vals, _ = riesz_multiplier_array(f.n, f.m, frequency_points(f), alpha, f.values.shape)
        return apply_grid_multiplier(f, vals)
    raise TypeError(f"unsupported field type {type(f).__name__}")


def _points(points, n, m) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, n, m)


def _field_values(f, x: np.ndarray) -> np.ndarray:
    if isinstance(f, GridField):
        inside = np.all(np.abs(x.reshape(len(x), -1)) <= f.L, axis=1)
        out = np.zeros(len(x), dtype=complex)
        out[inside] = f.evaluate(x[inside])
        return out
    return f.evaluate(x)


def _bumps(f):
    """Gaussian envelopes ``(center, width)`` covering ``f``."""
    if isinstance(f, GaussianMixtureField):
        return [(f.centers[j], float(f.widths[j])) for j in range(f.num_terms) if f.amps[j] != 0]
    return [(np.zeros((f.n, f.m)), f.L / 4)]


def riesz_potential_kernel(f, alpha: complex, params: OrderParams, points, rng: RngStream,
                           samples: int = 100_000) -> SampledField:
    """Monte Carlo evaluation of the kernel form ``γ^{-1} ∫ f(x - y)|y|_m^{alpha-n} dy``.

    The proposal is an equal-weight mixture of the polar density
    ``|y|^{alpha-n} exp(-|y|²/2s²)`` (for the singularity at 0) and Gaussians
    around ``x - c_j`` (for the bumps of ``f``), which keeps weights bounded.
    """
    alpha = complex(alpha)
    n, m = params.n, params.m
    if alpha.real <= m - 1:
        raise ConvergenceRegion(f"kernel form needs Re alpha > m - 1, got {alpha}")
    gamma = riesz_normalizer(n, m, alpha)
    pts = _points(points, n, m)
    bumps = _bumps(f)
    if not bumps:
        return SampledField(pts, np.zeros(len(pts), dtype=complex), np.zeros(len(pts)))
    s = max(wd for _, wd in bumps)
    nu = alpha.real
    nb = len(bumps) + 1
    vals = np.zeros(len(pts), dtype=complex)
    errs = np.zeros(len(pts))
    for i, x in enumerate(pts):
        gen = rng.child(i).generator()
        comp = gen.integers(0, nb, samples)
        y = np.empty((samples, n, m))
        sel = comp == 0
        y[sel] = sample_polar(n, m, nu, s, gen, int(sel.sum()))
        for j, (c, wd) in enumerate(bumps, start=1):
            sel = comp == j
            y[sel] = x - c + wd * gen.standard_normal((int(sel.sum()), n, m))
        dens = np.exp(log_polar_density(y, nu, s))
        for c, wd in bumps:
            r2 = np.sum((y - (x - c)) ** 2, axis=(1, 2))
            dens = dens + np.exp(-r2 / (2 * wd**2)) / (2 * math.pi * wd**2) ** (n * m / 2)
        dens /= nb
        kern = det_power(y) ** (alpha - n)
        w = _field_values(f, x[None] - y) * kern / dens
        vals[i] = w.mean() / gamma
        errs[i] = math.sqrt(np.var(w) / (samples - 1)) / abs(gamma)
    return SampledField(pts, vals, errs)


def riesz_potential_integer(f, k: int, params: OrderParams, points, rng: RngStream,
                            samples: int = 100_000) -> SampledField:
    """Integer-order potential as the rotation average of a rank-``k`` integral.

    Evaluates ``c_k ∫_{M_{k,m}} dy ∫_{O(n)} f(x - γ[y; 0]) dγ``; only the
    first ``k`` columns of ``γ`` matter, so frames are drawn from the
    Stiefel manifold.
    """
    n, m = params.n, params.m
    if not (1 <= k <= n - m):
        raise IncompatibleParams(f"1 ≤ k ≤ n−m violated: n={n}, m={m}, k={k}")
    ck = measure_constant(n, k, m)
    pts = _points(points, n, m)
    bumps = _bumps(f)
    vals = np.zeros(len(pts), dtype=complex)
    errs = np.zeros(len(pts))
    if not bumps:
        return SampledField(pts, vals, errs)
    for i, x in enumerate(pts):
        s = 1.2 * max(math.sqrt(wd**2 + float(np.sum((x - c) ** 2)) / (k * m)) for c, wd in bumps)
        gen = rng.child(i).generator()
        frames = sample_stiefel(n, k, gen, samples)
        y = gen.standard_normal((samples, k, m)) * s
        logp = -np.sum(y * y, axis=(1, 2)) / (2 * s * s) - k * m / 2 * math.log(2 * math.pi * s * s)
        w = ck * _field_values(f, x[None] - frames @ y) * np.exp(-logp)
        vals[i] = w.mean()
        errs[i] = math.sqrt(np.var(w) / (samples - 1))
    return SampledField(pts, vals, errs)
