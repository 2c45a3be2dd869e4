"""Random sampling and Monte Carlo integration over matrix spaces.

Every estimator is driven by an :class:`RngStream`.  Work is split into
fixed-size blocks, each with its own child stream, and reduced in block
order so results are bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import IncompatibleParams, NonFinite
from .linalg import det_power
from .special import log_siegel_gamma, stiefel_volume

BLOCK = 8192


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self, *sub: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *sub))
        return np.random.default_rng(ss)

    def child(self, i: int) -> "RngStream":
        # fold the child index into the stream id deterministically
        return RngStream(self.seed, self.stream_id * 1_000_003 + i + 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error."""

    value: complex | float
    stderr: float
    samples: int

    def agrees(self, reference, nse: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.value - reference) <= nse * self.stderr + floor

    def __sub__(self, other: "MCEstimate") -> "MCEstimate":
        # independent estimates: variances add
        return MCEstimate(self.value - other.value, math.hypot(self.stderr, other.stderr),
                          min(self.samples, other.samples))


def sample_stiefel(n: int, q: int, rng, size: int | None = None) -> np.ndarray:
    """Orthonormal ``q``-frames in ``R^n`` from the normalized invariant measure.

    Gaussian matrices are orthonormalized by QR with the triangular factor's
    diagonal made positive, which makes the result exactly invariant.
    """
    if q > n:
        raise IncompatibleParams(f"frame size {q} exceeds ambient dimension {n}")
    gen = as_generator(rng)
    shape = (n, q) if size is None else (size, n, q)
    z = gen.standard_normal(shape)
    qm, r = np.linalg.qr(z)
    sign = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    sign[sign == 0] = 1.0
    return qm * sign[..., None, :]


def sample_orthogonal(n: int, rng, size: int | None = None) -> np.ndarray:
    return sample_stiefel(n, n, rng, size)


def _block_sums(values: np.ndarray) -> tuple[complex, float]:
    return values.sum(), float(np.sum(np.abs(values) ** 2))


def _finish(total, total_sq, count) -> MCEstimate:
    mean = total / count
    var = max(total_sq / count - abs(mean) ** 2, 0.0)
    se = math.sqrt(var / max(count - 1, 1))
    if np.iscomplexobj(mean) and np.imag(mean) == 0:
        mean = float(np.real(mean))
    return MCEstimate(mean if not isinstance(mean, np.generic) else mean.item(), se, count)


def _reduce(weights_fn: Callable[[np.random.Generator, int], np.ndarray], rng: RngStream,
            samples: int, block: int = BLOCK) -> MCEstimate:
    total = 0.0
    total_sq = 0.0
    done = 0
    b = 0
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    while done < samples:
        size = min(block, samples - done)
        vals = np.asarray(weights_fn(stream.generator(b), size))
        if not np.all(np.isfinite(vals)):
            raise NonFinite("integrand produced a non-finite value")
        s, sq = _block_sums(vals)
        total = total + s
        total_sq += sq
        done += size
        b += 1
    return _finish(total, total_sq, samples)


def integrate_matrix_space(f: Callable[[np.ndarray], np.ndarray], n: int, m: int, rng: RngStream,
                           samples: int = 100_000, scale: float = 1.0) -> MCEstimate:
    """Importance-sampled integral of ``f`` over ``M_{n,m}``.

    Parameters
    ----------
    f : callable
        Vectorized integrand taking an array ``(B, n, m)`` and returning ``(B,)``.
    scale : float
        Standard deviation of the isotropic Gaussian proposal; match it to the
        integrand's width.
    """
    d = n * m
    log_norm = d / 2 * math.log(2 * math.pi) + d * math.log(scale)

    def weights(gen, size):
        x = gen.standard_normal((size, n, m)) * scale
        log_p = -np.sum(x * x, axis=(1, 2)) / (2 * scale**2) - log_norm
        return f(x) * np.exp(-log_p)

    return _reduce(weights, rng, samples)


def sample_wishart(m: int, df: float, scale: float, rng, size: int) -> np.ndarray:
    """Wishart draws with ``df`` degrees of freedom and scale ``scale**2 * I``."""
    gen = as_generator(rng)
    w = stats.wishart(df=df, scale=np.eye(m) * scale**2)
    out = np.asarray(w.rvs(size=size, random_state=gen), dtype=float)
    return out.reshape(size, m, m)


def polar_normalizer(n: int, m: int, nu: float, scale: float) -> float:
    """``∫ |y|_m**(nu - n) exp(-|y|²/(2 scale²)) dy`` over ``M_{n,m}``."""
    if nu <= m - 1:
        raise IncompatibleParams(f"polar sampler needs nu > m - 1, got {nu}")
    return math.exp(math.log(stiefel_volume(n, m)) - m * math.log(2)
                    + nu * m / 2 * math.log(2) + nu * m * math.log(scale)
                    + log_siegel_gamma(m, nu / 2).real)


def log_polar_density(y: np.ndarray, nu: float, scale: float) -> np.ndarray:
    n, m = y.shape[-2:]
    return ((nu - n) * np.log(det_power(y)) - np.sum(y * y, axis=(-2, -1)) / (2 * scale**2)
            - math.log(polar_normalizer(n, m, nu, scale)))


def sample_polar(n: int, m: int, nu: float, scale: float, rng, size: int) -> np.ndarray:
    """Draw ``y = v r**0.5`` with density proportional to ``|y|_m**(nu-n) exp(-|y|²/2s²)``.

    ``v`` is uniform on the Stiefel manifold and ``r`` is Wishart with ``nu``
    degrees of freedom, which is the polar-coordinate factorization of the
    target density.
    """
    gen = as_generator(rng)
    v = sample_stiefel(n, m, gen, size)
    if m == 1:
        r = gen.chisquare(nu, size) * scale**2
        return v * np.sqrt(r)[:, None, None]
    r = sample_wishart(m, nu, scale, gen, size)
    lam, q = np.linalg.eigh(r)
    root = (q * np.sqrt(np.clip(lam, 0, None))[:, None, :]) @ np.swapaxes(q, -1, -2)
    return v @ root


def integrate_polar(f: Callable[[np.ndarray], np.ndarray], n: int, m: int, rng: RngStream,
                    samples: int = 100_000, scale: float = 0.8) -> MCEstimate:
    """``∫ f dx`` over ``M_{n,m}`` in polar coordinates ``x = v r^{1/2}``.

    Uses ``dx = 2^{-m} |r|^{(n-m-1)/2} dr dv`` with ``v`` uniform on the
    Stiefel manifold (total volume ``σ_{n,m}``) and ``r`` drawn from a
    Wishart proposal with ``n`` degrees of freedom and scale ``scale² I``.
    """
    if n < m:
        raise IncompatibleParams(f"polar coordinates need n ≥ m, got n={n}, m={m}")
    const = stiefel_volume(n, m) * 2.0 ** (-m)
    wish = stats.wishart(df=n, scale=np.eye(m) * scale**2)

    def weights(gen, size):
        v = sample_stiefel(n, m, gen, size)
        r = sample_wishart(m, n, scale, gen, size)
        if m == 1:
            logp = stats.chi2.logpdf(r[:, 0, 0] / scale**2, n) - 2 * math.log(scale)
        else:
            logp = wish.logpdf(np.moveaxis(r, 0, -1))
        lam, q = np.linalg.eigh(r)
        root = (q * np.sqrt(np.clip(lam, 0, None))[:, None, :]) @ np.swapaxes(q, -1, -2)
        jac = np.prod(lam, axis=1) ** ((n - m - 1) / 2)
        return const * f(v @ root) * jac * np.exp(-np.atleast_1d(logp))

    return _reduce(weights, rng, samples)


def verify_smith_solmon(f: Callable[[np.ndarray], np.ndarray], n: int, m: int, k: int, rng: RngStream,
                        samples: int = 100_000, scale: float = 1.0):
    """Monte Carlo check of the plane-decomposition formula for ``∫ f dx``.

    The right-hand side integrates ``f(ξ z) |z|_m**k`` over ``z ∈ M_{n-k,m}``
    and averages over random frames ``ξ``; it is sampled with the polar
    sampler so that the ``|z|_m**k`` weight is absorbed exactly.

    Returns
    -------
    lhs, rhs : MCEstimate
    passed : bool
        Agreement within three combined standard errors.
    """
    if not (1 <= k <= n - m):
        raise IncompatibleParams(f"1 ≤ k ≤ n−m violated: n={n}, m={m}, k={k}")
    lhs = integrate_matrix_space(f, n, m, rng, samples, scale)
    q = n - k
    nu = q + k  # |z|^k absorbed: density ∝ |z|^{nu - q}
    const = stiefel_volume(n, m) / stiefel_volume(q, m) * polar_normalizer(q, m, nu, scale)

    def weights(gen, size):
        xi = sample_stiefel(n, q, gen, size)
        z = sample_polar(q, m, nu, scale, gen, size)
        y = xi @ z
        return const * f(y) * np.exp(np.sum(z * z, axis=(1, 2)) / (2 * scale**2))

    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    rhs = _reduce(weights, stream.child(1), samples)
    diff = lhs - rhs
    passed = abs(diff.value) <= 3 * diff.stderr or (lhs.value == 0 and rhs.value == 0)
    return lhs, rhs, bool(passed)
