"""Classical vector-argument reference implementations.

Written against plain numpy/scipy with no imports from ``matwave`` so the
rank-one regression tests compare two independent code paths.  Conventions:
``F f(ξ) = ∫ exp(i ξ·x) f(x) dx`` and grids ``x_j = (j - N/2) h``, ``h = 2L/N``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.ndimage import map_coordinates


def axis(N: int, L: float) -> np.ndarray:
    return (np.arange(N) - N // 2) * (2 * L / N)


def grid_points(n: int, N: int, L: float) -> np.ndarray:
    ax = axis(N, L)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    return np.stack(mesh, axis=-1)


def gaussian(x: np.ndarray, center, s: float, amp: float = 1.0) -> np.ndarray:
    d = x - np.asarray(center, dtype=float)
    return amp * np.exp(-np.sum(d * d, axis=-1) / (2 * s * s))


def gaussian_ft(xi: np.ndarray, center, s: float, amp: float = 1.0) -> np.ndarray:
    n = xi.shape[-1]
    return amp * (2 * math.pi * s * s) ** (n / 2) * np.exp(-s * s * np.sum(xi * xi, axis=-1) / 2
                                                         + 1j * xi @ np.asarray(center, dtype=float))


def dog(x: np.ndarray, center, inner: float = 0.7, outer: float = 1.0) -> np.ndarray:
    n = x.shape[-1]
    return gaussian(x, center, inner, (outer / inner) ** n) - gaussian(x, center, outer)


def dog_ft(xi: np.ndarray, center, inner: float = 0.7, outer: float = 1.0) -> np.ndarray:
    n = xi.shape[-1]
    return gaussian_ft(xi, center, inner, (outer / inner) ** n) - gaussian_ft(xi, center, outer)


# ---------------------------------------------------------------------------
# Fourier multipliers on periodic grids


def frequency_sq(n: int, N: int, L: float) -> np.ndarray:
    """``|ξ|²`` on the FFT frequency lattice in fftshifted order."""
    h = 2 * L / N
    k = np.fft.fftshift(np.fft.fftfreq(N, d=h)) * 2 * math.pi
    mesh = np.meshgrid(*([k] * n), indexing="ij")
    return sum(g * g for g in mesh)


def dft(values: np.ndarray, L: float) -> np.ndarray:
    """Continuous-FT approximation with the ``exp(+iξx)`` sign."""
    N = values.shape[0]
    h = 2 * L / N
    n = values.ndim
    return np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(values))) * N**n * h**n


def idft(values: np.ndarray, L: float) -> np.ndarray:
    N = values.shape[0]
    h = 2 * L / N
    n = values.ndim
    return np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(values))) / (N**n * h**n)


def apply_multiplier(values: np.ndarray, L: float, mult: np.ndarray) -> np.ndarray:
    return idft(dft(values, L) * mult, L)


def riesz_grid(values: np.ndarray, L: float, alpha: float) -> np.ndarray:
    n, N = values.ndim, values.shape[0]
    r2 = frequency_sq(n, N, L)
    mult = np.where(r2 > 0, np.maximum(r2, 1e-300) ** (-alpha / 2), 0.0)
    if alpha > 0:
        # zero frequency: copy the nearest non-zero lattice neighbour (zero-mean phantoms make this moot)
        c = (N // 2,) * n
        nb = list(c)
        nb[0] += 1
        mult[c] = mult[tuple(nb)]
    return apply_multiplier(values, L, mult)


# ---------------------------------------------------------------------------
# wavelet profile (independent re-implementation of the smooth log-scale bump)


def smoothstep5(t):
    return t**3 * (10 - 15 * t + 6 * t * t)


def bump(lam, lo: float = 0.25, hi: float = 4.0) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    pos = lam > 0
    t = np.zeros_like(lam)
    t[pos] = (np.log(lam[pos]) - math.log(lo)) / (math.log(hi) - math.log(lo))
    up = pos & (t > 0) & (t < 1 / 3)
    mid = pos & (t >= 1 / 3) & (t <= 2 / 3)
    down = pos & (t > 2 / 3) & (t < 1)
    out[up] = smoothstep5(3 * t[up])
    out[mid] = 1.0
    out[down] = smoothstep5(3 * (1 - t[down]))
    return out


def log_integral(fn, lo: float, hi: float) -> float:
    """``∫_lo^hi fn(s) ds/s`` with adaptive quadrature in ``log s``."""
    val, _ = integrate.quad(lambda u: fn(math.exp(u)), math.log(lo), math.log(hi), limit=400,
                            epsabs=1e-13, epsrel=1e-12)
    return val


def scale_multiplier(r2: np.ndarray, profile, eps: float, rho: float, power: float = 0.0,
                     nodes: int = 4001) -> np.ndarray:
    """``∫_eps^rho profile(a r²) a^{-power} da/a`` by composite Simpson in ``log a``."""
    u = np.linspace(math.log(eps), math.log(rho), nodes)
    a = np.exp(u)
    vals = profile(np.multiply.outer(r2, a)) * a ** (-power)
    return integrate.simpson(vals, x=u, axis=-1)


def calderon_classical(values: np.ndarray, L: float, eps: float, rho: float, profile=bump):
    """Truncated continuous wavelet reconstruction and its admissibility constant."""
    n, N = values.ndim, values.shape[0]
    r2 = frequency_sq(n, N, L)
    mult = scale_multiplier(r2, profile, eps, rho)
    const = log_integral(lambda s: float(profile(np.array([s]))[0]), 0.25, 4.0)
    return apply_multiplier(values, L, mult), const


def riesz_inversion_classical(g: np.ndarray, L: float, alpha: float, eps: float, rho: float, profile=bump):
    """``∫ W_a g a^{-alpha/2} da/a`` and the constant ``∫ u(s) s^{-alpha/2} ds/s``."""
    n, N = g.ndim, g.shape[0]
    r2 = frequency_sq(n, N, L)
    mult = scale_multiplier(r2, profile, eps, rho, alpha / 2)
    const = log_integral(lambda s: float(profile(np.array([s]))[0]) * s ** (-alpha / 2), 0.25, 4.0)
    return apply_multiplier(g, L, mult), const


# ---------------------------------------------------------------------------
# Riesz kernels


def riesz_gamma(n: int, alpha: float) -> float:
    """Normalizer of ``|y|^{alpha-n}`` so that the multiplier is ``|ξ|^{-alpha}``."""
    return 2**alpha * math.pi ** (n / 2) * math.gamma(alpha / 2) / math.gamma((n - alpha) / 2)


def riesz_gaussian_3d(x_norm: float, alpha: float, s: float = 1.0) -> float:
    """``I^alpha`` of ``exp(-|x|²/2s²)`` in R³ at radius ``x_norm`` via the spherical mean."""
    def mean_sphere(r):
        if x_norm == 0:
            return math.exp(-r * r / (2 * s * s))
        z = x_norm * r / (s * s)
        # exp(-(|x|² + r²)/2s²) sinh(z)/z written without overflow
        return math.exp(-((x_norm - r) ** 2) / (2 * s * s)) * (1 - math.exp(-2 * z)) / (2 * z)

    val, _ = integrate.quad(lambda r: 4 * math.pi * r ** (alpha - 1) * mean_sphere(r), 0, np.inf,
                            limit=400, epsabs=1e-12, epsrel=1e-11)
    return val / riesz_gamma(3, alpha)


def riesz_1d(p_fn, t: float, alpha: float) -> float:
    """One-dimensional Riesz potential ``γ_1(α)^{-1} ∫ p(t - s)|s|^{alpha-1} ds`` by quadrature."""
    f = lambda s: p_fn(t - s) * abs(s) ** (alpha - 1)  # noqa: E731
    parts = [integrate.quad(f, a, b, limit=200, epsabs=1e-12)[0] for a, b in ((-np.inf, 0), (0, np.inf))]
    return sum(parts) / riesz_gamma(1, alpha)


# ---------------------------------------------------------------------------
# planar Radon transform (lines in R²)


def directions(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Equispaced angles on ``[0, π)`` and the unit vectors."""
    th = np.arange(count) * math.pi / count
    return th, np.stack([np.cos(th), np.sin(th)], axis=1)


def line_integrals_grid(values: np.ndarray, L: float, theta: np.ndarray, t: np.ndarray,
                        samples: int = 801, order: int = 5) -> np.ndarray:
    """Sinogram of a 2-D grid by trapezoid quadrature along each line."""
    N = values.shape[0]
    h = 2 * L / N
    s = np.linspace(-L * math.sqrt(2), L * math.sqrt(2), samples)
    out = np.zeros((len(theta), len(t)))
    for i, th in enumerate(theta):
        e = np.array([math.cos(th), math.sin(th)])
        perp = np.array([-math.sin(th), math.cos(th)])
        pts = t[:, None, None] * e + s[None, :, None] * perp
        idx = pts / h + N // 2
        vals = map_coordinates(values, [idx[..., 0], idx[..., 1]], order=order, mode="constant", cval=0.0)
        out[i] = integrate.trapezoid(vals, s, axis=1)
    return out


def gaussian_sinogram(theta: np.ndarray, t: np.ndarray, center, s: float, amp: float = 1.0) -> np.ndarray:
    """Line integrals of ``amp exp(-|x-c|²/2s²)`` over ``{x : e_θ·x = t}``."""
    e = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    proj = e @ np.asarray(center, dtype=float)
    return amp * math.sqrt(2 * math.pi) * s * np.exp(-((t[None] - proj[:, None]) ** 2) / (2 * s * s))


def backproject(sino: np.ndarray, theta: np.ndarray, t: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Average over directions of ``p(θ, e_θ·x)`` (normalized measure on the circle)."""
    out = np.zeros(points.shape[:-1])
    for i, th in enumerate(theta):
        proj = points[..., 0] * math.cos(th) + points[..., 1] * math.sin(th)
        out += np.interp(proj, t, sino[i], left=0.0, right=0.0)
    return out / len(theta)


def ramp_filter(sino: np.ndarray, t: np.ndarray, window=None) -> np.ndarray:
    """``(2π)^{-1} ∫ |ρ| P̂(ρ) exp(-iρt) dρ`` per projection, zero-padded FFT."""
    M = len(t)
    dt = t[1] - t[0]
    pad = 2 ** int(math.ceil(math.log2(4 * M)))
    rho = np.fft.fftfreq(pad, d=dt) * 2 * math.pi
    filt = np.abs(rho) if window is None else np.abs(rho) * window(rho)
    # P̂ with the exp(+iρt) sign is the conjugate DFT; real input makes the sign immaterial for |ρ|
    spec = np.fft.fft(sino, n=pad, axis=1)
    out = np.fft.ifft(spec * filt[None], axis=1).real[:, :M]
    return out


def fbp(sino: np.ndarray, theta: np.ndarray, t: np.ndarray, points: np.ndarray, window=None) -> np.ndarray:
    """Filtered back-projection: ``f = (1/2) mean_θ q(θ, e_θ·x)`` with the ramp-filtered ``q``."""
    q = ramp_filter(sino, t, window)
    return 0.5 * backproject(q, theta, t, points)


def ridgelet_coefficient(values: np.ndarray, L: float, theta: float, b: float, kernel) -> float:
    """``∫ f(x) k(b - e_θ·x) dx`` by brute-force lattice summation."""
    N = values.shape[0]
    h = 2 * L / N
    pts = grid_points(2, N, L)
    proj = pts[..., 0] * math.cos(theta) + pts[..., 1] * math.sin(theta)
    return float(np.sum(values * kernel(b - proj)) * h * h)


def profile_kernel_1d(profile, a: float, t: np.ndarray, kmax: float = 40.0, nodes: int = 20001) -> np.ndarray:
    """Scaled 1-D wavelet ``(2π)^{-1} ∫ profile(a ρ²) exp(-iρt) dρ`` by direct quadrature."""
    rho = np.linspace(-kmax, kmax, nodes)
    prof = profile(a * rho * rho)
    phase = np.cos(np.multiply.outer(t, rho))  # the profile is even
    return integrate.trapezoid(prof[None] * phase, rho, axis=-1) / (2 * math.pi)


def siegel_gamma_reference(m: int, alpha: float) -> float:
    return math.pi ** (m * (m - 1) / 4) * math.prod(special.gamma(alpha - j / 2) for j in range(m))
