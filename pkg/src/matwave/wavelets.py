"""Fourier-side wavelet profiles and their admissibility constants.

A wavelet is specified by its Fourier profile ``u(y'y)`` where ``u`` is a
symmetric function of the eigenvalues of its argument.  Band wavelets use a
product of identical one-variable bumps, so every constant reduces to an
integral over eigenvalues that the eigenvalue cone rule evaluates exactly
up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cone import cone_quadrature
from .errors import BadBand, IncompatibleParams, NoConvergence, ResolutionError
from .fields import GridField, inverse_fourier_transform, lattice_points, frequency_extent
from .linalg import gram
from .special import fuglede_constant, stiefel_volume

SMOOTHSTEPS = {
    3: lambda t: t * t * (3 - 2 * t),
    5: lambda t: t**3 * (10 - 15 * t + 6 * t * t),
    7: lambda t: t**4 * (35 - 84 * t + 70 * t * t - 20 * t**3),
}


@dataclass(frozen=True)
class Bump:
    """Bump on ``[lo, hi]`` equal to 1 on the middle third in log scale.

    The transitions are smoothstep polynomials of the given odd degree in
    the log variable (degree 5 is twice continuously differentiable).
    """

    lo: float
    hi: float
    degree: int = 5

    def __post_init__(self):
        if not (0 < self.lo < self.hi) or not math.isfinite(self.hi):
            raise BadBand(f"need 0 < delta < Lambda, got [{self.lo}, {self.hi}]")
        if self.degree not in SMOOTHSTEPS:
            raise BadBand(f"bump degree must be one of {sorted(SMOOTHSTEPS)}")

    @property
    def breaks(self) -> tuple[float, ...]:
        a, b = math.log(self.lo), math.log(self.hi)
        return tuple(math.exp(a + (b - a) * j / 3) for j in range(4))

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        a, b = math.log(self.lo), math.log(self.hi)
        with np.errstate(divide="ignore"):
            t = (np.log(np.where(lam > 0, lam, np.nan)) - a) / (b - a)
        step = SMOOTHSTEPS[self.degree]
        out = np.zeros_like(lam)
        rise = (t > 0) & (t < 1 / 3)
        flat = (t >= 1 / 3) & (t <= 2 / 3)
        fall = (t > 2 / 3) & (t < 1)
        out[rise] = step(3 * t[rise])
        out[flat] = 1.0
        out[fall] = step(3 * (1 - t[fall]))
        return out

    def scaled(self, c: float) -> "Bump":
        return Bump(self.lo * c, self.hi * c, self.degree)


@dataclass(frozen=True)
class SpectralWavelet:
    """Radial wavelet given by ``(Fw)(y) = amplitude * ∏_i ∏_b b(λ_i(y'y))``.

    Parameters
    ----------
    rows : int
        Number of rows of the matrix space the wavelet lives on.
    m : int
        Number of columns.
    factors : tuple of Bump
        One-variable factors applied to every eigenvalue; more than one
        factor represents a product profile such as that of ``u * v``.
    amplitude : float
    """

    rows: int
    m: int
    factors: tuple[Bump, ...]
    amplitude: float = 1.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def support(self) -> tuple[float, float]:
        lo = max(b.lo for b in self.factors)
        hi = min(b.hi for b in self.factors)
        return lo, hi

    @property
    def is_null(self) -> bool:
        lo, hi = self.support
        return lo >= hi or self.amplitude == 0

    @property
    def breaks(self) -> tuple[float, ...]:
        return tuple(sorted({x for b in self.factors for x in b.breaks}))

    def profile_eigs(self, lam: np.ndarray) -> np.ndarray:
        """Profile at matrices with eigenvalues ``lam`` of shape ``(..., m)``."""
        lam = np.asarray(lam, dtype=float)
        out = np.full(lam.shape[:-1], float(self.amplitude))
        for b in self.factors:
            out = out * np.prod(b(lam), axis=-1)
        return out

    def profile(self, r: np.ndarray) -> np.ndarray:
        """Profile at symmetric positive semi-definite matrices ``(..., m, m)``."""
        return self.profile_eigs(np.linalg.eigvalsh(np.asarray(r, dtype=float)))

    def fourier(self, y: np.ndarray) -> np.ndarray:
        """``(Fw)(y) = u(y'y)`` for ``y`` of shape ``(..., rows, m)``."""
        return self.profile(gram(y))

    def scaled_fourier(self, y: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Fourier transform of the scaled wavelet ``w_a``: ``u(a^{1/2} y'y a^{1/2})``.

        Uses the equal spectrum of ``y'y a``; ``a = I`` reduces to :meth:`fourier`.
        """
        a = np.asarray(a, dtype=float)
        if np.array_equal(a, np.eye(self.m)):
            return self.fourier(y)
        r = gram(y)
        lam = np.sort(np.linalg.eigvals(r @ np.asarray(a, dtype=float)).real, axis=-1)
        return self.profile_eigs(lam)

    def times(self, other: "SpectralWavelet") -> "SpectralWavelet":
        """Wavelet whose profile is the product (the Fourier image of a convolution)."""
        if (self.rows, self.m) != (other.rows, other.m):
            raise IncompatibleParams("wavelets live on different matrix spaces")
        return SpectralWavelet(self.rows, self.m, self.factors + other.factors, self.amplitude * other.amplitude)

    def abs(self) -> "SpectralWavelet":
        """Wavelet with profile ``|u|`` (bump factors are non-negative)."""
        return SpectralWavelet(self.rows, self.m, self.factors, abs(self.amplitude))

    def scale(self, c: float) -> "SpectralWavelet":
        return SpectralWavelet(self.rows, self.m, self.factors, self.amplitude * c)

    def on_rows(self, rows: int) -> "SpectralWavelet":
        """Same profile on a matrix space with a different number of rows."""
        return SpectralWavelet(rows, self.m, self.factors, self.amplitude)

    def symmetry_defect(self, r: np.ndarray, s: np.ndarray) -> float:
        """``|u(s^½ r s^½) - u(r^½ s r^½)|`` via the shared spectra of ``rs`` and ``sr``."""
        lr = np.sort(np.linalg.eigvals(r @ s).real, axis=-1)
        ls = np.sort(np.linalg.eigvals(s @ r).real, axis=-1)
        return float(np.max(np.abs(self.profile_eigs(lr) - self.profile_eigs(ls))))


def make_band_wavelet(m: int, delta: float = 0.25, Lambda: float = 4.0, rows: int | None = None,
                      degree: int = 5, amplitude: float = 1.0) -> SpectralWavelet:
    """Band wavelet with profile ``∏_i b(λ_i)`` supported in ``[delta, Lambda]``."""
    bump = Bump(float(delta), float(Lambda), int(degree))
    return SpectralWavelet(rows if rows is not None else m, m, (bump,), amplitude)


def spatial_wavelet(w: SpectralWavelet, N: int, L: float) -> GridField:
    """Synthesize ``w`` on a space lattice by inverse FFT of its profile.

    Raises
    ------
    ResolutionError
        If the frequency lattice does not reach past ``sqrt(Lambda)`` or its
        spacing does not resolve ``sqrt(delta)``.
    """
    lo, hi = w.support
    kmax = frequency_extent(N, L)
    dk = math.pi / L
    if kmax <= math.sqrt(hi) or dk >= math.sqrt(lo) / 2:
        raise ResolutionError(f"lattice (N={N}, L={L}) does not resolve the band [{lo}, {hi}]")
    freq = GridField.from_function(w.fourier, w.rows, w.m, N, kmax, domain="frequency")
    return inverse_fourier_transform(freq)


# ---------------------------------------------------------------------------
# constants


def spectral_integral(w: SpectralWavelet, power: complex = 0.0, lower: float | None = None,
                      upper: float | None = None, resolution: int = 128) -> complex | float:
    """``∫ u(s) |s|^(-power) |s|^{-(m+1)/2} ds`` over the matrix interval ``(lower I, upper I)``.

    Defaults integrate over the whole band.  The integrand is spectral so the
    eigenvalue rule is exact apart from Gauss error; bump breakpoints are
    passed as panel edges.
    """
    if w.is_null:
        return 0.0
    lo, hi = w.support
    a = lo if lower is None else max(lo, lower)
    b = hi if upper is None else min(hi, upper)
    if a >= b:
        return 0.0
    key = ("spectral", complex(power), a, b, resolution)
    if key in w._cache:
        return w._cache[key]
    rule = cone_quadrature(a, b, w.m, resolution, spectral_only=True, breaks=w.breaks)
    vals = w.profile_eigs(rule.eigenvalues) * np.prod(rule.eigenvalues, axis=1) ** (-complex(power))
    out = np.sum(rule.weights * vals)
    out = float(out.real) if complex(power).imag == 0 else complex(out)
    w._cache[key] = out
    return out


@dataclass
class TruncationReport:
    """Cauchy increments of a truncated constant over a schedule."""

    values: list[complex]
    increments: list[float]
    converged: bool


def _truncated_limit(w: SpectralWavelet, power, schedule, tol: float = 1e-4, resolution: int = 128):
    from .inversion import default_schedule  # local import avoids a cycle

    pairs = default_schedule().pairs if schedule is None else getattr(schedule, "pairs", schedule)
    values, incs = [], []
    for eps, rho in pairs:
        v = spectral_integral(w, power, eps, rho, resolution)
        if values:
            scale = max(abs(v), 1e-300)
            incs.append(abs(v - values[-1]) / scale)
        values.append(v)
    converged = bool(incs and incs[-1] < tol) or (len(values) == 1 and values[0] == spectral_integral(w, power))
    if len(incs) >= 2 and not converged and incs[-1] > incs[-2]:
        raise NoConvergence(f"increments grow: {incs[-2]:.3e} -> {incs[-1]:.3e}")
    return values[-1], TruncationReport(values, incs, converged)


def calderon_constant(w: SpectralWavelet, n: int, m: int, schedule=None, resolution: int = 128):
    """Calderón admissibility constant evaluated along a truncation schedule.

    The integral of ``(Fw)(z)|z|_m^{-n}`` over ``{A < z'z < B}`` scaled by
    ``2^m/σ_{n,m}`` becomes ``∫_{(A,B)} u(s) d_*s`` in polar coordinates,
    independent of ``n``.

    Returns
    -------
    value : float
    report : TruncationReport
    """
    _check_dims(w, n, m)
    return _truncated_limit(w, 0.0, schedule, resolution=resolution)


def riesz_inversion_constant(w: SpectralWavelet, n: int, m: int, alpha: complex, resolution: int = 128):
    """Constant of the wavelet inversion of the order-``alpha`` Riesz potential.

    Equals ``∫ u(s) |s|^{-alpha/2} d_*s``; finite because the band is compact.
    """
    _check_dims(w, n, m)
    return spectral_integral(w, complex(alpha) / 2, resolution=resolution)


def ridgelet_constant(w: SpectralWavelet, n: int, m: int, k: int, resolution: int = 128) -> float:
    """Admissibility constant for ridgelet-type inversion with ``w`` on ``M_{n-k,m}``.

    The ``M_{n-k,m}`` integral is reduced by polar coordinates to
    ``2^{-m} σ_{n-k,m} ∫ u(s)|s|^{-k/2} d_*s``.
    """
    if not (1 <= k <= n - m):
        raise IncompatibleParams(f"1 ≤ k ≤ n−m violated: n={n}, m={m}, k={k}")
    if (w.rows, w.m) != (n - k, m):
        raise IncompatibleParams(f"wavelet must live on M_({n - k},{m})")
    pref = 2 ** (m * (k + 1)) * math.pi ** (k * m) / stiefel_volume(n, m)
    reduced = 2.0 ** (-m) * stiefel_volume(n - k, m) * spectral_integral(w, k / 2, resolution=resolution)
    return float(pref * reduced)


def pair_constant(u: SpectralWavelet, v: SpectralWavelet, n: int, m: int, k: int, resolution: int = 128) -> float:
    """Admissibility constant of the pair ``(u, v)``; that of the product profile."""
    return ridgelet_constant(u.times(v), n, m, k, resolution)


def _check_dims(w: SpectralWavelet, n: int, m: int):
    if w.m != m or w.rows != n:
        raise IncompatibleParams(f"wavelet lives on M_({w.rows},{w.m}), expected M_({n},{m})")


# ---------------------------------------------------------------------------
# spec files


def write_wavelet_spec(w: SpectralWavelet, constants: dict | None = None) -> str:
    if len(w.factors) != 1:
        raise IncompatibleParams("only single-band wavelets have a spec file form")
    b = w.factors[0]
    lines = [f"m = {w.m}", f"delta = {b.lo!r}", f"lambda = {b.hi!r}", f"bump_degree = {b.degree}"]
    for key, val in (constants or {}).items():
        lines.append(f"{key} = {val!r}")
    return "\n".join(lines) + "\n"


def read_wavelet_spec(text: str, rows: int | None = None) -> SpectralWavelet:
    vals = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        key, _, val = line.partition("=")
        vals[key.strip().lower()] = val.strip()
    try:
        m = int(vals["m"])
        return make_band_wavelet(m, float(vals["delta"]), float(vals["lambda"]), rows,
                                 int(vals.get("bump_degree", 5)))
    except KeyError as exc:
        raise BadBand(f"wavelet spec is missing key {exc}") from None
