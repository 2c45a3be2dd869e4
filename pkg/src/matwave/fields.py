"""Function representations on ``M_{n,m}`` and the matrix Fourier transform.

The Fourier transform uses ``(Ff)(y) = ∫ exp(i tr(y'x)) f(x) dx`` with the
inverse carrying ``(2π)**(-nm)``.

Three representations are provided:

* :class:`GridField` holds samples on a uniform lattice ``x_j = (j - N/2) h``.
* :class:`GaussianMixtureField` is a finite sum of modulated matrix-normal
  terms ``A exp(i<ω, x>) exp(-tr((x-c) S^{-1} (x-c)')/2)``.  The family is
  closed under Fourier transform, pointwise product, convolution, right
  multiplication of the argument and plane integration, so every linear
  operation used downstream has an exact image.
* :class:`MultipliedField` is a mixture followed by a Fourier multiplier
  ``|y|_m**(-alpha) h(y'y)``; it is evaluated pointwise and in ``L²`` by
  Monte Carlo in the frequency variable.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import IncompatibleParams, NotSquareIntegrable, OutOfExtent, TailMass
from .linalg import det_power, gram
from .sampling import MCEstimate, RngStream, log_polar_density, polar_normalizer, sample_polar

MAX_GRID_VALUES = 2**26
TAIL_FRACTION = 1e-8


def _inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius pairing ``tr(a'b)`` over the last two axes."""
    return np.sum(a * b, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Gaussian mixtures


class GaussianMixtureField:
    """Finite sum of modulated matrix-normal terms on ``M_{n,m}``.

    Parameters
    ----------
    amps : array_like, shape (T,)
        Complex amplitudes.
    centers : array_like, shape (T, n, m)
    covs : array_like, shape (T, m, m) or (T,)
        Column covariances ``S``; scalars ``σ²`` mean ``σ² I``.
    mods : array_like, shape (T, n, m), optional
        Modulation frequencies ``ω``.
    domain : {"space", "frequency"}
        Bookkeeping only; the value formula is the same.
    """

    def __init__(self, n: int, m: int, amps, centers=None, covs=1.0, mods=None, domain: str = "space"):
        self.n, self.m = int(n), int(m)
        amps = np.atleast_1d(np.asarray(amps, dtype=complex))
        t = len(amps)
        if t == 0:
            raise ValueError("a mixture needs at least one term")
        centers = np.zeros((t, n, m)) if centers is None else np.asarray(centers, dtype=float).reshape(t, n, m)
        covs = np.asarray(covs, dtype=float)
        if covs.ndim <= 1:
            covs = np.broadcast_to(covs, (t,))[:, None, None] * np.eye(m)[None]
        covs = covs.reshape(t, m, m)
        lam = np.linalg.eigvalsh(covs)
        if np.any(lam <= 0):
            raise ValueError("term covariances must be positive definite")
        mods = np.zeros((t, n, m)) if mods is None else np.asarray(mods, dtype=float).reshape(t, n, m)
        self.amps, self.centers, self.covs, self.mods = amps, centers, covs, mods
        self.domain = domain
        self.precisions = np.linalg.inv(covs)
        self.logdets = np.linalg.slogdet(covs)[1]

    # construction helpers -------------------------------------------------
    @classmethod
    def gaussian(cls, n: int, m: int, center=None, width: float = 1.0, amp: complex = 1.0):
        """Single isotropic term ``amp * exp(-|x - center|²/(2 width²))``."""
        c = None if center is None else np.asarray(center, dtype=float)[None]
        return cls(n, m, [amp], c, [width**2])

    @classmethod
    def from_terms(cls, n: int, m: int, terms):
        """Build from ``(amp, center, width)`` triples with isotropic widths."""
        amps = [t[0] for t in terms]
        centers = [np.zeros((n, m)) if t[1] is None else np.asarray(t[1], dtype=float) for t in terms]
        covs = [float(t[2]) ** 2 for t in terms]
        return cls(n, m, amps, np.stack(centers), covs)

    @classmethod
    def zero(cls, n: int, m: int):
        return cls(n, m, [0.0])

    def _like(self, amps, centers, covs, mods, domain=None, n=None):
        return GaussianMixtureField(self.n if n is None else n, self.m, amps, centers, covs, mods,
                                    domain or self.domain)

    @property
    def num_terms(self) -> int:
        return len(self.amps)

    @property
    def widths(self) -> np.ndarray:
        """Largest column standard deviation of each term."""
        return np.sqrt(np.linalg.eigvalsh(self.covs)[:, -1])

    def is_isotropic(self) -> bool:
        return bool(np.allclose(self.covs, self.covs[:, :1, :1] * np.eye(self.m)[None], rtol=1e-13, atol=0))

    # algebra ----------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, GaussianMixtureField) or (other.n, other.m) != (self.n, self.m):
            raise IncompatibleParams("mixtures live on different matrix spaces")

    def __add__(self, other):
        self._check(other)
        amps = np.concatenate([self.amps, other.amps])
        centers = np.concatenate([self.centers, other.centers])
        covs = np.concatenate([self.covs, other.covs])
        mods = np.concatenate([self.mods, other.mods])
        # terms with identical shape parameters merge, so f - f is exactly zero
        keys = [c.tobytes() + s.tobytes() + w.tobytes() for c, s, w in zip(centers, covs, mods)]
        first = {}
        for i, key in enumerate(keys):
            first.setdefault(key, i)
        if len(first) < len(keys):
            idx = np.array(sorted(first.values()))
            merged = np.zeros(len(idx), dtype=complex)
            pos = {first[k]: j for j, k in enumerate(sorted(first, key=first.get))}
            for i, key in enumerate(keys):
                merged[pos[first[key]]] += amps[i]
            amps, centers, covs, mods = merged, centers[idx], covs[idx], mods[idx]
        return self._like(amps, centers, covs, mods)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return self._like(self.amps * c, self.centers, self.covs, self.mods)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def conj(self):
        return self._like(np.conj(self.amps), self.centers, self.covs, -self.mods)

    # evaluation -------------------------------------------------------------
    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Exact values at points ``x`` of shape ``(..., n, m)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (self.n, self.m):
            raise IncompatibleParams(f"points have shape {x.shape[-2:]}, expected {(self.n, self.m)}")
        lead = x.shape[:-2]
        xf = x.reshape(-1, self.n, self.m)
        out = np.zeros(len(xf), dtype=complex)
        chunk = max(1, 2**22 // (self.n * self.m * self.num_terms))
        for s in range(0, len(xf), chunk):
            xb = xf[s:s + chunk]
            diff = xb[:, None] - self.centers[None]
            quad = np.einsum("btij,tjk,btik->bt", diff, self.precisions, diff, optimize=True)
            phase = np.einsum("bij,tij->bt", xb, self.mods)
            out[s:s + chunk] = (self.amps[None] * np.exp(-0.5 * quad + 1j * phase)).sum(axis=1)
        return out.reshape(lead)

    __call__ = evaluate

    # exact transforms -------------------------------------------------------
    def fourier(self) -> "GaussianMixtureField":
        """Exact Fourier image (a mixture in the frequency variable)."""
        nm = self.n * self.m
        amp = (self.amps * (2 * np.pi) ** (nm / 2) * np.exp(self.n / 2 * self.logdets)
               * np.exp(1j * _inner(self.mods, self.centers)))
        return self._like(amp, -self.mods, self.precisions, self.centers, domain="frequency")

    def inverse_fourier(self) -> "GaussianMixtureField":
        nm = self.n * self.m
        amp = (self.amps * (2 * np.pi) ** (-nm / 2) * np.exp(self.n / 2 * self.logdets)
               * np.exp(1j * _inner(self.mods, self.centers)))
        return self._like(amp, self.mods, self.precisions, -self.centers, domain="space")

    def compose_right(self, b: np.ndarray) -> "GaussianMixtureField":
        """The function ``x -> f(x b)`` for invertible ``b`` of size ``m``."""
        b = np.asarray(b, dtype=float)
        binv = np.linalg.inv(b)
        centers = self.centers @ binv
        covs = binv.T @ self.covs @ binv
        mods = self.mods @ b.T
        return self._like(self.amps, centers, covs, mods)

    def product(self, other: "GaussianMixtureField") -> "GaussianMixtureField":
        """Exact pointwise product."""
        self._check(other)
        t1, t2 = self.num_terms, other.num_terms
        p1 = np.repeat(self.precisions, t2, axis=0)
        p2 = np.tile(other.precisions, (t1, 1, 1))
        c1 = np.repeat(self.centers, t2, axis=0)
        c2 = np.tile(other.centers, (t1, 1, 1))
        prec = p1 + p2
        cov = np.linalg.inv(prec)
        center = (c1 @ p1 + c2 @ p2) @ cov
        const = (_inner(c1 @ p1, c1) + _inner(c2 @ p2, c2) - _inner(center @ prec, center))
        amps = np.repeat(self.amps, t2) * np.tile(other.amps, t1) * np.exp(-0.5 * const)
        mods = np.repeat(self.mods, t2, axis=0) + np.tile(other.mods, (t1, 1, 1))
        return self._like(amps, center, cov, mods)

    def convolve(self, other: "GaussianMixtureField") -> "GaussianMixtureField":
        """Exact convolution ``(f * g)(x) = ∫ f(x - y) g(y) dy``."""
        return self.fourier().product(other.fourier()).inverse_fourier()

    def integral(self) -> complex:
        """``∫ f dx`` (the Fourier transform at the origin)."""
        return complex(self.fourier().evaluate(np.zeros((self.n, self.m))))

    def term_integrals(self, other: "GaussianMixtureField") -> np.ndarray:
        """``∫ a_i(x) conj(b_j(x)) dx`` for all term pairs, shape (T1, T2)."""
        prod = self.product(other.conj())
        return prod._integrals().reshape(self.num_terms, other.num_terms)

    def _integrals(self) -> np.ndarray:
        nm = self.n * self.m
        return (self.amps * (2 * np.pi) ** (nm / 2) * np.exp(self.n / 2 * self.logdets)
                * np.exp(1j * _inner(self.mods, self.centers))
                * np.exp(-0.5 * _inner(self.mods @ self.covs, self.mods)))

    def inner(self, other: "GaussianMixtureField") -> complex:
        """``(f, g) = ∫ f conj(g) dx``."""
        self._check(other)
        return complex(self.term_integrals(other).sum())

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def is_radial(self) -> bool:
        """Invariance under left rotations: all terms centered and unmodulated."""
        scale = np.abs(self.amps).max(initial=0.0)
        live = np.abs(self.amps) > 1e-300 * max(scale, 1e-300)
        return bool(np.all(self.centers[live] == 0) and np.all(self.mods[live] == 0))

    def __repr__(self):
        return f"GaussianMixtureField(n={self.n}, m={self.m}, terms={self.num_terms}, domain={self.domain!r})"


# ---------------------------------------------------------------------------
# Grids


def lattice_axis(N: int, L: float) -> np.ndarray:
    h = 2 * L / N
    return (np.arange(N) - N // 2) * h


@dataclass
class GridField:
    """Samples on the symmetric lattice ``(j - N/2) h``, ``h = 2L/N``, per matrix entry.

    ``values`` has shape ``(N,) * (n*m)`` with axes ordered row-major over
    the matrix entries.
    """

    n: int
    m: int
    N: int
    L: float
    values: np.ndarray
    domain: str = "space"

    def __post_init__(self):
        d = self.n * self.m
        if self.N**d > MAX_GRID_VALUES:
            raise IncompatibleParams(f"grid with N={self.N} at nm={d} exceeds the storage budget")
        self.values = np.asarray(self.values, dtype=complex).reshape((self.N,) * d)

    @property
    def dim(self) -> int:
        return self.n * self.m

    @property
    def spacing(self) -> float:
        return 2 * self.L / self.N

    @property
    def cell(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        return lattice_axis(self.N, self.L)

    def points(self) -> np.ndarray:
        """All lattice points as an array ``(N**nm, n, m)``."""
        return lattice_points(self.n, self.m, self.N, self.L)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n: int, m: int, N: int, L: float,
                      domain: str = "space"):
        pts = lattice_points(n, m, N, L)
        return cls(n, m, N, L, np.asarray(fn(pts)).reshape((N,) * (n * m)), domain)

    @classmethod
    def sample(cls, f: GaussianMixtureField, N: int, L: float):
        return cls.from_function(f.evaluate, f.n, f.m, N, L, f.domain)

    def like(self, values) -> "GridField":
        return GridField(self.n, self.m, self.N, self.L, values, self.domain)

    def _check(self, other):
        if not isinstance(other, GridField) or (self.n, self.m, self.N, self.L, self.domain) != (
                other.n, other.m, other.N, other.L, other.domain):
            raise IncompatibleParams("grid fields live on different lattices")

    def __add__(self, other):
        self._check(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, GridField):
            self._check(c)
            return self.like(self.values * c.values)
        return self.like(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.cell)

    def inner(self, other: "GridField") -> complex:
        self._check(other)
        return complex(np.sum(self.values * np.conj(other.values)) * self.cell)

    def tail_fraction(self) -> float:
        """Share of ``Σ|f|`` carried by the outer sixteenth of the box along any axis."""
        total = float(np.sum(np.abs(self.values)))
        if total == 0:
            return 0.0
        ax = np.abs(self.axis()) > 0.875 * self.L
        mask = np.zeros(self.values.shape, dtype=bool)
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = -1
            mask |= ax.reshape(shape)
        return float(np.sum(np.abs(self.values[mask]))) / total

    def evaluate(self, x: np.ndarray, order: int = 3) -> np.ndarray:
        """Spline interpolation at points ``(..., n, m)`` inside the box."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-2]
        flat = x.reshape(-1, self.dim)
        if np.any(np.abs(flat) > self.L + 1e-12):
            raise OutOfExtent("query point outside the grid extent")
        idx = flat / self.spacing + self.N // 2
        re = ndimage.map_coordinates(self.values.real, idx.T, order=order, mode="grid-wrap")
        im = ndimage.map_coordinates(self.values.imag, idx.T, order=order, mode="grid-wrap")
        return (re + 1j * im).reshape(lead)

    def fourier_at(self, y: np.ndarray) -> np.ndarray:
        """Direct lattice sum ``h^d Σ exp(i<y, x_j>) f(x_j)`` at arbitrary frequencies."""
        y = np.asarray(y, dtype=float)
        lead = y.shape[:-2]
        yf = y.reshape(-1, self.dim)
        pts = self.points().reshape(-1, self.dim)
        vals = self.values.ravel()
        out = np.empty(len(yf), dtype=complex)
        for i, yy in enumerate(yf):
            out[i] = np.sum(np.exp(1j * (pts @ yy)) * vals)
        return (out * self.cell).reshape(lead)

    # serialization ----------------------------------------------------------
    def to_bytes(self) -> bytes:
        header = struct.pack("<qqqd", self.n, self.m, self.N, float(self.L))
        body = np.ascontiguousarray(self.values.ravel()).astype("<c16").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes, domain: str = "space") -> "GridField":
        n, m, N, L = struct.unpack("<qqqd", data[:32])
        vals = np.frombuffer(data[32:], dtype="<c16")
        return cls(int(n), int(m), int(N), float(L), vals.copy(), domain)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = [f"x_{i + 1}_{j + 1}" for i in range(self.n) for j in range(self.m)]
        buf.write(",".join(cols + ["re", "im"]) + "\n")
        pts = self.points().reshape(-1, self.dim)
        vals = self.values.ravel()
        for p, v in zip(pts, vals):
            buf.write(",".join(repr(float(c)) for c in p) + f",{float(v.real)!r},{float(v.imag)!r}\n")
        return buf.getvalue()


def lattice_points(n: int, m: int, N: int, L: float) -> np.ndarray:
    ax = lattice_axis(N, L)
    d = n * m
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1).reshape(-1, n, m)


def frequency_extent(N: int, L: float) -> float:
    """Half-width of the frequency lattice paired with a space lattice."""
    return N * math.pi / (2 * L)


def fourier_transform(f, check_tail: bool = True):
    """Fourier transform of a grid or mixture field.

    Grids use the FFT scaled to approximate the continuous integral; the
    result lives on the frequency lattice with spacing ``π/L``.

    Raises
    ------
    TailMass
        If a grid carries more than ``1e-8`` of its mass near the box edge.
    """
    if isinstance(f, GaussianMixtureField):
        return f.fourier()
    if not isinstance(f, GridField):
        raise TypeError(f"cannot transform {type(f).__name__}")
    if check_tail and f.tail_fraction() > TAIL_FRACTION:
        raise TailMass(f"tail fraction {f.tail_fraction():.2e} exceeds {TAIL_FRACTION:g}")
    d = f.dim
    vals = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(f.values))) * (f.N * f.spacing) ** d
    return GridField(f.n, f.m, f.N, frequency_extent(f.N, f.L), vals, "frequency")


def inverse_fourier_transform(g):
    if isinstance(g, GaussianMixtureField):
        return g.inverse_fourier()
    if not isinstance(g, GridField):
        raise TypeError(f"cannot transform {type(g).__name__}")
    d = g.dim
    vals = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(g.values))) * (g.spacing / (2 * math.pi)) ** d
    L_space = g.N * math.pi / (2 * g.L)
    return GridField(g.n, g.m, g.N, L_space, vals, "space")


def apply_grid_multiplier(f: GridField, multiplier: np.ndarray) -> GridField:
    """``F^{-1}[multiplier * F f]`` without the tail check."""
    return inverse_fourier_transform(fourier_transform(f, check_tail=False) * multiplier)


def convolve(f, g):
    """Convolution of two grid fields or two mixtures."""
    if isinstance(f, GaussianMixtureField):
        return f.convolve(g)
    return inverse_fourier_transform(fourier_transform(f, check_tail=False) * fourier_transform(g, check_tail=False))


# ---------------------------------------------------------------------------
# Fourier-multiplied mixtures


@dataclass
class SampledField:
    """Values of a field at query points, with Monte Carlo standard errors when random."""

    points: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def to_csv(self) -> str:
        """Rows of point entries, ``re``, ``im`` and ``stderr`` (empty when exact)."""
        x = np.asarray(self.points, dtype=float)
        x = x.reshape(len(x), x.shape[-2], x.shape[-1])
        n, m = x.shape[1:]
        buf = io.StringIO()
        cols = [f"x_{i + 1}_{j + 1}" for i in range(n) for j in range(m)]
        buf.write(",".join(cols + ["re", "im", "stderr"]) + "\n")
        for i, (p, v) in enumerate(zip(x, self.values)):
            se = "" if self.stderr is None else repr(float(self.stderr[i]))
            buf.write(",".join(repr(float(c)) for c in p.ravel()) + f",{float(v.real)!r},{float(v.imag)!r},{se}\n")
        return buf.getvalue()

    def __sub__(self, other: "SampledField") -> "SampledField":
        se = None
        if self.stderr is not None or other.stderr is not None:
            a = np.zeros(len(self.values)) if self.stderr is None else self.stderr
            b = np.zeros(len(other.values)) if other.stderr is None else other.stderr
            se = np.hypot(a, b)
        return SampledField(self.points, self.values - other.values, se)


def _gram_eigs(y: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(gram(y))


class MultipliedField:
    """A mixture seen through the Fourier multiplier ``scale * |y|_m**(-alpha) * h(y'y)``.

    Parameters
    ----------
    base : GaussianMixtureField
        Space-domain mixture with unmodulated isotropic terms (any centers).
    alpha : complex
        Power of the Gram determinant in the multiplier.
    spectral : callable, optional
        ``h`` as a function of the ascending eigenvalues of ``y'y``, array
        ``(..., m)`` to ``(...)``.
    gram_fn : callable, optional
        ``h`` as a function of the full Gram matrix ``(..., m, m)``.
    scale : complex
    """

    def __init__(self, base: GaussianMixtureField, alpha: complex = 0.0, spectral=None, gram_fn=None,
                 scale: complex = 1.0):
        if not base.is_isotropic() or np.any(base.mods != 0):
            raise IncompatibleParams("multiplied fields need isotropic unmodulated base terms")
        self.base = base
        self.n, self.m = base.n, base.m
        self.alpha = complex(alpha)
        self.spectral = spectral
        self.gram_fn = gram_fn
        self.scale = complex(scale)
        self._ft = base.fourier()

    def with_scale(self, c: complex) -> "MultipliedField":
        return MultipliedField(self.base, self.alpha, self.spectral, self.gram_fn, self.scale * c)

    def multiplier(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape[:-2], self.scale, dtype=complex)
        if self.alpha != 0:
            out = out * det_power(y) ** (-self.alpha)
        if self.spectral is not None:
            out = out * self.spectral(_gram_eigs(y))
        if self.gram_fn is not None:
            out = out * self.gram_fn(gram(y))
        return out

    def fourier_at(self, y: np.ndarray) -> np.ndarray:
        return self.multiplier(y) * self._ft.evaluate(y)

    def sampling_order(self) -> float:
        """Singular order used for the frequency proposal (0 when ``h`` tames it)."""
        if self.spectral is None and self.gram_fn is None:
            return self.alpha.real
        return 0.0

    def evaluate(self, x: np.ndarray, rng: RngStream, samples: int = 100_000) -> SampledField:
        """Monte Carlo inverse Fourier transform at query points.

        Each mixture term is sampled from the polar density
        ``|y|_m**(-alpha) exp(-σ²|y|²/2)`` so that the weights only carry the
        bounded factor ``h`` and a phase.
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.n, self.m)
        n, m, nm = self.n, self.m, self.n * self.m
        nu = n - self.alpha.real
        if nu <= m - 1:
            raise NotSquareIntegrable(f"order {self.alpha} is at or beyond the first pole")
        total = np.zeros(len(x), dtype=complex)
        var = np.zeros(len(x))
        for j in range(self.base.num_terms):
            if self.base.amps[j] == 0:
                continue
            sigma = math.sqrt(self.base.covs[j, 0, 0])
            s = 1.0 / sigma
            gen = rng.child(j).generator()
            y = sample_polar(n, m, nu, s, gen, samples)
            z = polar_normalizer(n, m, nu, s)
            # amplitude of term j's transform is A (2π σ²)^{nm/2}
            w = self.scale * self.base.amps[j] * (2 * math.pi * sigma**2) ** (nm / 2) * z
            extra = np.ones(samples, dtype=complex)
            if self.alpha.imag != 0:
                extra = extra * det_power(y) ** (-1j * self.alpha.imag)
            if self.spectral is not None:
                extra = extra * self.spectral(_gram_eigs(y))
            if self.gram_fn is not None:
                extra = extra * self.gram_fn(gram(y))
            yflat = y.reshape(samples, nm)
            c = self.base.centers[j].ravel()
            phase_c = yflat @ c
            for i, xi in enumerate(x):
                vals = w * extra * np.exp(1j * (phase_c - yflat @ xi.ravel()))
                total[i] += vals.mean()
                var[i] += np.var(vals) / (samples - 1)
        total /= (2 * math.pi) ** nm
        se = np.sqrt(var) / (2 * math.pi) ** nm
        return SampledField(x, total, se)


def parseval_distance(f, g, rng: RngStream, samples: int = 100_000) -> MCEstimate:
    """``‖f - g‖₂`` by Monte Carlo on the Fourier side.

    ``f`` and ``g`` are mixtures or multiplied fields on the same space.  A
    fixed stream gives common random numbers, so distances computed against
    the same reference with the same stream are directly comparable.
    """
    objs = [o for o in (f, g) if o is not None]
    n, m = objs[0].n, objs[0].m
    if any((o.n, o.m) != (n, m) for o in objs):
        raise IncompatibleParams("fields live on different matrix spaces")
    widths = []
    order = 0.0
    for o in objs:
        base = o.base if isinstance(o, MultipliedField) else o
        widths.append(float(np.min(np.sqrt(np.linalg.eigvalsh(base.covs)[:, 0]))))
        if isinstance(o, MultipliedField):
            order = max(order, o.sampling_order())
    s = 1.0 / min(widths)
    nu = n - 2 * order
    if nu <= m - 1:
        raise NotSquareIntegrable("field is not square integrable")
    nm = n * m

    def ft(o, y):
        return o.fourier_at(y) if isinstance(o, MultipliedField) else o.fourier().evaluate(y)

    total = 0.0
    total_sq = 0.0
    done = 0
    b = 0
    while done < samples:
        size = min(8192, samples - done)
        gen = rng.generator(b)
        y = sample_polar(n, m, nu, s, gen, size)
        diff = ft(f, y) - (ft(g, y) if g is not None else 0.0)
        wts = np.abs(diff) ** 2 * np.exp(-log_polar_density(y, nu, s))
        total += float(wts.sum())
        total_sq += float(np.sum(wts**2))
        done += size
        b += 1
    mean = total / samples
    se = math.sqrt(max(total_sq / samples - mean**2, 0.0) / (samples - 1))
    sq = mean / (2 * math.pi) ** nm
    sq_se = se / (2 * math.pi) ** nm
    dist = math.sqrt(max(sq, 0.0))
    return MCEstimate(dist, sq_se / (2 * dist) if dist > 0 else math.sqrt(sq_se), samples)


def evaluate(f, x, **kwargs):
    """Evaluate any field representation at points ``x``."""
    if isinstance(f, MultipliedField):
        return f.evaluate(x, **kwargs)
    return f.evaluate(x)


def l2_distance(f, g, rng: RngStream | None = None, samples: int = 100_000) -> float:
    """``‖f - g‖₂`` choosing the exact route when one exists."""
    if isinstance(f, GridField) and isinstance(g, GaussianMixtureField):
        g = GridField.sample(g, f.N, f.L)
    if isinstance(g, GridField) and isinstance(f, GaussianMixtureField):
        f = GridField.sample(f, g.N, g.L)
    if isinstance(f, GridField) and isinstance(g, GridField):
        return (f - g).norm()
    if isinstance(f, GaussianMixtureField) and isinstance(g, GaussianMixtureField):
        return (f - g).norm()
    if isinstance(f, (MultipliedField, GaussianMixtureField)) and isinstance(g, (MultipliedField, GaussianMixtureField)):
        return parseval_distance(f, g, rng or RngStream(0), samples).value
    raise IncompatibleParams(f"no distance between {type(f).__name__} and {type(g).__name__}")
