"""Matrix plane transforms: Radon and dual Radon, ridgelets, Semyanistyi integrals.

A plane is ``{x : ξ'x = t}`` with ``ξ`` an orthonormal ``n x q`` frame,
``q = n - k`` and ``t ∈ M_{q,m}``.  Points on it are ``x = η ω + ξ t`` with
``η`` any orthonormal completion of ``ξ`` and ``ω ∈ M_{k,m}``.

Frame integrals are replaced by weighted frame sets.  For ``k = 1`` the
frame is determined by its unit normal, so a product Gauss design on the
sphere gives a deterministic rule; otherwise frames are random.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sps

from .errors import FrameDimension, IncompatibleParams
from .fields import (
    GaussianMixtureField,
    GridField,
    MultipliedField,
    SampledField,
    apply_grid_multiplier,
    lattice_axis,
    lattice_points,
)
from .linalg import OrderParams, det_power, inv_sqrt_spd
from .sampling import RngStream, sample_polar, sample_stiefel, log_polar_density
from .special import riesz_normalizer
from .transforms import frequency_points, riesz_multiplier_array
from .wavelets import SpectralWavelet

FRAME_TOL = 1e-10


# ---------------------------------------------------------------------------
# frames


def check_frame(xi: np.ndarray, n: int, q: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-2:] != (n, q):
        raise FrameDimension(f"frame has shape {xi.shape[-2:]}, expected {(n, q)}")
    err = np.abs(np.swapaxes(xi, -1, -2) @ xi - np.eye(q)).max()
    if err > FRAME_TOL:
        raise FrameDimension(f"frame columns are not orthonormal (defect {err:.2e})")
    return xi


def complete_frame(xi: np.ndarray) -> np.ndarray:
    """Rotation ``g`` in ``SO(n)`` whose last ``q`` columns are ``ξ``.

    The first ``n - q`` columns come from Gram-Schmidt over the standard basis.
    """
    xi = np.asarray(xi, dtype=float)
    n, q = xi.shape
    basis = [c for c in xi.T]
    comp = []
    for e in np.eye(n):
        if len(comp) == n - q:
            break
        v = e.copy()
        for b in basis + comp:
            v -= (b @ v) * b
        for b in basis + comp:
            v -= (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            comp.append(v / nv)
    g = np.column_stack(comp + basis)
    if np.linalg.det(g) < 0 and comp:
        g[:, 0] *= -1
    return g


def canonical_plane(xi: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Representative of the plane ``(ξ, t)`` with a positive lower-triangular top block."""
    xi = np.asarray(xi, dtype=float)
    q = xi.shape[1]
    qm, r = np.linalg.qr(xi[:q].T)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    theta = (qm * sign).T  # top block of ξ θ' is lower triangular, positive diagonal
    return xi @ theta.T, theta @ np.asarray(t, dtype=float)


@dataclass(frozen=True)
class MatrixPlane:
    """Plane ``{x : frame' x = offset}``."""

    frame: np.ndarray
    offset: np.ndarray

    def canonical(self) -> "MatrixPlane":
        xi, t = canonical_plane(self.frame, self.offset)
        return MatrixPlane(xi, t)

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        return bool(np.abs(self.frame.T @ x - self.offset).max() <= tol)

    def same_as(self, other: "MatrixPlane", tol: float = 1e-9) -> bool:
        a, b = self.canonical(), other.canonical()
        return bool(np.abs(a.frame - b.frame).max() < tol and np.abs(a.offset - b.offset).max() < tol)


def random_frames(n: int, k: int, count: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """``count`` random frames in ``V_{n,n-k}`` with equal weights."""
    frames = sample_stiefel(n, n - k, rng.generator(), count)
    return frames, np.full(count, 1.0 / count)


def sphere_design(n: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss rule on ``S^{n-1}`` with about ``count`` points (weights sum to 1).

    Hyperspherical angles ``φ_1 … φ_{n-2}`` use Gauss-Jacobi nodes in
    ``cos φ_j`` and the last angle is uniform.
    """
    if n < 2:
        raise IncompatibleParams("sphere design needs n >= 2")
    if n == 2:
        phi = (np.arange(count) + 0.5) * 2 * math.pi / count
        return np.column_stack([np.cos(phi), np.sin(phi)]), np.full(count, 1.0 / count)
    # split the budget: uniform angle gets twice the nodes of each polar angle
    per = max(2, round((count / 2) ** (1 / (n - 1))))
    n_last = 2 * per
    coords = np.zeros((1, 0))
    radius = np.ones(1)
    weights = np.ones(1)
    for j in range(n - 2):
        beta = (n - j - 3) / 2  # weight (1 - c²)^beta for this angle
        c, w = sps.roots_jacobi(per, beta, beta)
        w = w / w.sum()
        coords = np.concatenate([np.repeat(coords, per, axis=0),
                                 (np.repeat(radius, per) * np.tile(c, len(radius)))[:, None]], axis=1)
        radius = np.repeat(radius, per) * np.tile(np.sqrt(1 - c * c), len(radius))
        weights = np.repeat(weights, per) * np.tile(w, len(weights))
    phi = (np.arange(n_last) + 0.5) * 2 * math.pi / n_last
    cp, sp = np.cos(phi), np.sin(phi)
    coords = np.concatenate([np.repeat(coords, n_last, axis=0),
                             (np.repeat(radius, n_last) * np.tile(cp, len(radius)))[:, None],
                             (np.repeat(radius, n_last) * np.tile(sp, len(radius)))[:, None]], axis=1)
    weights = np.repeat(weights, n_last) / n_last
    return coords, weights


def design_frames(n: int, k: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic frames for ``k = 1`` from a sphere design on the plane normal."""
    if k != 1:
        raise IncompatibleParams("deterministic frame designs exist only for k = 1")
    normals, weights = sphere_design(n, count)
    frames = np.stack([complete_frame(u[:, None])[:, :n - 1] for u in normals])
    # complete_frame puts u last; the first n-1 columns are an orthonormal basis of u^⊥
    return frames, weights


def default_frames(n: int, k: int, count: int = 512, seed: int = 20240229, design: bool | None = None):
    """Design frames for ``k = 1`` and seeded random frames otherwise."""
    if design is None:
        design = k == 1
    if design:
        return design_frames(n, k, count)
    return random_frames(n, k, count, RngStream(seed))


# ---------------------------------------------------------------------------
# Radon field


@dataclass
class RadonField:
    """Per-frame slice functions on ``M_{n-k,m}`` with frame weights.

    ``random`` marks frames drawn at random with equal weights, in which
    case frame averages carry a Monte Carlo standard error.
    """

    n: int
    m: int
    k: int
    frames: np.ndarray
    weights: np.ndarray
    slices: list
    random: bool = False
    source: GaussianMixtureField | None = None

    @property
    def q(self) -> int:
        return self.n - self.k

    def __len__(self):
        return len(self.slices)

    def map_slices(self, fn) -> "RadonField":
        return RadonField(self.n, self.m, self.k, self.frames, self.weights,
                          [fn(s) for s in self.slices], self.random)

    def slice_values(self, i: int, t: np.ndarray, rng: RngStream | None = None, samples: int = 2000):
        s = self.slices[i]
        if isinstance(s, MultipliedField):
            return s.evaluate(t, rng or RngStream(0, i), samples).values
        if isinstance(s, GridField):
            t = np.asarray(t, dtype=float)
            flat = t.reshape(len(t), -1)
            inside = np.all(np.abs(flat) <= s.L, axis=1)
            out = np.zeros(len(t), dtype=complex)
            out[inside] = s.evaluate(t[inside], order=3)
            return out
        return s.evaluate(t)

    def to_csv(self, t_points: np.ndarray) -> str:
        """Slice values at common ``t`` points: frame_index, t entries, re, im."""
        buf = io.StringIO()
        t_points = np.asarray(t_points, dtype=float).reshape(-1, self.q, self.m)
        cols = [f"t_{i + 1}_{j + 1}" for i in range(self.q) for j in range(self.m)]
        buf.write(",".join(["frame_index"] + cols + ["re", "im"]) + "\n")
        for i in range(len(self)):
            vals = self.slice_values(i, t_points)
            for t, v in zip(t_points, vals):
                buf.write(f"{i}," + ",".join(repr(float(c)) for c in t.ravel())
                          + f",{float(v.real)!r},{float(v.imag)!r}\n")
        return buf.getvalue()

    def frames_csv(self) -> str:
        buf = io.StringIO()
        cols = [f"xi_{i + 1}_{j + 1}" for i in range(self.n) for j in range(self.q)]
        buf.write(",".join(["frame_index", "weight"] + cols) + "\n")
        for i, (xi, w) in enumerate(zip(self.frames, self.weights)):
            buf.write(f"{i},{float(w)!r}," + ",".join(repr(float(c)) for c in xi.ravel()) + "\n")
        return buf.getvalue()


def _mixture_slice(f: GaussianMixtureField, xi: np.ndarray, k: int) -> GaussianMixtureField:
    """Exact plane integral of a mixture over ``ω``, as a mixture in ``t``."""
    n, m = f.n, f.m
    proj = np.eye(n) - xi @ xi.T  # = η η'
    phase = np.sum(f.mods * (proj @ f.centers), axis=(1, 2))
    damp = np.einsum("tij,tjk,tik->t", f.mods, f.covs, proj @ f.mods)
    amps = (f.amps * (2 * math.pi) ** (k * m / 2) * np.exp(k / 2 * f.logdets)
            * np.exp(1j * phase - 0.5 * damp))
    centers = np.swapaxes(xi, 0, 1)[None] @ f.centers
    mods = np.swapaxes(xi, 0, 1)[None] @ f.mods
    return GaussianMixtureField(xi.shape[1], m, amps, centers, f.covs, mods)


def _grid_slice(f: GridField, xi: np.ndarray, k: int, N: int, L: float, order: int = 5) -> GridField:
    """Plane integrals of a grid field on a slice lattice by the trapezoid rule."""
    n, m = f.n, f.m
    q = n - k
    g = complete_frame(xi)
    eta = g[:, :k]
    t = lattice_points(q, m, N, L)
    ax = lattice_axis(f.N, f.L)
    mesh = np.meshgrid(*([ax] * (k * m)), indexing="ij")
    omega = np.stack([c.ravel() for c in mesh], axis=-1).reshape(-1, k, m)
    cell = f.spacing ** (k * m)
    out = np.zeros(len(t), dtype=complex)
    base = eta[None] @ omega  # (W, n, m)
    for s in range(0, len(t), max(1, 2**20 // len(omega))):
        tb = t[s:s + 2**20 // len(omega) or 1]
        x = base[None] + (xi[None] @ tb)[:, None]
        flat = x.reshape(-1, n * m)
        inside = np.all(np.abs(flat) <= f.L, axis=1)
        vals = np.zeros(len(flat), dtype=complex)
        if inside.any():
            vals[inside] = f.evaluate(x.reshape(-1, n, m)[inside], order=order)
        out[s:s + len(tb)] = vals.reshape(len(tb), len(omega)).sum(axis=1) * cell
    return GridField(q, m, N, L, out)


def radon_transform(f, params: OrderParams, frames: np.ndarray, weights: np.ndarray | None = None,
                    random: bool = False, slice_grid: tuple[int, float] | None = None) -> RadonField:
    """Plane integrals of ``f`` for each frame.

    Mixtures are transformed exactly and remembered as the ``source``; with
    ``slice_grid = (N, L)`` their slices are then sampled on that lattice.
    Grids integrate along the plane on the space lattice, and ``slice_grid``
    sets the lattice for ``t``.
    """
    params.require_plane()
    n, m, k = params.n, params.m, params.k
    frames = np.asarray(frames, dtype=float)
    frames = check_frame(frames[None] if frames.ndim == 2 else frames, n, n - k)
    if weights is None:
        weights = np.full(len(frames), 1.0 / len(frames))
    source = None
    if isinstance(f, GaussianMixtureField):
        source = f
        slices = [_mixture_slice(f, xi, k) for xi in frames]
        if slice_grid is not None:
            slices = [GridField.sample(s, *slice_grid) for s in slices]
    elif isinstance(f, GridField):
        N, L = slice_grid or (f.N, f.L)
        slices = [_grid_slice(f, xi, k, N, L) for xi in frames]
    else:
        raise TypeError(f"unsupported field type {type(f).__name__}")
    return RadonField(n, m, k, frames, np.asarray(weights, dtype=float), slices, random, source)


def dual_radon(phi: RadonField, points, rng: RngStream | None = None, samples: int = 2000) -> SampledField:
    """Frame average ``Σ_i w_i φ(ξ_i, ξ_i' x)`` at query points.

    With random frames the standard error across frames is attached.
    """
    x = np.asarray(points, dtype=float).reshape(-1, phi.n, phi.m)
    per = np.empty((len(phi), len(x)), dtype=complex)
    for i, xi in enumerate(phi.frames):
        t = np.swapaxes(xi, 0, 1)[None] @ x
        per[i] = phi.slice_values(i, t, (rng or RngStream(0)).child(i), samples)
    vals = phi.weights @ per
    se = None
    if phi.random:
        se = np.std(per, axis=0, ddof=1) / math.sqrt(len(phi))
    return SampledField(x, vals, se)


def radon_inner(phi: RadonField, psi: RadonField) -> complex:
    """``Σ_i w_i ∫ φ_i(t) conj(ψ_i(t)) dt`` for mixture slices."""
    total = 0.0
    for w, a, b in zip(phi.weights, phi.slices, psi.slices):
        total = total + w * a.inner(b)
    return complex(total)


def projection_slice_check(f: GaussianMixtureField, xi: np.ndarray, b: np.ndarray, k: int | None = None):
    """Both sides of ``(Ff)(ξ b) = F[f̂(ξ, ·)](b)`` evaluated in closed form.

    Returns
    -------
    lhs, rhs : complex
    rel_err : float
    """
    xi = np.asarray(xi, dtype=float)
    n, q = xi.shape
    k = n - q if k is None else k
    check_frame(xi, n, q)
    lhs = complex(f.fourier().evaluate(xi @ b))
    rhs = complex(_mixture_slice(f, xi, k).fourier().evaluate(np.asarray(b, dtype=float)))
    return lhs, rhs, abs(lhs - rhs) / max(abs(lhs), 1e-300)


def projection_slice_check_grid(f: GridField, xi: np.ndarray, b: np.ndarray, slice_grid=None):
    """Grid version: lattice sum of ``f`` against the lattice sum of its plane integrals."""
    xi = np.asarray(xi, dtype=float)
    n, q = xi.shape
    k = n - q
    sl = _grid_slice(f, xi, k, *(slice_grid or (f.N, f.L)))
    lhs = complex(f.fourier_at(xi @ b))
    rhs = complex(sl.fourier_at(np.asarray(b, dtype=float)))
    return lhs, rhs, abs(lhs - rhs) / max(abs(lhs), 1e-300)


# ---------------------------------------------------------------------------
# intertwining operators


def scale_slice_wavelet(w, a: np.ndarray, n: int):
    """``w_a(z) = |a|^{(k-n)/2} w(z a^{-1/2})`` for a wavelet on ``M_{n-k,m}``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if isinstance(w, GaussianMixtureField):
        return w.compose_right(inv_sqrt_spd(a)) * float(np.linalg.det(a) ** (-w.n / 2))
    return w


def _convolve_slice(s, w, a: np.ndarray | None):
    """``t``-convolution of one slice with ``w_a`` (``a = None`` means the identity)."""
    m = w.m
    a = np.eye(m) if a is None else np.atleast_2d(np.asarray(a, dtype=float))
    if isinstance(w, SpectralWavelet):
        if isinstance(s, GridField):
            freq = frequency_points(s)
            return apply_grid_multiplier(s, w.scaled_fourier(freq, a).reshape(s.values.shape))
        if isinstance(s, GaussianMixtureField):
            return MultipliedField(s, gram_fn=lambda r: _spectrum_profile(w, r, a))
        if isinstance(s, MultipliedField):
            prev = s.gram_fn
            fn = (lambda r: _spectrum_profile(w, r, a)) if prev is None else \
                (lambda r: prev(r) * _spectrum_profile(w, r, a))
            return MultipliedField(s.base, s.alpha, s.spectral, fn, s.scale)
    if isinstance(w, GaussianMixtureField):
        wa = w.compose_right(inv_sqrt_spd(a)) * float(np.linalg.det(a) ** (-w.n / 2))
        if isinstance(s, GaussianMixtureField):
            return s.convolve(wa)
        if isinstance(s, GridField):
            mult = wa.fourier().evaluate(frequency_points(s)).reshape(s.values.shape)
            return apply_grid_multiplier(s, mult)
    raise TypeError(f"cannot convolve {type(s).__name__} with {type(w).__name__}")


def _spectrum_profile(w: SpectralWavelet, r: np.ndarray, a: np.ndarray) -> np.ndarray:
    return w.profile_eigs(np.sort(np.linalg.eigvals(r @ a).real, axis=-1))


def intertwining_W(f, w, params: OrderParams, frames, weights=None, random: bool = False,
                   slice_grid=None) -> RadonField:
    """``(Wf)(ξ, t) = ∫ f(x) w(t - ξ'x) dx`` as the Radon transform followed by ``t``-convolution."""
    return ridgelet_transform(f, w, None, params, frames, weights, random, slice_grid)


def ridgelet_transform(f, w, a, params: OrderParams, frames, weights=None, random: bool = False,
                       slice_grid=None) -> RadonField:
    """Ridgelet coefficients ``∫ f(x) w_a(t - ξ'x) dx`` for every frame."""
    phi = f if isinstance(f, RadonField) else radon_transform(f, params, frames, weights, random, slice_grid)
    _check_slice_wavelet(w, phi)
    return phi.map_slices(lambda s: _convolve_slice(s, w, a))


def dual_ridgelet(phi: RadonField, w, a, points, rng: RngStream | None = None, samples: int = 2000) -> SampledField:
    """``∫ d_*ξ ∫ φ(ξ, t) w_a(ξ'x - t) dt`` at query points."""
    _check_slice_wavelet(w, phi)
    return dual_radon(phi.map_slices(lambda s: _convolve_slice(s, w, a)), points, rng, samples)


def _check_slice_wavelet(w, phi: RadonField):
    rows = w.rows if isinstance(w, SpectralWavelet) else w.n
    if (rows, w.m) != (phi.q, phi.m):
        raise IncompatibleParams(f"wavelet must live on M_({phi.q},{phi.m})")


def semyanistyi(f, alpha: complex, params: OrderParams, frames, weights=None, random: bool = False,
                slice_grid=None) -> RadonField:
    """Radon transform followed by the order-``alpha`` Riesz potential in ``t``."""
    phi = f if isinstance(f, RadonField) else radon_transform(f, params, frames, weights, random, slice_grid)
    OrderParams(phi.q, phi.m).require_wallach(alpha)
    if complex(alpha) == 0:
        return phi

    def apply(s):
        if isinstance(s, GaussianMixtureField):
            return MultipliedField(s, alpha)
        vals, _ = riesz_multiplier_array(s.n, s.m, frequency_points(s), alpha, s.values.shape)
        return apply_grid_multiplier(s, vals)

    return phi.map_slices(apply)


def semyanistyi_kernel(f: GaussianMixtureField, alpha: complex, xi: np.ndarray, t_points,
                       rng: RngStream, samples: int = 100_000) -> SampledField:
    """Kernel form ``γ^{-1} ∫ f(x) |ξ'x - t|_m^{alpha+k-n} dx`` by Monte Carlo.

    Writes ``x = η u + ξ (t + z)`` and samples ``z`` from a polar/Gaussian
    mixture and ``u`` from a Gaussian, so the plane integral is not taken
    from the closed form.
    """
    alpha = complex(alpha)
    xi = np.asarray(xi, dtype=float)
    n, q = xi.shape
    m, k = f.m, n - q
    if alpha.real <= m - 1:
        raise IncompatibleParams(f"kernel form needs Re alpha > m - 1, got {alpha}")
    gamma = riesz_normalizer(q, m, alpha)
    eta = complete_frame(xi)[:, :k]
    t_points = np.asarray(t_points, dtype=float).reshape(-1, q, m)
    s = float(np.max(f.widths))
    vals = np.zeros(len(t_points), dtype=complex)
    errs = np.zeros(len(t_points))
    for i, t in enumerate(t_points):
        gen = rng.child(i).generator()
        comp = gen.integers(0, 2, samples)
        z = np.empty((samples, q, m))
        z[comp == 0] = sample_polar(q, m, alpha.real, s, gen, int((comp == 0).sum()))
        # Gaussian around where the slice of the first bump peaks
        zc = xi.T @ f.centers[int(np.argmax(np.abs(f.amps)))] - t
        z[comp == 1] = zc + s * gen.standard_normal((int((comp == 1).sum()), q, m))
        dz = 0.5 * np.exp(log_polar_density(z, alpha.real, s)) + 0.5 * np.exp(
            -np.sum((z - zc) ** 2, axis=(1, 2)) / (2 * s * s)) / (2 * math.pi * s * s) ** (q * m / 2)
        u = gen.standard_normal((samples, k, m)) * s + (eta.T @ f.centers[0])[None]
        du = np.exp(-np.sum((u - eta.T @ f.centers[0]) ** 2, axis=(1, 2)) / (2 * s * s)) / (
            2 * math.pi * s * s) ** (k * m / 2)
        x = eta[None] @ u + xi[None] @ (t[None] + z)
        w = f.evaluate(x) * det_power(z) ** (alpha - q) / (dz * du)
        vals[i] = w.mean() / gamma
        errs[i] = math.sqrt(np.var(w) / (samples - 1)) / abs(gamma)
    return SampledField(t_points, vals, errs)
