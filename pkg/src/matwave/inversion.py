"""Reconstruction formulas as truncated cone integrals with convergence reports.

Every reconstruction integrates wavelet transforms over the matrix interval
``(εI, ρI)`` of scales for a sequence of truncations.  On the Fourier side
each truncation is a multiplier depending on the eigenvalues of ``y'y``
(see :mod:`matwave.multipliers`), which is the reference computation; the
literal sum over cone nodes is available as a cross-check.

Grid fields are processed on their FFT lattice.  Mixtures (and Riesz
potentials of mixtures) are processed analytically as
:class:`~matwave.fields.MultipliedField` objects whose L² errors are Monte
Carlo estimates on the Fourier side with a fixed stream, so errors of
different steps use common random numbers.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cone import cone_quadrature
from .errors import IncompatibleParams, NoConvergence, RankDeficient
from .fields import (
    GaussianMixtureField,
    SampledField,
    GridField,
    MultipliedField,
    apply_grid_multiplier,
    lattice_points,
    parseval_distance,
)
from .linalg import OrderParams, check_spd
from .multipliers import cone_multiplier, reduced_multiplier, truncated_multiplier
from .radon import (
    RadonField,
    default_frames,
    dual_radon,
    dual_ridgelet,
    radon_transform,
    ridgelet_transform,
)
from .sampling import RngStream, sample_polar
from .special import fuglede_constant
from .transforms import frequency_points, riesz_potential_multiplier, wavelet_transform
from .wavelets import SpectralWavelet, pair_constant, ridgelet_constant, riesz_inversion_constant, spectral_integral

DEFAULT_TOL = 1e-4
DEFAULT_RESOLUTION = 96
IDENTITY_STRIDE = 97  # lattice subsample for the ridgelet identity check


# ---------------------------------------------------------------------------
# schedules and reports


@dataclass(frozen=True)
class TruncationSchedule:
    """Nested truncations ``(ε_j, ρ_j)`` with ``ε`` decreasing and ``ρ`` increasing.

    Parameters
    ----------
    pairs : sequence of (float, float)
    resolution : int
        Gauss nodes per eigenvalue axis for the multiplier and cone rules.
    tol : float
        Cauchy stopping rule: stop once the relative L² increment between
        successive steps drops below ``tol``.
    """

    pairs: tuple
    resolution: int = DEFAULT_RESOLUTION
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        pairs = tuple((float(e), float(r)) for e, r in self.pairs)
        if not pairs:
            raise IncompatibleParams("a truncation schedule needs at least one step")
        for e, r in pairs:
            if not (0 < e < r):
                raise IncompatibleParams(f"need 0 < eps < rho, got ({e}, {r})")
        for (e0, r0), (e1, r1) in zip(pairs[:-1], pairs[1:]):
            if not (e1 < e0 and r1 > r0):
                raise IncompatibleParams("eps must decrease and rho increase along the schedule")
        if self.resolution < 4:
            raise IncompatibleParams("resolution must be at least 4")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def default_schedule(steps: int = 6, resolution: int = DEFAULT_RESOLUTION, tol: float = DEFAULT_TOL):
    """``(10^-j, 10^j)`` for ``j = 1..steps``."""
    return TruncationSchedule(tuple((10.0**-j, 10.0**j) for j in range(1, steps + 1)), resolution, tol)


def geometric_schedule(eps: float, rho: float, factor: float = 10.0, steps: int = 6,
                       resolution: int = DEFAULT_RESOLUTION, tol: float = DEFAULT_TOL):
    """``(eps / factor^j, rho * factor^j)`` for ``j = 0..steps-1``."""
    return TruncationSchedule(tuple((eps / factor**j, rho * factor**j) for j in range(steps)), resolution, tol)


def as_schedule(schedule) -> TruncationSchedule:
    if schedule is None:
        return default_schedule()
    if isinstance(schedule, TruncationSchedule):
        return schedule
    return TruncationSchedule(tuple(schedule))


@dataclass
class StepRecord:
    step: int
    eps: float
    rho: float
    l2_error: float
    multiplier_sup: float
    wall_time_ms: float
    increment: float = math.nan
    definition_gap: float = math.nan


@dataclass
class ConvergenceReport:
    """Per-step errors of a truncated reconstruction.

    ``l2_error`` is relative to the scaled reference ``constant * f`` when a
    reference with non-zero norm is known and absolute otherwise.
    ``bound`` is a uniform bound for the multiplier over every truncation.
    """

    records: list
    verdict: str
    last_increment: float
    constant: complex
    bound: float
    checks: dict = field(default_factory=dict)
    normalized: object = None
    tol: float = 0.0

    CSV_COLUMNS = ("step", "eps", "rho", "l2_error", "multiplier_sup", "wall_time_ms")

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.l2_error for r in self.records])

    @property
    def sups(self) -> np.ndarray:
        return np.array([r.multiplier_sup for r in self.records])

    @property
    def final_error(self) -> float:
        return self.records[-1].l2_error

    def sups_bounded(self, rtol: float = 1e-6) -> bool:
        return bool(np.all(self.sups <= self.bound * (1 + rtol) + 1e-300))

    def nonincreasing(self, slack: float | None = None, start: int = 0) -> bool:
        """Errors never grow by more than ``slack`` (relative) from step ``start`` on.

        The default slack is the schedule's Cauchy tolerance: changes the
        stopping rule treats as no change count as ties.
        """
        slack = self.tol if slack is None else slack
        e = self.errors[start:]
        return bool(np.all(e[1:] <= e[:-1] * (1 + slack) + 1e-15))

    def raise_if_diverged(self):
        if not self.converged:
            raise NoConvergence(f"schedule ended without convergence; last increment {self.last_increment:.3e}")

    def to_csv(self, timings: bool = True) -> str:
        """Report rows; ``timings=False`` leaves ``wall_time_ms`` empty for reproducible files."""
        buf = io.StringIO()
        buf.write(",".join(self.CSV_COLUMNS) + "\n")
        for r in self.records:
            wall = f"{r.wall_time_ms:.3f}" if timings else ""
            buf.write(f"{r.step},{r.eps!r},{r.rho!r},{r.l2_error:.12e},{r.multiplier_sup:.12e},{wall}\n")
        return buf.getvalue()

    def summary(self) -> str:
        return (f"verdict={self.verdict} steps={len(self.records)} final_l2_error={self.final_error:.6e} "
                f"last_increment={self.last_increment:.3e}")


def _relative(num: float, den: float) -> float:
    return num / den if den > 0 else num


# ---------------------------------------------------------------------------
# pipelines: one output per truncation step


class _GridPipe:
    """Lattice multiplier ``scale * prod(mu)^outer * ψ_power(mu)`` applied to a grid."""

    def __init__(self, g: GridField, w: SpectralWavelet, power: complex, outer: complex, scale: complex,
                 reference: GridField | None, resolution: int):
        self.g, self.w, self.power, self.outer, self.scale = g, w, complex(power), complex(outer), complex(scale)
        self.resolution = resolution
        y = frequency_points(g)
        self.mu = np.linalg.eigvalsh(np.swapaxes(y, -1, -2) @ y)
        self.full_rank = self.mu[:, 0] > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            self.outer_vals = np.where(self.full_rank, np.prod(np.maximum(self.mu, 1e-300), axis=1) ** self.outer, 0)
        self.reference = reference
        self.ref_norm = reference.norm() if reference is not None else 0.0

    def multiplier(self, eps: float, rho: float) -> np.ndarray:
        psi = reduced_multiplier(self.w, self.mu, eps, rho, self.power, self.resolution)
        return self.scale * psi * self.outer_vals

    def output(self, eps: float, rho: float):
        mult = self.multiplier(eps, rho)
        full = bool(np.all(np.abs(mult[self.full_rank] - self.scale * spectral_integral(self.w, self.power)
                                  * self.outer_vals[self.full_rank]) == 0))
        out = apply_grid_multiplier(self.g, mult.reshape(self.g.values.shape))
        sup = float(np.max(np.abs(mult / np.where(self.outer_vals != 0, self.outer_vals, 1))))
        return out, sup, full

    def definition(self, eps: float, rho: float) -> GridField:
        """Literal cone sum ``Σ_i w_i |a_i|^{-p} W_{a_i} g``.

        Its multiplier is ``|r|^p ψ_p(r)``, which is the multiplier path
        whenever ``outer == power`` (Calderón and Riesz inversion).
        """
        m = self.g.m
        lo, hi = self.w.support
        mu = self.mu[self.full_rank]
        rng = (max(eps, lo / mu[:, -1].max()), min(rho, hi / mu[:, 0].min()))
        if self.w.is_null or not rng[0] < rng[1]:
            return self.g * 0.0
        rule = cone_quadrature(eps, rho, m, self.resolution, spectral_only=(m == 1), eig_range=rng)
        total = self.g * 0.0
        for a, wt, lam in zip(rule.nodes, rule.weights, rule.eigenvalues):
            coef = self.scale * wt * np.prod(lam) ** (-self.power)
            total = total + wavelet_transform(self.g, self.w, a, check=False) * coef
        return total

    def error(self, out, constant) -> float:
        if self.reference is None:
            return math.nan
        if self.ref_norm == 0:
            return out.norm()
        ref = self.reference * constant
        return _relative((out - ref).norm(), ref.norm())

    @staticmethod
    def distance(a, b) -> float:
        return (a - b).norm()

    @staticmethod
    def norm(a) -> float:
        return a.norm()


class _MixturePipe:
    """Analytic multiplier path for mixtures and Riesz potentials of mixtures.

    The input is ``base`` seen through ``scale_in * |y|^{-alpha_in}``; the
    output multiplies by ``scale * |y|^{2 outer} ψ_power``.
    """

    def __init__(self, g, w: SpectralWavelet, power: complex, outer: complex, scale: complex,
                 reference: GaussianMixtureField | None, resolution: int, rng: RngStream, samples: int):
        if isinstance(g, MultipliedField):
            if g.spectral is not None or g.gram_fn is not None:
                raise IncompatibleParams("input must be a mixture or a pure Riesz potential of one")
            self.base, self.alpha_in, self.scale_in = g.base, g.alpha, g.scale
        else:
            self.base, self.alpha_in, self.scale_in = g, 0.0, 1.0
        self.n, self.m = self.base.n, self.base.m
        self.w, self.power, self.outer, self.scale = w, complex(power), complex(outer), complex(scale)
        self.resolution = resolution
        self.reference = reference
        self.rng, self.samples = rng, samples
        self.ref_norm = reference.norm() if reference is not None else 0.0

    def _field(self, spectral) -> MultipliedField:
        return MultipliedField(self.base, self.alpha_in - 2 * self.outer, spectral,
                               scale=self.scale * self.scale_in)

    def output(self, eps: float, rho: float):
        t = truncated_multiplier(self.w, self.m, eps, rho, self.power, self.resolution)
        return self._field(t), abs(self.scale * self.scale_in) * t.sup, False

    def definition_gap(self, eps: float, rho: float, count: int = 4) -> float:
        """Largest gap between the tabulated multiplier and the cone rule at sampled frequencies."""
        gen = self.rng.generator(10**6)
        sig = float(np.min(self.base.widths))
        y = sample_polar(self.n, self.m, float(self.n), 1.0 / sig, gen, count)
        mu = np.linalg.eigvalsh(np.swapaxes(y, -1, -2) @ y)
        t = truncated_multiplier(self.w, self.m, eps, rho, self.power, self.resolution)
        direct = cone_multiplier(self.w, mu, eps, rho, self.power)
        scale = max(abs(t.constant), 1e-300)
        return float(np.max(np.abs(t(mu) - direct)) / scale)

    def error(self, out, constant) -> float:
        if self.reference is None:
            return math.nan
        if self.ref_norm == 0:
            return self.norm(out)
        ref = self.reference * constant
        d = parseval_distance(out, ref, self.rng, self.samples).value
        return _relative(d, abs(constant) * self.ref_norm)

    def distance(self, a, b) -> float:
        if a.spectral is None or b.spectral is None:
            return 0.0
        sa, sb = a.spectral, b.spectral
        diff = MultipliedField(a.base, a.alpha, lambda mu: sa(mu) - sb(mu), scale=a.scale)
        return parseval_distance(diff, None, self.rng, self.samples).value

    def norm(self, a) -> float:
        if a.spectral is None:
            return 0.0
        return parseval_distance(a, None, self.rng, self.samples).value


def _drive(pipe, schedule: TruncationSchedule, constant: complex, bound: float,
           definition: bool = False, strict: bool = False, gap_fn=None) -> tuple[object, ConvergenceReport]:
    records = []
    prev = None
    out = None
    verdict = "diverged"
    last_inc = math.inf
    for j, (eps, rho) in enumerate(schedule.pairs):
        t0 = time.perf_counter()
        out, sup, full = pipe.output(eps, rho)
        err = pipe.error(out, constant)
        inc = math.nan
        if prev is not None:
            inc = _relative(pipe.distance(out, prev), pipe.norm(out))
        gap = math.nan
        if definition:
            gap = gap_fn(eps, rho, out)
        wall = (time.perf_counter() - t0) * 1e3
        records.append(StepRecord(j, eps, rho, err, sup, wall, inc, gap))
        prev = out
        if full:
            verdict, last_inc = "converged", 0.0 if math.isnan(inc) else inc
            break
        if not math.isnan(inc):
            last_inc = inc
            if inc < schedule.tol:
                verdict = "converged"
                break
    report = ConvergenceReport(records, verdict, last_inc, constant, bound, tol=schedule.tol)
    if strict:
        report.raise_if_diverged()
    return out, report


def _grid_gap(pipe: _GridPipe):
    def gap(eps, rho, out):
        d = pipe.definition(eps, rho)
        return _relative((d - out).norm(), out.norm())
    return gap


def _mixture_gap(pipe: _MixturePipe):
    return lambda eps, rho, out: pipe.definition_gap(eps, rho)


def _normalize(out, constant):
    if constant == 0:
        return None
    if isinstance(out, MultipliedField):
        return out.with_scale(1.0 / constant)
    return out * (1.0 / constant)


def _reference(reference, g):
    """Reference as a field matching the representation of ``g``."""
    if reference is None:
        return None
    if isinstance(g, GridField) and isinstance(reference, GaussianMixtureField):
        return GridField.sample(reference, g.N, g.L)
    return reference


def _check_lp(n: int, m: int, alpha: complex):
    """Phantoms are Gaussian, so they lie in every ``L^p``; a valid ``p ≥ 1`` exists iff ``n > Re α + m - 1``."""
    if not n > complex(alpha).real + m - 1:
        raise IncompatibleParams(f"no p ≥ 1 with p < n/(Re alpha + m - 1) for n={n}, m={m}, alpha={alpha}")


# ---------------------------------------------------------------------------
# Calderón reproducing formula


def calderon_multiplier(w: SpectralWavelet, y_gram: np.ndarray, eps: float, rho: float,
                        resolution: int = DEFAULT_RESOLUTION) -> float:
    """Truncated Calderón multiplier ``k_{ε,ρ}`` at a frequency with Gram matrix ``y_gram``.

    Raises
    ------
    RankDeficient
        If ``y_gram`` is singular.
    """
    r = np.atleast_2d(np.asarray(y_gram, dtype=float))
    mu = np.linalg.eigvalsh(r)
    if mu[0] <= 1e-12 * max(mu[-1], 1e-300):
        raise RankDeficient("the Calderón multiplier needs a full-rank frequency")
    check_spd(r)
    return float(reduced_multiplier(w, mu[None], eps, rho, 0.0, resolution)[0])


def _pipe_for(g, w, power, outer, scale, reference, schedule, rng, samples):
    if isinstance(g, GridField):
        return _GridPipe(g, w, power, outer, scale, _reference(reference, g), schedule.resolution)
    if isinstance(g, (GaussianMixtureField, MultipliedField)):
        return _MixturePipe(g, w, power, outer, scale, reference, schedule.resolution,
                            rng or RngStream(1), samples)
    raise TypeError(f"unsupported field type {type(g).__name__}")


def _gap_for(pipe):
    return _grid_gap(pipe) if isinstance(pipe, _GridPipe) else _mixture_gap(pipe)


def _check_wavelet(w: SpectralWavelet, n: int, m: int):
    if (w.rows, w.m) != (n, m):
        raise IncompatibleParams(f"wavelet lives on M_({w.rows},{w.m}), field on M_({n},{m})")


def calderon_reconstruct(f, w: SpectralWavelet, schedule=None, reference="self", definition: bool = False,
                         strict: bool = False, rng: RngStream | None = None, samples: int = 100_000):
    """Truncated Calderón integrals ``∫_{(εI,ρI)} W_a f d_*a`` along a schedule.

    Parameters
    ----------
    f : GridField or GaussianMixtureField
    w : SpectralWavelet
    schedule : TruncationSchedule, optional
    reference : field, None or "self"
        Errors are measured against ``c_w * reference``; ``"self"`` uses ``f``.
    definition : bool
        Also evaluate the cone-node sum and report its gap to the multiplier path.
    strict : bool
        Raise :class:`NoConvergence` unless the verdict is "converged".

    Returns
    -------
    field
        The last truncated integral, which approximates ``c_w f``.
    ConvergenceReport
        ``report.normalized`` holds the output divided by ``c_w``.
    """
    schedule = as_schedule(schedule)
    _check_wavelet(w, f.n, f.m)
    constant = spectral_integral(w, 0.0)
    ref = f if isinstance(reference, str) else reference
    pipe = _pipe_for(f, w, 0.0, 0.0, 1.0, ref, schedule, rng, samples)
    out, report = _drive(pipe, schedule, constant, abs(spectral_integral(w.abs(), 0.0)),
                         definition, strict, _gap_for(pipe))
    report.normalized = _normalize(out, constant)
    return out, report


# ---------------------------------------------------------------------------
# Riesz potential inversion


def riesz_invert(g, alpha: complex, w: SpectralWavelet, params: OrderParams, schedule=None, reference=None,
                 definition: bool = False, strict: bool = False, rng: RngStream | None = None,
                 samples: int = 100_000):
    """Recover ``d_w(α) f`` from ``g = I^α f`` by ``∫ W_a g |a|^{-α/2} d_*a``.

    The truncated operator has multiplier ``|y|^α ψ_{α/2}(y'y)`` on ``g``,
    i.e. ``ψ_{α/2}`` on ``f``; the errors compare with ``d_w(α) * reference``.

    Returns
    -------
    field, ConvergenceReport
        ``report.normalized`` holds the output divided by ``d_w(α)``.
    """
    schedule = as_schedule(schedule)
    n, m = params.n, params.m
    alpha = params.require_wallach(alpha)
    _check_lp(n, m, alpha)
    _check_wavelet(w, n, m)
    constant = riesz_inversion_constant(w, n, m, alpha)
    pipe = _pipe_for(g, w, alpha / 2, alpha / 2, 1.0, reference, schedule, rng, samples)
    out, report = _drive(pipe, schedule, constant, abs(spectral_integral(w.abs(), complex(alpha).real / 2)),
                         definition, strict, _gap_for(pipe))
    report.normalized = _normalize(out, constant)
    return out, report


# ---------------------------------------------------------------------------
# Radon inversion


def _radon_reference(data: RadonField, reference):
    if isinstance(reference, str):
        return data.source
    return reference


def _lattice_backprojection(data: RadonField, grid: tuple[int, float]) -> GridField:
    N, L = grid
    pts = lattice_points(data.n, data.m, N, L)
    vals = dual_radon(data, pts).values
    return GridField(data.n, data.m, N, L, vals.reshape((N,) * (data.n * data.m)))


def radon_invert_method1(data: RadonField, w: SpectralWavelet, params: OrderParams, schedule=None,
                         grid: tuple[int, float] | None = None, reference="source", definition: bool = False,
                         strict: bool = False, rng: RngStream | None = None, samples: int = 100_000):
    """Back-project, then invert the Riesz potential of order ``k``.

    The dual transform of the data equals ``c_{n,k,m} I^k f``, so the
    truncated integral ``∫ W_a (f̂)^∨ |a|^{-k/2} d_*a`` tends to
    ``c_{n,k,m} d_w(k) f``; the normalized output divides by that product.

    With grid slices the back-projection is evaluated on the lattice
    ``grid = (N, L)``.  With closed-form data (``data.source`` set and no
    ``grid``) the back-projection is represented by its multiplier
    ``c_{n,k,m} |y|^{-k}`` and evaluated analytically.

    Returns
    -------
    field, ConvergenceReport
        ``report.checks["fuglede"]`` holds the relative gap between the
        lattice back-projection and ``c_{n,k,m} I^k f`` when both exist.
    """
    schedule = as_schedule(schedule)
    n, m, k = params.n, params.m, params.k
    params.require_plane()
    _check_dims(data, params)
    _check_lp(n, m, k)
    _check_wavelet(w, n, m)
    c = fuglede_constant(n, k, m)
    ref = _radon_reference(data, reference)
    checks = {}
    if grid is not None:
        back = _lattice_backprojection(data, grid)
        if ref is not None:
            lattice_ref = _reference(ref, back)
            expected = riesz_potential_multiplier(lattice_ref, k, OrderParams(n, m)) * c
            checks["fuglede"] = _relative((back - expected).norm(), expected.norm())
    elif data.source is not None:
        back = MultipliedField(data.source, k, scale=c)
    else:
        raise IncompatibleParams("grid slices need a target lattice: pass grid=(N, L)")
    constant = c * riesz_inversion_constant(w, n, m, k)
    pipe = _pipe_for(back, w, k / 2, k / 2, 1.0, ref, schedule, rng, samples)
    out, report = _drive(pipe, schedule, constant, abs(c * spectral_integral(w.abs(), k / 2)),
                         definition, strict, _gap_for(pipe))
    if grid is not None:
        # the lattice pipe sees c I^k f as its input; report the multiplier acting on f
        report.records = [replace(r, multiplier_sup=c * r.multiplier_sup) for r in report.records]
    report.checks.update(checks)
    report.normalized = _normalize(out, constant)
    return out, report


def _check_dims(data: RadonField, params: OrderParams):
    if (data.n, data.m, data.k) != (params.n, params.m, params.k):
        raise IncompatibleParams("Radon data and parameters disagree on (n, m, k)")


class _SlicePipe:
    """Filter every grid slice by ``scale * |r|^{k/2} ψ_{k/2}(r)`` and back-project to a lattice."""

    def __init__(self, data: RadonField, w: SpectralWavelet, scale: complex, grid, reference,
                 resolution: int, factors: tuple | None = None):
        self.data, self.w, self.scale, self.grid = data, w, complex(scale), grid
        # the definition path convolves with each factor in turn (u then v for ridgelets)
        self.factors = factors or (w,)
        self.k = data.k
        self.resolution = resolution
        s0 = data.slices[0]
        if not all(isinstance(s, GridField) and (s.N, s.L) == (s0.N, s0.L) for s in data.slices):
            raise IncompatibleParams("slice pipelines need grid slices on one lattice")
        y = frequency_points(s0)
        self.mu = np.linalg.eigvalsh(np.swapaxes(y, -1, -2) @ y)
        self.full_rank = self.mu[:, 0] > 1e-12
        self.outer_vals = np.where(self.full_rank, np.prod(np.maximum(self.mu, 1e-300), axis=1) ** (self.k / 2), 0)
        self.shape = s0.values.shape
        self.reference = None if reference is None else GridField.sample(reference, *grid) \
            if isinstance(reference, GaussianMixtureField) else reference
        self.ref_norm = self.reference.norm() if self.reference is not None else 0.0

    def output(self, eps: float, rho: float):
        psi = reduced_multiplier(self.w, self.mu, eps, rho, self.k / 2, self.resolution)
        mult = (self.scale * psi * self.outer_vals).reshape(self.shape)
        filtered = self.data.map_slices(lambda s: apply_grid_multiplier(s, mult))
        full = bool(np.all(psi[self.full_rank] == spectral_integral(self.w, self.k / 2)))
        return _lattice_backprojection(filtered, self.grid), abs(self.scale) * float(np.max(np.abs(psi))), full

    def definition(self, eps: float, rho: float) -> GridField:
        """Cone-node sum of ``|a|^{-k/2}`` times slice convolutions, then back-projection.

        Slice convolution is linear and identical for every frame, so the
        node sum of transfer functions is formed first and applied once per
        slice.  Each node convolves with every factor in turn.
        """
        m = self.data.m
        lo, hi = self.w.support
        mu = self.mu[self.full_rank]
        rng = (max(eps, lo / mu[:, -1].max()), min(rho, hi / mu[:, 0].min()))
        if self.w.is_null or not rng[0] < rng[1]:
            return _lattice_backprojection(self.data.map_slices(lambda s: s * 0.0), self.grid)
        rule = cone_quadrature(eps, rho, m, self.resolution, spectral_only=(m == 1), eig_range=rng)
        freq = frequency_points(self.data.slices[0])
        total = np.zeros(len(freq), dtype=complex)
        for a, wt, lam in zip(rule.nodes, rule.weights, rule.eigenvalues):
            node = np.full(len(freq), self.scale * wt * np.prod(lam) ** (-self.k / 2), dtype=complex)
            for x in self.factors:
                node = node * x.scaled_fourier(freq, a)
            total += node
        total = total.reshape(self.shape)
        return _lattice_backprojection(self.data.map_slices(lambda s: apply_grid_multiplier(s, total)), self.grid)

    def error(self, out, constant) -> float:
        if self.reference is None:
            return math.nan
        if self.ref_norm == 0:
            return out.norm()
        ref = self.reference * constant
        return _relative((out - ref).norm(), ref.norm())

    distance = staticmethod(_GridPipe.distance)
    norm = staticmethod(_GridPipe.norm)


def _slice_gap(pipe: _SlicePipe):
    def gap(eps, rho, out):
        d = pipe.definition(eps, rho)
        return _relative((d - out).norm(), out.norm())
    return gap


def _multiplier_form_gap(out: GridField, reference, constant_mult, grid) -> float:
    """Gap between a lattice reconstruction and ``F^{-1}[m F f]`` computed from the reference."""
    lattice_ref = GridField.sample(reference, *grid) if isinstance(reference, GaussianMixtureField) else reference
    expected = apply_grid_multiplier(lattice_ref, constant_mult(lattice_ref))
    return _relative((out - expected).norm(), expected.norm())


def _method2(data: RadonField, w: SpectralWavelet, params: OrderParams, constant: complex, schedule,
             grid, reference, definition, strict, rng, samples, factors=None):
    n, m, k = params.n, params.m, params.k
    c = fuglede_constant(n, k, m)
    ref = _radon_reference(data, reference)
    if data.slices and isinstance(data.slices[0], GridField):
        if grid is None:
            raise IncompatibleParams("grid slices need a target lattice: pass grid=(N, L)")
        pipe = _SlicePipe(data, w, 1.0, grid, ref, schedule.resolution, factors)
        out, report = _drive(pipe, schedule, constant, abs(spectral_integral(w.abs(), k / 2)),
                             definition, strict, _slice_gap(pipe))
        if ref is not None and constant != 0:
            eps, rho = report.records[-1].eps, report.records[-1].rho

            def mult(field_):
                y = frequency_points(field_)
                mu = np.linalg.eigvalsh(np.swapaxes(y, -1, -2) @ y)
                vals = c * reduced_multiplier(w, mu, eps, rho, k / 2, schedule.resolution)
                return vals.reshape(field_.values.shape)

            report.checks["multiplier_form"] = _multiplier_form_gap(out, ref, mult, grid)
    elif data.source is not None:
        pipe = _MixturePipe(data.source, w, k / 2, 0.0, c, ref, schedule.resolution, rng or RngStream(1), samples)
        out, report = _drive(pipe, schedule, constant, abs(c * spectral_integral(w.abs(), k / 2)),
                             definition, strict, _mixture_gap(pipe))
    else:
        raise IncompatibleParams("need grid slices or closed-form data")
    report.normalized = _normalize(out, constant)
    return out, report


def radon_invert_method2(data: RadonField, w: SpectralWavelet, params: OrderParams, schedule=None,
                         grid: tuple[int, float] | None = None, reference="source", definition: bool = False,
                         strict: bool = False, rng: RngStream | None = None, samples: int = 100_000):
    """Truncated ``∫ W_a^* f̂ |a|^{-k/2} d_*a`` with ``w`` on ``M_{n-k,m}``.

    The scale integral is applied to each slice as the multiplier
    ``|r|^{k/2} ψ_{k/2}(r)`` and the result is back-projected; the limit is
    ``c_w f``.  Grid slices are back-projected to the lattice
    ``grid = (N, L)``; closed-form data are handled by the equivalent
    multiplier ``c_{n,k,m} ψ_{k/2}(y'y)`` on ``f``.

    Returns
    -------
    field, ConvergenceReport
        ``report.checks["multiplier_form"]`` holds the gap between the frame
        pipeline and ``F^{-1}[m_{ε,ρ} F f]`` for grid data.
    """
    schedule = as_schedule(schedule)
    n, m, k = params.n, params.m, params.k
    params.require_plane()
    _check_dims(data, params)
    if (w.rows, w.m) != (n - k, m):
        raise IncompatibleParams(f"wavelet must live on M_({n - k},{m})")
    constant = ridgelet_constant(w, n, m, k)
    return _method2(data, w, params, constant, schedule, grid, reference, definition, strict, rng, samples)


# ---------------------------------------------------------------------------
# ridgelet reproducing formula


def ridgelet_reproduce(f, u: SpectralWavelet, v: SpectralWavelet, params: OrderParams, schedule=None,
                       frames=None, weights=None, slice_grid=None, grid=None, reference="source",
                       definition: bool = False, identity_scales=(), strict: bool = False,
                       rng: RngStream | None = None, samples: int = 100_000):
    """Truncated ``∫ V_a^* U_a f |a|^{-k/2} d_*a`` for wavelets ``u, v`` on ``M_{n-k,m}``.

    Composing the ridgelet transform with ``u`` and the dual ridgelet
    transform with ``v`` filters each slice by the product profile, so the
    result equals method 2 with ``w = u * v`` and tends to ``c_{u,v} f``.

    Parameters
    ----------
    f : GaussianMixtureField, GridField or RadonField
    identity_scales : sequence of ndarray
        Scales ``a`` at which ``V_a^* U_a f`` and ``W_a^*(f̂)`` are compared
        on the lattice; the largest relative gap goes to
        ``report.checks["identity"]``.

    Returns
    -------
    field, ConvergenceReport
        For ``c_{u,v} = 0`` the output is the zero field and
        ``report.normalized`` is ``None``.
    """
    schedule = as_schedule(schedule)
    n, m, k = params.n, params.m, params.k
    params.require_plane()
    for x in (u, v):
        if (x.rows, x.m) != (n - k, m):
            raise IncompatibleParams(f"wavelets must live on M_({n - k},{m})")
    if isinstance(f, RadonField):
        data = f
    else:
        if frames is None:
            frames, weights = default_frames(n, k)
        data = radon_transform(f, params, frames, weights, slice_grid=slice_grid)
    w = u.times(v)
    constant = pair_constant(u, v, n, m, k)
    checks = {}
    if identity_scales and grid is not None:
        pts = lattice_points(n, m, *grid)[::IDENTITY_STRIDE]
        gaps = []
        for a in identity_scales:
            lhs = dual_ridgelet(ridgelet_transform(data, u, a, params, None), v, a, pts).values
            rhs = dual_ridgelet(data, w, a, pts).values
            gaps.append(_relative(float(np.linalg.norm(lhs - rhs)), float(np.linalg.norm(rhs))))
        checks["identity"] = max(gaps)
    out, report = _method2(data, w, params, constant, schedule, grid, reference, definition, strict, rng,
                           samples, factors=(u, v))
    report.checks.update(checks)
    return out, report


# ---------------------------------------------------------------------------
# pointwise frame checks for closed-form data


def method2_pointwise(data: RadonField, w: SpectralWavelet, params: OrderParams, eps: float, rho: float,
                      points, rng: RngStream, samples: int = 4000, resolution: int = DEFAULT_RESOLUTION):
    """Frame pipeline against the multiplier form at query points.

    The frame pipeline filters every closed-form slice by
    ``|r|^{k/2} ψ_{k/2}(r)`` (Monte Carlo inverse transform per frame) and
    averages over frames.  The multiplier form is
    ``F^{-1}[c_{n,k,m} ψ_{k/2} F f]`` at the same points.

    Returns
    -------
    frames, multiplier : SampledField
        Values with standard errors; agreement within a few combined
        standard errors confirms the per-step multiplier identity.
    """
    if data.source is None:
        raise IncompatibleParams("pointwise checks need closed-form data")
    n, m, k = params.n, params.m, params.k
    c = fuglede_constant(n, k, m)
    t = truncated_multiplier(w, m, eps, rho, k / 2, resolution)

    def slice_filter(mu):
        return np.prod(mu, axis=-1) ** (k / 2) * t(mu)

    x = np.asarray(points, dtype=float).reshape(-1, n, m)
    per = np.zeros((len(data.frames), len(x)), dtype=complex)
    var = np.zeros(len(x))
    for i, (xi, wt) in enumerate(zip(data.frames, data.weights)):
        sl = MultipliedField(data.slices[i], spectral=slice_filter)
        res = sl.evaluate(np.swapaxes(xi, 0, 1)[None] @ x, rng.child(i), samples)
        per[i] = res.values
        var += (wt * res.stderr) ** 2
    vals = data.weights @ per
    if data.random:
        # spread across random frames already contains the per-frame Monte Carlo noise
        se = np.std(per, axis=0, ddof=1) / math.sqrt(len(per))
    else:
        se = np.sqrt(var)
    framed = SampledField(x, vals, se)
    direct = MultipliedField(data.source, spectral=t, scale=c).evaluate(x, rng.child(len(data.frames)), samples * 16)
    return framed, direct
