"""Fourier multipliers of truncated cone integrals of wavelet transforms.

For a spectral wavelet with profile ``u`` and a frequency ``y`` with Gram
matrix ``r = y'y``, the truncated integral

    ``∫_{(εI, ρI)} |a|^{-p} W_a ... d_*a``

acts as the multiplier ``|r|^{p} ψ_p(r)`` where

    ``ψ_p(r) = ∫_{(εr, ρr)} u(s) |s|^{-p} d_*s``.

Two independent evaluations are provided:

* :func:`reduced_multiplier` integrates over ``s`` in the band of ``u``.  For
  ``m = 1`` this is a one-dimensional Gauss rule; for ``m = 2`` the rotation
  average of the interval constraint has a closed form (the constraint is
  linear in ``cos 2θ``); for ``m = 3`` rotations are summed numerically.
* :func:`cone_multiplier` integrates over ``a`` directly with the
  eigenvalue-and-rotation cone rule, i.e. it evaluates the definition.

Both depend on ``r`` only through its eigenvalues.
"""

from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cone import _gauss, _rotation_rule, cone_quadrature
from .wavelets import SpectralWavelet, spectral_integral

CHUNK = 2**21


def _band_rule(w: SpectralWavelet, resolution: int):
    lo, hi = w.support
    return cone_quadrature(lo, hi, w.m, resolution, spectral_only=True, breaks=w.breaks)


def _capture(mu: np.ndarray, lo: float, hi: float, eps: float, rho: float):
    """Masks of frequencies whose interval holds the whole band, or misses it."""
    full = (eps * mu[:, -1] <= lo) & (rho * mu[:, 0] >= hi)
    none = (rho * mu[:, 0] <= lo) | (eps * mu[:, -1] >= hi)
    return full, none


def reduced_multiplier(w: SpectralWavelet, mu: np.ndarray, eps: float, rho: float, power: complex = 0.0,
                       resolution: int = 96) -> np.ndarray:
    """``ψ_p(r)`` for Gram matrices with ascending eigenvalues ``mu`` of shape ``(P, m)``."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    m = mu.shape[1]
    if w.is_null:
        return np.zeros(len(mu))
    lo, hi = w.support
    power = complex(power)
    dtype = float if power.imag == 0 else complex
    out = np.zeros(len(mu), dtype=dtype)
    full, none = _capture(mu, lo, hi, eps, rho)
    total = spectral_integral(w, power)
    out[full] = total
    todo = ~(full | none)
    if not np.any(todo):
        return out
    idx = np.nonzero(todo)[0]
    if m == 1:
        part = _reduced_1d(w, mu[idx, 0], eps, rho, power)
    elif m == 2:
        part = _reduced_2d(w, mu[idx], eps, rho, power, resolution)
    else:
        part = _reduced_rotations(w, mu[idx], eps, rho, power, resolution)
    out[idx] = part if dtype is complex else part.real
    return out


def _reduced_1d(w, mu, eps, rho, power, q: int = 24):
    x0, w0 = _gauss(q)
    lo, hi = w.support
    a = np.log(np.maximum(lo, eps * mu))
    b = np.log(np.minimum(hi, rho * mu))
    cuts = np.log(np.asarray([x for x in w.breaks if lo <= x <= hi]))
    total = np.zeros(len(mu), dtype=complex)
    for c0, c1 in zip(cuts[:-1], cuts[1:]):
        s = np.maximum(a, c0)
        e = np.minimum(b, c1)
        ok = e > s
        if not np.any(ok):
            continue
        half = 0.5 * (e[ok] - s[ok])
        u = 0.5 * (e[ok] + s[ok])[:, None] + half[:, None] * x0[None]
        vals = w.profile_eigs(np.exp(u)[..., None]) * np.exp(-power * u)
        total[ok] += half * (vals @ w0)
    return total


def _interval_fraction(alpha0, beta0, lo, hi):
    """Shrink ``[lo, hi]`` to where ``alpha0 + beta0 * c > 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -alpha0 / beta0
    pos = beta0 > 0
    neg = beta0 < 0
    zero = beta0 == 0
    lo = np.where(pos, np.maximum(lo, root), lo)
    hi = np.where(neg, np.minimum(hi, root), hi)
    dead = zero & (alpha0 <= 0)
    hi = np.where(dead, -2.0, hi)
    return lo, hi


def _reduced_2d(w, mu, eps, rho, power, resolution):
    rule = _band_rule(w, resolution)
    lam = rule.eigenvalues
    base = rule.weights * w.profile_eigs(lam) * np.prod(lam, axis=1) ** (-power)
    sig = 0.5 * (lam[:, 0] + lam[:, 1])
    dd = 0.5 * (lam[:, 1] - lam[:, 0])
    out = np.zeros(len(mu), dtype=complex)
    step = max(1, CHUNK // len(lam))
    for s in range(0, len(mu), step):
        m1 = mu[s:s + step, 0][:, None]
        m2 = mu[s:s + step, 1][:, None]
        lo = np.full((len(m1), len(lam)), -1.0)
        hi = np.full((len(m1), len(lam)), 1.0)
        # s < ρ r
        A, B = rho * m1, rho * m2
        lo, hi = _interval_fraction((A - sig) * (B - sig) - dd**2, dd * (B - A), lo, hi)
        ok_up = (A + B - 2 * sig) > 0
        # s > ε r
        a, b = eps * m1, eps * m2
        lo, hi = _interval_fraction((sig - a) * (sig - b) - dd**2, dd * (b - a), lo, hi)
        ok_lo = (2 * sig - a - b) > 0
        frac = np.where((hi > lo) & ok_up & ok_lo,
                        (np.arccos(np.clip(lo, -1, 1)) - np.arccos(np.clip(hi, -1, 1))) / math.pi, 0.0)
        out[s:s + step] = frac @ base
    return out


def _reduced_rotations(w, mu, eps, rho, power, resolution):
    m = mu.shape[1]
    rule = _band_rule(w, resolution)
    lam = rule.eigenvalues
    base = rule.weights * w.profile_eigs(lam) * np.prod(lam, axis=1) ** (-power)
    rq, rw = _rotation_rule(m, 8)
    nodes = np.einsum("jab,ib,jcb->ijac", rq, lam, rq)  # (L, R, m, m)
    out = np.zeros(len(mu), dtype=complex)
    for i, ev in enumerate(mu):
        r = np.diag(ev)
        inside = (np.linalg.eigvalsh(nodes - eps * r)[..., 0] > 0) & (np.linalg.eigvalsh(rho * r - nodes)[..., 0] > 0)
        out[i] = base @ (inside @ rw)
    return out


def _spectrum_of_product(mu: np.ndarray, a_nodes: np.ndarray, eigs: np.ndarray | None) -> np.ndarray:
    """Ascending spectrum of ``diag(mu) a`` for every cone node ``a``."""
    m = len(mu)
    if m == 1:
        return mu[0] * a_nodes[:, 0, :1]
    if m == 2:
        tr = mu[0] * a_nodes[:, 0, 0] + mu[1] * a_nodes[:, 1, 1]
        det = mu[0] * mu[1] * (a_nodes[:, 0, 0] * a_nodes[:, 1, 1] - a_nodes[:, 0, 1] ** 2)
        disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
        return np.column_stack([tr / 2 - disc, tr / 2 + disc])
    root = np.sqrt(mu)
    return np.linalg.eigvalsh(root[:, None] * a_nodes * root[None, :])


def cone_multiplier(w: SpectralWavelet, mu: np.ndarray, eps: float, rho: float, power: complex = 0.0,
                    resolution: int = 64, rotations: int = 32) -> np.ndarray:
    """``ψ_p(r)`` from the definition: ``|r|^{-p} ∫_{(εI,ρI)} u(a^½ r a^½) |a|^{-p} d_*a``.

    The cone rule is restricted to eigenvalues in
    ``[δ/λ_max(r), Λ/λ_min(r)]``, outside of which the integrand vanishes.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    m = mu.shape[1]
    lo, hi = w.support
    power = complex(power)
    out = np.zeros(len(mu), dtype=complex)
    for i, ev in enumerate(mu):
        rng = (max(eps, lo / ev[-1]), min(rho, hi / ev[0]))
        if not rng[0] < rng[1] or w.is_null:
            continue
        breaks = sorted({b / e for b in w.breaks for e in ev})
        rule = cone_quadrature(eps, rho, m, resolution, spectral_only=False, breaks=breaks,
                               rotations=rotations, eig_range=rng)
        if len(rule) == 0:
            continue
        spec = _spectrum_of_product(ev, rule.nodes, rule.eigenvalues)
        vals = w.profile_eigs(spec) * np.prod(rule.eigenvalues, axis=1) ** (-power)
        out[i] = np.prod(ev) ** (-power) * np.sum(rule.weights * vals)
    return out.real if power.imag == 0 else out


class SpectralTable:
    """Interpolated symmetric function of two eigenvalues on a log grid.

    The function is zero when ``mu_min < lo`` or ``mu_max > hi`` and equal
    to ``constant`` on the capture square ``[c_lo, c_hi]²``; only the
    remaining cells are evaluated.
    """

    def __init__(self, fn, lo: float, hi: float, c_lo: float, c_hi: float, constant, step: float = 0.1):
        self.lo, self.hi = lo, hi
        npts = max(2, int(math.ceil(math.log(hi / lo) / step)) + 1)
        self.grid = np.linspace(math.log(lo), math.log(hi), npts)
        g1, g2 = np.meshgrid(self.grid, self.grid, indexing="ij")
        upper = g1 <= g2
        e1, e2 = np.exp(g1[upper]), np.exp(g2[upper])
        vals = np.zeros(e1.shape, dtype=complex)
        const = (e1 >= c_lo) & (e2 <= c_hi) & (c_lo <= c_hi)
        vals[const] = constant
        rest = ~const
        if np.any(rest):
            vals[rest] = fn(np.column_stack([e1[rest], e2[rest]]))
        table = np.zeros(g1.shape, dtype=complex)
        table[upper] = vals
        table.T[upper] = vals
        self.complex = bool(np.any(table.imag != 0))
        self.table = table if self.complex else table.real
        self.interp = RegularGridInterpolator((self.grid, self.grid), self.table, bounds_error=False, fill_value=0.0)
        self.sup = float(np.max(np.abs(self.table)))

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        flat = mu.reshape(-1, 2)
        with np.errstate(divide="ignore"):
            pts = np.log(np.maximum(flat, 1e-300))
        out = self.interp(pts)
        return out.reshape(mu.shape[:-1])


class TruncatedMultiplier:
    """``ψ_p`` for one truncation step, evaluable at arbitrary eigenvalue arrays.

    ``m = 1`` evaluates the Gauss rule directly; ``m = 2`` precomputes a
    :class:`SpectralTable` from :func:`reduced_multiplier`.
    """

    def __init__(self, w: SpectralWavelet, m: int, eps: float, rho: float, power: complex = 0.0,
                 resolution: int = 96, step: float = 0.1):
        self.w, self.m, self.eps, self.rho, self.power = w, m, eps, rho, complex(power)
        self.resolution = resolution
        self.constant = spectral_integral(w, self.power)
        lo, hi = w.support
        self.table = None
        if m == 2 and not w.is_null:
            self.table = SpectralTable(
                lambda mu: reduced_multiplier(w, mu, eps, rho, self.power, resolution),
                lo / rho, hi / eps, hi / rho, lo / eps, self.constant, step)

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if self.table is not None:
            return self.table(mu)
        flat = mu.reshape(-1, self.m)
        return reduced_multiplier(self.w, flat, self.eps, self.rho, self.power, self.resolution).reshape(mu.shape[:-1])

    @property
    def sup(self) -> float:
        """Largest modulus of the multiplier over all frequencies."""
        if self.table is not None:
            return self.table.sup
        if self.m == 1 and not self.w.is_null:
            lo, hi = self.w.support
            mu = np.geomspace(lo / self.rho, hi / self.eps, 512)[:, None]
            return float(np.max(np.abs(self(mu))))
        return abs(self.constant)

    def bound(self) -> float:
        """``∫ |u(s)| |s|^{-Re p} d_*s`` over the whole cone, a uniform bound."""
        return abs(spectral_integral(self.w, self.power.real))


_TABLES: OrderedDict = OrderedDict()
MAX_TABLES = 32


def truncated_multiplier(w: SpectralWavelet, m: int, eps: float, rho: float, power: complex = 0.0,
                         resolution: int = 96) -> TruncatedMultiplier:
    """Cached :class:`TruncatedMultiplier`.

    The key is the profile rather than the wavelet object, so wavelets that
    differ only in their number of rows share tables.
    """
    key = (w.factors, complex(w.amplitude), m, float(eps), float(rho), complex(power), resolution)
    if key in _TABLES:
        _TABLES.move_to_end(key)
        return _TABLES[key]
    t = TruncatedMultiplier(w, m, eps, rho, power, resolution)
    _TABLES[key] = t
    if len(_TABLES) > MAX_TABLES:
        _TABLES.popitem(last=False)
    return t
