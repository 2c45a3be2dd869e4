"""Deterministic quadrature on matrix intervals of the positive definite cone.

All rules integrate against the invariant measure ``|a|**(-(m+1)/2) da``.

Two parametrizations are provided.  The eigenvalue one writes
``a = q diag(λ) q'`` so that ``da`` becomes a Vandermonde weight times the
invariant measure on the orthogonal group; eigenvalues sit on ordered
Gauss-Legendre nodes in ``log λ``.  For integrands that only depend on the
eigenvalues the orthogonal factor integrates out to a constant; otherwise it
is sampled with a product rule on ``SO(m)``.  Non-scalar bounds use a
Cholesky parametrization with an indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyInterval, IncompatibleParams
from .linalg import cone_interval_contains
from .special import log_siegel_gamma

PANEL_WIDTH = 1.0  # max width of a Gauss panel in log-eigenvalue units


def weyl_constant(m: int) -> float:
    """Constant ``C`` in ``∫ g(a) da = C ∫ g(λ) ∏_{i<j}|λ_i - λ_j| dλ`` (unordered λ)."""
    return math.exp(m * m / 2 * math.log(math.pi) - log_siegel_gamma(m, m / 2).real
                    - math.lgamma(m + 1))


@lru_cache(maxsize=64)
def _gauss(q: int):
    return np.polynomial.legendre.leggauss(q)


def _panels(lo: float, hi: float, breaks=()) -> np.ndarray:
    """Panel edges covering ``[lo, hi]`` honouring interior breakpoints."""
    pts = [lo, hi] + [b for b in breaks if lo < b < hi]
    pts = np.unique(pts)
    edges = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        npan = max(1, int(math.ceil((b - a) / PANEL_WIDTH - 1e-12)))
        edges.extend(np.linspace(a, b, npan + 1)[1:])
    return np.asarray(edges)


def _line_rule(edges: np.ndarray, q: int, start: float | None = None):
    """Composite Gauss rule on the panels of ``edges`` restricted to ``[start, edges[-1]]``."""
    x0, w0 = _gauss(q)
    if start is not None:
        inner = edges[edges > start + 1e-14]
        edges = np.concatenate([[start], inner])
    a = edges[:-1]
    b = edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * x0[None, :]
    weights = half[:, None] * w0[None, :]
    return nodes.ravel(), weights.ravel()


def ordered_log_rule(m: int, lo: float, hi: float, q: int, breaks=()) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``u_1 < ... < u_m`` in ``[lo, hi]`` with weights for ``du``.

    Nested composite Gauss-Legendre: each inner coordinate is integrated
    over ``[u_{j-1}, hi]`` on the same global panel edges, so kinks at the
    breakpoints are resolved in every coordinate.
    """
    edges = _panels(lo, hi, breaks)
    u, w = _line_rule(edges, q)
    nodes = u[:, None]
    weights = w
    for _ in range(1, m):
        new_nodes, new_w = [], []
        for row, wt in zip(nodes, weights):
            if row[-1] >= hi - 1e-14:
                continue
            ui, wi = _line_rule(edges, q, start=row[-1])
            new_nodes.append(np.column_stack([np.repeat(row[None, :], len(ui), axis=0), ui]))
            new_w.append(wt * wi)
        nodes = np.concatenate(new_nodes)
        weights = np.concatenate(new_w)
    return nodes, weights


def _vandermonde(lam: np.ndarray) -> np.ndarray:
    m = lam.shape[-1]
    out = np.ones(lam.shape[:-1])
    for i in range(m):
        for j in range(i + 1, m):
            out = out * np.abs(lam[..., j] - lam[..., i])
    return out


def _rotation_rule(m: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule for averaging ``g(q Λ q')`` over ``SO(m)`` (weights sum to 1)."""
    if m == 1:
        return np.ones((1, 1, 1)), np.ones(1)
    if m == 2:
        # q Λ q' has period pi in the rotation angle
        theta = (np.arange(count) + 0.5) * math.pi / count
        c, s = np.cos(theta), np.sin(theta)
        q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        return q, np.full(count, 1.0 / count)
    if m == 3:
        # z-y-z Euler angles; Haar density ∝ sin(beta)
        na = max(4, count)
        a = (np.arange(na) + 0.5) * 2 * math.pi / na
        g = (np.arange(na) + 0.5) * math.pi / na
        cb, wb = _gauss(max(4, count))
        def rz(t):
            c, s = np.cos(t), np.sin(t)
            z, o = np.zeros_like(t), np.ones_like(t)
            return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)
        def ry(cosb):
            sb = np.sqrt(1 - cosb**2)
            z, o = np.zeros_like(cosb), np.ones_like(cosb)
            return np.stack([np.stack([cosb, z, sb], -1), np.stack([z, o, z], -1), np.stack([-sb, z, cosb], -1)], -2)
        A, B, G = np.meshgrid(np.arange(na), np.arange(len(cb)), np.arange(na), indexing="ij")
        q = rz(a[A.ravel()]) @ ry(cb[B.ravel()]) @ rz(g[G.ravel()])
        w = (wb[B.ravel()] / 2) / (na * na)
        return q, w
    raise IncompatibleParams("rotation rule implemented for m <= 3")


@dataclass
class ConeQuadratureRule:
    """Nodes and weights for ``∫_{(lower, upper)} g(a) |a|^{-(m+1)/2} da``.

    ``eigenvalues`` holds the (ascending) spectrum of each node when the
    eigenvalue parametrization was used.  In spectral mode the nodes are the
    diagonal matrices ``diag(λ)`` and are only valid for integrands that are
    symmetric functions of the spectrum.
    """

    m: int
    lower: np.ndarray
    upper: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray | None = None
    spectral: bool = False
    meta: dict = field(default_factory=dict)

    def integrate(self, g) -> complex | float:
        vals = np.asarray(g(self.nodes))
        return np.sum(self.weights * vals)

    def integrate_spectral(self, g) -> complex | float:
        """Integrate a function of the eigenvalue array ``(N, m)``."""
        if self.eigenvalues is None:
            raise ValueError("rule carries no eigenvalues")
        return np.sum(self.weights * np.asarray(g(self.eigenvalues)))

    def __len__(self):
        return len(self.weights)


def _as_bound(b, m: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim == 0:
        return b * np.eye(m)
    return b


def _scalar_of(b: np.ndarray) -> float | None:
    m = b.shape[0]
    s = b[0, 0]
    return float(s) if np.allclose(b, s * np.eye(m), rtol=0, atol=1e-15 * max(abs(s), 1)) else None


def cone_quadrature(lower, upper, m: int, resolution: int = 128, spectral_only: bool = True,
                    breaks=(), rotations: int | None = None, eig_range=None) -> ConeQuadratureRule:
    """Quadrature rule on the matrix interval ``(lower, upper)``.

    Parameters
    ----------
    lower, upper : float or ndarray
        Scalars mean multiples of the identity.  ``lower`` may be 0.
    resolution : int
        Gauss nodes per eigenvalue axis over the whole interval (split across
        panels of at most one log-unit).
    spectral_only : bool
        Integrand depends on the eigenvalues only.
    breaks : sequence of float
        Eigenvalue breakpoints where the integrand is not smooth.
    rotations : int, optional
        Points per angle of the orthogonal-factor rule in full mode.
    eig_range : (float, float), optional
        Restrict eigenvalues to this sub-range (the integrand is known to
        vanish outside it).  Must lie inside the interval.
    """
    lo_m, hi_m = _as_bound(lower, m), _as_bound(upper, m)
    lo_s, hi_s = _scalar_of(lo_m), _scalar_of(hi_m)
    if lo_s is None or hi_s is None:
        return _cholesky_rule(lo_m, hi_m, m, resolution)
    if not (0 <= lo_s < hi_s):
        raise EmptyInterval(f"lower={lo_s} is not below upper={hi_s}")
    if lo_s == 0:
        raise EmptyInterval("the eigenvalue rule needs a positive lower bound")
    a, b = lo_s, hi_s
    if eig_range is not None:
        a, b = max(a, eig_range[0]), min(b, eig_range[1])
    if not a < b:
        return ConeQuadratureRule(m, lo_m, hi_m, np.zeros((0, m, m)), np.zeros(0),
                                  np.zeros((0, m)), spectral_only)
    ulo, uhi = math.log(a), math.log(b)
    ubreaks = tuple(math.log(x) for x in breaks if x > 0)
    npan = len(_panels(ulo, uhi, ubreaks)) - 1
    q = max(3, int(math.ceil(resolution / max(npan, 1))))
    u, wu = ordered_log_rule(m, ulo, uhi, q, ubreaks)
    lam = np.exp(u)
    d = (m + 1) / 2
    # ordered eigenvalues: factor m! cancels the 1/m! of the unordered constant
    w = (weyl_constant(m) * math.factorial(m) * wu * np.prod(lam, axis=1)
         * _vandermonde(lam) * np.prod(lam, axis=1) ** (-d))
    if spectral_only or m == 1:
        nodes = np.zeros((len(w), m, m))
        idx = np.arange(m)
        nodes[:, idx, idx] = lam
        return ConeQuadratureRule(m, lo_m, hi_m, nodes, w, lam, spectral=True,
                                  meta={"q": q, "panels": npan})
    rq, rw = _rotation_rule(m, rotations or (32 if m == 2 else 8))
    # node (i, j) = rq_j diag(lam_i) rq_j'
    nodes = np.einsum("jab,ib,jcb->ijac", rq, lam, rq).reshape(-1, m, m)
    weights = (w[:, None] * rw[None, :]).ravel()
    eigs = np.repeat(lam, len(rw), axis=0)
    return ConeQuadratureRule(m, lo_m, hi_m, nodes, weights, eigs, spectral=False,
                              meta={"q": q, "panels": npan, "rotations": len(rw)})


def _cholesky_rule(lower: np.ndarray, upper: np.ndarray, m: int, resolution: int) -> ConeQuadratureRule:
    """Indicator rule for general bounds via ``a = t't`` with ``t`` upper triangular.

    ``da = 2^m ∏ t_ii^{m-i+1} dt`` (i from 1).  The box for ``t`` is taken
    from the upper bound; nodes outside ``(lower, upper)`` are dropped.
    """
    if not cone_interval_contains(0.5 * (lower + upper), lower, upper):
        raise EmptyInterval("lower bound is not below upper bound")
    diag_hi = np.sqrt(np.diag(upper))
    x0, w0 = _gauss(max(4, resolution // 4))
    axes, wts = [], []
    for i in range(m):
        for j in range(i, m):
            h = diag_hi[j]
            if i == j:
                axes.append(0.5 * h * (x0 + 1))
                wts.append(0.5 * h * w0)
            else:
                axes.append(h * x0)
                wts.append(h * w0)
    grids = np.meshgrid(*axes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for ax, wt in enumerate(wts):
        shape = [1] * len(wts)
        shape[ax] = -1
        wgrid = wgrid * wt.reshape(shape)
    t = np.zeros((grids[0].size, m, m))
    c = 0
    for i in range(m):
        for j in range(i, m):
            t[:, i, j] = grids[c].ravel()
            c += 1
    a = np.swapaxes(t, 1, 2) @ t
    diag = np.diagonal(t, axis1=1, axis2=2)
    jac = 2**m * np.prod(diag ** (m - np.arange(m))[None, :], axis=1)
    det = np.prod(diag, axis=1) ** 2
    inside = cone_interval_contains(a, lower, upper) & (det > 0)
    d = (m + 1) / 2
    w = wgrid.ravel() * jac * np.where(inside, det, 1.0) ** (-d)
    return ConeQuadratureRule(m, lower, upper, a[inside], w[inside], None, spectral=False)
