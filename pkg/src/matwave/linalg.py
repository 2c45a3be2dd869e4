"""Matrix primitives on rectangular matrices and the positive definite cone.

Rectangular matrices are plain ``ndarray`` objects of shape ``(..., n, m)``
with ``n >= m``; leading axes are treated as a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IncompatibleParams,
    NotPositiveDefinite,
    RankDeficient,
    WallachViolation,
)

RANK_TOL = 1e-12
SPD_TOL = 1e-14
CONE_TOL = 1e-14


def det_power(x: np.ndarray) -> np.ndarray | float:
    """Square root of the Gram determinant, ``det(x'x)**0.5``.

    Computed as the product of singular values, so rank-deficient input
    returns 0 rather than a tiny negative number under a square root.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim < 2:
        raise ValueError("expected an array of shape (..., n, m)")
    if x.shape[-2] < x.shape[-1]:
        raise IncompatibleParams(f"need n >= m, got shape {x.shape[-2:]}")
    s = np.linalg.svd(x, compute_uv=False)
    out = np.prod(s, axis=-1)
    return float(out) if out.ndim == 0 else out


def gram(x: np.ndarray) -> np.ndarray:
    """``x'x`` over the last two axes."""
    x = np.asarray(x)
    return np.swapaxes(x, -1, -2) @ x


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def check_spd(a: np.ndarray, tol: float = SPD_TOL) -> np.ndarray:
    """Return eigenvalues of ``a``; raise if it is not strictly positive definite."""
    a = np.asarray(a, dtype=float)
    if not np.allclose(a, np.swapaxes(a, -1, -2), rtol=1e-12, atol=1e-12 * np.abs(a).max(initial=1.0)):
        raise NotPositiveDefinite("matrix is not symmetric")
    lam = np.linalg.eigvalsh(symmetrize(a))
    if np.any(lam[..., 0] <= tol * lam[..., -1]) or np.any(lam[..., -1] <= 0):
        raise NotPositiveDefinite(f"smallest eigenvalue {lam[..., 0].min():.3e} is not positive")
    return lam


def spd_power(a: np.ndarray, p: float) -> np.ndarray:
    """Spectral power ``a**p`` of a strictly positive definite matrix."""
    a = np.asarray(a, dtype=float)
    check_spd(a)
    lam, q = np.linalg.eigh(symmetrize(a))
    return symmetrize((q * lam[..., None, :] ** p) @ np.swapaxes(q, -1, -2))


def sqrt_spd(a: np.ndarray) -> np.ndarray:
    """Unique positive definite square root."""
    return spd_power(a, 0.5)


def inv_sqrt_spd(a: np.ndarray) -> np.ndarray:
    return spd_power(a, -0.5)


def polar_decompose(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a full-rank ``x`` into an orthonormal frame and its Gram matrix.

    Returns
    -------
    v : ndarray, shape (..., n, m)
        Orthonormal columns with ``v @ sqrt_spd(r) == x``.
    r : ndarray, shape (..., m, m)
        ``x'x``.
    """
    x = np.asarray(x, dtype=float)
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if np.any(s[..., -1] < RANK_TOL * s[..., 0]) or np.any(s[..., 0] == 0):
        raise RankDeficient("x does not have full column rank")
    return u @ vt, gram(x)


def cone_interval_contains(s: np.ndarray, lower, upper: np.ndarray) -> bool | np.ndarray:
    """Strict membership ``lower < s < upper`` in the Loewner order.

    ``lower`` may be the scalar 0 for the cone itself.
    """
    s = np.asarray(s, dtype=float)
    m = s.shape[-1]
    lower = np.zeros((m, m)) if np.isscalar(lower) and lower == 0 else np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    below = np.linalg.eigvalsh(symmetrize(s - lower))[..., 0]
    above = np.linalg.eigvalsh(symmetrize(upper - s))[..., 0]
    out = (below > CONE_TOL) & (above > CONE_TOL)
    return bool(out) if np.ndim(out) == 0 else out


def is_wallach(n: int, m: int, alpha: complex) -> bool:
    """Membership of ``alpha`` in the Wallach set of orders for ``M_{n,m}``."""
    alpha = complex(alpha)
    if alpha.imag == 0 and alpha.real == round(alpha.real) and 0 <= alpha.real <= min(m - 1, n - m):
        return True
    if alpha.real <= m - 1:
        return False
    # poles at n - m + 1, n - m + 2, ...
    if alpha.imag == 0 and alpha.real == round(alpha.real) and alpha.real >= n - m + 1:
        return False
    return True


@dataclass(frozen=True)
class OrderParams:
    """Dimensions and order for one experiment.

    ``k`` is the plane codimension parameter (planes have dimension ``k*m``
    inside ``R^{nm}``); it is only checked when Radon operations need it.
    """

    n: int
    m: int
    k: int = 0
    alpha: complex = 0.0

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise IncompatibleParams(f"need 1 <= m <= n, got n={self.n}, m={self.m}")

    @property
    def d(self) -> float:
        return (self.m + 1) / 2

    def require_plane(self) -> "OrderParams":
        if not (1 <= self.k <= self.n - self.m):
            raise IncompatibleParams(f"1 ≤ k ≤ n−m violated: n={self.n}, m={self.m}, k={self.k}")
        return self

    def require_wallach(self, alpha: complex | None = None) -> complex:
        a = self.alpha if alpha is None else alpha
        if not is_wallach(self.n, self.m, a):
            raise WallachViolation(f"alpha={a} is outside the Wallach set for n={self.n}, m={self.m}")
        return a
