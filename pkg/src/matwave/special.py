"""Closed-form constants: Siegel gamma, Stiefel volumes and potential normalizers.

Everything is evaluated through complex log-gamma so that products of many
gamma factors do not overflow.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy import special as sps

from .errors import IncompatibleParams, NonFinite, PoleError
from .linalg import is_wallach


def _is_pole(z: complex) -> bool:
    return z.imag == 0 and z.real <= 0 and z.real == round(z.real)


def log_siegel_gamma(m: int, alpha: complex) -> complex:
    """Principal-branch log of the Siegel gamma function."""
    alpha = complex(alpha)
    total = complex(m * (m - 1) / 4 * math.log(math.pi))
    for j in range(m):
        z = alpha - j / 2
        if _is_pole(z):
            raise PoleError(f"Gamma({z.real:g}) factor of Gamma_{m}({alpha}) has a pole")
        total += complex(sps.loggamma(z))
    return total


def siegel_gamma(m: int, alpha: complex) -> complex | float:
    """Siegel gamma ``pi**(m(m-1)/4) * prod_j Gamma(alpha - j/2)``.

    Returns a float for real ``alpha`` (sign included) and a complex number
    otherwise.
    """
    if m < 1:
        raise IncompatibleParams("m must be positive")
    if np.iscomplexobj(alpha) and complex(alpha).imag != 0:
        return complex(np.exp(log_siegel_gamma(m, alpha)))
    a = float(np.real(alpha))
    log_siegel_gamma(m, a)  # pole check
    try:
        # direct products keep exact cases such as Gamma_2(2) = pi/2 to the last bit
        val = math.pi ** (m * (m - 1) / 4) * math.prod(math.gamma(a - j / 2) for j in range(m))
        if math.isfinite(val) and val != 0:
            return val
    except OverflowError:
        pass
    sign = 1.0
    logval = m * (m - 1) / 4 * math.log(math.pi)
    for j in range(m):
        sign *= float(sps.gammasgn(a - j / 2))
        logval += float(sps.gammaln(a - j / 2))
    if logval > 709.0:
        raise NonFinite(f"Gamma_{m}({a}) overflows double precision; use log_siegel_gamma")
    return sign * math.exp(logval)


def stiefel_volume(n: int, m: int) -> float:
    """Total invariant volume of the orthonormal ``m``-frames in ``R^n``."""
    if not (1 <= m <= n):
        raise IncompatibleParams(f"need n >= m >= 1, got n={n}, m={m}")
    direct = 2.0**m * math.pi ** (n * m / 2)
    if math.isfinite(direct):
        try:
            return direct / siegel_gamma(m, n / 2)
        except NonFinite:
            pass
    return math.exp(m * math.log(2) + n * m / 2 * math.log(math.pi) - log_siegel_gamma(m, n / 2).real)


def riesz_normalizer(n: int, m: int, alpha: complex) -> complex | float:
    """Normalizing constant of the matrix Riesz kernel ``|y|_m**(alpha - n)``.

    Raises
    ------
    PoleError
        When either gamma product hits a pole, e.g. ``alpha = n - m + 1``.
    """
    alpha = complex(alpha)
    log_val = (
        alpha * m * math.log(2)
        + n * m / 2 * math.log(math.pi)
        + log_siegel_gamma(m, alpha / 2)
        - log_siegel_gamma(m, (n - alpha) / 2)
    )
    val = np.exp(log_val)
    if alpha.imag == 0:
        return float(siegel_gamma(m, alpha.real / 2) / siegel_gamma(m, (n - alpha.real) / 2)
                     * 2 ** (alpha.real * m) * math.pi ** (n * m / 2))
    return complex(val)


def _check_plane(n: int, k: int, m: int):
    if not (1 <= k <= n - m):
        raise IncompatibleParams(f"1 ≤ k ≤ n−m violated: n={n}, m={m}, k={k}")


def fuglede_constant(n: int, k: int, m: int) -> float:
    """Constant linking dual Radon of Radon to the order-``k`` Riesz potential."""
    _check_plane(n, k, m)
    try:
        return 2.0 ** (k * m) * math.pi ** (k * m / 2) * siegel_gamma(m, n / 2) / siegel_gamma(m, (n - k) / 2)
    except NonFinite:
        pass
    log_val = (k * m * math.log(2) + k * m / 2 * math.log(math.pi)
               + log_siegel_gamma(m, n / 2).real - log_siegel_gamma(m, (n - k) / 2).real)
    return math.exp(log_val)


def measure_constant(n: int, k: int, m: int) -> float:
    """Normalizer of the rank-deficient measure form of the integer-order potential."""
    _check_plane(n, k, m)
    return 1.0 / fuglede_constant(n, k, m)


def wallach_contains(n: int, m: int, alpha: complex) -> bool:
    return is_wallach(n, m, alpha)


class ConstantTable:
    """Thread-safe memo of named constants keyed by ``(name, n, m, k, alpha)``.

    Values are deterministic, so concurrent inserts of the same key are
    harmless (last write wins).
    """

    _FUNCS = {
        "siegel_gamma": lambda n, m, k, alpha: siegel_gamma(m, alpha),
        "stiefel_volume": lambda n, m, k, alpha: stiefel_volume(n, m),
        "riesz_normalizer": lambda n, m, k, alpha: riesz_normalizer(n, m, alpha),
        "fuglede_constant": lambda n, m, k, alpha: fuglede_constant(n, k, m),
        "measure_constant": lambda n, m, k, alpha: measure_constant(n, k, m),
    }

    def __init__(self):
        self._cache: dict[tuple, complex | float] = {}
        self._lock = threading.Lock()

    def get(self, name: str, n: int = 0, m: int = 1, k: int = 0, alpha: complex = 0.0):
        key = (name, n, m, k, complex(alpha))
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = self._FUNCS[name](n, m, k, alpha)
        with self._lock:
            self._cache[key] = value
        return value

    def __len__(self):
        return len(self._cache)


CONSTANTS = ConstantTable()
