"""Experiment configuration: flat INI sections with validated values.

Example::

    [dimensions]
    n = 4
    m = 2
    k = 1
    alpha = 2

    [phantom]
    type = auto
    width = 1.0
    shift = 0.3

Unknown sections or keys are rejected so that typos surface as errors.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import GaussianMixtureField
from .inversion import TruncationSchedule, geometric_schedule
from .linalg import OrderParams, is_wallach
from .wavelets import make_band_wavelet

# defaults match the acceptance tolerances
DEFAULT_TOLERANCES = {
    "parseval": 1e-6,
    "grid_fourier": 1e-5,
    "projection_slice": 1e-10,
    "projection_slice_grid": 1e-4,
    "polar": 1e-2,
    "nse": 3.0,
    "calderon_grid": 1e-3,
    "calderon_analytic": 5e-2,
    "riesz_grid": 1e-2,
    "riesz_analytic": 5e-2,
    "radon_grid": 5e-2,
    "radon_analytic": 1e-1,
    "ridgelet": 5e-2,
    "definition_gap": 1e-2,
    "identity": 1e-8,
}

SCHEMA = {
    "dimensions": {"n": int, "m": int, "k": int, "alpha": complex},
    "phantom": {"type": str, "width": float, "inner_width": float, "shift": float, "amplitude": float,
                "terms": str},
    "wavelet": {"delta": float, "lambda": float, "degree": int, "second_delta": float, "second_lambda": float,
                "scale": float},
    "schedule": {"eps": float, "rho": float, "factor": float, "steps": int, "resolution": int, "tol": float},
    "sampling": {"seed": int, "samples": int, "frames": int, "points": int},
    "grid": {"n_points": int, "extent": float, "slice_points": int, "slice_extent": float,
             "representation": str},
    "tolerances": {name: float for name in DEFAULT_TOLERANCES},
    "output": {"dir": str, "timings": bool},
}

PHANTOMS = ("auto", "gaussian", "dog", "zero", "mixture")
REPRESENTATIONS = ("auto", "grid", "analytic")


@dataclass
class ExperimentConfig:
    n: int = 4
    m: int = 2
    k: int = 1
    alpha: complex = 2.0
    phantom: str = "auto"
    width: float = 1.0
    inner_width: float = 0.7
    shift: float = 0.0
    amplitude: float = 1.0
    terms: tuple = ()
    delta: float = 0.25
    Lambda: float = 4.0
    degree: int = 5
    scale: float = 1.0
    second_delta: float | None = None
    second_lambda: float | None = None
    eps: float = 0.1
    rho: float = 10.0
    factor: float = 10.0
    steps: int = 6
    resolution: int = 96
    tol: float = 1e-4
    seed: int = 20240229
    samples: int = 100_000
    frames: int = 512
    points: int = 3
    n_points: int | None = None
    extent: float | None = None
    slice_points: int = 64
    slice_extent: float = 6.0
    representation: str = "auto"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str = "out"
    timings: bool = False
    source: str = "<defaults>"

    # ---- derived objects

    @property
    def params(self) -> OrderParams:
        return OrderParams(self.n, self.m, self.k, self.alpha)

    @property
    def plane_params(self) -> OrderParams:
        return OrderParams(self.n, self.m, self.k).require_plane()

    @property
    def schedule(self) -> TruncationSchedule:
        return geometric_schedule(self.eps, self.rho, self.factor, self.steps, self.resolution, self.tol)

    def use_grid(self, dim: int | None = None) -> bool:
        if self.representation == "grid":
            return True
        if self.representation == "analytic":
            return False
        return (dim or self.n * self.m) <= 3

    def grid_shape(self, dim: int | None = None) -> tuple[int, float]:
        dim = dim or self.n * self.m
        if self.n_points is not None:
            return self.n_points, self.extent or 8.0
        return (64, self.extent or 8.0) if dim <= 2 else (32, self.extent or 6.0)

    def phantom_field(self, n: int | None = None, m: int | None = None, grid: bool | None = None
                      ) -> GaussianMixtureField:
        """The configured phantom; ``auto`` means a DoG on grids and a Gaussian otherwise.

        A plain Gaussian has mass at zero frequency, where every truncated
        multiplier vanishes, so lattice runs use the zero-mean DoG.
        """
        n = n or self.n
        m = m or self.m
        center = np.full((n, m), self.shift)
        kind = self.phantom
        if kind == "auto":
            kind = "dog" if (self.use_grid(n * m) if grid is None else grid) else "gaussian"
        if kind == "zero":
            return GaussianMixtureField.zero(n, m)
        if kind == "gaussian":
            return GaussianMixtureField.gaussian(n, m, center, self.width, self.amplitude)
        if kind == "dog":
            # zero-mean difference of Gaussians with equal integrals
            a = GaussianMixtureField.gaussian(n, m, center, self.inner_width,
                                              self.amplitude * (self.width / self.inner_width) ** (n * m))
            return a - GaussianMixtureField.gaussian(n, m, center, self.width, self.amplitude)
        return GaussianMixtureField.from_terms(n, m, [(amp, np.full((n, m), c), wd) for amp, c, wd in self.terms])

    def wavelet(self, rows: int | None = None, m: int | None = None):
        return make_band_wavelet(m or self.m, self.delta, self.Lambda, rows if rows is not None else self.n,
                                 self.degree)

    def second_wavelet(self, rows: int, m: int | None = None):
        delta = self.delta if self.second_delta is None else self.second_delta
        lam = self.Lambda if self.second_lambda is None else self.second_lambda
        return make_band_wavelet(m or self.m, delta, lam, rows, self.degree)

    @property
    def scale_matrix(self) -> np.ndarray:
        return self.scale * np.eye(self.m)

    def tolerance(self, name: str) -> float:
        return self.tolerances[name]


def _line_of(text: str, section: str | None, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        head = re.match(r"^\[(.+)\]$", s)
        if head:
            current = head.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _fail(msg: str, text: str, section: str | None = None, key: str | None = None, path: str = "<config>"):
    line = _line_of(text, section, key) if section else None
    where = f"{path}:{line}" if line else path
    loc = f" [{section}]" + (f" {key}" if key else "") if section else ""
    raise ConfigError(f"{where}:{loc} {msg}")


def _convert(kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is complex:
        val = complex(raw.replace(" ", "").replace("i", "j"))
        return val.real if val.imag == 0 else val
    if kind is int:
        return int(raw)
    return kind(raw)


def _parse_terms(raw: str) -> tuple:
    """``amp, center, width`` triples separated by semicolons."""
    out = []
    for chunk in raw.split(";"):
        if not chunk.strip():
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError(f"term {chunk.strip()!r} must be 'amplitude, center, width'")
        amp, center, width = complex(parts[0].replace("i", "j")), float(parts[1]), float(parts[2])
        if width <= 0:
            raise ValueError("widths must be positive")
        out.append((amp, center, width))
    if not out:
        raise ValueError("mixture phantom needs at least one term")
    return tuple(out)


KEY_MAP = {("wavelet", "lambda"): "Lambda", ("output", "dir"): "out_dir", ("phantom", "type"): "phantom"}


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With ``path:line`` and the offending section/key in the message.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = ExperimentConfig(source=path)
    for section in parser.sections():
        if section not in SCHEMA:
            _fail(f"unknown section (known: {', '.join(SCHEMA)})", text, section, None, path)
        for key, raw in parser.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                _fail(f"unknown key (known: {', '.join(SCHEMA[section])})", text, section, key, path)
            try:
                value = _parse_terms(raw) if key == "terms" else _convert(kind, raw)
            except ValueError as exc:
                _fail(f"bad value {raw!r}: {exc}", text, section, key, path)
            if section == "tolerances":
                if not value > 0:
                    _fail("tolerances must be positive", text, section, key, path)
                cfg.tolerances[key] = value
            else:
                setattr(cfg, KEY_MAP.get((section, key), key), value)
    _validate(cfg, text, path)
    return cfg


def _validate(cfg: ExperimentConfig, text: str, path: str):
    if cfg.n < 1 or cfg.m < 1:
        _fail("n and m must be positive", text, "dimensions", "n", path)
    if cfg.n < cfg.m:
        _fail(f"need n ≥ m, got n={cfg.n}, m={cfg.m}", text, "dimensions", "m", path)
    if cfg.k != 0 and not (1 <= cfg.k <= cfg.n - cfg.m):
        _fail(f"1 ≤ k ≤ n−m violated: n={cfg.n}, m={cfg.m}, k={cfg.k}", text, "dimensions", "k", path)
    explicit_alpha = _line_of(text, "dimensions", "alpha") is not None
    if explicit_alpha and not is_wallach(cfg.n, cfg.m, cfg.alpha) and complex(cfg.alpha) != 0:
        _fail(f"alpha={cfg.alpha} is outside the Wallach set for n={cfg.n}, m={cfg.m}",
              text, "dimensions", "alpha", path)
    if cfg.phantom not in PHANTOMS:
        _fail(f"unknown phantom type {cfg.phantom!r} (known: {', '.join(PHANTOMS)})", text, "phantom", "type", path)
    if cfg.phantom == "mixture" and not cfg.terms:
        _fail("mixture phantom needs 'terms'", text, "phantom", "type", path)
    for key in ("width", "inner_width"):
        if getattr(cfg, key) <= 0:
            _fail("widths must be positive", text, "phantom", key, path)
    if not (0 < cfg.delta < cfg.Lambda):
        _fail("need 0 < delta < lambda", text, "wavelet", "delta", path)
    if not cfg.scale > 0:
        _fail("scale must be positive", text, "wavelet", "scale", path)
    if cfg.degree not in (3, 5, 7):
        _fail("bump degree must be 3, 5 or 7", text, "wavelet", "degree", path)
    if not (0 < cfg.eps < cfg.rho) or cfg.factor <= 1 or cfg.steps < 1:
        _fail("need 0 < eps < rho, factor > 1, steps ≥ 1", text, "schedule", None, path)
    if cfg.samples < 2 or cfg.frames < 1 or cfg.points < 1:
        _fail("samples ≥ 2, frames ≥ 1 and points ≥ 1 required", text, "sampling", None, path)
    if cfg.representation not in REPRESENTATIONS:
        _fail(f"representation must be one of {', '.join(REPRESENTATIONS)}", text, "grid", "representation", path)
    if cfg.n_points is not None and (cfg.n_points < 4 or cfg.n_points % 2):
        _fail("n_points must be even and at least 4", text, "grid", "n_points", path)
    if cfg.n_points is not None:
        dim = cfg.n * cfg.m
        if dim * math.log2(cfg.n_points) > 26:
            _fail("grid exceeds 2^26 values", text, "grid", "n_points", path)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a configuration file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read configuration: {exc.strerror}") from exc
    return parse_config(text, str(p))
