"""Command-line driver.

    matwave constants|verify|transform|invert --config PATH [--suite NAME] [--method NAME] [--out DIR]

Exit codes: 0 success, 1 tolerance failure, 2 usage or configuration error.
``MATWAVE_THREADS`` caps the BLAS/OpenMP thread pools; nothing else is read
from the environment.
"""

from __future__ import annotations

import os

_threads = os.environ.get("MATWAVE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse  # noqa: E402
import csv  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .config import ExperimentConfig, load_config  # noqa: E402
from .errors import ConfigError, IncompatibleParams, MatwaveError, UnknownMethod, UnknownTransform  # noqa: E402
from .fields import (  # noqa: E402
    GaussianMixtureField,
    GridField,
    MultipliedField,
    SampledField,
    fourier_transform,
    lattice_points,
)
from .inversion import (  # noqa: E402
    calderon_reconstruct,
    radon_invert_method1,
    radon_invert_method2,
    ridgelet_reproduce,
    riesz_invert,
)
from .linalg import OrderParams  # noqa: E402
from .radon import (  # noqa: E402
    RadonField,
    default_frames,
    dual_radon,
    dual_ridgelet,
    radon_transform,
    ridgelet_transform,
    semyanistyi,
)
from .sampling import RngStream  # noqa: E402
from .special import fuglede_constant, measure_constant, riesz_normalizer, siegel_gamma, stiefel_volume  # noqa: E402
from .transforms import riesz_potential_multiplier, wavelet_transform  # noqa: E402
from .verify import SUITES, run_suites, to_csv  # noqa: E402
from .wavelets import (  # noqa: E402
    calderon_constant,
    pair_constant,
    ridgelet_constant,
    riesz_inversion_constant,
)

TRANSFORMS = ("fourier", "wavelet", "riesz", "radon", "dual_radon", "ridgelet", "dual_ridgelet", "semyanistyi")
METHODS = ("calderon", "riesz", "radon1", "radon2", "ridgelet")


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    x = complex(x)
    if x.imag == 0:
        return repr(x.real)
    return f"{x.real!r}{x.imag:+.17g}j"


def _write(out: Path, name: str, text: str | bytes) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text)
    return path


def _query_points(cfg: ExperimentConfig, n: int, m: int) -> np.ndarray:
    gen = RngStream(cfg.seed, 1).generator()
    return cfg.shift + 0.5 * gen.standard_normal((cfg.points, n, m))


def _emit_field(out: Path, name: str, field, cfg: ExperimentConfig, rng: RngStream) -> str:
    """Write a field and return its summary line."""
    if isinstance(field, GridField):
        _write(out, f"{name}.bin", field.to_bytes())
        _write(out, f"{name}.csv", field.to_csv())
        norm, peak = field.norm(), float(np.max(np.abs(field.values)))
        return f"{name}: grid N={field.N} L={field.L:g} l2_norm={norm:.12e} max_abs={peak:.12e}"
    pts = _query_points(cfg, field.n if not isinstance(field, MultipliedField) else field.base.n,
                        field.m if not isinstance(field, MultipliedField) else field.base.m)
    if isinstance(field, MultipliedField):
        sampled = field.evaluate(pts, rng, cfg.samples)
    elif isinstance(field, GaussianMixtureField):
        sampled = SampledField(pts, field.evaluate(pts))
    else:
        sampled = field
    _write(out, f"{name}.csv", sampled.to_csv())
    extra = ""
    if isinstance(field, GaussianMixtureField):
        extra = f" l2_norm={field.norm():.12e}"
    peak = float(np.max(np.abs(sampled.values)))
    return f"{name}: points={len(sampled.values)}{extra} max_abs={peak:.12e}"


def _closed_form_slice(f: GaussianMixtureField, xi: np.ndarray, k: int, t: np.ndarray) -> np.ndarray | None:
    """Plane integrals of isotropic unmodulated Gaussian terms, written out directly."""
    if f.domain != "space" or not f.is_isotropic() or np.any(f.mods != 0):
        return None
    m = f.m
    out = np.zeros(len(t), dtype=complex)
    for amp, c, s in zip(f.amps, f.centers, f.widths):
        d = t - (xi.T @ c)[None]
        out += amp * (2 * math.pi * s * s) ** (k * m / 2) * np.exp(-np.sum(d * d, axis=(1, 2)) / (2 * s * s))
    return out


def _emit_radon(out: Path, name: str, data: RadonField, cfg: ExperimentConfig, check_source=None) -> str:
    q, m = data.q, data.m
    if q * m <= 2:
        N, L = cfg.slice_points, cfg.slice_extent
        t = lattice_points(q, m, N, L).reshape(-1, q, m)
    else:
        t = _query_points(cfg, q, m)
    header = ["frame_index"] + [f"t_{i + 1}_{j + 1}" for i in range(q) for j in range(m)] + ["re", "im"]
    with_check = check_source is not None
    if with_check:
        header.append("closed_form_abs_dev")
    lines = [",".join(header)]
    worst = 0.0
    sq = 0.0
    peak = 0.0
    for i, xi in enumerate(data.frames):
        vals = data.slice_values(i, t)
        ref = _closed_form_slice(check_source, xi, data.k, t) if with_check else None
        if ref is None and with_check:
            with_check = False
            lines[0] = ",".join(header[:-1])
        for j, (tt, v) in enumerate(zip(t, vals)):
            row = f"{i}," + ",".join(repr(float(c)) for c in tt.ravel()) + f",{float(v.real)!r},{float(v.imag)!r}"
            if with_check:
                dev = float(abs(v - ref[j]))
                worst = max(worst, dev)
                row += f",{dev!r}"
            lines.append(row)
        sq += data.weights[i] * float(np.sum(np.abs(vals) ** 2))
        peak = max(peak, float(np.max(np.abs(vals))))
    _write(out, f"{name}.csv", "\n".join(lines) + "\n")
    _write(out, f"{name}_frames.csv", data.frames_csv())
    summary = f"{name}: frames={len(data)} points_per_slice={len(t)} rms={math.sqrt(sq / len(t)):.12e} max_abs={peak:.12e}"
    if with_check:
        summary += f" closed_form_max_dev={worst:.3e}"
    return summary


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    n, m, k, alpha = cfg.n, cfg.m, cfg.k, cfg.alpha
    rows = [
        (f"Gamma_{m}({_fmt(alpha)})", siegel_gamma(m, alpha)),
        (f"sigma_{n},{m}", stiefel_volume(n, m)),
    ]
    try:
        rows.append((f"gamma_{n},{m}({_fmt(alpha)})", riesz_normalizer(n, m, alpha)))
    except MatwaveError as exc:
        rows.append((f"gamma_{n},{m}({_fmt(alpha)})", f"undefined ({exc})"))
    has_plane = 1 <= k <= n - m
    if has_plane:
        rows.append((f"c_{n},{k},{m}", fuglede_constant(n, k, m)))
        rows.append((f"c_{k} (n={n}, m={m})", measure_constant(n, k, m)))
    w = cfg.wavelet()
    c_nu, _ = calderon_constant(w, n, m)
    rows.append(("c_nu", c_nu))
    rows.append((f"d_w({_fmt(alpha)})", riesz_inversion_constant(w, n, m, alpha)))
    if has_plane:
        q = n - k
        u, v = cfg.wavelet(rows=q), cfg.second_wavelet(rows=q)
        rows.append(("c_w", ridgelet_constant(u, n, m, k)))
        rows.append(("c_u,v", pair_constant(u, v, n, m, k)))
    # names such as sigma_2,1 contain commas, so the writer quotes them
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("name", "value"))
    writer.writerows((name, val if isinstance(val, str) else _fmt(val)) for name, val in rows)
    return 0


def cmd_verify(cfg: ExperimentConfig, suites: list[str], out_dir: Path | None, out=None) -> int:
    out = out or sys.stdout
    rows = run_suites(suites, cfg)
    text = to_csv(rows)
    out.write(text)
    if out_dir is not None:
        _write(out_dir, "verify.csv", text)
    return 0 if all(r.passed for r in rows) else 1


def _phantom_input(cfg: ExperimentConfig):
    f = cfg.phantom_field()
    return f, (GridField.sample(f, *cfg.grid_shape()) if cfg.use_grid() else f)


def cmd_transform(cfg: ExperimentConfig, name: str, out_dir: Path, out=None) -> int:
    out = out or sys.stdout
    if name not in TRANSFORMS:
        raise UnknownTransform(f"unknown transform {name!r} (known: {', '.join(TRANSFORMS)})")
    rng = RngStream(cfg.seed, 2)
    f, x = _phantom_input(cfg)
    lines = [_emit_field(out_dir, "input", x, cfg, rng.child(0))]
    if name == "fourier":
        y = fourier_transform(x) if isinstance(x, GridField) else x.fourier()
        lines.append(_emit_field(out_dir, "fourier", y, cfg, rng.child(1)))
    elif name == "wavelet":
        y = wavelet_transform(x, cfg.wavelet(), cfg.scale_matrix)
        lines.append(_emit_field(out_dir, "wavelet", y, cfg, rng.child(1)))
    elif name == "riesz":
        y = riesz_potential_multiplier(x, cfg.alpha, OrderParams(cfg.n, cfg.m))
        lines.append(_emit_field(out_dir, "riesz", y, cfg, rng.child(1)))
    else:
        p = cfg.plane_params
        frames, weights = default_frames(p.n, p.k, cfg.frames, cfg.seed)
        slice_grid = (cfg.slice_points, cfg.slice_extent) if isinstance(x, GridField) else None
        data = radon_transform(x, p, frames, weights, slice_grid=slice_grid)
        pts = lattice_points(p.n, p.m, *cfg.grid_shape()) if isinstance(x, GridField) else \
            _query_points(cfg, p.n, p.m)
        w = cfg.wavelet(rows=p.n - p.k)
        if name == "radon":
            lines.append(_emit_radon(out_dir, "radon", data, cfg, f))
        elif name == "dual_radon":
            lines.append(_emit_field(out_dir, "dual_radon", _as_grid(dual_radon(data, pts), x), cfg, rng))
        elif name == "ridgelet":
            lines.append(_emit_radon(out_dir, "ridgelet", ridgelet_transform(data, w, cfg.scale_matrix, p, None),
                                     cfg))
        elif name == "dual_ridgelet":
            coef = ridgelet_transform(data, w, cfg.scale_matrix, p, None)
            back = dual_ridgelet(coef, w, cfg.scale_matrix, pts)
            lines.append(_emit_field(out_dir, "dual_ridgelet", _as_grid(back, x), cfg, rng))
        else:
            lines.append(_emit_radon(out_dir, "semyanistyi", semyanistyi(data, cfg.alpha, p, None), cfg))
    out.write("\n".join(lines) + "\n")
    return 0


def _as_grid(sampled: SampledField, like) -> GridField | SampledField:
    if isinstance(like, GridField):
        return like.like(sampled.values.reshape(like.values.shape))
    return sampled


def cmd_invert(cfg: ExperimentConfig, method: str, out_dir: Path, out=None) -> int:
    out = out or sys.stdout
    if method not in METHODS:
        raise UnknownMethod(f"unknown method {method!r} (known: {', '.join(METHODS)})")
    rng = RngStream(cfg.seed, 3)
    grid = cfg.use_grid()
    f, x = _phantom_input(cfg)
    schedule = cfg.schedule
    kw = dict(rng=rng, samples=cfg.samples)
    if method == "calderon":
        rec, report = calderon_reconstruct(x, cfg.wavelet(), schedule, reference=f, **kw)
        tol = cfg.tolerance("calderon_grid" if grid else "calderon_analytic")
    elif method == "riesz":
        params = OrderParams(cfg.n, cfg.m)
        g = riesz_potential_multiplier(x, cfg.alpha, params)
        rec, report = riesz_invert(g, cfg.alpha, cfg.wavelet(), params, schedule, reference=f, **kw)
        tol = cfg.tolerance("riesz_grid" if grid else "riesz_analytic")
    else:
        p = cfg.plane_params
        frames, weights = default_frames(p.n, p.k, cfg.frames, cfg.seed)
        slice_grid = (cfg.slice_points, cfg.slice_extent) if grid else None
        data = radon_transform(f, p, frames, weights, slice_grid=slice_grid)
        lattice = cfg.grid_shape() if grid else None
        if method == "radon1":
            rec, report = radon_invert_method1(data, cfg.wavelet(), p, schedule, grid=lattice, **kw)
            tol = cfg.tolerance("radon_grid" if grid else "radon_analytic")
        elif method == "radon2":
            rec, report = radon_invert_method2(data, cfg.wavelet(rows=p.n - p.k), p, schedule, grid=lattice, **kw)
            tol = cfg.tolerance("radon_grid" if grid else "radon_analytic")
        else:
            q = p.n - p.k
            rec, report = ridgelet_reproduce(data, cfg.wavelet(rows=q), cfg.second_wavelet(rows=q), p, schedule,
                                             grid=lattice, **kw)
            tol = cfg.tolerance("ridgelet" if grid else "radon_analytic")
    _write(out_dir, "report.csv", report.to_csv(timings=cfg.timings))
    lines = [_emit_field(out_dir, "reconstruction", rec, cfg, rng.child(99))]
    if report.normalized is not None:
        lines.append(_emit_field(out_dir, "normalized", report.normalized, cfg, rng.child(98)))
    lines.append(report.summary())
    ok = report.final_error < tol
    lines.append(f"final_error {report.final_error:.6e} tolerance {tol:.1e} {'PASS' if ok else 'FAIL'}")
    out.write("\n".join(lines) + "\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matwave", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("constants", "verify", "transform", "invert"))
    ap.add_argument("--config", required=True, help="experiment configuration file")
    ap.add_argument("--suite", action="append", help=f"verification suite ({', '.join(SUITES)}, or 'all')")
    ap.add_argument("--method", help=f"inversion method ({', '.join(METHODS)}) or transform ({', '.join(TRANSFORMS)})")
    ap.add_argument("--out", help="output directory (default from the config)")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out or cfg.out_dir)
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "verify":
            suites = args.suite or ["all"]
            if "all" in suites:
                suites = list(SUITES)
            return cmd_verify(cfg, suites, Path(args.out) if args.out else None)
        if args.method is None:
            ap.print_usage(sys.stderr)
            print(f"matwave: error: {args.command} needs --method", file=sys.stderr)
            return 2
        if args.command == "transform":
            return cmd_transform(cfg, args.method, out_dir)
        return cmd_invert(cfg, args.method, out_dir)
    except (ConfigError, IncompatibleParams) as exc:
        print(f"matwave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except MatwaveError as exc:
        # numerical failures such as divergence count as tolerance failures
        print(f"matwave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1


if __name__ == "__main__":
    sys.exit(main())
