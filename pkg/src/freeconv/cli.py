"""Command-line interface: ``freeconv <command> --measure SPEC ...``.

Exit codes: 0 success, 1 partial result (flags in the report), 2 bad
configuration or measure spec, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _continuation as cont
from .errors import FreeConvError, NumericError, SpecError
from .experiment import (
    DEFAULT_EPSILON,
    berry_esseen_sweep,
    bound_audit,
    bound_reports_json,
    cdf_grid,
    clt_sweep,
    dumps,
    phi_convergence_audit,
)
from .inversion import cdf_curve, density_curve, pair_density_curve
from .measure import (
    dumps_spec,
    is_dirac,
    is_free_id,
    load_measure,
    moment_vector,
    standardize,
    support_interval,
    to_spec,
)
from .transform import Cone

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(FreeConvError, ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    measure: str
    n_list: list
    grid: tuple | None
    epsilon: float
    out: Path | None
    formats: tuple
    threads: int | None
    newton_tol: float


def parse_grid(text):
    """``min:max:points`` -> ``(min, max, points)``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like min:max:points, got {text!r}")
    try:
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"grid must look like min:max:points, got {text!r}") from None
    if pts < 2 or not hi > lo:
        raise ConfigError(f"grid needs points >= 2 and max > min, got {text!r}")
    return lo, hi, pts


def parse_n_list(text):
    try:
        ns = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"n list must be comma-separated integers, got {text!r}") from None
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"n list must be nonempty, positive and increasing, got {text!r}")
    return ns


def _grid_array(spec):
    lo, hi, pts = spec
    return np.linspace(lo, hi, pts)


def resolve_threads(value):
    if value is not None:
        return value
    env = os.environ.get("FREECONV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FREECONV_THREADS must be an integer, got {env!r}") from None
    return None


def write_atomic(path: Path, text: str):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, name, text, ext):
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        write_atomic(cfg.out / f"{name}.{ext}", text)


def _say(cfg, line):
    # summaries go to stderr when the data itself is on stdout
    print(line, file=sys.stderr if cfg.out is None else sys.stdout)


def _fmt(x):
    return "nan" if x is None else f"{x:.6g}"


# ------------------------------------------------------------- commands


def cmd_describe(cfg, args, mu):
    if args.emit_spec:
        _emit(cfg, "measure", dumps_spec(mu) + "\n", "json")
        return EXIT_OK
    mv = moment_vector(mu, args.moments)
    info = {"spec": to_spec(mu), "moments": list(mv.moments), "free_id": is_free_id(mu),
            "support": support_interval(mu)}
    if is_dirac(mu):
        info["standardization"] = None
    else:
        _, shift, scale = standardize(mu)
        info["standardization"] = {"shift": shift, "scale": scale}
    _emit(cfg, "describe", dumps(info), "json")
    return EXIT_OK


def _curve_status(cfg, curve, n):
    bad = int(np.sum(curve.unresolved))
    _say(cfg, f"n={n} points={curve.grid.size} unresolved={bad} captured_mass={curve.captured_mass:.9f}")
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_density(cfg, args, mu):
    grid = _grid_array(cfg.grid or (-2.5, 2.5, 401))
    code = EXIT_OK
    for n in cfg.n_list:
        curve = density_curve(mu, n, grid, standardized=not args.raw, workers=cfg.threads, tol=cfg.newton_tol)
        _emit(cfg, f"density_n{n}", curve.to_csv(), "csv")
        code = max(code, _curve_status(cfg, curve, n))
    return code


def cmd_cdf(cfg, args, mu):
    grid = _grid_array(cfg.grid or (-3.0, 3.0, 24001))
    code = EXIT_OK
    for n in cfg.n_list:
        curve = density_curve(mu, n, grid, standardized=not args.raw, workers=cfg.threads, tol=cfg.newton_tol)
        cdf = cdf_curve(curve)
        _emit(cfg, f"cdf_n{n}", cdf.to_csv(), "csv")
        code = max(code, _curve_status(cfg, curve, n))
    return code


def cmd_convolve(cfg, args, mu):
    other = load_measure(args.with_measure)
    grid = _grid_array(cfg.grid or (-3.0, 3.0, 601))
    curve = pair_density_curve(mu, other, grid, scale=args.scale, workers=cfg.threads, tol=cfg.newton_tol)
    _emit(cfg, "convolve", curve.to_csv(), "csv")
    return _curve_status(cfg, curve, 1)


def _write_report(cfg, name, report):
    if "json" in cfg.formats:
        _emit(cfg, name, report.to_json(), "json")
    if "csv" in cfg.formats:
        _emit(cfg, name, report.to_csv(), "csv")


def cmd_clt_sweep(cfg, args, mu):
    grid = _grid_array(cfg.grid) if cfg.grid else None
    cgrid = _grid_array(args.cdf_grid) if args.cdf_grid else None
    report = clt_sweep(mu, cfg.n_list, grid, cfg.epsilon, args.full_line, cdf_points=cgrid, workers=cfg.threads)
    _write_report(cfg, "clt_sweep", report)
    for r in report.rows:
        _say(cfg, f"n={r['n']} sup_err_compact={_fmt(r['sup_err_compact'])} sup_err_full={_fmt(r['sup_err_full'])} "
                  f"d_K={_fmt(r['d_K'])} unresolved={r['unresolved']}")
    return EXIT_PARTIAL if report.flags else EXIT_OK


def cmd_phi_audit(cfg, args, mu):
    cone = Cone(args.alpha, args.beta)
    report = phi_convergence_audit(mu, cfg.n_list, cone, args.radius, workers=cfg.threads)
    _write_report(cfg, "phi_audit", report)
    for n, s in zip(report.n_list, report.sups):
        _say(cfg, f"n={n} sup_phi_error={s:.6g}")
    return EXIT_OK


def cmd_rate(cfg, args, mu):
    grid = _grid_array(cfg.grid) if cfg.grid else cdf_grid()
    report = berry_esseen_sweep(mu, cfg.n_list, grid, workers=cfg.threads)
    _write_report(cfg, "rate", report)
    for n, d, u in zip(report.n_list, report.d_k, report.unresolved):
        _say(cfg, f"n={n} d_K={_fmt(d)} unresolved={u}")
    if report.fit is not None:
        _say(cfg, f"exponent={report.fit.exponent:.6g} constant={report.fit.constant:.6g} "
                  f"r_squared={report.fit.r_squared:.6g}")
    return EXIT_PARTIAL if report.flags else EXIT_OK


def cmd_bound_audit(cfg, args, mu):
    reports = bound_audit(mu, cfg.n_list, workers=cfg.threads)
    _emit(cfg, "bound_audit", bound_reports_json(reports), "json")
    for n in cfg.n_list:
        mine = [r for r in reports if r.n == n]
        worst = min(r.worst_slack for r in mine)
        failed = [r.lemma for r in mine if not r.passed]
        _say(cfg, f"n={n} checks={len(mine)} worst_slack={worst:.6g} failed={','.join(failed) or 'none'}")
    return EXIT_PARTIAL if any(not r.passed for r in reports) else EXIT_OK


COMMANDS = {
    "describe": cmd_describe,
    "density": cmd_density,
    "cdf": cmd_cdf,
    "convolve": cmd_convolve,
    "clt-sweep": cmd_clt_sweep,
    "phi-audit": cmd_phi_audit,
    "rate": cmd_rate,
    "bound-audit": cmd_bound_audit,
}

DEFAULT_N = {"describe": "1", "density": "1", "cdf": "1", "convolve": "1", "clt-sweep": "4,16,64,256",
             "phi-audit": "4,16,64,256", "rate": "4,16,64,256,1024", "bound-audit": "1,4,16"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--measure", required=True,
                        help="builtin name (semicircle, bernoulli, arcsine, mp1, dirac, free_id_pm1), inline JSON or a spec file")
    common.add_argument("--n", dest="n_list", help="n or comma-separated increasing list")
    common.add_argument("--grid", help="real grid as min:max:points")
    common.add_argument("--out", type=Path, help="output directory (default: stdout)")
    common.add_argument("--format", default="json,csv", help="report formats, comma-separated (json, csv)")
    common.add_argument("--threads", type=int, help="worker threads (fallback: FREECONV_THREADS)")
    common.add_argument("--newton-tol", type=float, default=cont.NEWTON_TOL, help="Newton residual tolerance")

    parser = argparse.ArgumentParser(prog="freeconv", description="Free central limit numerics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", parents=[common], help="moments and standardization of a measure")
    p.add_argument("--moments", type=int, default=6)
    p.add_argument("--emit-spec", action="store_true", help="print the canonical measure spec")

    for name, helptext in (("density", "density of mu_n on a grid"), ("cdf", "distribution function of mu_n")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--raw", action="store_true", help="do not standardize the seed")

    p = sub.add_parser("convolve", parents=[common], help="density of scale * (A + B) for free A, B")
    p.add_argument("--with", dest="with_measure", required=True)
    p.add_argument("--scale", type=float, default=1.0)

    p = sub.add_parser("clt-sweep", parents=[common], help="density and Kolmogorov errors against the semicircle")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--full-line", action="store_true")
    p.add_argument("--cdf-grid", help="grid for the Kolmogorov distance, min:max:points")

    p = sub.add_parser("phi-audit", parents=[common], help="Voiculescu transform convergence on a cone")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=3.0)
    p.add_argument("--radius", type=float, default=6.0)

    sub.add_parser("rate", parents=[common], help="Kolmogorov distance rate fit")
    sub.add_parser("bound-audit", parents=[common], help="transform inequality audit")
    return parser


def make_config(args):
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    if not formats or any(f not in ("json", "csv") for f in formats):
        raise ConfigError(f"--format takes json and/or csv, got {args.format!r}")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be positive")
    if not (args.newton_tol > 0 and math.isfinite(args.newton_tol)):
        raise ConfigError("--newton-tol must be positive")
    return RunConfig(
        command=args.command,
        measure=args.measure,
        n_list=parse_n_list(args.n_list or DEFAULT_N[args.command]),
        grid=parse_grid(args.grid) if args.grid else None,
        epsilon=getattr(args, "epsilon", DEFAULT_EPSILON),
        out=args.out,
        formats=formats,
        threads=resolve_threads(args.threads),
        newton_tol=args.newton_tol,
    )


def _glue_values(argv):
    # grid specs start with "-" for negative minima, which argparse would read as options
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--grid", "--cdf-grid"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _glue_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if getattr(args, "cdf_grid", None):
            args.cdf_grid = parse_grid(args.cdf_grid)
        cfg = make_config(args)
        mu = load_measure(cfg.measure)
    except (ConfigError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[cfg.command](cfg, args, mu)
    except (ConfigError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        extra = f" (residual {exc.residual:.3g})" if isinstance(exc.residual, float) else ""
        print(f"numeric failure: {type(exc).__name__}: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC
    except FreeConvError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())
