"""Convergence sweeps, transform audits and rate fits, with JSON/CSV reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .convolution import as_free_id, f_clt, f_lower_bound, phi_clt
from .errors import DegenerateMeasureError, DomainError, FreeConvError
from .inversion import cdf_curve, density_curve, kolmogorov
from .measure import Semicircle, is_dirac, is_free_id, mean, moment, standardize, support_bound, to_spec, variance
from .oracle import reference_density
from .transform import Cone, _phi_known, check_f_deviation, check_imag_growth, check_phi_decay, _report

DEFAULT_EPSILON = 0.1
NOISE_FLOOR = 1e-6
MIN_FIT_POINTS = 4


def compact_grid(epsilon=DEFAULT_EPSILON, points=381):
    return np.linspace(-2.0 + epsilon, 2.0 - epsilon, points)


def full_line_grid(points=801, half_width=4.0):
    return np.linspace(-half_width, half_width, points)


def cdf_grid(points=32001, half_width=4.0):
    return np.linspace(-half_width, half_width, points)


def _check_n_list(n_list):
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be nonempty, positive and strictly increasing")
    return n_list


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _seed(mu, standardized):
    if standardized and not is_dirac(mu):
        return standardize(mu)[0]
    return mu


def clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def _fmt(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


# ------------------------------------------------------------- CLT sweep


@dataclass
class ConvergenceReport:
    seed: dict
    n_list: list
    epsilon: float
    full_line: bool
    rows: list
    thresholds: dict
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sup_err_compact", "sup_err_full", "d_K", "unresolved"])
        for r in self.rows:
            w.writerow([r["n"], _fmt(r["sup_err_compact"]), _fmt(r["sup_err_full"]), _fmt(r["d_K"]),
                        r["unresolved"]])
        return buf.getvalue()


def _sweep_one(seed, n, grid, epsilon, full_line, cgrid, lower):
    row = {"n": n, "sup_err_compact": None, "sup_err_full": None, "sup_err_outer": None, "d_K": None,
           "d_K_tail_slack": None, "unresolved": None, "captured_mass": None, "atoms": [], "error": None,
           "min_abs_f": None, "lower_bound_ok": None}
    try:
        curve = density_curve(seed, n, grid, standardized=False)
    except FreeConvError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["unresolved"] = len(grid)
        return row
    ok = ~curve.unresolved
    err = np.abs(curve.values - reference_density("semicircle", grid))
    window = ok & (np.abs(grid) <= 2.0 - epsilon + 1e-12)
    row["sup_err_compact"] = float(err[window].max()) if window.any() else None
    if full_line:
        row["sup_err_full"] = float(err[ok].max())
        outer = ok & (np.abs(grid) >= 2.0)
        row["sup_err_outer"] = float(err[outer].max()) if outer.any() else None
    row["unresolved"] = int(np.sum(curve.unresolved))
    row["captured_mass"] = curve.captured_mass
    row["atoms"] = curve.atoms
    row["min_abs_f"] = float(curve.min_abs_f[ok].min()) if ok.any() else None
    if lower is not None and ok.any():
        row["lower_bound_ok"] = bool(curve.min_abs_f[ok].min() >= lower.value - 1e-9)
    if cgrid is not None:
        try:
            full = density_curve(seed, n, cgrid, standardized=False)
            k = kolmogorov(cdf_curve(full), Semicircle())
            row["d_K"], row["d_K_tail_slack"] = k.distance, k.tail_slack
            row["unresolved"] += int(np.sum(full.unresolved))
        except FreeConvError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def clt_sweep(mu, n_list, grid=None, epsilon=DEFAULT_EPSILON, full_line=False, *, cdf_points=None,
              standardized=True, workers=None):
    """Density errors against the semicircle law and Kolmogorov distances of ``mu_n`` for each n.

    ``grid`` defaults to 381 points on ``[-2 + epsilon, 2 - epsilon]`` (or 801 on
    ``[-4, 4]`` with ``full_line``). Kolmogorov distances come from a separate
    fine grid (``cdf_points``, a grid or ``False`` to skip) because the CDF is
    integrated from the density with the trapezoid rule.
    """
    n_list = _check_n_list(n_list)
    if full_line and not is_free_id(mu):
        raise DomainError("full-line sweeps need an infinitely divisible seed")
    seed = _seed(mu, standardized)
    if grid is None:
        grid = full_line_grid() if full_line else compact_grid(epsilon)
    grid = np.asarray(grid, dtype=float)
    if cdf_points is None:
        cgrid = cdf_grid()
    elif cdf_points is False:
        cgrid = None
    else:
        cgrid = np.asarray(cdf_points, dtype=float)
    lower = None
    thresholds = {"absolute_continuity_n": None, "lower_bound_n_min": None, "lower_bound_constant": None}
    if is_free_id(mu) and not is_dirac(mu):
        try:
            lower = f_lower_bound(as_free_id(mu))
            thresholds["lower_bound_n_min"] = lower.n_min
            thresholds["lower_bound_constant"] = lower.value
        except (TypeError, DegenerateMeasureError, DomainError):
            lower = None
    rows = _map(lambda n: _sweep_one(seed, n, grid, epsilon, full_line, cgrid, lower), n_list, workers)
    flags = []
    for r in rows:
        if r["lower_bound_ok"] is not None and lower is not None and r["n"] < lower.n_min:
            r["lower_bound_ok"] = None  # not asserted below the threshold
        if r["error"] or r["unresolved"]:
            flags.append(f"n={r['n']}: " + (r["error"] or f"{r['unresolved']} unresolved points"))
        if r["lower_bound_ok"] is False:
            flags.append(f"n={r['n']}: |F| fell below the lower bound")
    for r in rows:
        if r["error"] is None and r["unresolved"] == 0 and not r["atoms"]:
            thresholds["absolute_continuity_n"] = r["n"]
            break
    return ConvergenceReport(to_spec(mu), n_list, float(epsilon), bool(full_line), rows, thresholds, flags)


# ------------------------------------------------------------- Voiculescu transform audit


@dataclass
class PhiAudit:
    seed: dict
    n_list: list
    cone: dict
    compact_radius: float
    mesh: list
    sups: list
    witnesses: list

    @property
    def decreasing(self):
        return all(b < a for a, b in zip(self.sups, self.sups[1:]))

    def to_dict(self):
        d = asdict(self)
        d["decreasing"] = self.decreasing
        d["mesh"] = [[z.real, z.imag] for z in self.mesh]
        d["witnesses"] = [[z.real, z.imag] for z in self.witnesses]
        return d

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sup_phi_error"])
        for n, s in zip(self.n_list, self.sups):
            w.writerow([n, _fmt(s)])
        return buf.getvalue()


def phi_convergence_audit(mu, n_list, cone=None, compact_radius=6.0, *, standardized=True, workers=None):
    """``sup |phi_clt(mu, n, z) - 1/z|`` over a 100-point polar mesh of the compact part of a cone."""
    n_list = _check_n_list(n_list)
    cone = cone or Cone(1.0, 3.0)
    seed = _seed(mu, standardized)
    mesh = cone.mesh(compact_radius)

    def one(n):
        err = np.abs(np.asarray(phi_clt(seed, n, mesh)) - 1.0 / mesh)
        k = int(np.argmax(err))
        return float(err[k]), complex(mesh[k])

    out = _map(one, n_list, workers)
    return PhiAudit(to_spec(mu), n_list, {"alpha": cone.alpha, "beta": cone.beta}, float(compact_radius),
                    list(mesh), [s for s, _ in out], [w for _, w in out])


# ------------------------------------------------------------- rate


@dataclass
class RateFit:
    exponent: float
    constant: float
    r_squared: float
    n_used: list


def fit_rate(n_list, d_k):
    """Least-squares line through ``(log n, log d_K)``."""
    x = np.log(np.asarray(n_list, dtype=float))
    y = np.log(np.asarray(d_k, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(math.exp(icpt)), r2, [int(n) for n in n_list])


@dataclass
class RateReport:
    seed: dict
    n_list: list
    d_k: list
    tail_slack: list
    unresolved: list
    fit: RateFit | None
    bounds: dict
    flags: list

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "d_K", "tail_slack", "unresolved"])
        for row in zip(self.n_list, self.d_k, self.tail_slack, self.unresolved):
            w.writerow([row[0], _fmt(row[1]), _fmt(row[2]), row[3]])
        return buf.getvalue()


def berry_esseen_sweep(mu, n_list, grid=None, *, standardized=True, workers=None):
    """Kolmogorov distance to the semicircle law per n, a log-log rate fit and the reference bounds.

    The fit uses the n values with no unresolved points and ``d_K`` above
    the numerical noise floor; it is skipped (``None``) with fewer than four.
    """
    n_list = _check_n_list(n_list)
    seed = _seed(mu, standardized)
    grid = cdf_grid() if grid is None else np.asarray(grid, dtype=float)

    def one(n):
        try:
            curve = density_curve(seed, n, grid, standardized=False)
            k = kolmogorov(cdf_curve(curve), Semicircle())
            return k.distance, k.tail_slack, int(np.sum(curve.unresolved)), None
        except FreeConvError as exc:
            return None, None, len(grid), f"{type(exc).__name__}: {exc}"

    out = _map(one, n_list, workers)
    d_k = [o[0] for o in out]
    flags = [f"n={n}: {o[3]}" for n, o in zip(n_list, out) if o[3]]
    usable = [(n, d) for n, d, o in zip(n_list, d_k, out) if d is not None and o[2] == 0 and d > NOISE_FLOOR]
    fit = fit_rate(*zip(*usable)) if len(usable) >= MIN_FIT_POINTS else None
    if fit is None:
        flags.append(f"rate fit skipped: {len(usable)} usable point(s) above the noise floor")

    L = support_bound(seed)
    m3, m4 = moment(seed, 3), moment(seed, 4)
    moment_term = abs(m3) + math.sqrt(m4)
    bounds = {"support_bound": L, "m3": m3, "m4": m4, "rows": []}
    for n, d in zip(n_list, d_k):
        b = {"n": n, "support_rhs": None, "moment_rhs": moment_term / math.sqrt(n), "support_constant": None,
             "moment_constant": None}
        if L is not None:
            b["support_rhs"] = L**3 / math.sqrt(n)
        if d is not None:
            b["moment_constant"] = d * math.sqrt(n) / moment_term
            if L is not None:
                b["support_constant"] = d * math.sqrt(n) / L**3
                if d > b["support_rhs"]:
                    flags.append(f"n={n}: d_K exceeds L^3 n^-1/2")
            if d > b["moment_rhs"]:
                flags.append(f"n={n}: d_K exceeds (|m3| + m4^1/2) n^-1/2")
        bounds["rows"].append(b)
    return RateReport(to_spec(mu), n_list, d_k, [o[1] for o in out], [o[2] for o in out], fit, bounds, flags)


# ------------------------------------------------------------- bound audit


def default_audit_grid():
    """200 points: 20 real parts in [-3, 3] times 10 imaginary parts in [0.05, 20]."""
    x = np.linspace(-3.0, 3.0, 20)
    y = np.geomspace(0.05, 20.0, 10)
    return (x[None, :] + 1j * y[:, None]).ravel()


def default_global_grid():
    """200 points reaching down to Im z = 0.01, for the global Voiculescu bound."""
    x = np.linspace(-3.0, 3.0, 20)
    y = np.geomspace(0.01, 10.0, 10)
    return (x[None, :] + 1j * y[:, None]).ravel()


def bound_audit(mu, n_list, grid=None, *, global_grid=None, standardized=True, workers=None):
    """One :class:`~freeconv.transform.BoundReport` per inequality per n for ``mu_n``.

    Covers the F-deviation, Voiculescu decay (on ``Im z > 2 sigma``) and
    Im-growth bounds, the global decay bound for infinitely divisible seeds and
    the lower bound on ``|F|`` (informational below its threshold ``n_min``).
    """
    n_list = _check_n_list(n_list)
    seed = _seed(mu, standardized)
    z = default_audit_grid() if grid is None else np.asarray(grid, dtype=complex).reshape(-1)
    zg = default_global_grid() if global_grid is None else np.asarray(global_grid, dtype=complex).reshape(-1)
    var = variance(seed)
    sigma = math.sqrt(var)
    lower = None
    if is_free_id(seed) and not is_dirac(seed):
        try:
            lower = f_lower_bound(as_free_id(mu))
        except (TypeError, DegenerateMeasureError, DomainError):
            lower = None

    def one(n):
        rn = math.sqrt(n)
        m_n = rn * mean(seed)
        F = np.asarray(f_clt(seed, n, z))
        reports = [check_f_deviation(F, z, var, m_n, n)]
        inner = z[z.imag > 2 * sigma]
        if inner.size:
            reports.append(check_phi_decay(np.asarray(phi_clt(seed, n, inner)), inner, var, m_n, n))
        reports.append(check_imag_growth(F, z, n))
        if is_free_id(seed):
            val, _ = _phi_known(seed, rn * zg)
            reports.append(check_phi_decay(rn * val, zg, var, m_n, n, lemma="phi_decay_global"))
        if lower is not None:
            Fg = np.asarray(f_clt(seed, n, zg))
            slack = np.abs(Fg) - lower.value
            r = _report("f_lower_bound", zg, slack, lower.value, n)
            r.extra = {"n_min": lower.n_min, "interval": list(lower.interval)}
            if n < lower.n_min:
                r.note = "n below n_min; informational"
                r.passed = True
            reports.append(r)
        return reports

    return [r for group in _map(one, n_list, workers) for r in group]


def bound_reports_json(reports):
    return dumps([r.to_dict() for r in reports])
