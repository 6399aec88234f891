"""Densities and distribution functions of ``mu_n`` on the real line.

The density at ``t`` is ``-Im G(t + ih) / pi`` in the limit ``h -> 0``. Values
of ``F = 1/G`` are followed down the schedule ``h_k = 2**-k`` by continuation,
the limit is taken by Richardson extrapolation over the last three levels, and
when the schedule floor is reached without convergence a Newton solve directly
at ``h = 0`` (starting from the last path point) is tried.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _continuation as cont
from .convolution import Route, clt_route, pair_route
from .errors import CurveQualityError, DomainError, TailMassError
from .measure import (
    Affine,
    Arcsine,
    Atomic,
    Measure,
    Mixture,
    Semicircle,
    is_dirac,
    standardize,
)

H_EXPONENTS = tuple(range(3, 21))
RICHARDSON_TOL = 1e-9
ATOM_RATIO = 1.8
ATOM_FLOOR = 1e-9
MAX_UNRESOLVED = 0.05
MIN_CAPTURED = 0.99
POLISH_STEPS = 40

RESOLVED, UNRESOLVED, ATOM = "ok", "unresolved", "atom"


@dataclass
class DensityCurve:
    grid: np.ndarray
    values: np.ndarray
    h_used: np.ndarray
    residuals: np.ndarray
    captured_mass: float
    status: np.ndarray
    atoms: list = field(default_factory=list)
    min_abs_f: np.ndarray | None = None
    clamped: float = 0.0
    n: int = 1
    shift: float = 0.0
    scale: float = 1.0

    @property
    def unresolved(self):
        return self.status != RESOLVED

    def moment(self, k):
        """k-th moment of the density part (trapezoid rule on the grid)."""
        return float(_trapz(self.values * self.grid**k, self.grid))

    def to_csv(self):
        return _csv(("t", "value", "h_used", "residual"), (self.grid, self.values, self.h_used, self.residuals))


@dataclass
class CdfCurve:
    grid: np.ndarray
    values: np.ndarray
    tail_mass_low: float
    tail_mass_high: float

    def __call__(self, t):
        """Linear interpolation, with the tail masses beyond the grid."""
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.grid, self.values)
        out = np.where(t < self.grid[0], 0.0, out)
        return np.where(t > self.grid[-1], 1.0, out)

    def to_csv(self):
        return _csv(("t", "value"), (self.grid, self.values))


def _csv(header, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow(["%.17g" % float(x) for x in row])
    return buf.getvalue()


def _trapz(y, x):
    return np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x))


# ------------------------------------------------------------- boundary values


@dataclass
class BoundaryValues:
    density: np.ndarray
    h_used: np.ndarray
    residual: np.ndarray
    status: np.ndarray
    atom_mass: np.ndarray
    clamped: np.ndarray
    min_abs_f: np.ndarray
    path_imag_ok: bool


def boundary_values(route: Route, t, *, tol=cont.NEWTON_TOL, exponents=H_EXPONENTS, polish=True):
    """Run the h-schedule for every real ``t`` (1-D) along ``route``."""
    t = np.asarray(t, dtype=float).reshape(-1)
    P = t.size
    density = np.zeros(P)
    h_used = np.full(P, np.nan)
    residual = np.full(P, np.nan)
    status = np.full(P, UNRESOLVED, dtype=object)
    atom_mass = np.zeros(P)
    min_abs = np.full(P, np.inf)
    path_ok = True

    hs = [2.0 ** -k for k in exponents]
    hist = np.full((len(hs), P), np.nan)
    extrap = np.full((len(hs), P), np.nan)
    z = t + 1j * hs[0]
    u, ok, _ = route.solve(z, tol=tol)
    live = ok.copy()
    w_last = np.zeros(P, dtype=complex)
    u_last = u.copy()

    for j, h in enumerate(hs):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        if j > 0:
            un, okj, _ = route.track(u_last[idx], t[idx] + 1j * hs[j - 1], t[idx] + 1j * h, tol=tol)
            live[idx[~okj]] = False
            idx = idx[okj]
            u_last[idx] = un[okj]
        w = route.output(u_last[idx])
        path_ok &= bool(np.all(w.imag > 0))
        w_last[idx] = w
        min_abs[idx] = np.minimum(min_abs[idx], np.abs(w))
        d = -(1.0 / w).imag / math.pi
        hist[j, idx] = d
        if j >= 2:
            r1 = 2.0 * d - hist[j - 1, idx]
            r1_prev = 2.0 * hist[j - 1, idx] - hist[j - 2, idx]
            extrap[j, idx] = (4.0 * r1 - r1_prev) / 3.0
        if j >= 3:
            diff = np.abs(extrap[j, idx] - extrap[j - 1, idx])
            done = diff < RICHARDSON_TOL
            sel = idx[done]
            density[sel] = extrap[j, sel]
            h_used[sel] = h
            residual[sel] = diff[done]
            status[sel] = RESOLVED
            live[sel] = False

    # floor reached with the extrapolants still moving
    last = len(hs) - 1
    floor = np.nonzero(live)[0]
    if floor.size:
        d_last = hist[last, floor]
        ratio = d_last / np.where(hist[last - 1, floor] > 0, hist[last - 1, floor], np.inf)
        mass = math.pi * hs[last] * d_last
        is_atom = (ratio > ATOM_RATIO) & (mass > ATOM_FLOOR)
        status[floor[is_atom]] = ATOM
        atom_mass[floor[is_atom]] = mass[is_atom]
        h_used[floor[is_atom]] = hs[last]
        rest = floor[~is_atom]
        if rest.size:
            R = extrap[last, rest]
            diff = np.abs(R - extrap[last - 1, rest])
            density[rest], h_used[rest], residual[rest] = R, hs[last], diff
            status[rest] = RESOLVED
            if polish:
                u0, conv, _ = cont.newton(route.eq, u_last[rest], route.param(t[rest] + 0j), scale=route.scale,
                                          tol=tol, imag_floor=0.0, extra=POLISH_STEPS)
                w0 = route.output(u0)
                with np.errstate(divide="ignore", invalid="ignore"):
                    d0 = -(1.0 / w0).imag / math.pi
                good = conv & np.isfinite(d0) & (np.abs(d0 - R) <= 10.0 * diff + RICHARDSON_TOL)
                sel = rest[good]
                density[sel] = d0[good]
                h_used[sel] = 0.0
                residual[sel] = np.abs(d0[good] - R[good])
                min_abs[sel] = np.minimum(min_abs[sel], np.abs(w0[good]))

    clamped = np.where(density < 0, -density, 0.0)
    density = np.maximum(density, 0.0)
    density[status != RESOLVED] = 0.0
    return BoundaryValues(density, h_used, residual, status, atom_mass, clamped, min_abs, path_ok)


def _parallel(fn, t, workers):
    """Evaluate ``fn`` on chunks of ``t``; results are independent of the chunking."""
    if not workers or workers <= 1 or t.size < 64:
        return fn(t)
    chunks = np.array_split(t, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, chunks))
    return BoundaryValues(
        *(np.concatenate([getattr(p, f) for p in parts]) for f in
          ("density", "h_used", "residual", "status", "atom_mass", "clamped", "min_abs_f")),
        all(p.path_imag_ok for p in parts),
    )


# ------------------------------------------------------------- atoms


def _atoms_of(mu):
    if isinstance(mu, Atomic):
        return list(mu.atoms)
    if isinstance(mu, Mixture):
        return [(p, w * wm) for wm, m in mu.components for p, w in _atoms_of(m)]
    if isinstance(mu, Affine):
        return [(mu.scale * p + mu.shift, w) for p, w in _atoms_of(mu.base)]
    return []


def predicted_atoms(mu: Measure, n: int):
    """Atoms of ``mu_n``: an atom of weight ``w`` at ``a`` survives iff ``n w > n - 1``."""
    merged = {}
    for p, w in _atoms_of(mu):
        merged[p] = merged.get(p, 0.0) + w
    out = []
    for p, w in sorted(merged.items()):
        mass = n * w - (n - 1)
        if mass > 0:
            out.append((math.sqrt(n) * p, mass))
    return out


# ------------------------------------------------------------- public operations


def _prepare(mu, standardized):
    if is_dirac(mu):
        return mu, 0.0, 1.0
    if standardized:
        return standardize(mu)
    return mu, 0.0, 1.0


def density_at(mu: Measure, n: int, t: float, *, standardized=True, tol=cont.NEWTON_TOL):
    """Density of ``mu_n`` at ``t`` and a diagnostics dict.

    ``mu`` is standardized first unless ``standardized=False``. A point that
    could not be resolved has density 0 and ``diagnostics["status"] != "ok"``.
    """
    seed, shift, scale = _prepare(mu, standardized)
    bv = boundary_values(clt_route(seed, n), [float(t)], tol=tol)
    diag = {
        "status": bv.status[0],
        "h_used": float(bv.h_used[0]),
        "residual": float(bv.residual[0]),
        "clamped": float(bv.clamped[0]),
        "atom_mass": float(bv.atom_mass[0]),
        "min_abs_f": float(bv.min_abs_f[0]),
        "shift": shift,
        "scale": scale,
    }
    return float(bv.density[0]), diag


def _curve(route, grid, n, atoms, workers, tol, shift=0.0, scale=1.0):
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing with at least two points")
    bv = _parallel(lambda tt: boundary_values(route, tt, tol=tol), grid, workers)
    status = bv.status
    found = [(float(grid[i]), float(bv.atom_mass[i])) for i in np.nonzero(status == ATOM)[0]]
    all_atoms = list(atoms) + [a for a in found if all(abs(a[0] - p) > 1e-9 for p, _ in atoms)]
    captured = float(_trapz(bv.density, grid))
    curve = DensityCurve(grid, bv.density, bv.h_used, bv.residual, captured, status, all_atoms, bv.min_abs_f,
                         float(bv.clamped.max(initial=0.0)), n, shift, scale)
    bad = int(np.sum(status != RESOLVED))
    if bad > MAX_UNRESOLVED * grid.size:
        raise CurveQualityError(f"{bad} of {grid.size} grid points unresolved", residual=bad / grid.size)
    atom_mass = sum(m for _, m in atoms)
    if atom_mass > MAX_UNRESOLVED:
        raise CurveQualityError(f"law carries atoms of total mass {atom_mass:.6g}; no density to recover",
                                residual=atom_mass)
    return curve


def density_curve(mu: Measure, n: int, grid, *, standardized=True, workers=None, tol=cont.NEWTON_TOL):
    """Density of ``mu_n`` on ``grid`` (see :func:`density_at`)."""
    seed, shift, scale = _prepare(mu, standardized)
    return _curve(clt_route(seed, n), grid, n, predicted_atoms(seed, n), workers, tol, shift, scale)


def _scaled_route(route, s):
    # F_{sY}(z) = s F_Y(z / s)
    return Route(eq=route.eq, start=route.start, output=lambda u: s * route.output(u),
                 param=lambda z: route.param(z / s), scale=route.scale, fallback=route.fallback)


def pair_density_curve(mu_a: Measure, mu_b: Measure, grid, *, scale=1.0, workers=None, tol=cont.NEWTON_TOL):
    """Density of ``scale * (A + B)`` for free ``A ~ mu_a``, ``B ~ mu_b``."""
    route = pair_route(mu_a, mu_b)
    if scale != 1.0:
        route = _scaled_route(route, scale)
    return _curve(route, grid, 1, [], workers, tol, 0.0, scale)


def cdf_curve(curve: DensityCurve) -> CdfCurve:
    """Cumulative trapezoid integral; the missing mass is split between the tails."""
    deficit = 1.0 - curve.captured_mass
    if curve.captured_mass < MIN_CAPTURED:
        raise TailMassError(f"grid captures only {curve.captured_mass:.6f} of the mass; widen the grid",
                            residual=deficit)
    deficit = max(deficit, 0.0)
    f_lo, f_hi = float(curve.values[0]), float(curve.values[-1])
    share = 0.5 if f_lo + f_hi == 0 else f_lo / (f_lo + f_hi)
    low = deficit * share
    steps = 0.5 * (curve.values[1:] + curve.values[:-1]) * np.diff(curve.grid)
    values = low + np.concatenate([[0.0], np.cumsum(steps)])
    values = np.clip(np.maximum.accumulate(values), 0.0, 1.0)
    high = 1.0 - values[-1]
    assert np.all(np.diff(values) >= 0) and values[0] >= 0 and values[-1] <= 1
    return CdfCurve(curve.grid.copy(), values, low, high)


# ------------------------------------------------------------- exact distribution functions


def semicircle_cdf(t, mean=0.0, variance=1.0):
    r = 2.0 * math.sqrt(variance)
    x = np.clip((np.asarray(t, dtype=float) - mean) / r, -1.0, 1.0)
    return 0.5 + (x * np.sqrt(1.0 - x * x) + np.arcsin(x)) / math.pi


def measure_cdf(mu: Measure, t):
    """Exact ``mu((-inf, t])`` for atomic, semicircle and arcsine laws and their mixtures/affine images."""
    t = np.asarray(t, dtype=float)
    if isinstance(mu, Atomic):
        return np.sum(mu.weights[None, :] * (mu.positions[None, :] <= t.reshape(-1, 1)), axis=1).reshape(t.shape)
    if isinstance(mu, Semicircle):
        return semicircle_cdf(t, mu.mean, mu.variance)
    if isinstance(mu, Arcsine):
        x = np.clip((t - mu.center) / mu.half_width, -1.0, 1.0)
        return 0.5 + np.arcsin(x) / math.pi
    if isinstance(mu, Mixture):
        return sum(w * measure_cdf(m, t) for w, m in mu.components)
    if isinstance(mu, Affine):
        return measure_cdf(mu.base, (t - mu.shift) / mu.scale)
    raise DomainError(f"no closed-form distribution function for {type(mu).__name__}")


def _jumps(mu):
    return sorted({p for p, _ in _atoms_of(mu)})


@dataclass(frozen=True)
class Kolmogorov:
    distance: float
    tail_slack: float
    witness: float


def kolmogorov(a, b) -> Kolmogorov:
    """Sup distance between two distribution functions on a common refinement.

    Each side is a :class:`CdfCurve`, a :class:`Measure` with a closed-form
    distribution function, or a callable. Jumps of atomic laws are checked
    from both sides. ``tail_slack`` is the largest tail mass of the curves,
    an uncertainty on the reported distance.
    """
    grids, jumps, slack = [], [], 0.0
    for side in (a, b):
        if isinstance(side, CdfCurve):
            grids.append(side.grid)
            slack = max(slack, side.tail_mass_low, side.tail_mass_high)
        elif isinstance(side, Measure):
            jumps.extend(_jumps(side))
    if not grids and not jumps:
        raise DomainError("need at least one curve or atomic law to build a comparison grid")
    pts = np.unique(np.concatenate(grids + [np.asarray(jumps, dtype=float)]))
    fa, fb = _evaluator(a), _evaluator(b)
    diff = np.abs(fa(pts) - fb(pts))
    if jumps:
        left = np.asarray(jumps, dtype=float)
        left = np.nextafter(left, -np.inf)
        dl = np.abs(fa(left) - fb(left))
        pts = np.concatenate([pts, left])
        diff = np.concatenate([diff, dl])
    k = int(np.argmax(diff))
    return Kolmogorov(float(diff[k]), float(slack), float(pts[k]))


def _evaluator(side):
    if isinstance(side, CdfCurve):
        return side
    if isinstance(side, Measure):
        return lambda t: measure_cdf(side, t)
    if callable(side):
        return side
    raise TypeError("expected a CdfCurve, Measure or callable")


def kolmogorov_distance(a, b=None) -> float:
    """``sup_t |F_a(t) - F_b(t)|``; ``b`` defaults to the standard semicircle law."""
    return kolmogorov(a, Semicircle() if b is None else b).distance
