"""Cauchy, reciprocal Cauchy and Voiculescu transforms on the upper half-plane.

All evaluators accept a complex scalar, a :class:`HalfPlanePoint`, or an
array of complex numbers and return a matching scalar/array. Points must lie
strictly in C+; boundary values are the business of :mod:`freeconv.inversion`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import singledispatch

import numpy as np

from . import _continuation as cont
from .errors import DomainError, InversionError, NumericError
from .measure import (
    Affine,
    Arcsine,
    Atomic,
    FreeID,
    GridDensity,
    MarchenkoPastur,
    Measure,
    Mixture,
    Semicircle,
    is_free_id,
    mean,
    variance,
)

IMAG_GROWTH_TOL = 1e-12
BOUND_TOL = 1e-9
# segments x points handled per block by the piecewise-linear Cauchy transform
_GRID_BLOCK = 400_000


@dataclass(frozen=True)
class HalfPlanePoint:
    re: float
    im: float

    def __post_init__(self):
        if not self.im > 0:
            raise DomainError(f"HalfPlanePoint needs im > 0, got {self.im!r}")

    def __complex__(self):
        return complex(self.re, self.im)


@dataclass(frozen=True)
class Cone:
    """Truncated cone ``{z : Im z > alpha |Re z|, |z| > beta}``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("cone parameters must be positive")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return (z.imag > self.alpha * np.abs(z.real)) & (np.abs(z) > self.beta)

    def mesh(self, radius, n_radii=10, n_angles=10, margin=0.05):
        """Polar mesh of the compact ``{z in cone : |z| <= radius}``, kept off its edges."""
        if radius <= self.beta:
            raise DomainError("compact radius must exceed the cone's beta")
        theta0 = math.atan(1.0 / self.alpha)  # angle from the imaginary axis to the cone edge
        angles = math.pi / 2 + np.linspace(-(theta0 - margin), theta0 - margin, n_angles)
        radii = np.linspace(self.beta * (1 + margin), radius, n_radii)
        z = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
        assert self.contains(z).all()
        return z


@dataclass
class BoundReport:
    """Audit result for one inequality on a grid of points."""

    lemma: str
    grid: list
    worst_slack: float
    witness: complex
    passed: bool
    constant_used: float = float("nan")
    n: int = 1
    note: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lemma": self.lemma,
            "n": self.n,
            "grid": [[float(z.real), float(z.imag)] for z in self.grid],
            "worst_slack": float(self.worst_slack),
            "witness": [float(self.witness.real), float(self.witness.imag)],
            "passed": bool(self.passed),
            "constant_used": float(self.constant_used),
            "note": self.note,
            "extra": self.extra,
        }


def _as_array(z):
    """Return ``(array, was_scalar)``."""
    if isinstance(z, HalfPlanePoint):
        return np.array([complex(z)]), True
    arr = np.asarray(z, dtype=complex)
    return arr.reshape(-1), arr.ndim == 0


def _restore(values, scalar, like=None):
    if scalar:
        return complex(values[0])
    if like is not None:
        return values.reshape(np.shape(like))
    return values


def _require_upper(z):
    if not np.all(z.imag > 0):
        raise DomainError("point(s) must lie in the open upper half-plane")


# ------------------------------------------------------------- Cauchy transform


@singledispatch
def _cauchy(mu, z):
    """Return ``(G(z), G'(z))`` for a 1-D complex array ``z``."""
    raise TypeError(f"no Cauchy transform for {type(mu).__name__}")


@_cauchy.register
def _(mu: Atomic, z):
    d = z[:, None] - mu.positions[None, :]
    w = mu.weights[None, :]
    return (w / d).sum(axis=1), -(w / (d * d)).sum(axis=1)


@_cauchy.register
def _(mu: Semicircle, z):
    r = 2.0 * math.sqrt(mu.variance)
    u = z - mu.mean
    s = np.sqrt(u - r) * np.sqrt(u + r)
    # (u - s)(u + s) = 4 var, so (u - s) / (2 var) = 2 / (u + s) without cancellation
    return 2.0 / (u + s), -2.0 / (s * (u + s))


@_cauchy.register
def _(mu: Arcsine, z):
    u = z - mu.center
    s = np.sqrt(u - mu.half_width) * np.sqrt(u + mu.half_width)
    return 1.0 / s, -u / s**3


@_cauchy.register
def _(mu: MarchenkoPastur, z):
    lam = mu.rate
    a, b = mu.edges
    s = np.sqrt(z - a) * np.sqrt(z - b)
    den = z + 1.0 - lam + s
    G = 2.0 / den
    dG = -2.0 * (1.0 + (z - 1.0 - lam) / s) / den**2
    return G, dG


_SERIES_TERMS = 32
_SERIES_COEF = 1.0 / np.arange(2, _SERIES_TERMS + 2)


def _g_series(x):
    # -log(1 - x) / x - 1 = sum_{k>=1} x^k / (k + 1)
    acc = np.zeros_like(x)
    for c in _SERIES_COEF[::-1]:
        acc = (acc + c) * x
    return acc


@_cauchy.register
def _(mu: GridDensity, z):
    t0, t1 = mu.t[:-1], mu.t[1:]
    f0, f1 = mu.f[:-1], mu.f[1:]
    width = t1 - t0
    slope = (f1 - f0) / width
    nseg = t0.size
    G = np.empty(z.size, dtype=complex)
    dG = np.empty(z.size, dtype=complex)
    block = max(1, _GRID_BLOCK // nseg)
    for lo in range(0, z.size, block):
        zz = z[lo:lo + block, None]
        a = zz - t0
        b = zz - t1
        x = width / a
        small = np.abs(x) < 0.25
        g = np.empty_like(x)
        g[small] = _g_series(x[small])
        big = ~small
        L_big = np.log(a[big]) - np.log(b[big])
        g[big] = L_big / x[big] - 1.0
        L = x * (1.0 + g)
        # integral of (f0 + s (t - t0)) / (z - t) over the segment
        terms = f0 * L + slope * width * g
        G[lo:lo + block] = terms.sum(axis=1)
        flin = f0 + slope * a
        dterms = -flin * width / (a * b) + slope * L
        dG[lo:lo + block] = dterms.sum(axis=1)
    return G, dG


@_cauchy.register
def _(mu: Mixture, z):
    G = np.zeros(z.size, dtype=complex)
    dG = np.zeros(z.size, dtype=complex)
    for w, m in mu.components:
        g, dg = _cauchy(m, z)
        G += w * g
        dG += w * dg
    return G, dG


@_cauchy.register
def _(mu: Affine, z):
    g, dg = _cauchy(mu.base, (z - mu.shift) / mu.scale)
    return g / mu.scale, dg / mu.scale**2


@_cauchy.register
def _(mu: FreeID, z):
    F, dF = _id_f_transform(mu, z)
    return 1.0 / F, -dF / F**2


def cauchy_G(mu: Measure, z):
    """Cauchy transform ``G(z) = integral dmu(t) / (z - t)``; lands in C-."""
    arr, scalar = _as_array(z)
    _require_upper(arr)
    G, _ = _cauchy(mu, arr)
    return _restore(G, scalar, z)


def _f_and_derivative(mu, z):
    """``(F(z), F'(z))`` for a 1-D array, no domain checks."""
    if isinstance(mu, FreeID):
        return _id_f_transform(mu, z)
    G, dG = _cauchy(mu, z)
    return 1.0 / G, -dG / (G * G)


def f_transform(mu: Measure, z):
    """Reciprocal Cauchy transform ``F = 1 / G``; satisfies ``Im F >= Im z``."""
    arr, scalar = _as_array(z)
    _require_upper(arr)
    F, _ = _f_and_derivative(mu, arr)
    gap = F.imag - arr.imag
    tol = IMAG_GROWTH_TOL * np.maximum(1.0, np.abs(arr))
    if np.any(gap < -tol) or not np.all(np.isfinite(F)):
        k = int(np.argmin(gap))
        raise NumericError(f"Im F(z) < Im z at z={arr[k]!r} (gap {gap[k]:.3e})", residual=float(-gap[k]))
    return _restore(F, scalar, z)


# ------------------------------------------------------------- Voiculescu transform


def phi_id(alpha: float, nu: Measure, z, levy_mass: float = 1.0):
    """``alpha + integral (1 + t z) / (z - t) dnu(t)`` with ``nu = levy_mass * nu``."""
    arr, scalar = _as_array(z)
    _require_upper(arr)
    val, _ = _levy_integral(nu, arr)
    return _restore(alpha + levy_mass * val, scalar, z)


def _levy_integral(nu, z):
    """``integral (1 + t z) / (z - t) dnu`` and its z-derivative for a probability ``nu``."""
    if isinstance(nu, Atomic):
        t = nu.positions[None, :]
        w = nu.weights[None, :]
        d = z[:, None] - t
        val = (w * (1.0 + t * z[:, None]) / d).sum(axis=1)
        der = -(w * (1.0 + t * t) / (d * d)).sum(axis=1)
        return val, der
    if isinstance(nu, Mixture):
        val = np.zeros(z.size, dtype=complex)
        der = np.zeros(z.size, dtype=complex)
        for w, m in nu.components:
            v, d = _levy_integral(m, z)
            val += w * v
            der += w * d
        return val, der
    # (1 + t z)/(z - t) = t + (1 + z^2)/(z - t) - (z + t)
    G, dG = _cauchy(nu, z)
    zz = 1.0 + z * z
    return zz * G - z, 2.0 * z * G + zz * dG - 1.0


def _phi_known(mu, z):
    """``(phi, phi')`` for variants with a closed-form, globally defined Voiculescu transform."""
    if isinstance(mu, FreeID):
        val, der = _levy_integral(mu.levy_measure, z)
        return mu.alpha + mu.levy_mass * val, mu.levy_mass * der
    if isinstance(mu, Semicircle):
        return mu.mean + mu.variance / z, -mu.variance / (z * z)
    if isinstance(mu, MarchenkoPastur):
        d = z - 1.0
        return mu.rate + mu.rate / d, -mu.rate / (d * d)
    if isinstance(mu, Affine):
        val, der = _phi_known(mu.base, z / mu.scale)
        return mu.scale * val + mu.shift, der
    raise TypeError(f"{type(mu).__name__} has no closed-form Voiculescu transform")


def _id_equation(phi_fn, n=1):
    """Equation ``w + sqrt(n) phi(sqrt(n) w) - z = 0`` in the unknown ``w``."""
    rn = math.sqrt(n)

    def eq(w, z):
        val, der = phi_fn(rn * w)
        return w + rn * val - z, 1.0 + n * der, -np.ones_like(z)

    def fallback(w, z, iterations=400, damping=0.5):
        for _ in range(iterations):
            val, _ = phi_fn(rn * w)
            target = z - rn * val
            target = np.where(target.imag > 0, target, w)
            w = (1 - damping) * w + damping * target
        return w

    return eq, fallback


def _solve_id(phi_fn, z, n=1, y_top=None, tol=cont.NEWTON_TOL):
    """Solve ``w + phi_n(w) = z`` by tracking down from large imaginary part."""
    eq, fallback = _id_equation(phi_fn, n)
    if y_top is None:
        y_top = np.maximum(10.0, 2.0 * z.imag)
    rn = math.sqrt(n)

    def start(zt):
        return zt - rn * phi_fn(rn * zt)[0]

    return _solve_from_top(eq, start, z, y_top, tol=tol, fallback=fallback)


def _solve_from_top(eq, start, zeta, y_top, *, scale=1.0, tol=cont.NEWTON_TOL, fallback=None, retries=2,
                    top_real=None):
    """Newton at ``Re(zeta) + i y_top`` then track down to ``zeta``; retried from higher up on failure."""
    zeta = np.asarray(zeta, dtype=complex)
    y_top = np.broadcast_to(np.asarray(y_top, dtype=float), zeta.shape).copy()
    u = np.zeros(zeta.shape, dtype=complex)
    ok = np.zeros(zeta.shape, dtype=bool)
    res = np.full(zeta.shape, np.inf)
    active = np.arange(zeta.size)
    for attempt in range(retries + 1):
        re = zeta.real[active] if top_real is None else np.broadcast_to(top_real, zeta.shape)[active]
        zt = re + 1j * np.maximum(y_top[active], zeta.imag[active])
        u0 = start(zt)
        u0, c0, _ = cont.newton(eq, u0, zt, scale=scale, tol=tol)
        if fallback is not None and not c0.all():
            alt = fallback(u0[~c0], zt[~c0])
            ua, ca, _ = cont.newton(eq, alt, zt[~c0], scale=scale, tol=tol)
            sub = np.nonzero(~c0)[0]
            u0[sub], c0[sub] = ua, ca
        ut, okt, rt = cont.track(eq, u0, zt, zeta[active], scale=scale, tol=tol, fallback=fallback)
        okt &= c0
        u[active], ok[active], res[active] = ut, okt, rt
        active = active[~okt]
        if active.size == 0:
            break
        y_top[active] *= 4.0
    return u, ok, res


def _id_f_transform(mu, z):
    """F of an infinitely divisible law from ``F + phi(F) = z``."""
    phi_fn = lambda w: _phi_known(mu, w)  # noqa: E731
    w, ok, res = _solve_id(phi_fn, z)
    if not ok.all():
        raise InversionError("fixed-point equation for F did not converge", residual=float(np.max(res)))
    _, der = phi_fn(w)
    return w, 1.0 / (1.0 + der)


def _sigma(mu, sigma):
    return math.sqrt(variance(mu)) if sigma is None else float(sigma)


def f_inverse(mu: Measure, z, sigma=None):
    """Right inverse of F on ``Im z > 2 sigma`` (all of C+ for infinitely divisible laws)."""
    arr, scalar = _as_array(z)
    _require_upper(arr)
    if is_free_id(mu):
        val, _ = _phi_known(mu, arr)
        return _restore(arr + val, scalar, z)
    s = _sigma(mu, sigma)
    if np.any(arr.imag <= 2 * s):
        raise DomainError(f"F^-1 needs Im z > 2 sigma = {2 * s:.6g}")
    w = _f_inverse_array(mu, arr, s)
    if np.any(w.imag <= s * (1 - 1e-12)):
        raise InversionError("inverse landed outside Im w > sigma")
    return _restore(w, scalar, z)


def _f_inverse_array(mu, z, s, tol=cont.NEWTON_TOL):
    m1 = mean(mu)

    def eq(w, zeta):
        F, dF = _f_and_derivative(mu, w)
        return F - zeta, dF, -np.ones_like(zeta)

    y_top = np.maximum(10.0 * max(s, 1e-300), 2.0 * z.imag)
    w, ok, res = _solve_from_top(eq, lambda zt: zt + m1, z, y_top, tol=tol, top_real=0.0)
    if not ok.all():
        raise InversionError("Newton continuation for F^-1 failed", residual=float(np.max(res[~ok])))
    return w


def phi(mu: Measure, z, sigma=None):
    """Voiculescu transform ``F^-1(z) - z``; checks ``|phi - mean| <= 2 sigma^2 / Im z``."""
    arr, scalar = _as_array(z)
    _require_upper(arr)
    if is_free_id(mu):
        val, _ = _phi_known(mu, arr)
    else:
        s = _sigma(mu, sigma)
        if np.any(arr.imag <= 2 * s):
            raise DomainError(f"phi needs Im z > 2 sigma = {2 * s:.6g}")
        val = _f_inverse_array(mu, arr, s) - arr
    var = variance(mu)
    excess = np.abs(val - mean(mu)) - 2.0 * var / arr.imag
    if np.any(excess > BOUND_TOL):
        raise NumericError(f"|phi| exceeds 2 sigma^2 / Im z by {np.max(excess):.3e}", residual=float(np.max(excess)))
    return _restore(val, scalar, z)


def r_transform(mu: Measure, z, sigma=None):
    """``R(z) = G^-1(z) - 1/z`` for ``z`` in C- with ``1/z`` inside the phi domain."""
    arr, scalar = _as_array(z)
    if not np.all(arr.imag < 0):
        raise DomainError("R-transform is evaluated in the lower half-plane")
    inv = 1.0 / arr
    if not is_free_id(mu):
        s = _sigma(mu, sigma)
        if np.any(inv.imag <= 2 * s):
            raise DomainError(f"1/z must satisfy Im(1/z) > 2 sigma = {2 * s:.6g}")
        g_inv = _f_inverse_array(mu, inv, s)
    else:
        val, _ = _phi_known(mu, inv)
        g_inv = inv + val
    return _restore(g_inv - inv, scalar, z)


# ------------------------------------------------------------- bound audits


def _report(lemma, grid, slack, constant=float("nan"), n=1, note="", extra=None):
    grid = np.asarray(grid, dtype=complex).reshape(-1)
    slack = np.asarray(slack, dtype=float).reshape(-1)
    k = int(np.argmin(slack))
    worst = float(slack[k])
    return BoundReport(lemma, list(grid), worst, complex(grid[k]), worst >= -BOUND_TOL, constant, n, note,
                       extra or {})


def check_f_deviation(F, z, var, m1=0.0, n=1):
    """``|F(z) - z + mean| <= C / Im z`` with C probed as var, 2 var, ..., 16 var."""
    dev = np.abs(F - z + m1)
    for j in range(5):
        C = var * 2**j
        slack = C / z.imag - dev
        if slack.min() >= -BOUND_TOL or j == 4:
            return _report("f_deviation", z, slack, C, n, extra={"probe_factor": 2**j})


def check_phi_decay(phi_vals, z, var, m1=0.0, n=1, lemma="phi_decay"):
    """``|phi(z) - mean| <= 2 var / Im z``."""
    slack = 2.0 * var / z.imag - np.abs(phi_vals - m1)
    return _report(lemma, z, slack, 2.0 * var, n)


def check_imag_growth(F, z, n=1):
    """``Im F(z) >= Im z`` with equality reported (it characterizes point masses)."""
    slack = F.imag - z.imag
    equal = int(np.sum(np.abs(slack) <= IMAG_GROWTH_TOL * np.maximum(1.0, np.abs(z))))
    note = "equality at every point (Dirac measure)" if equal == slack.size else ""
    return _report("imag_growth", z, slack, 0.0, n, note, {"equality_points": equal})


def verify_bounds(mu: Measure, grid):
    """Audit the F-deviation, phi-decay and Im-growth inequalities for ``mu`` on ``grid``.

    Returns one :class:`BoundReport` per inequality. The phi-decay check only
    uses grid points with ``Im z > 2 sigma``.
    """
    z, _ = _as_array(grid)
    if z.size == 0:
        raise DomainError("grid must be nonempty")
    _require_upper(z)
    var = variance(mu)
    m1 = mean(mu)
    F, _ = _f_and_derivative(mu, z)
    reports = [check_f_deviation(F, z, var, m1), check_imag_growth(F, z)]
    s = math.sqrt(var)
    zz = z[z.imag > 2 * s]
    if zz.size:
        reports.insert(1, check_phi_decay(phi(mu, zz), zz, var, m1))
    return reports
