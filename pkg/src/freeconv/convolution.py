"""Free CLT iterates ``mu_n`` and pairwise free convolutions.

``mu_n`` is the law of ``(X_1 + ... + X_n) / sqrt(n)`` for free copies of
``X ~ mu``. Its reciprocal Cauchy transform is obtained on all of C+ by
continuation from large imaginary part, through one of three routes:

* infinitely divisible seeds solve ``w + sqrt(n) phi(sqrt(n) w) = z`` with the
  globally defined Voiculescu transform;
* other seeds solve the subordination equation
  ``n omega - (n - 1) F(omega) = sqrt(n) z`` and return ``F(omega) / sqrt(n)``,
  which is the same solution of ``gamma_n(w) = z`` continued below the region
  where ``phi`` itself is defined;
* pairs ``A + B`` use the two-sided subordination system.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _continuation as cont
from .errors import BoundaryError, ContinuationError, DegenerateMeasureError, DomainError
from .measure import (
    FreeID,
    MarchenkoPastur,
    Measure,
    Semicircle,
    dirac,
    interval_mass,
    is_free_id,
    mean,
    support_interval,
    variance,
)
from .transform import (
    _as_array,
    _f_and_derivative,
    _id_equation,
    _phi_known,
    _require_upper,
    _restore,
    _solve_from_top,
    phi,
)

Y_TOP = 10.0


@dataclass(frozen=True)
class Route:
    """An equation ``E(u, zeta) = 0`` whose solution encodes ``F(z)`` of some measure.

    ``param`` maps a target ``z`` to ``zeta``, ``output`` maps ``u`` to ``F(z)``,
    ``start`` gives a guess at large ``Im zeta`` and ``scale`` converts residuals
    back to z-units.
    """

    eq: Callable
    start: Callable
    output: Callable
    param: Callable
    scale: float = 1.0
    fallback: Callable | None = None

    def top(self, z, y_top=None):
        """Start points ``Re z + i Y`` of the vertical continuation path, in zeta units."""
        y = np.maximum(Y_TOP, 2.0 * z.imag) if y_top is None else y_top
        return self.param(z.real + 1j * y)

    def solve(self, z, tol=cont.NEWTON_TOL, y_top=None):
        """``(u, ok, residual)`` at every target ``z`` (1-D array)."""
        zeta = self.param(z)
        zt = self.top(z, y_top)
        return _solve_from_top(self.eq, self.start, zeta, zt.imag, scale=self.scale, tol=tol,
                               fallback=self.fallback)

    def track(self, u, z_from, z_to, tol=cont.NEWTON_TOL):
        return cont.track(self.eq, u, self.param(z_from), self.param(z_to), scale=self.scale, tol=tol,
                          fallback=self.fallback)

    def newton(self, u, z, tol=cont.NEWTON_TOL, imag_floor=None):
        return cont.newton(self.eq, u, self.param(z), scale=self.scale, tol=tol, imag_floor=imag_floor)


def _id_route(phi_fn, n):
    eq, fallback = _id_equation(phi_fn, n)
    rn = math.sqrt(n)
    return Route(
        eq=eq,
        start=lambda z: z - rn * phi_fn(rn * z)[0],
        output=lambda w: w,
        param=lambda z: z,
        fallback=fallback,
    )


def _subordination_route(mu, n):
    rn = math.sqrt(n)

    def eq(omega, zeta):
        F, dF = _f_and_derivative(mu, omega)
        return n * omega - (n - 1) * F - zeta, n - (n - 1) * dF, -np.ones_like(zeta)

    def start(zeta):
        F, _ = _f_and_derivative(mu, zeta)
        return zeta + (n - 1) * (F - zeta)

    return Route(
        eq=eq,
        start=start,
        output=lambda omega: _f_and_derivative(mu, omega)[0] / rn,
        param=lambda z: rn * z,
        scale=rn,
    )


def clt_route(mu: Measure, n: int) -> Route:
    """Route for ``F`` of the n-th free CLT iterate of ``mu``."""
    _check_n(n)
    if is_free_id(mu):
        return _id_route(lambda w: _phi_known(mu, w), n)
    return _subordination_route(mu, n)


def pair_route(mu_a: Measure, mu_b: Measure) -> Route:
    """Route for ``F`` of ``mu_a`` free-convolved with ``mu_b``."""
    if is_free_id(mu_a) and is_free_id(mu_b):
        def phi_sum(w):
            va, da = _phi_known(mu_a, w)
            vb, db = _phi_known(mu_b, w)
            return va + vb, da + db

        return _id_route(phi_sum, 1)

    def eq(o1, z):
        Fa, dFa = _f_and_derivative(mu_a, o1)
        o2 = z + Fa - o1
        Fb, dFb = _f_and_derivative(mu_b, o2)
        hb1 = dFb - 1.0
        return o1 - z - (Fb - o2), 1.0 - hb1 * (dFa - 1.0), -1.0 - hb1

    def start(z):
        return z - mean(mu_b) - variance(mu_b) / z

    return Route(eq=eq, start=start, output=lambda o1: _f_and_derivative(mu_a, o1)[0], param=lambda z: z)


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")


# ------------------------------------------------------------- public operations


def phi_clt(mu: Measure, n: int, z):
    """``sqrt(n) phi(sqrt(n) z)``, the Voiculescu transform of ``mu_n``."""
    _check_n(n)
    arr, scalar = _as_array(z)
    _require_upper(arr)
    rn = math.sqrt(n)
    if is_free_id(mu):
        val, _ = _phi_known(mu, rn * arr)
    else:
        s = math.sqrt(variance(mu))
        if np.any(arr.imag <= 2 * s / rn):
            raise DomainError(f"phi_clt needs Im z > 2 sigma / sqrt(n) = {2 * s / rn:.6g}")
        val = phi(mu, rn * arr)
    return _restore(rn * val, scalar, z)


def gamma_n(mu: Measure, n: int, z):
    """``z + phi_clt(mu, n, z)``; its inverse is ``F`` of ``mu_n``."""
    arr, scalar = _as_array(z)
    return _restore(arr + np.asarray(phi_clt(mu, n, arr)), scalar, z)


def _run(route, z, tol):
    arr, scalar = _as_array(z)
    if np.any(arr.imag <= 0):
        raise BoundaryError("target points must lie strictly above the real axis; use inversion for boundary values")
    u, ok, res = route.solve(arr, tol=tol)
    if not ok.all():
        bad = np.nonzero(~ok)[0]
        raise ContinuationError(f"continuation failed at {bad.size} of {arr.size} point(s)",
                                residual=float(np.max(res[bad])), failed=bad.tolist())
    w = route.output(u)
    return _restore(w, scalar, z)


def f_clt(mu: Measure, n: int, z, tol=cont.NEWTON_TOL):
    """Reciprocal Cauchy transform of ``mu_n`` at points of C+.

    The result solves ``gamma_n(w) = z`` (continued analytically below the
    region where ``gamma_n`` is directly defined) and satisfies ``Im w >= Im z``.
    """
    w = _run(clt_route(mu, n), z, tol)
    arr, _ = _as_array(z)
    ww, _ = _as_array(w)
    gap = ww.imag - arr.imag
    if np.any(gap < -1e-12 * np.maximum(1.0, np.abs(arr))):
        k = int(np.argmin(gap))
        raise ContinuationError(f"Im F_n(z) < Im z at z={arr[k]!r}", residual=float(-gap[k]), failed=[k])
    return w


def free_convolve_phi(mu_a: Measure, mu_b: Measure, z):
    """Voiculescu transform of the free convolution: the sum of both transforms."""
    arr, scalar = _as_array(z)
    return _restore(np.asarray(phi(mu_a, arr)) + np.asarray(phi(mu_b, arr)), scalar, z)


def f_free_convolve(mu_a: Measure, mu_b: Measure, z, tol=cont.NEWTON_TOL):
    """Reciprocal Cauchy transform of ``mu_a`` free-convolved with ``mu_b`` on C+."""
    return _run(pair_route(mu_a, mu_b), z, tol)


# ------------------------------------------------------------- lower bound on |F|


class LowerBound(NamedTuple):
    value: float
    interval: tuple
    nu_mass: float
    n_min: int
    applies: bool


def as_free_id(mu: Measure) -> FreeID:
    """Express a semicircle or Marchenko-Pastur law by its (alpha, nu) pair."""
    if isinstance(mu, FreeID):
        return mu
    if isinstance(mu, Semicircle):
        return FreeID(mu.mean, dirac(0.0), mu.variance)
    if isinstance(mu, MarchenkoPastur):
        # lam z / (z - 1) = lam/2 + (lam/2) (1 + z) / (z - 1)
        return FreeID(mu.rate / 2, dirac(1.0), mu.rate / 2)
    raise TypeError(f"{type(mu).__name__} is not given by a Levy pair")


def f_lower_bound(mu: Measure, n: int = 1) -> LowerBound:
    """Constant ``C = sqrt(nu([a, b]) / 2)`` bounding ``|F|`` of ``mu_n`` from below.

    ``[a, b]`` is the hull of the support of ``nu`` (so it carries all of its
    mass); ``n_min`` is the first ``n`` with ``max(|a|, |b|) / sqrt(n) < C / 2``.
    """
    _check_n(n)
    fid = as_free_id(mu)
    if fid.levy_mass == 0:
        raise DegenerateMeasureError("Levy measure is zero: the law is a point mass")
    iv = support_interval(fid.levy_measure)
    if iv is None:
        raise DomainError("Levy measure support is not bounded")
    a, b = iv
    mass = fid.levy_mass * interval_mass(fid.levy_measure, a, b)
    C = math.sqrt(mass / 2.0)
    edge = max(abs(a), abs(b))
    # edge / sqrt(n) < C / 2  <=>  n * mass > 8 edge^2, compared exactly
    bound = 8 * Fraction(edge) ** 2 / Fraction(mass)
    n_min = max(1, math.floor(bound) + 1)
    return LowerBound(C, (a, b), mass, n_min, n >= n_min)


__all__ = [
    "LowerBound",
    "Route",
    "as_free_id",
    "clt_route",
    "f_clt",
    "f_free_convolve",
    "f_lower_bound",
    "free_convolve_phi",
    "gamma_n",
    "pair_route",
    "phi_clt",
]
