"""Probability measures on the real line.

Every measure is an immutable (frozen) dataclass. The variants are

* :class:`Atomic` -- finitely many point masses,
* :class:`GridDensity` -- a piecewise-linear density on breakpoints,
* :class:`Semicircle`, :class:`Arcsine`, :class:`MarchenkoPastur` -- closed forms,
* :class:`FreeID` -- a freely infinitely divisible law given by its
  Levy-Khintchine pair ``(alpha, nu)``,
* :class:`Mixture` -- convex combination of other measures,
* :class:`Affine` -- the law of ``scale * X + shift`` for ``X ~ base``.

Moments are computed exactly (atom sums, closed forms, exact integration of
the piecewise-linear interpolant). Access to Cauchy-type transforms lives in
:mod:`freeconv.transform`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DegenerateMeasureError, SpecError, UnsupportedMomentError

MASS_TOL = 1e-12
# Specs whose masses are off by more than this are rejected rather than renormalized.
SPEC_MASS_TOL = 1e-9
STANDARD_TOL = 1e-13


class Measure:
    """Common base of all measure variants."""

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def total_mass(self) -> float:
        return 1.0


def _check_mass(total, what):
    if abs(total - 1.0) > MASS_TOL:
        raise SpecError(f"{what} must sum to 1 (got {total!r})")


@dataclass(frozen=True)
class Atomic(Measure):
    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(p), float(w)) for p, w in self.atoms)
        if not atoms:
            raise SpecError("at least one atom is required", "atoms")
        for i, (p, w) in enumerate(atoms):
            if not (math.isfinite(p) and math.isfinite(w)) or w <= 0:
                raise SpecError("atom weights must be finite and > 0", f"atoms[{i}]")
        _check_mass(math.fsum(w for _, w in atoms), "atom weights")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def positions(self):
        return np.array([p for p, _ in self.atoms])

    @cached_property
    def weights(self):
        return np.array([w for _, w in self.atoms])

    def moment(self, k):
        return math.fsum(w * p**k for p, w in self.atoms)


@dataclass(frozen=True)
class GridDensity(Measure):
    """Density given by samples on strictly increasing breakpoints, linear in between."""

    grid: tuple
    values: tuple

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        values = tuple(float(v) for v in self.values)
        if len(grid) < 2 or len(grid) != len(values):
            raise SpecError("grid and values need equal length >= 2", "grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise SpecError("breakpoints must be strictly increasing", "grid")
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise SpecError("density values must be finite and >= 0", "values")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        _check_mass(self._integral(0), "grid density")

    @classmethod
    def from_samples(cls, grid, values):
        """Build a density from unnormalized samples."""
        t = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float)
        mass = float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))
        if mass <= 0:
            raise SpecError("density samples carry no mass", "values")
        return cls(tuple(t), tuple(v / mass))

    @cached_property
    def t(self):
        return np.array(self.grid)

    @cached_property
    def f(self):
        return np.array(self.values)

    def _integral(self, k):
        # exact integral of t^k times the piecewise-linear interpolant
        t0, t1 = self.t[:-1], self.t[1:]
        f0, f1 = self.f[:-1], self.f[1:]
        s = (f1 - f0) / (t1 - t0)
        c = f0 - s * t0
        terms = c * (t1 ** (k + 1) - t0 ** (k + 1)) / (k + 1) + s * (t1 ** (k + 2) - t0 ** (k + 2)) / (k + 2)
        return math.fsum(terms)

    def moment(self, k):
        return self._integral(k)


@dataclass(frozen=True)
class Semicircle(Measure):
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise SpecError("semicircle variance must be > 0", "variance")

    def moment(self, k):
        r = math.sqrt(self.variance)
        central = [catalan(j // 2) * r**j if j % 2 == 0 else 0.0 for j in range(k + 1)]
        return _shift_moments(central, self.mean, k)


@dataclass(frozen=True)
class Arcsine(Measure):
    """Arcsine law with density ``1 / (pi sqrt(w^2 - (t - c)^2))`` on ``(c - w, c + w)``."""

    center: float = 0.0
    half_width: float = 2.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise SpecError("arcsine half_width must be > 0", "half_width")

    def moment(self, k):
        h = self.half_width / 2
        central = [math.comb(j, j // 2) * h**j if j % 2 == 0 else 0.0 for j in range(k + 1)]
        return _shift_moments(central, self.center, k)


@dataclass(frozen=True)
class MarchenkoPastur(Measure):
    """Free Poisson law with the given rate and unit jump size.

    Mean and variance both equal ``rate``; for ``rate < 1`` there is an atom of
    mass ``1 - rate`` at the origin.
    """

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise SpecError("Marchenko-Pastur rate must be > 0", "rate")

    @property
    def edges(self):
        r = math.sqrt(self.rate)
        return (1 - r) ** 2, (1 + r) ** 2

    def moment(self, k):
        if k == 0:
            return 1.0
        # Narayana polynomials
        return math.fsum(math.comb(k, j) * math.comb(k, j - 1) / k * self.rate**j for j in range(1, k + 1))


@dataclass(frozen=True)
class FreeID(Measure):
    """Freely infinitely divisible law with Voiculescu transform

        phi(z) = alpha + integral (1 + t z) / (z - t) dnu(t).

    ``nu`` is ``levy_mass`` times the probability measure ``levy_measure``.
    """

    alpha: float
    levy_measure: Measure
    levy_mass: float = 1.0

    def __post_init__(self):
        if not (self.levy_mass >= 0 and math.isfinite(self.levy_mass)):
            raise SpecError("levy_mass must be finite and >= 0", "levy_mass")
        if not isinstance(self.levy_measure, Measure):
            raise SpecError("levy_measure must be a measure", "levy_measure")

    def free_cumulants(self, K):
        """Free cumulants kappa_1..kappa_K read off the Levy-Khintchine pair."""
        nu = self.levy_measure
        m = [1.0] + [nu.moment(j) for j in range(1, K + 1)]
        kappas = [self.alpha + self.levy_mass * m[1]]
        for j in range(2, K + 1):
            kappas.append(self.levy_mass * (m[j - 2] + m[j]))
        return kappas

    def moment(self, k):
        if k == 0:
            return 1.0
        return free_moments_from_cumulants(self.free_cumulants(k))[k - 1]


@dataclass(frozen=True)
class Mixture(Measure):
    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), m) for w, m in self.components)
        if not comps:
            raise SpecError("mixture needs at least one component", "components")
        for i, (w, m) in enumerate(comps):
            if not w > 0 or not isinstance(m, Measure):
                raise SpecError("component weight must be > 0 with a measure", f"components[{i}]")
        _check_mass(math.fsum(w for w, _ in comps), "mixture weights")
        object.__setattr__(self, "components", comps)

    def moment(self, k):
        return math.fsum(w * m.moment(k) for w, m in self.components)


@dataclass(frozen=True)
class Affine(Measure):
    """Law of ``scale * X + shift`` where ``X ~ base``."""

    base: Measure
    scale: float
    shift: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise SpecError("affine scale must be finite and > 0", "scale")

    def moment(self, k):
        return math.fsum(
            math.comb(k, j) * self.scale**j * self.shift ** (k - j) * self.base.moment(j) for j in range(k + 1)
        )


@dataclass(frozen=True)
class MomentVector:
    """Raw moments m_1..m_K."""

    moments: tuple

    def __post_init__(self):
        m = tuple(float(x) for x in self.moments)
        if len(m) >= 2 and m[1] - m[0] ** 2 < -1e-12 * max(1.0, abs(m[1])):
            raise ValueError("moment vector has negative variance")
        object.__setattr__(self, "moments", m)

    def __getitem__(self, k):
        """1-based access: ``mv[k]`` is m_k."""
        return self.moments[k - 1]

    def __len__(self):
        return len(self.moments)


# ---------------------------------------------------------------- helpers


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def _shift_moments(central, mean, k):
    return math.fsum(math.comb(k, j) * central[j] * mean ** (k - j) for j in range(k + 1))


def free_moments_from_cumulants(kappas):
    """Moments m_1..m_K from free cumulants via ``M(z) = 1 + sum_s kappa_s z^s M(z)^s``."""
    K = len(kappas)
    m = [1.0] + [0.0] * K
    for n in range(1, K + 1):
        series = np.array(m[:n])  # m_0 .. m_{n-1}
        power = np.array([1.0])
        total = 0.0
        for s in range(1, n + 1):
            power = np.convolve(power, series)[:n]
            deg = n - s
            if deg < len(power):
                total += kappas[s - 1] * power[deg]
        m[n] = total
    return m[1:]


def dirac(a=0.0):
    return Atomic(((a, 1.0),))


def bernoulli(a=1.0):
    """Symmetric two-point law ``(delta_{-a} + delta_a) / 2``."""
    return Atomic(((-a, 0.5), (a, 0.5)))


def atomic(positions, weights=None):
    """Atomic measure with weights normalized to sum to one."""
    positions = [float(p) for p in positions]
    if weights is None:
        weights = [1.0] * len(positions)
    total = math.fsum(weights)
    return Atomic(tuple((p, w / total) for p, w in zip(positions, weights)))


def free_id_centered(levy_measure, levy_mass=1.0):
    """FreeID law with ``alpha`` solved so that the mean is zero."""
    alpha = 0.0 - levy_mass * levy_measure.moment(1)
    return FreeID(alpha, levy_measure, levy_mass)


def moment(mu: Measure, k: int) -> float:
    """k-th raw moment of ``mu``."""
    if int(k) != k or k < 0:
        raise UnsupportedMomentError(f"moment order must be a nonnegative integer, got {k!r}")
    k = int(k)
    if k == 0:
        return mu.total_mass()
    return float(mu.moment(k))


def moment_vector(mu, K):
    return MomentVector(tuple(moment(mu, k) for k in range(1, K + 1)))


def mean(mu):
    return moment(mu, 1)


def variance(mu):
    m1 = moment(mu, 1)
    return max(moment(mu, 2) - m1 * m1, 0.0)


def is_free_id(mu):
    """True for variants whose Voiculescu transform is known on all of C+."""
    if isinstance(mu, (FreeID, Semicircle, MarchenkoPastur)):
        return True
    if isinstance(mu, Affine):
        return is_free_id(mu.base)
    return False


def is_dirac(mu):
    if isinstance(mu, Atomic):
        return len({p for p, _ in mu.atoms}) == 1
    if isinstance(mu, Affine):
        return is_dirac(mu.base)
    if isinstance(mu, FreeID):
        return mu.levy_mass == 0
    if isinstance(mu, Mixture):
        return all(is_dirac(m) for _, m in mu.components) and len(
            {round(c.moment(1), 15) for _, c in mu.components}
        ) == 1
    return False


# ---------------------------------------------------------------- support


def support_interval(mu):
    """Smallest known closed interval containing the support, or ``None``."""
    if isinstance(mu, Atomic):
        return float(mu.positions.min()), float(mu.positions.max())
    if isinstance(mu, GridDensity):
        seg = (mu.f[:-1] + mu.f[1:]) > 0
        idx = np.nonzero(seg)[0]
        return float(mu.t[idx[0]]), float(mu.t[idx[-1] + 1])
    if isinstance(mu, Semicircle):
        r = 2 * math.sqrt(mu.variance)
        return mu.mean - r, mu.mean + r
    if isinstance(mu, Arcsine):
        return mu.center - mu.half_width, mu.center + mu.half_width
    if isinstance(mu, MarchenkoPastur):
        a, b = mu.edges
        return (0.0 if mu.rate < 1 else a), b
    if isinstance(mu, Mixture):
        parts = [support_interval(m) for _, m in mu.components]
        if any(p is None for p in parts):
            return None
        return min(p[0] for p in parts), max(p[1] for p in parts)
    if isinstance(mu, Affine):
        base = support_interval(mu.base)
        if base is None:
            return None
        return mu.scale * base[0] + mu.shift, mu.scale * base[1] + mu.shift
    return None


def support_bound(mu: Measure):
    """Smallest known ``L`` with support in ``[-L, L]``; ``None`` if unknown or unbounded."""
    iv = support_interval(mu)
    if iv is None:
        return None
    return max(abs(iv[0]), abs(iv[1]))


def interval_mass(mu, a, b):
    """``mu([a, b])`` for variants where it is cheap to compute exactly."""
    if isinstance(mu, Atomic):
        return math.fsum(w for p, w in mu.atoms if a <= p <= b)
    if isinstance(mu, Mixture):
        return math.fsum(w * interval_mass(m, a, b) for w, m in mu.components)
    iv = support_interval(mu)
    if iv is not None and a <= iv[0] and iv[1] <= b:
        return 1.0
    raise UnsupportedMomentError(f"interval mass not available for {type(mu).__name__}")


# ---------------------------------------------------------------- affine maps


def affine(mu: Measure, scale: float, shift: float = 0.0) -> Measure:
    """Law of ``scale * X + shift``, kept in closed form whenever possible."""
    if scale == 1.0 and shift == 0.0:
        return mu
    if isinstance(mu, Atomic):
        return Atomic(tuple((scale * p + shift, w) for p, w in mu.atoms))
    if isinstance(mu, GridDensity):
        return GridDensity(tuple(scale * mu.t + shift), tuple(mu.f / scale))
    if isinstance(mu, Semicircle):
        return Semicircle(scale * mu.mean + shift, scale * scale * mu.variance)
    if isinstance(mu, Arcsine):
        return Arcsine(scale * mu.center + shift, scale * mu.half_width)
    if isinstance(mu, Mixture):
        return Mixture(tuple((w, affine(m, scale, shift)) for w, m in mu.components))
    if isinstance(mu, Affine):
        return _affine_or_identity(mu.base, scale * mu.scale, scale * mu.shift + shift)
    if isinstance(mu, FreeID) and isinstance(mu.levy_measure, Atomic):
        return _affine_free_id(mu, scale, shift)
    return Affine(mu, scale, shift)


def _affine_or_identity(base, scale, shift):
    if abs(scale - 1.0) <= 1e-15 and abs(shift) <= 1e-15:
        return base
    return Affine(base, scale, shift)


def _affine_free_id(mu, s, m):
    # phi_{sX+m}(z) = s phi_X(z/s) + m; an atom of nu at t moves to t' = s t and
    # is reweighted by (s^2 + t'^2) / (1 + t'^2), the remainder goes into alpha.
    new_atoms = []
    alpha = s * mu.alpha + m
    for t, w in mu.levy_measure.atoms:
        w = w * mu.levy_mass
        tp = s * t
        new_atoms.append((tp, w * (s * s + tp * tp) / (1 + tp * tp)))
        alpha += w * tp * (1 - s * s) / (1 + tp * tp)
    mass = math.fsum(w for _, w in new_atoms)
    if mass == 0.0:
        return FreeID(alpha, mu.levy_measure, 0.0)
    levy = Atomic(tuple((t, w / mass) for t, w in new_atoms))
    return FreeID(alpha, levy, mass)


def standardize(mu: Measure):
    """Return ``(nu, shift, scale)`` with ``nu`` the law of ``scale * X + shift``.

    ``nu`` has mean 0 and variance 1. A measure that is already standardized
    comes back unchanged with ``shift = 0`` and ``scale = 1``.
    """
    m1 = mean(mu)
    var = variance(mu)
    if var <= 1e-14 * max(1.0, m1 * m1) or is_dirac(mu):
        raise DegenerateMeasureError("cannot standardize a point mass (zero variance)")
    sd = math.sqrt(var)
    if abs(m1) <= STANDARD_TOL and abs(var - 1.0) <= STANDARD_TOL:
        return mu, 0.0, 1.0
    scale = 1.0 / sd
    shift = -m1 / sd
    return affine(mu, scale, shift), shift, scale


# ---------------------------------------------------------------- specs


def to_spec(mu: Measure) -> dict:
    """JSON-compatible dict describing ``mu``."""
    if isinstance(mu, Atomic):
        return {"type": "atomic", "atoms": [[p, w] for p, w in mu.atoms]}
    if isinstance(mu, GridDensity):
        return {"type": "grid", "grid": list(mu.grid), "values": list(mu.values)}
    if isinstance(mu, Semicircle):
        return {"type": "semicircle", "mean": mu.mean, "variance": mu.variance}
    if isinstance(mu, Arcsine):
        return {"type": "arcsine", "center": mu.center, "half_width": mu.half_width}
    if isinstance(mu, MarchenkoPastur):
        return {"type": "mp", "rate": mu.rate}
    if isinstance(mu, FreeID):
        return {
            "type": "free_id",
            "alpha": mu.alpha,
            "levy_measure": to_spec(mu.levy_measure),
            "levy_mass": mu.levy_mass,
        }
    if isinstance(mu, Mixture):
        return {"type": "mixture", "components": [{"weight": w, "measure": to_spec(m)} for w, m in mu.components]}
    if isinstance(mu, Affine):
        return {"type": "affine", "base": to_spec(mu.base), "scale": mu.scale, "shift": mu.shift}
    raise TypeError(f"unknown measure type {type(mu).__name__}")


def _num(obj, key, path, default=None):
    if key not in obj:
        if default is None:
            raise SpecError("missing required field", _join(path, key))
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SpecError(f"expected a number, got {val!r}", _join(path, key))
    return float(val)


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _renormalize(weights, path):
    total = math.fsum(weights)
    if abs(total - 1.0) > SPEC_MASS_TOL:
        raise SpecError(f"weights sum to {total!r}, expected 1", path)
    if abs(total - 1.0) > MASS_TOL:
        weights = [w / total for w in weights]
    return weights


def from_spec(obj, path="") -> Measure:
    """Parse a measure spec (the dict form of the JSON document)."""
    if not isinstance(obj, dict):
        raise SpecError("measure spec must be an object", path or None)
    kind = obj.get("type")
    try:
        if kind == "atomic":
            raw = obj.get("atoms")
            if not isinstance(raw, list) or not raw:
                raise SpecError("expected a nonempty list of [position, weight]", _join(path, "atoms"))
            pos, wts = [], []
            for i, a in enumerate(raw):
                if not (isinstance(a, (list, tuple)) and len(a) == 2):
                    raise SpecError("expected [position, weight]", f"{_join(path, 'atoms')}[{i}]")
                pos.append(float(a[0]))
                wts.append(float(a[1]))
                if wts[-1] <= 0:
                    raise SpecError("weight must be > 0", f"{_join(path, 'atoms')}[{i}]")
            wts = _renormalize(wts, _join(path, "atoms"))
            return Atomic(tuple(zip(pos, wts)))
        if kind == "grid":
            grid, values = obj.get("grid"), obj.get("values")
            if not isinstance(grid, list) or not isinstance(values, list):
                raise SpecError("grid and values must be lists", _join(path, "grid"))
            if obj.get("normalize", False):
                return GridDensity.from_samples(grid, values)
            mu_t = np.asarray(grid, float)
            v = np.asarray(values, float)
            if len(mu_t) != len(v) or len(v) < 2:
                raise SpecError("grid and values need equal length >= 2", _join(path, "values"))
            mass = float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(mu_t)))
            if abs(mass - 1.0) > SPEC_MASS_TOL:
                raise SpecError(f"density integrates to {mass!r}; pass normalize=true", _join(path, "values"))
            if abs(mass - 1.0) > MASS_TOL:
                values = list(v / mass)
            return GridDensity(tuple(grid), tuple(values))
        if kind == "semicircle":
            return Semicircle(_num(obj, "mean", path, 0.0), _num(obj, "variance", path, 1.0))
        if kind == "arcsine":
            return Arcsine(_num(obj, "center", path, 0.0), _num(obj, "half_width", path))
        if kind == "mp":
            return MarchenkoPastur(_num(obj, "rate", path, 1.0))
        if kind == "free_id":
            if "levy_measure" not in obj:
                raise SpecError("missing required field", _join(path, "levy_measure"))
            levy = from_spec(obj["levy_measure"], _join(path, "levy_measure"))
            mass = _num(obj, "levy_mass", path, 1.0)
            if obj.get("alpha") == "center":
                return free_id_centered(levy, mass)
            return FreeID(_num(obj, "alpha", path), levy, mass)
        if kind == "mixture":
            raw = obj.get("components")
            if not isinstance(raw, list) or not raw:
                raise SpecError("expected a nonempty list", _join(path, "components"))
            wts, comps = [], []
            for i, c in enumerate(raw):
                cpath = f"{_join(path, 'components')}[{i}]"
                if not isinstance(c, dict):
                    raise SpecError("expected {weight, measure}", cpath)
                wts.append(_num(c, "weight", cpath))
                comps.append(from_spec(c.get("measure"), _join(cpath, "measure")))
            wts = _renormalize(wts, _join(path, "components"))
            return Mixture(tuple(zip(wts, comps)))
        if kind == "affine":
            base = from_spec(obj.get("base"), _join(path, "base"))
            return Affine(base, _num(obj, "scale", path), _num(obj, "shift", path, 0.0))
    except SpecError as exc:
        if exc.field is None and path:
            raise SpecError(str(exc), path) from None
        raise
    raise SpecError(f"unknown measure type {kind!r}", _join(path, "type"))


BUILTIN = {
    "semicircle": lambda: Semicircle(0.0, 1.0),
    "bernoulli": bernoulli,
    "arcsine": lambda: Arcsine(0.0, 2.0),
    "mp": lambda: MarchenkoPastur(1.0),
    "mp1": lambda: MarchenkoPastur(1.0),
    "dirac": dirac,
    "free_id_pm1": lambda: free_id_centered(bernoulli(1.0)),
}


def load_measure(source: str) -> Measure:
    """Resolve a builtin name, an inline JSON document or a path to a JSON file."""
    if source in BUILTIN:
        return BUILTIN[source]()
    text = source.strip()
    if not text.startswith("{"):
        p = Path(source)
        if not p.is_file():
            raise SpecError(f"not a builtin measure name or readable file: {source!r}")
        text = p.read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from None
    return from_spec(obj)


def dumps_spec(mu: Measure) -> str:
    return json.dumps(to_spec(mu), indent=2, sort_keys=True)
