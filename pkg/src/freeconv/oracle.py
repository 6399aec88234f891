"""Combinatorial reference values: non-crossing partitions and free cumulants.

Everything here is computed by brute-force enumeration, independently of the
generating-function recursions used in :mod:`freeconv.measure`, so the two can
be used to check each other.
"""

from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .measure import Measure, MarchenkoPastur, moment

MAX_K = 10


def _restricted_growth(k):
    """All set partitions of ``{0..k-1}`` as restricted-growth strings."""
    labels = [0] * k

    def rec(i, top):
        if i == k:
            yield tuple(labels)
            return
        for b in range(top + 2):
            labels[i] = b
            yield from rec(i + 1, max(top, b))

    if k == 0:
        yield ()
        return
    labels[0] = 0
    yield from rec(1, 0)


def _is_noncrossing(labels):
    last = {b: i for i, b in enumerate(labels)}
    stack = []
    for i, b in enumerate(labels):
        if stack and stack[-1] == b:
            pass
        elif b in stack:
            return False
        else:
            stack.append(b)
        if last[b] == i:
            stack.pop()
    return True


@lru_cache(maxsize=None)
def noncrossing_partitions(k: int):
    """Non-crossing partitions of ``{1..k}`` as tuples of blocks (sorted tuples)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k > MAX_K:
        raise DomainError(f"brute-force enumeration is limited to k <= {MAX_K}")
    out = []
    for labels in _restricted_growth(k):
        if _is_noncrossing(labels):
            blocks = {}
            for i, b in enumerate(labels, start=1):
                blocks.setdefault(b, []).append(i)
            out.append(tuple(tuple(v) for v in blocks.values()))
    return tuple(out)


@lru_cache(maxsize=None)
def _block_shapes(k):
    """Multiset of block sizes of each non-crossing partition, with multiplicities."""
    return tuple(Counter(tuple(sorted(len(b) for b in p)) for p in noncrossing_partitions(k)).items())


def catalan(k: int) -> int:
    """Number of non-crossing partitions of a k-set, by enumeration."""
    return len(noncrossing_partitions(k))


def cumulants_to_moments(kappas):
    """Moments ``m_1..m_K`` from free cumulants ``kappa_1..kappa_K``: sum over NC(k) of block products."""
    kappas = list(kappas)
    out = []
    for k in range(1, len(kappas) + 1):
        total = 0.0
        for shape, mult in _block_shapes(k):
            total += mult * math.prod(kappas[s - 1] for s in shape)
        out.append(total)
    return out


def moments_to_cumulants(moments):
    """Inverse of :func:`cumulants_to_moments`, solving for the top cumulant at each order."""
    moments = list(moments)
    kappas = []
    for k in range(1, len(moments) + 1):
        # every partition except the single block uses only lower cumulants
        rest = 0.0
        for shape, mult in _block_shapes(k):
            if shape == (k,):
                continue
            rest += mult * math.prod(kappas[s - 1] for s in shape)
        kappas.append(moments[k - 1] - rest)
    return kappas


def measure_cumulants(mu: Measure, K: int):
    """Free cumulants ``kappa_1..kappa_K`` of ``mu`` from its moments."""
    return moments_to_cumulants([moment(mu, k) for k in range(1, K + 1)])


def clt_cumulants(mu, n: int, K: int | None = None):
    """Free cumulants of ``mu_n``: ``kappa_j(mu) n^(1 - j/2)``.

    ``mu`` is a measure (then ``K`` is required) or a sequence of cumulants.
    """
    if isinstance(mu, Measure):
        if K is None:
            raise DomainError("K is required when passing a measure")
        kappas = measure_cumulants(mu, K)
    else:
        kappas = list(mu)
    return [kj * n ** (1.0 - j / 2.0) for j, kj in enumerate(kappas, start=1)]


def clt_moments(mu: Measure, n: int, K: int):
    """Moments of ``mu_n`` through cumulant scaling."""
    return cumulants_to_moments(clt_cumulants(mu, n, K))


def reference_density(name: str, t, **params):
    """Closed-form densities: ``semicircle``, ``arcsine`` or ``arcsine-scaled`` (half-width ``a``), ``marchenko-pastur`` (``rate``)."""
    t = np.asarray(t, dtype=float)
    if name == "semicircle":
        var = params.get("variance", 1.0)
        return np.sqrt(np.maximum(4 * var - t * t, 0.0)) / (2 * math.pi * var)
    if name in ("arcsine", "arcsine-scaled"):
        a = params.get("a", 2.0)
        inside = np.abs(t) < a
        out = np.zeros_like(t)
        out[inside] = 1.0 / (math.pi * np.sqrt(a * a - t[inside] ** 2))
        return out
    if name == "marchenko-pastur":
        lam = params.get("rate", 1.0)
        lo, hi = MarchenkoPastur(lam).edges
        inside = (t > lo) & (t < hi)
        out = np.zeros_like(t)
        tt = t[inside]
        out[inside] = np.sqrt((hi - tt) * (tt - lo)) / (2 * math.pi * tt)
        return out
    raise DomainError(f"unknown reference density {name!r}")
