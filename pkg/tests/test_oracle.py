import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeconv.errors import DomainError
from freeconv.measure import MarchenkoPastur, Semicircle, bernoulli, dirac, moment, standardize
from freeconv.oracle import (
    catalan,
    clt_cumulants,
    clt_moments,
    cumulants_to_moments,
    measure_cumulants,
    moments_to_cumulants,
    noncrossing_partitions,
    reference_density,
)

CATALAN = [1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796]


def test_partition_counts_are_catalan():
    assert [catalan(k) for k in range(1, 11)] == CATALAN
    assert len(noncrossing_partitions(1)) == 1
    assert len(noncrossing_partitions(3)) == 5
    assert len(noncrossing_partitions(4)) == 14


def test_partitions_cover_and_do_not_cross():
    for p in noncrossing_partitions(6):
        assert sorted(i for b in p for i in b) == list(range(1, 7))
        for b1 in p:
            for b2 in p:
                if b1 is b2:
                    continue
                # a < c < b < d with a, b in one block and c, d in another is a crossing
                assert not any(a < c < b < d for a in b1 for b in b1 for c in b2 for d in b2)


def test_crossing_partition_excluded():
    assert ((1, 3), (2, 4)) not in noncrossing_partitions(4)
    assert ((1, 4), (2, 3)) in noncrossing_partitions(4)


def test_size_limit():
    with pytest.raises(DomainError):
        noncrossing_partitions(11)


def test_semicircle_cumulants_give_catalan_moments():
    m = cumulants_to_moments([0, 1, 0, 0, 0, 0])
    assert m == [0, 1, 0, 2, 0, 5]


def test_dirac_cumulants():
    a = 1.7
    m = cumulants_to_moments([a, 0, 0, 0, 0])
    assert m == pytest.approx([a**k for k in range(1, 6)], rel=1e-14)


def test_bernoulli_cumulants():
    kappas = measure_cumulants(bernoulli(1.0), 6)
    assert kappas == pytest.approx([0, 1, 0, -1, 0, 2], abs=1e-12)
    assert cumulants_to_moments(kappas) == pytest.approx([0, 1, 0, 1, 0, 1], abs=1e-12)


def test_clt_cumulants_scaling():
    k = clt_cumulants(bernoulli(1.0), 4, 6)
    assert k[3] == pytest.approx(-0.25)
    assert k[1] == pytest.approx(1.0)
    assert clt_cumulants(Semicircle(), 37, 6) == pytest.approx([0, 1, 0, 0, 0, 0], abs=1e-12)
    with pytest.raises(DomainError):
        clt_cumulants(bernoulli(1.0), 4)


def test_clt_higher_cumulants_decay_monotonically():
    base = measure_cumulants(standardize(MarchenkoPastur(1.0))[0], 6)
    seq = [clt_cumulants(base, n) for n in (1, 2, 4, 16, 64)]
    for j in range(2, 6):
        mags = [abs(s[j]) for s in seq]
        assert all(b < a for a, b in zip(mags, mags[1:]))


def test_mp_cumulants_are_all_equal_to_rate():
    lam = 1.5
    assert measure_cumulants(MarchenkoPastur(lam), 6) == pytest.approx([lam] * 6, rel=1e-10)


def test_semicircle_moments_agree_with_measure_module():
    mv = [moment(Semicircle(), k) for k in range(1, 9)]
    assert cumulants_to_moments([0, 1, 0, 0, 0, 0, 0, 0]) == pytest.approx(mv, abs=1e-12)


def test_clt_moments_of_dirac_free_seed():
    # n = 1 reproduces the seed
    mu = standardize(MarchenkoPastur(1.0))[0]
    assert clt_moments(mu, 1, 6) == pytest.approx([moment(mu, k) for k in range(1, 7)], abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_moment_cumulant_round_trip(kappas):
    back = moments_to_cumulants(cumulants_to_moments(kappas))
    assert np.allclose(back, kappas, atol=1e-10, rtol=0)


def test_reference_densities():
    assert reference_density("semicircle", 0.0) == pytest.approx(1 / math.pi)
    assert reference_density("semicircle", [2.0, -2.0]).tolist() == [0.0, 0.0]
    assert reference_density("arcsine-scaled", 0.0, a=math.sqrt(2)) == pytest.approx(1 / (math.pi * math.sqrt(2)))
    assert reference_density("marchenko-pastur", 1.0, rate=1.0) == pytest.approx(math.sqrt(3) / (2 * math.pi))
    with pytest.raises(DomainError):
        reference_density("cauchy", 0.0)
