import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from freeconv.errors import DegenerateMeasureError, SpecError
from freeconv.measure import (
    Affine,
    Arcsine,
    Atomic,
    FreeID,
    GridDensity,
    MarchenkoPastur,
    Mixture,
    Semicircle,
    atomic,
    bernoulli,
    dirac,
    free_id_centered,
    from_spec,
    is_dirac,
    is_free_id,
    load_measure,
    mean,
    moment,
    moment_vector,
    standardize,
    support_bound,
    to_spec,
    variance,
)


def test_bernoulli_second_moment():
    assert moment(bernoulli(1.0), 2) == 1.0


def test_semicircle_moments():
    sc = Semicircle()
    assert moment(sc, 4) == pytest.approx(2.0, abs=1e-14)
    assert moment(sc, 3) == 0.0
    assert [moment(sc, 2 * k) for k in range(1, 6)] == pytest.approx([1, 2, 5, 14, 42])


def test_semicircle_moments_by_quadrature():
    sc = Semicircle(0.5, 2.0)
    r = 2 * math.sqrt(2.0)
    dens = lambda t: math.sqrt(max(4 * 2.0 - (t - 0.5) ** 2, 0)) / (2 * math.pi * 2.0)
    for k in range(1, 7):
        val, _ = integrate.quad(lambda t: t**k * dens(t), 0.5 - r, 0.5 + r, epsabs=1e-12)
        assert moment(sc, k) == pytest.approx(val, rel=1e-9, abs=1e-12)


def test_arcsine_and_mp_moments_by_quadrature():
    arc = Arcsine(0.3, 1.5)
    for k in range(1, 6):
        val, _ = integrate.quad(lambda t: t**k / (math.pi * math.sqrt(1.5**2 - (t - 0.3) ** 2)), -1.2, 1.8,
                                epsabs=1e-12, limit=200)
        assert moment(arc, k) == pytest.approx(val, rel=1e-8)
    mp = MarchenkoPastur(2.0)
    a, b = mp.edges
    for k in range(1, 6):
        val, _ = integrate.quad(lambda t: t**k * math.sqrt((b - t) * (t - a)) / (2 * math.pi * t), a, b, epsabs=1e-12)
        assert moment(mp, k) == pytest.approx(val, rel=1e-9)


def test_mp_with_atom_at_zero():
    mp = MarchenkoPastur(0.5)
    # mean = rate, variance = rate
    assert mean(mp) == pytest.approx(0.5)
    assert variance(mp) == pytest.approx(0.5)


def test_grid_density_exact_moments():
    t = np.linspace(-1, 1, 11)
    f = 0.75 * (1 - t**2)
    g = GridDensity.from_samples(t, f)
    for k in range(0, 5):
        val = np.sum([integrate.quad(lambda s: s**k * np.interp(s, g.t, g.f), a, b)[0]
                      for a, b in zip(t[:-1], t[1:])])
        assert g.moment(k) == pytest.approx(val, abs=1e-13)


def test_grid_density_rejects_bad_input():
    with pytest.raises(SpecError):
        GridDensity((0.0, 1.0, 0.5), (1.0, 1.0, 1.0))
    with pytest.raises(SpecError):
        GridDensity((0.0, 1.0), (-1.0, 3.0))


def test_atomic_mass_validation():
    with pytest.raises(SpecError):
        Atomic(((0.0, 0.5), (1.0, 0.4)))
    with pytest.raises(SpecError):
        Atomic(())


def test_standardize_atoms():
    mu = atomic([-2.0, 2.0], [0.5, 0.5])
    nu, shift, scale = standardize(mu)
    assert shift == 0.0
    assert scale == 0.5
    assert sorted(nu.atoms) == [(-1.0, 0.5), (1.0, 0.5)]


def test_standardize_identity_and_mp():
    sc = Semicircle()
    nu, shift, scale = standardize(sc)
    assert nu is sc and (shift, scale) == (0.0, 1.0)
    nu, shift, scale = standardize(MarchenkoPastur(1.0))
    assert shift == pytest.approx(-1.0) and scale == pytest.approx(1.0)
    assert mean(nu) == pytest.approx(0.0, abs=1e-12)
    assert variance(nu) == pytest.approx(1.0, abs=1e-12)


def test_standardize_dirac_fails():
    with pytest.raises(DegenerateMeasureError):
        standardize(dirac(3.0))


@pytest.mark.parametrize(
    "mu",
    [
        bernoulli(1.0),
        atomic([0.0, 1.0, 5.0], [0.2, 0.3, 0.5]),
        Semicircle(1.0, 4.0),
        Arcsine(2.0, 0.5),
        MarchenkoPastur(1.0),
        MarchenkoPastur(0.3),
        free_id_centered(bernoulli(1.0)),
        FreeID(0.7, atomic([0.0, 2.0], [0.5, 0.5]), 0.4),
        Mixture(((0.3, Semicircle()), (0.7, bernoulli(2.0)))),
    ],
)
def test_standardize_moments_and_idempotence(mu):
    nu, _, _ = standardize(mu)
    assert mean(nu) == pytest.approx(0.0, abs=1e-10)
    assert variance(nu) == pytest.approx(1.0, abs=1e-10)
    again, shift, scale = standardize(nu)
    assert abs(shift) <= 1e-10 and abs(scale - 1) <= 1e-10
    assert is_free_id(nu) == is_free_id(mu)


def test_free_id_standardization_is_exact_per_cumulant():
    mu = free_id_centered(bernoulli(1.0))
    assert variance(mu) == pytest.approx(2.0)
    nu, _, scale = standardize(mu)
    assert isinstance(nu, FreeID)
    assert nu.levy_mass == pytest.approx(2 / 3)
    assert sorted(p for p, _ in nu.levy_measure.atoms) == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)])
    # free cumulants scale by scale^j
    k_mu = mu.free_cumulants(6)
    k_nu = nu.free_cumulants(6)
    for j in range(2, 7):
        assert k_nu[j - 1] == pytest.approx(k_mu[j - 1] * scale**j, abs=1e-12)


def test_support_bound():
    assert support_bound(bernoulli(1.0)) == 1
    assert support_bound(Semicircle()) == 2
    assert support_bound(free_id_centered(bernoulli(1.0))) is None


def test_mixture_moments_are_weighted():
    a, b = Semicircle(1.0, 2.0), bernoulli(3.0)
    mix = Mixture(((0.25, a), (0.75, b)))
    for k in range(1, 7):
        assert moment(mix, k) == pytest.approx(0.25 * moment(a, k) + 0.75 * moment(b, k), rel=1e-12)


def test_affine_moments():
    base = Arcsine(0.0, 2.0)
    mu = Affine(base, 0.5, 1.0)
    assert mean(mu) == pytest.approx(1.0)
    assert variance(mu) == pytest.approx(0.25 * variance(base))


def test_moment_vector_indexing():
    mv = moment_vector(Semicircle(), 6)
    assert mv[2] == 1.0 and mv[4] == pytest.approx(2.0) and len(mv) == 6


def test_is_dirac():
    assert is_dirac(dirac(1.0))
    assert is_dirac(FreeID(0.3, bernoulli(1.0), 0.0))
    assert not is_dirac(bernoulli(1.0))


SPECS = [
    {"type": "atomic", "atoms": [[-1, 0.5], [1, 0.5]]},
    {"type": "semicircle", "mean": 0.5, "variance": 2},
    {"type": "arcsine", "center": 0, "half_width": 2},
    {"type": "mp", "rate": 1},
    {"type": "free_id", "alpha": 0.25, "levy_measure": {"type": "atomic", "atoms": [[0, 1]]}, "levy_mass": 0.5},
    {"type": "mixture", "components": [{"weight": 0.5, "measure": {"type": "semicircle"}},
                                       {"weight": 0.5, "measure": {"type": "mp", "rate": 2}}]},
    {"type": "grid", "grid": [-1, 0, 1], "values": [0, 1, 0]},
    {"type": "affine", "base": {"type": "mp", "rate": 1}, "scale": 1, "shift": -1},
]


@pytest.mark.parametrize("spec", SPECS)
def test_spec_round_trip(spec):
    mu = from_spec(spec)
    again = from_spec(json.loads(json.dumps(to_spec(mu))))
    assert again == mu


def test_spec_center_alpha():
    mu = from_spec({"type": "free_id", "alpha": "center", "levy_measure": {"type": "atomic", "atoms": [[2, 1]]}})
    assert mean(mu) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "spec, field",
    [
        ({"type": "atomic", "atoms": [[0, 0.5], [1, 0.2]]}, "atoms"),
        ({"type": "atomic", "atoms": [[0, 1], [1]]}, "atoms[1]"),
        ({"type": "mixture", "components": [{"weight": 1, "measure": {"type": "atomic", "atoms": []}}]},
         "components[0].measure.atoms"),
        ({"type": "semicircle", "variance": "x"}, "variance"),
        ({"type": "banana"}, "type"),
        ({"type": "free_id", "alpha": 0}, "levy_measure"),
    ],
)
def test_spec_errors_point_at_field(spec, field):
    with pytest.raises(SpecError) as info:
        from_spec(spec)
    assert info.value.field == field


def test_spec_renormalizes_tiny_deviation():
    mu = from_spec({"type": "atomic", "atoms": [[0, 0.5], [1, 0.5 + 5e-10]]})
    assert math.fsum(w for _, w in mu.atoms) == pytest.approx(1.0, abs=1e-15)


def test_load_measure_sources(tmp_path):
    assert load_measure("bernoulli") == bernoulli(1.0)
    assert load_measure('{"type": "semicircle"}') == Semicircle()
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"type": "mp", "rate": 1}))
    assert load_measure(str(p)) == MarchenkoPastur(1.0)
    with pytest.raises(SpecError):
        load_measure("no-such-file.json")
    with pytest.raises(SpecError):
        load_measure("{not json")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.05, 1.0)), min_size=2, max_size=6))
def test_total_mass_and_standardization(pairs):
    pos = [p for p, _ in pairs]
    if max(pos) - min(pos) < 1e-3:
        return
    w = np.array([q for _, q in pairs])
    mu = atomic(pos, list(w / w.sum()))
    assert mu.moment(0) == pytest.approx(1.0, abs=1e-12)
    nu, shift, scale = standardize(mu)
    assert mean(nu) == pytest.approx(0.0, abs=1e-9)
    assert variance(nu) == pytest.approx(1.0, abs=1e-9)
