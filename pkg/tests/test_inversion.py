import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeconv.convolution import clt_route, f_lower_bound
from freeconv.errors import CurveQualityError, DomainError, TailMassError
from freeconv.inversion import (
    CdfCurve,
    boundary_values,
    cdf_curve,
    density_at,
    density_curve,
    kolmogorov,
    kolmogorov_distance,
    measure_cdf,
    pair_density_curve,
    predicted_atoms,
    semicircle_cdf,
)
from freeconv.measure import (
    Arcsine,
    FreeID,
    MarchenkoPastur,
    Semicircle,
    atomic,
    bernoulli,
    dirac,
    free_id_centered,
    standardize,
)
from freeconv.oracle import clt_moments, reference_density

B = bernoulli(1.0)
SC = Semicircle()


@pytest.fixture(scope="module")
def sc_curve():
    return density_curve(SC, 1, np.linspace(-2.5, 2.5, 401))


def arcsine2(t):
    return reference_density("arcsine-scaled", t, a=math.sqrt(2))


def test_density_at_examples():
    d, diag = density_at(SC, 1, 0.0)
    assert d == pytest.approx(1 / math.pi, abs=1e-9) and diag["status"] == "ok"
    d, _ = density_at(B, 2, 0.0)
    assert d == pytest.approx(1 / (math.pi * math.sqrt(2)), abs=1e-9)
    d, diag = density_at(SC, 1, 3.0)
    assert d == pytest.approx(0.0, abs=1e-12) and diag["status"] == "ok"


def test_stieltjes_consistency_for_semicircle():
    for t in np.linspace(-1.9, 1.9, 21):
        d, _ = density_at(SC, 1, t)
        assert d == pytest.approx(reference_density("semicircle", t), abs=1e-7)


def test_density_curve_semicircle(sc_curve):
    err = np.abs(sc_curve.values - reference_density("semicircle", sc_curve.grid))
    assert err.max() <= 1e-6
    assert not sc_curve.unresolved.any()
    # trapezoid rule against square-root edges on a 0.0125 spacing
    assert sc_curve.captured_mass == pytest.approx(1.0, abs=5e-4)


def test_density_curve_bernoulli_two_is_arcsine():
    grid = np.linspace(-1.35, 1.35, 271)
    curve = density_curve(B, 2, grid)
    inner = np.abs(grid) <= 1.3 + 1e-12
    assert np.max(np.abs(curve.values - arcsine2(grid))[inner]) <= 1e-6


def test_purely_atomic_law_has_no_density():
    with pytest.raises(CurveQualityError):
        density_curve(B, 1, np.linspace(-2, 2, 41))


def test_atom_detection():
    _, diag = density_at(B, 1, 1.0)
    assert diag["status"] == "atom" and diag["atom_mass"] == pytest.approx(0.5, abs=1e-6)
    mu = atomic([0.0, 1.0], [0.8, 0.2])
    (pos, mass), = predicted_atoms(standardize(mu)[0], 2)
    assert mass == pytest.approx(0.6)
    _, diag = density_at(mu, 2, pos)
    assert diag["status"] == "atom" and diag["atom_mass"] == pytest.approx(0.6, abs=1e-6)
    # an atom of weight below 1/2 is gone at n = 2
    assert predicted_atoms(B, 2) == []


def test_boundary_path_stays_in_upper_half_plane():
    bv = boundary_values(clt_route(B, 4), np.linspace(-2.2, 2.2, 23))
    assert bv.path_imag_ok
    assert np.all(bv.status == "ok")


def test_semicircle_boundary_modulus_is_one():
    # |F(x + i0)| = |x + i sqrt(4 - x^2)| / 2 = 1 on (-2, 2), and larger above the axis
    bv = boundary_values(clt_route(FreeID(0.0, dirac(0.0), 1.0), 1), np.linspace(-1.9, 1.9, 9))
    assert np.all(bv.min_abs_f >= 1 - 1e-9)
    assert np.all(bv.min_abs_f <= 1.01)


def test_lower_bound_along_boundary_paths():
    mu = standardize(free_id_centered(B))[0]
    lb = f_lower_bound(free_id_centered(B))
    for n in (lb.n_min, 32):
        curve = density_curve(mu, n, np.linspace(-4, 4, 81))
        assert np.all(curve.min_abs_f >= lb.value)


def test_cdf_of_semicircle(sc_curve):
    cdf = cdf_curve(sc_curve)
    assert cdf(0.0) == pytest.approx(0.5, abs=1e-6)
    assert cdf(-1.0) == pytest.approx(0.5 - math.sqrt(3) / (4 * math.pi) - 1 / 6, abs=1e-5)
    assert cdf.values[-1] + cdf.tail_mass_high == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(cdf.values) >= 0)
    assert cdf.values.min() >= 0 and cdf.values.max() <= 1
    assert cdf(-10.0) == 0.0 and cdf(10.0) == 1.0


def test_cdf_rejects_mass_deficit():
    curve = density_curve(SC, 1, np.linspace(-1.0, 1.0, 101))
    with pytest.raises(TailMassError):
        cdf_curve(curve)


def test_closed_form_cdfs():
    assert semicircle_cdf(-1.0) == pytest.approx(0.195501, abs=1e-6)
    assert measure_cdf(B, [-1.0, 0.0, 1.0]).tolist() == [0.5, 0.5, 1.0]
    assert measure_cdf(Arcsine(0.0, 2.0), 0.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        measure_cdf(MarchenkoPastur(1.0), 0.5)


def test_kolmogorov_examples(sc_curve):
    cdf = cdf_curve(sc_curve)
    assert kolmogorov_distance(cdf, cdf) == 0.0
    assert kolmogorov_distance(dirac(0.0)) == pytest.approx(0.5, abs=1e-12)
    k = kolmogorov(B, SC)
    assert k.distance == pytest.approx(0.5 - semicircle_cdf(-1.0), abs=1e-12)
    assert k.distance == pytest.approx(0.304499, abs=1e-6)
    assert k.witness == pytest.approx(-1.0)


def test_kolmogorov_of_semicircle_curve(sc_curve):
    k = kolmogorov(cdf_curve(sc_curve), SC)
    assert k.distance <= 2e-4
    assert k.tail_slack <= 2e-4


def test_csv_format(sc_curve):
    rows = list(csv.reader(io.StringIO(sc_curve.to_csv())))
    assert rows[0] == ["t", "value", "h_used", "residual"]
    assert len(rows) == 402
    mid = rows[201]
    assert float(mid[0]) == 0.0 and float(mid[1]) == pytest.approx(1 / math.pi, abs=1e-9)
    # full double precision on output
    assert len(mid[1].replace(".", "").lstrip("0")) >= 12
    rows = list(csv.reader(io.StringIO(cdf_curve(sc_curve).to_csv())))
    assert rows[0] == ["t", "value"]


def test_grid_validation():
    with pytest.raises(DomainError):
        density_curve(SC, 1, [0.0])
    with pytest.raises(DomainError):
        density_curve(SC, 1, [0.0, 1.0, 0.5])


def test_threaded_evaluation_is_bit_identical():
    grid = np.linspace(-2.3, 2.3, 97)
    a = density_curve(B, 4, grid, workers=1)
    b = density_curve(B, 4, grid, workers=6)
    assert a.to_csv() == b.to_csv()


def test_pair_density_arcsine():
    grid = np.linspace(-1.3, 1.3, 131)
    curve = pair_density_curve(B, B, grid, scale=1 / math.sqrt(2))
    assert np.max(np.abs(curve.values - arcsine2(grid))) <= 1e-6


@pytest.mark.parametrize("n", [4, 16])
@pytest.mark.parametrize("mu", [B, SC, MarchenkoPastur(1.0)], ids=["bernoulli", "semicircle", "mp1"])
def test_moments_match_partition_oracle(mu, n):
    seed = standardize(mu)[0]
    # the mean of standardized MP vanishes without symmetry, so it needs the finer grid
    points = 64001 if isinstance(mu, MarchenkoPastur) else 32001
    curve = density_curve(seed, n, np.linspace(-4, 4, points), workers=4)
    ref = clt_moments(seed, n, 6)
    for k in range(1, 7):
        m = curve.moment(k) + sum(w * p**k for p, w in curve.atoms)
        if abs(ref[k - 1]) < 1e-12:
            assert abs(m) <= 1e-6
        else:
            assert m == pytest.approx(ref[k - 1], rel=1e-4)


def test_moments_of_arcsine_iterate_in_angle_variable():
    # t = sqrt2 cos(theta) absorbs the inverse square-root edges; midpoint rule in theta
    N = 200
    theta = ((np.arange(N) + 0.5) * math.pi / N)[::-1]
    t = math.sqrt(2) * np.cos(theta)
    curve = density_curve(B, 2, t)
    weights = curve.values * math.sqrt(2) * np.sin(theta) * math.pi / N
    ref = clt_moments(B, 2, 6)
    for k in range(1, 7):
        assert float(np.sum(weights * t**k)) == pytest.approx(ref[k - 1], rel=1e-8, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2.8, 2.8))
def test_density_nonnegative_and_bounded(t):
    d, diag = density_at(B, 8, t)
    assert diag["status"] == "ok"
    assert 0.0 <= d <= 1.0
