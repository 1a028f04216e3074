import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperdense.densities import (
    DensityValue,
    density,
    normalize_triple,
    rho01_distant_puncture,
    rho01_lower_bound,
    rho01_quadrature,
    rho01_upper_reciprocal_bound,
    rho_disc,
    rho_pair,
    rho_triple,
    rho_triple_fast,
    three_point_density,
    triple_geometry,
)
from hyperdense.errors import DomainError
from hyperdense.geometry import Disc, Polyline, PuncturedSphere, SampledDomain

OMEGA = cmath.exp(2j * math.pi / 3)
BRUTE_FORCE_0_1_M1_I = 7.054852427224328
# rho_{0,1,c}(-1) at |c| = 1e4, 1e6, 1e8 (c on the negative axis), extrapolated to 1/|c| = 0
RHO01_AT_M1_DISTANT = 0.11423664526111599
# max of rho_{a,b,c}(0) over triples of 120 equally spaced unit-circle points
H_DISC_0_DENSE = 0.30750993390991679

coord = st.floats(-3, 3, allow_nan=False)
cpx = st.builds(complex, coord, coord)


def _spread(pts, m=0.3):
    return all(abs(p - q) >= m for i, p in enumerate(pts) for q in pts[i + 1 :])


def test_disc_examples():
    assert rho_disc(0, 1).value == 1
    assert rho_disc(0.5, 1).value == pytest.approx(4 / 3)
    assert rho_disc(0, 2).value == 0.5
    v = rho_disc(0, 1)
    assert v.method == "closed-form" and v.error == 0
    assert v.to_dict() == {"density": 1.0, "method": "closed-form", "error": 0.0}
    with pytest.raises(DomainError, match="outside"):
        rho_disc(2, 1)
    with pytest.raises(DomainError):
        rho_disc(0, -1)


def test_density_value_invariants():
    with pytest.raises(DomainError):
        DensityValue(0.0, "bound")
    with pytest.raises(DomainError):
        DensityValue(1.0, "bound", -1.0)


def test_triple_permutation_invariance():
    vals = {rho_triple(*p, 0, rel_tol=1e-9).value for p in [(1, OMEGA, OMEGA**2), (OMEGA**2, 1, OMEGA), (OMEGA, 1, OMEGA**2)]}
    assert max(vals) - min(vals) <= 3e-9 * max(vals)


def test_triple_brute_force_oracle():
    v = rho_triple(0, 1, -1, 1j, rel_tol=1e-6).value
    assert v == pytest.approx(1 / BRUTE_FORCE_0_1_M1_I, rel=1e-2)


def test_triple_affine_rule():
    tol = 1e-6
    a, b, c, z = 0.3, 2 - 1j, -1 + 0.5j, 0.2 + 0.9j
    base = rho_triple(a, b, c, z, rel_tol=tol).value
    moved = rho_triple(2 * a + 1, 2 * b + 1, 2 * c + 1, 2 * z + 1, rel_tol=tol).value
    assert moved == pytest.approx(base / 2, rel=3 * tol)


@pytest.mark.parametrize("x", [-0.7, 0.3, 2.5])
def test_pair_symmetries(x):
    tol = 1e-8
    v = rho_pair(0, 1, x, rel_tol=tol).value
    assert rho_pair(1, 0, x, rel_tol=tol).value == pytest.approx(v, rel=3 * tol)
    assert rho_pair(0, 1, 1 - x, rel_tol=tol).value == pytest.approx(v, rel=3 * tol)


def test_pair_distant_puncture_oracle():
    assert rho01_quadrature(-1, rel_tol=1e-10).value == pytest.approx(RHO01_AT_M1_DISTANT, rel=1e-9)


def test_distant_puncture_helper_is_independent():
    w = 0.3 + 0.4j
    assert rho01_distant_puncture(w) == pytest.approx(rho01_quadrature(w, 1e-11).value, rel=1e-9)


def test_pair_center_independence():
    z = 0.4 + 1.3j
    v1 = rho_pair(0, 1, z, rel_tol=1e-8)
    v2 = rho_pair(0, 1, z, rel_tol=1e-8, center=-2 + 0.5j)
    assert v1.info["center"] != v2.info["center"]
    assert v2.value == pytest.approx(v1.value, rel=1e-6)


def test_pair_center_reselected_when_too_close():
    v = rho_pair(0, 1, 2j, center=2j + 1e-9)
    assert v.info["center"] == [0.0, 1.0]


def test_pair_errors():
    with pytest.raises(DomainError):
        rho_pair(1, 1, 2j)
    with pytest.raises(DomainError):
        rho_pair(0, 1, 1)


@settings(max_examples=8, deadline=None)
@given(st.lists(cpx, min_size=4, max_size=4).filter(_spread))
def test_normalising_map_pullback(pts):
    tol = 1e-6
    a, b, c, z = pts
    f = normalize_triple(a, b, c)
    lhs = rho_triple(a, b, c, z, rel_tol=tol).value
    rhs = rho_pair(0, 1, f(z), rel_tol=tol).value * abs(f.derivative(z))
    assert lhs == pytest.approx(rhs, rel=3 * tol)


@settings(max_examples=8, deadline=None)
@given(st.lists(cpx, min_size=4, max_size=4).filter(_spread))
def test_nested_disc_has_larger_density(pts):
    # the disc about z reaching the nearest puncture lies inside the punctured sphere
    tol = 1e-6
    a, b, c, z = pts
    r = min(abs(z - a), abs(z - b), abs(z - c))
    assert rho_triple(a, b, c, z, rel_tol=tol).value <= rho_disc(0, r).value * (1 + 3 * tol)
    assert rho_pair(a, b, z, rel_tol=tol).value <= rho_disc(0, min(abs(z - a), abs(z - b))).value * (1 + 3 * tol)


def test_pair_and_triple_are_not_nested():
    # the plane minus {0, 1} is the sphere minus {0, 1, inf}; adding c does not shrink it to the sphere minus {0, 1, c}
    assert rho_pair(0, 1, 1j).value > rho_triple(0, 1, -1j, 1j).value


@settings(max_examples=8, deadline=None)
@given(cpx.filter(lambda z: min(abs(z), abs(z - 1)) > 0.2), cpx.filter(lambda a: abs(a) > 0.2), cpx)
def test_pair_affine_rule(z, alpha, beta):
    tol = 1e-6
    base = rho_pair(0, 1, z, rel_tol=tol).value
    moved = rho_pair(beta, alpha + beta, alpha * z + beta, rel_tol=tol).value
    assert moved * abs(alpha) == pytest.approx(base, rel=3 * tol)


def test_disc_affine_rule():
    for alpha, beta, z in [(2, 1j, 0.3), (0.5j, -1, 0.2 - 0.6j)]:
        D = Disc(0, 1)
        moved = density(D.scaled(alpha, beta), alpha * z + beta).value
        assert moved * abs(alpha) == pytest.approx(density(D, z).value, rel=1e-14)


def test_lower_bound_examples():
    assert rho01_lower_bound(math.e).value == pytest.approx(1 / (12 * math.e))
    assert rho01_lower_bound(10).value == pytest.approx(1 / (20 * math.log(10) + 100))
    assert rho01_lower_bound(-10j).method == "bound"
    for w in (1, 0.5, 0.999j):
        with pytest.raises(DomainError):
            rho01_lower_bound(w)


def test_upper_bound_examples():
    assert rho01_upper_reciprocal_bound(math.exp(-1)) == pytest.approx(17 * math.exp(-1))
    assert rho01_upper_reciprocal_bound(0.1j) == pytest.approx(1.7 * math.log(10))
    for w in (0, 0.5, 2):
        with pytest.raises(DomainError):
            rho01_upper_reciprocal_bound(w)


def test_bounds_bracket_quadrature():
    rng = np.random.default_rng(2)
    for _ in range(6):
        w = rng.uniform(1.5, 50) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        q = rho01_quadrature(w, rel_tol=1e-6)
        assert q.value + q.error >= rho01_lower_bound(w).value
        w = rng.uniform(0.01, 0.4) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        q = rho01_quadrature(w, rel_tol=1e-6)
        assert 1 / q.value <= rho01_upper_reciprocal_bound(w) * (1 + q.error / q.value)


def test_triple_geometry():
    g = triple_geometry([1j, 0.5j], 0, 1, 2)
    assert 0 < g.m <= g.d <= g.M
    assert g.d == pytest.approx(0.5) and g.M == pytest.approx(math.sqrt(5))
    with pytest.raises(DomainError):
        triple_geometry([0], 0, 1, 2)


def test_fast_triple_matches_quadrature():
    cfg = (0.3, 2 - 1j, -1 + 0.5j, 0.2 + 0.9j)
    assert rho_triple_fast(*cfg) == pytest.approx(rho_triple(*cfg, rel_tol=1e-10).value, rel=2e-5)


def test_density_dispatch():
    assert density(Disc(1, 2), 1).value == 0.5
    assert density(PuncturedSphere((0, 1, 2)), 1j, rel_tol=1e-10).value == pytest.approx(0.10752380533095347, rel=1e-9)
    assert density(PuncturedSphere((0, 1), infinity=True), -1, rel_tol=1e-10).value == pytest.approx(
        RHO01_AT_M1_DISTANT, rel=1e-9
    )
    with pytest.raises(DomainError):
        density(PuncturedSphere((0, 1, 2, 3)), 1j)
    with pytest.raises(DomainError):
        density(PuncturedSphere((0, 1, 2)), 1)


def test_three_point_disc_center():
    r = three_point_density(Disc(0, 1), 0)
    assert r.value <= 1.0
    assert r.method == "optimization" and r.info["lower_bound"]
    assert r.value == pytest.approx(H_DISC_0_DENSE, rel=2e-2)
    assert r.info["min_gap"] > 1e-3 * 2


def test_three_point_rotation_invariance():
    vals = [three_point_density(Disc(0, 1), 0, offset=o).value for o in (0.0, 0.25, 0.5, 0.8)]
    assert max(vals) - min(vals) <= 1e-2 * max(vals)


def test_three_point_below_density_off_center():
    for z in (0.5, 0.3 + 0.2j, -0.7j):
        assert three_point_density(Disc(0, 1), z).value <= rho_disc(z, 1).value


def test_three_point_budget_flag():
    r = three_point_density(Disc(0, 1), 0, budget=500)
    assert r.info["budget_exhausted"] and r.value > 0


def test_three_point_square_between_discs():
    sq = SampledDomain(((1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j),), 0)
    h = three_point_density(sq, 0).value
    # D subset square subset sqrt(2) D, and h shrinks as the domain grows
    assert H_DISC_0_DENSE / math.sqrt(2) * (1 - 1e-4) <= h <= H_DISC_0_DENSE * (1 + 1e-4)


def test_three_point_finite_punctures():
    U = PuncturedSphere((0, 1, 2, 3j))
    r = three_point_density(U, 1 + 1j)
    best = max(rho_triple(*t, 1 + 1j, rel_tol=1e-8).value for t in [(0, 1, 2), (0, 1, 3j), (0, 2, 3j), (1, 2, 3j)])
    assert r.value == pytest.approx(best, rel=1e-5)


def test_three_point_errors():
    with pytest.raises(DomainError):
        three_point_density(Disc(0, 1), 2)
    with pytest.raises(DomainError):
        three_point_density(PuncturedSphere((0, 1), infinity=True), 1j)
