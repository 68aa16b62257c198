from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatoukit.dynamics import (BOUNDED, ESCAPED, AbsorbingDomain, EscapeGrid, OverflowInIterate, escape_grid,
                               orbit, verify_absorbing, verify_fixed_point, verify_invariance,
                               verify_univalence, winding_number)
from fatoukit.geometry import Disk, Rect
from fatoukit.polynomial import FunctionTarget, PolynomialMap

SQUARE = PolynomialMap.monomial([0, 0, 1])
HALF = PolynomialMap.affine(0.5, 0.5)


# -- orbits ---------------------------------------------------------------------------------
def test_orbit_examples():
    assert orbit(HALF, 0.0, 2).points == [0, 0.5, 0.75]
    o = orbit(PolynomialMap.identity(), 0.3 + 0.1j, 5)
    assert all(p == 0.3 + 0.1j for p in o.points) and len(o) == 6


def test_overflow_step_of_squares():
    o = orbit(SQUARE, 2.0, 10, guard=1e12)
    # 2^(2^5) < 1e12 < 2^(2^6)
    assert o.overflow_at == 6
    assert 2.0 ** (2 ** 5) < 1e12 < 2.0 ** (2 ** 6)


# -- fixed point -----------------------------------------------------------------------------
def test_fixed_point_examples():
    r = verify_fixed_point(HALF)
    assert r.value_residual == 0 and r.derivative_residual == 0 and r.passed
    assert r.attraction_radius == pytest.approx(0.25)
    r2 = verify_fixed_point(SQUARE)
    assert r2.value_residual == 0 and r2.derivative_residual == pytest.approx(1.5) and not r2.passed


# -- univalence ------------------------------------------------------------------------------
def test_square_not_univalent_around_critical_point():
    assert not verify_univalence(SQUARE, Disk(0, 0.5), 1).passed


def test_square_univalent_away_from_zero():
    rep = verify_univalence(SQUARE, Disk(2, 0.25), 1)
    assert rep.passed
    # argument principle oracle: z^2 = w has exactly one solution in the disk for w = f(center)
    w0 = 4.0
    t = np.exp(2j * np.pi * np.arange(2048) / 2048)
    z = 2 + 0.25 * t
    assert winding_number(SQUARE(z) - w0) == 1


@settings(max_examples=30)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.integers(min_value=1, max_value=4))
def test_affine_maps_are_univalent(a, b, j):
    f = PolynomialMap.affine(a, b)
    assert verify_univalence(f, Disk(0.3, 0.7), j, samples=256, interior=64).passed


@settings(max_examples=20)
@given(st.floats(min_value=0.05, max_value=0.45), st.floats(min_value=-1, max_value=1))
def test_univalence_implies_boundary_winding_one(r, x):
    """When the full test passes, the boundary image winds once around each interior image."""
    domain = Disk(complex(1.2 + x * 0.3, 0.4), r)
    rep = verify_univalence(SQUARE, domain, 1, samples=512, interior=64)
    if rep.passed:
        zb = domain.boundary_samples(2048)
        assert winding_number(SQUARE(zb) - SQUARE(domain.center)) == 1


def test_univalence_overflow_is_an_error():
    f = PolynomialMap.monomial([0, 0, 1e200])
    with pytest.raises(OverflowInIterate):
        verify_univalence(f, Disk(10, 1), 3)


def test_winding_number_of_circle():
    t = np.exp(2j * np.pi * np.arange(100) / 100)
    assert winding_number(t) == 1
    assert winding_number(t ** 3) == 3
    assert winding_number(t + 5) == 0


# -- invariance ------------------------------------------------------------------------------
def test_invariance_examples():
    half = PolynomialMap.affine(0.5, 0)
    assert verify_invariance(half, Disk(0, 1)).margin == pytest.approx(0.5)
    shift = PolynomialMap.affine(1.0, 1.0)
    chk = verify_invariance(shift, Disk(0, 1))
    assert chk.margin < 0 and not chk.passed


# -- absorbing domains ------------------------------------------------------------------------
def _half_plane_W():
    # {Re w < -1} framed by a tall box; only the right edge is genuine
    box = Rect(-200.0, -1.0, -5.0, 5.0)
    b = box.boundary_samples(4096)
    genuine = np.isclose(b.real, -1.0) & (np.abs(b.imag) < 5 - 1e-9)
    inner = Rect(-3.0, -1.0, -2.0, 2.0).samples(256, 64)
    return AbsorbingDomain(b, genuine, inner)


def test_translation_has_gap_one():
    h = FunctionTarget(lambda w: w - 1, lambda w: np.ones_like(w))
    rep = verify_absorbing(h, _half_plane_W(), 30, d=1.0 - 1e-9)
    assert rep.min_margin > 0
    assert rep.min_gap == pytest.approx(1.0, abs=1e-9)
    assert rep.passed


def test_contraction_gap_halves():
    W = AbsorbingDomain.from_region(Disk(0, 1), 1024, 256)
    h = PolynomialMap.affine(0.5, 0)
    rep = verify_absorbing(h, W, 12, d=0.01)
    gaps = [r.gap for r in rep.rows]
    assert all(r.nesting_margin > 0 for r in rep.rows)
    assert gaps[-1] < 0.01 and not rep.passed
    ratios = np.array(gaps[2:]) / np.array(gaps[1:-1])
    assert np.allclose(ratios, 0.5, atol=0.02)


# -- escape grid -------------------------------------------------------------------------------
def test_escape_grid_examples():
    g = escape_grid(SQUARE, (-0.5, 3.5, -0.5, 0.5), (4, 1), 32, escape_radius=2.0)
    # pixel centers at 0, 1, 2, 3
    assert list(g.classes[0]) == [BOUNDED, BOUNDED, ESCAPED, ESCAPED]
    assert g.steps[0, 3] == 1


def test_escape_grid_matches_unit_disk_within_one_pixel():
    n = 200
    g = escape_grid(SQUARE, (-2, 2, -2, 2), n, 64)
    z = g.pixel_centers()
    wrong = (g.classes == BOUNDED) != (np.abs(z) < 1)
    assert np.all(np.abs(np.abs(z[wrong]) - 1) <= 4 / n)


def test_escape_grid_is_deterministic_and_round_trips():
    a = escape_grid(SQUARE, (-2, 2, -2, 2), 64, 32).to_ppm()
    b = escape_grid(SQUARE, (-2, 2, -2, 2), 64, 32).to_ppm()
    assert a == b
    classes = EscapeGrid.read_ppm_classes(a)
    assert np.array_equal(classes, escape_grid(SQUARE, (-2, 2, -2, 2), 64, 32).classes)


@pytest.mark.parametrize("kwargs", [dict(res=0), dict(res=(3, 0)), dict(window=(1, 0, 0, 1)),
                                    dict(max_iter=0)])
def test_escape_grid_rejects_bad_geometry(kwargs):
    args = dict(window=(-1, 1, -1, 1), res=8, max_iter=8)
    args.update(kwargs)
    with pytest.raises(ValueError):
        escape_grid(SQUARE, args["window"], args["res"], args["max_iter"])


def test_overflow_is_its_own_class():
    f = PolynomialMap.monomial([0, 0, 0, 0, 0, 0, 0, 0, 1e300])
    g = escape_grid(f, (0.9, 1.1, -0.1, 0.1), 2, 3, escape_radius=math.inf)
    assert np.all(g.classes == 2)
