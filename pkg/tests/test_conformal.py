from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatoukit.conformal import (Conjugate, ConformalError, ConformalMap, GapNotFound, NotInvertible, ZetaFrame,
                                make_baker_model)

right_half = st.builds(complex, st.floats(min_value=0.05, max_value=20), st.floats(min_value=-20, max_value=20))
slopes = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)
shifts = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@given(slopes, shifts, right_half)
def test_affine_descriptor_round_trip(a, b, z):
    phi = ConformalMap.parse(f"affine({a}, {b})")
    assert ConformalMap.parse(phi.to_text()) == phi
    assert abs(phi.inverse(phi(z)) - z) <= 1e-9 * max(1.0, abs(z))


@given(right_half)
def test_square_then_reflect_inverts_on_half_plane(z):
    phi = ConformalMap.parse("square; affine(-1,0)")
    assert phi(z) == pytest.approx(-z * z)
    assert abs(phi.inverse(phi(z)) - z) <= 1e-9 * max(1.0, abs(z))


@settings(max_examples=30)
@given(right_half)
def test_descriptor_derivative_matches_finite_difference(z):
    phi = ConformalMap.parse("affine(2,1); inv; affine(1j,0)")
    h = 1e-6 * max(1.0, abs(z))
    fd = (phi(z + h) - phi(z - h)) / (2 * h)
    assert phi.derivative(z) == pytest.approx(fd, rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("text", ["", "affine(1)", "affine(0, 1)", "rotate(2)", "inv(3)", "affine(x, y)"])
def test_bad_descriptors(text):
    with pytest.raises(ConformalError):
        ConformalMap.parse(text)


def test_zero_slope_is_not_invertible():
    with pytest.raises(NotInvertible):
        ConformalMap.parse("affine(0, 1)")


def test_exp_has_no_inverse_branch_on_the_frame():
    with pytest.raises(NotInvertible):
        make_baker_model("exp", 0.5)


# -- Baker models --------------------------------------------------------------------------
def test_reflection_gives_unit_translation():
    model = make_baker_model("affine(-1,0)", 0.5)
    w = np.array([-3 + 2j, -10.5 - 4j])
    assert np.allclose(model.h(w), w - 1)
    assert model.d == pytest.approx(1.0)
    assert all(r.gap == pytest.approx(1.0) for r in model.report.rows)


def test_reflect_and_shift_gives_unit_translation_again():
    model = make_baker_model("affine(-1,-1)", 0.5)
    w = np.array([-3 + 2j, -10.5 - 4j])
    assert np.allclose(model.h(w), w - 1)
    assert model.d == pytest.approx(1.0)


def test_negative_square_model_nests():
    model = make_baker_model("square; affine(-1,0)", 0.5)
    assert len(model.report.rows) == 30
    assert all(r.nesting_margin > 0 for r in model.report.rows)
    assert model.d > 0


@given(right_half)
def test_conjugate_is_translation_in_the_zeta_plane(z):
    phi = ConformalMap.parse("square; affine(-1,0)")
    h = Conjugate(phi)
    assert abs(phi.inverse(h(phi(z))) - (z + 1)) <= 1e-8 * max(1.0, abs(z))


def test_non_positive_delta_is_rejected():
    with pytest.raises(ConformalError):
        make_baker_model("affine(-1,0)", 0.0)


def test_degenerate_frame_is_rejected():
    with pytest.raises(ConformalError):
        make_baker_model("affine(-1,0)", 0.5, frame=ZetaFrame(window=(0.0, 0.0, 1.0, 2.0)))


def test_gap_not_found_is_a_conformal_error():
    assert issubclass(GapNotFound, ConformalError)
