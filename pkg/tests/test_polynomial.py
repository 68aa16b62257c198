from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fatoukit.polynomial import PolynomialFormatError, PolynomialMap

finite = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
coeff_lists = st.lists(finite, min_size=1, max_size=12)


@given(coeff_lists, finite)
def test_monomial_evaluation_matches_numpy(coeffs, z):
    p = PolynomialMap.monomial(coeffs)
    expected = np.polynomial.polynomial.polyval(z, np.array(coeffs, dtype=complex))
    assert abs(p(z) - expected) <= 1e-9 * max(1.0, abs(expected)) * len(coeffs) * max(1.0, abs(z)) ** len(coeffs)


@given(coeff_lists, st.lists(finite, min_size=11, max_size=11),
       st.lists(st.floats(min_value=0.1, max_value=5), min_size=11, max_size=11))
def test_text_round_trip_is_exact(coeffs, nodes, scales):
    d = len(coeffs) - 1
    p = PolynomialMap(np.array(coeffs), np.array(nodes[:d]), np.array(scales[:d]))
    q = PolynomialMap.from_text(p.to_text())
    assert q == p


@given(coeff_lists, st.lists(finite, min_size=11, max_size=11))
def test_newton_form_agrees_with_its_monomial_expansion(coeffs, nodes):
    d = len(coeffs) - 1
    p = PolynomialMap(np.array(coeffs), np.array(nodes[:d]) / 10, np.ones(d))
    mono = PolynomialMap.monomial(p.to_monomial())
    z = np.array([0.3 + 0.1j, -0.2j, 0.05])
    assert np.allclose(p(z), mono(z), rtol=1e-8, atol=1e-8)


@given(coeff_lists, finite)
def test_derivative_matches_cauchy_integral(coeffs, z0):
    p = PolynomialMap.monomial([c / 10 for c in coeffs])
    z0 = z0 / 10
    t = np.exp(2j * np.pi * np.arange(64) / 64)
    r = 0.05
    cauchy = np.mean(p(z0 + r * t) / t) / r
    assert abs(p.derivative(z0) - cauchy) <= 1e-9 * (1 + abs(cauchy))


def test_affine_helpers():
    f = PolynomialMap.affine_through(1 + 1j, 3.0, 0.5)
    assert f(1 + 1j) == pytest.approx(3.0)
    assert f.derivative(7.0) == pytest.approx(0.5)
    assert PolynomialMap.constant(2.0).degree == 0


def test_iterate_with_derivative_is_chain_rule():
    p = PolynomialMap.monomial([0.1, 0.5, 0.2])
    w, dw = p.iterate_with_derivative(0.3 + 0.2j, 3)
    h = 1e-6
    fd = (p.iterate(0.3 + 0.2j + h, 3) - p.iterate(0.3 + 0.2j - h, 3)) / (2 * h)
    assert w == pytest.approx(p(p(p(0.3 + 0.2j))))
    assert dw == pytest.approx(fd, rel=1e-7)


def test_plain_coefficient_file_is_a_monomial_list():
    p = PolynomialMap.from_text("degree 2\n0 0\n0 0\n1 0\n")
    assert p(3.0) == pytest.approx(9.0)


@pytest.mark.parametrize("text", ["", "degree x\n1 0\n", "degree 2\n1 0\n", "degree 1\n1 0\n1 nan\n",
                                  "degree 1\n1 0 0\n0 0\n"])
def test_malformed_coefficient_files(text):
    with pytest.raises(PolynomialFormatError):
        PolynomialMap.from_text(text)


def test_perturbed_changes_one_coefficient():
    p = PolynomialMap.monomial([1, 2, 3])
    q = p.perturbed(1, 1.0)
    assert q.coefficients[1] == 3 and q.coefficients[0] == 1 and q != p
