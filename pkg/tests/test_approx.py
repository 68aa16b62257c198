from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatoukit.approx import (CompactsNotDisjoint, CompactTarget, ConstraintOutsideCompacts, DegreeCapExceeded,
                             HermiteConstraint, TubeEscapesG, certified_sup_error, leja_nodes,
                             simultaneous_approximate, stability_budget)
from fatoukit.geometry import Disk, PointRegion, circle_points
from fatoukit.polynomial import FunctionTarget, PolynomialMap


def test_polynomial_target_is_reproduced_exactly():
    t = CompactTarget(Disk(0, 0.5), PolynomialMap.identity(), 1e-6)
    p, cert = simultaneous_approximate([t])
    z = np.array([0.1, 0.2j, -0.4])
    assert np.allclose(p(z), z, atol=1e-14)
    assert cert.errors[0] <= 1e-14


def test_two_disk_constants_pass_independent_resampling():
    targets = [CompactTarget(Disk(0, 0.25), PolynomialMap.constant(0.0), 1e-3),
               CompactTarget(Disk(10, 0.25), PolynomialMap.constant(1.0), 1e-3)]
    p, cert = simultaneous_approximate(targets)
    assert cert.success
    z0 = circle_points(0, 0.25, 10_000, 0.123)
    z1 = circle_points(10, 0.25, 10_000, 0.456)
    assert np.max(np.abs(p(z0))) <= 1e-3
    assert np.max(np.abs(p(z1) - 1)) <= 1e-3


def test_fixed_point_constraint_is_exact():
    targets = [CompactTarget(Disk(1, 0.25), PolynomialMap.affine(0.5, 0.5), 1e-4),
               CompactTarget(Disk(4, 0.5), PolynomialMap.constant(4.0), 1e-3)]
    p, cert = simultaneous_approximate(targets, [HermiteConstraint(1.0, 1.0, 0.5)])
    assert abs(p(1.0) - 1) <= 1e-12
    assert abs(p.derivative(1.0) - 0.5) <= 1e-12
    assert cert.max_residual <= 1e-12


def test_overlapping_compacts_are_rejected():
    targets = [CompactTarget(Disk(0, 1), PolynomialMap.constant(0.0), 1e-3),
               CompactTarget(Disk(1.5, 1), PolynomialMap.constant(1.0), 1e-3)]
    with pytest.raises(CompactsNotDisjoint):
        simultaneous_approximate(targets)


def test_constraint_outside_compacts_warns():
    t = CompactTarget(Disk(0, 0.5), PolynomialMap.identity(), 1e-6)
    with pytest.warns(ConstraintOutsideCompacts):
        simultaneous_approximate([t], [HermiteConstraint(3.0, 3.0)])


def test_degree_cap_reports_best_errors():
    # 1/z on a disk around its pole's neighborhood cannot be matched with degree 4 to 1e-12
    target = FunctionTarget(lambda z: 1 / (z - 1.2), lambda z: -1 / (z - 1.2) ** 2)
    with pytest.raises(DegreeCapExceeded) as info:
        simultaneous_approximate([CompactTarget(Disk(0, 1), target, 1e-12)], degree_cap=4)
    assert info.value.certificate.errors[0] > 1e-12
    assert "best degree" in str(info.value)


def test_nonpositive_tolerance_is_rejected():
    with pytest.raises(ValueError):
        CompactTarget(Disk(0, 1), PolynomialMap.identity(), 0.0)


# -- certified sup error ---------------------------------------------------------------------
def test_sup_error_examples():
    K = Disk(0, 1)
    ident = PolynomialMap.identity()
    assert certified_sup_error(ident, ident, K).bound == 0.0
    shifted = PolynomialMap.affine(1.0, 1e-4)
    assert certified_sup_error(shifted, ident, K).value == pytest.approx(1e-4, rel=1e-9)
    sq = PolynomialMap.monomial([0, 0, 1])
    est = certified_sup_error(sq, PolynomialMap.constant(0.0), Disk(0, 0.5))
    assert est.value == pytest.approx(0.25, abs=est.gap)
    assert est.bound >= 0.25


@settings(max_examples=40)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_sup_bound_dominates_dense_resampling(coeffs):
    p = PolynomialMap.monomial(coeffs)
    K = Disk(0.2, 0.7)
    est = certified_sup_error(p, PolynomialMap.constant(0.0), K, density=256)
    dense = np.max(np.abs(p(circle_points(0.2, 0.7, 20_000, 0.31))))
    assert dense <= est.bound + 1e-12


def test_point_region_has_no_gap():
    est = certified_sup_error(PolynomialMap.identity(), PolynomialMap.constant(0.0), PointRegion(0.5))
    assert est.value == 0.5 and est.gap == 0.0


# -- Leja nodes --------------------------------------------------------------------------------
def test_leja_nodes_are_distinct_and_scaled():
    z = circle_points(0, 1, 256)
    nodes, scales, picks = leja_nodes(z, (), 20)
    assert len(set(picks)) == 20
    basis = np.ones(z.size, dtype=complex)
    for x, s in zip(nodes, scales):
        basis = basis * (z - x) / s
        assert np.max(np.abs(basis)) == pytest.approx(1.0)


# -- stability budget --------------------------------------------------------------------------
def _affine_trials(g, G, K, n, eps, delta, rng, trials=100):
    z = K.samples(256, 64)
    worst = 0.0
    for _ in range(trials):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        scale = delta / (abs(a) + abs(b) * (abs(G.center) + G.radius))
        u, v = z.copy(), z.copy()
        for _k in range(n):
            u = g(u) + scale * (a + b * u)
            v = g(v)
            worst = max(worst, float(np.max(np.abs(u - v))))
    return worst


def test_budget_half_map():
    g = PolynomialMap.affine(0.5, 0)
    delta = stability_budget(g, Disk(0, 1), Disk(0, 0.5), 3, 0.1)
    assert delta <= 0.05
    # worst constant perturbation accumulates delta (1 + 1/2 + 1/4) < 2 delta
    assert delta * 1.75 <= 0.1
    assert _affine_trials(g, Disk(0, 1), Disk(0, 0.5), 3, 0.1, delta, np.random.default_rng(1)) <= 0.1


def test_budget_single_step_is_half_eps():
    g = PolynomialMap.affine(0.5, 0)
    assert stability_budget(g, Disk(0, 1), Disk(0, 0.5), 1, 0.1) == pytest.approx(0.05)


def test_budget_for_derivative_at_most_one():
    g = PolynomialMap.affine(np.exp(0.3j), 0)
    delta = stability_budget(g, Disk(0, 1), Disk(0, 0.5), 2, 0.1)
    assert delta >= 0.1 / (1 + 1 + 2) * 0.5
    assert _affine_trials(g, Disk(0, 1), Disk(0, 0.5), 2, 0.1, delta, np.random.default_rng(2)) <= 0.1


def test_budget_detects_tube_leaving_G():
    g = PolynomialMap.affine(2.0, 0)
    with pytest.raises(TubeEscapesG):
        stability_budget(g, Disk(0, 1), Disk(0, 0.5), 3, 0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.1, max_value=0.9), st.floats(min_value=-3, max_value=3),
       st.integers(min_value=1, max_value=5), st.floats(min_value=0.01, max_value=0.2))
def test_budget_contract_under_random_affine_perturbations(lam, angle, n, eps):
    g = PolynomialMap.affine(lam * np.exp(1j * angle), 0)
    G, K = Disk(0, 1), Disk(0, 0.4)
    delta = stability_budget(g, G, K, n, eps)
    assert _affine_trials(g, G, K, n, eps, delta, np.random.default_rng(3), trials=20) <= eps


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=-0.3, max_value=0.3), st.floats(min_value=-0.3, max_value=0.3))
def test_hermite_constraints_hold_for_random_points(x, y):
    targets = [CompactTarget(Disk(0, 0.5), PolynomialMap.constant(0.0), 1e-3),
               CompactTarget(Disk(3, 0.5), PolynomialMap.constant(1.0), 1e-3)]
    point = complex(x, y)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p, _ = simultaneous_approximate(targets, [HermiteConstraint(point, 0.0, 0.0), HermiteConstraint(3.0, 1.0)])
    assert abs(p(point)) <= 1e-10 and abs(p.derivative(point)) <= 1e-10 and abs(p(3.0) - 1) <= 1e-10
