from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fatoukit.construct import (EpsilonBudgetExhausted, PreconditionError, StagePlan, _h_affine, build_stage_one,
                                default_epsilons, default_plan, make_invariant_target, oscillating_geometry,
                                prepare_invariant)
from fatoukit.geometry import Continuum, Disk, station_center


@pytest.fixture(scope="module")
def stage_one():
    J = Continuum.segment()
    plan = default_plan(J, 1)
    geo = oscillating_geometry(J, 1)
    return plan, geo, build_stage_one(plan, geo)


# -- plans ------------------------------------------------------------------------------------
def test_first_marker_lies_between_omega0_and_omega1():
    plan = default_plan(Continuum.segment(), 1)
    x1 = plan.marker(1)
    assert len(plan.markers) == 1
    assert float(plan.omega_n(0).margin(x1)) > 0
    assert float(plan.omega_n(1).margin(x1)) < 0


@given(st.integers(min_value=1, max_value=200))
def test_epsilon_sum_stays_below_one_half(K):
    eps = default_epsilons(K)
    assert sum(eps) < 0.5
    assert all(e <= 2.0 ** -k for k, e in enumerate(eps, start=1))


def test_marker_angles_are_distinct():
    plan = StagePlan(K=3, epsilons=default_epsilons(3))
    angles = [math.atan2((plan.marker(n) - plan.omega_center).imag, (plan.marker(n) - plan.omega_center).real)
              for n in range(1, 4)]
    assert len({round(a, 12) for a in angles}) == 3
    # the whole golden-angle sequence up to 10^3 has no repeats mod 2 pi
    seq = np.mod(np.arange(1, 1001) * math.pi * (3 - math.sqrt(5)), 2 * math.pi)
    assert np.min(np.diff(np.sort(seq))) > 1e-6


@given(st.integers(min_value=1, max_value=12))
def test_start_regions_are_nested_inside_the_normalization_disk(n):
    plan = default_plan(None, 1)
    outer, inner = plan.omega_n(n - 1), plan.omega_n(n)
    assert inner.radius < outer.radius
    assert abs(outer.center - 2 / 3) + outer.radius < 1 / 9


@pytest.mark.parametrize("eps", [[0.6], [0.25, 0.25], [0.0], []])
def test_plan_rejects_bad_epsilons(eps):
    with pytest.raises(ValueError):
        StagePlan(K=max(1, len(eps)), epsilons=eps)


def test_plan_needs_a_stage():
    with pytest.raises(ValueError):
        default_plan(None, 0)


def test_flowchart_for_two_stages():
    J = Continuum.segment()
    plan = default_plan(J, 2)
    geo = oscillating_geometry(J, 2)
    labels = [(s.step, s.label) for s in plan.flowchart(2, geo)]
    assert labels == [(0, "Omega2"), (1, "B0,1"), (2, "Delta1"), (3, "B1,1"), (4, "Delta1,1"),
                      (5, "B1,2"), (6, "Delta2")]


# -- stage one ----------------------------------------------------------------------------------
def test_stage_one_interpolates_fixed_point_and_marker(stage_one):
    plan, _, f1 = stage_one
    assert abs(f1(1.0) - 1) <= 1e-12
    assert abs(f1.poly.derivative(1.0) - 0.5) <= 1e-12
    assert abs(f1(plan.marker(1)) - 1) <= 1e-12


def test_h01_maps_disk_center_to_station(stage_one):
    plan, geo, _ = stage_one
    h = _h_affine(plan, geo, 0, 1)
    a01 = geo.disks.disks[(0, 1)].center
    assert h(a01) == pytest.approx(4.0)
    # the last disk of level m goes to the station 4(m+1) at unit slope
    assert h.derivative(0.0) == pytest.approx(1.0)
    assert station_center(1, 1) == 4 + 2j


def test_stage_one_maps_omega1_into_b01(stage_one):
    plan, geo, f1 = stage_one
    b01 = geo.disks.disks[(0, 1)]
    z = plan.omega_n(1).samples(256, 64)
    assert np.min(b01.margin(f1(z))) > 0


def test_stage_one_fits_the_fixed_point_disk(stage_one):
    _, _, f1 = stage_one
    (comp, tol), = [(c, t) for label, c, t in f1.compacts if label == "fixed"]
    z = comp.samples(512, 64)
    assert np.max(np.abs(f1(z) - (0.5 * z + 0.5))) <= tol


# -- invariant preconditions ---------------------------------------------------------------------
def test_invariant_target_defaults():
    t = make_invariant_target(delta=0.05)
    assert isinstance(t.D, Disk) and t.D.radius == pytest.approx(1 / 3)
    assert t.inner.radius == pytest.approx(1 / 3 - 0.05)
    # h_delta maps the closed shell neighborhood of D into Delta(0, c/2)
    z = Disk(0, t.d0_radius).boundary_samples(512)
    assert np.max(np.abs(t.h_delta(z))) < t.c / 2


def test_quarter_contraction_qualifies_for_c_03():
    t = make_invariant_target(delta=0.05, c=0.3)
    eta = 1e-3
    z = Disk(0, 1 / 3 + eta).boundary_samples(512)
    assert np.max(np.abs(z / 4)) < 0.15
    assert np.max(np.abs(t.h_delta(z))) < t.c / 2


@pytest.mark.parametrize("delta", [1 / 3, 0.34, 1.0])
def test_empty_inset_is_a_precondition_error(delta):
    with pytest.raises(PreconditionError, match="empty"):
        make_invariant_target(delta=delta)


def test_domain_outside_normalization_disk_is_rejected():
    with pytest.raises(PreconditionError):
        make_invariant_target(Disk(0, 0.5), delta=0.05)


def test_epsilon_budget_exhausted():
    t = make_invariant_target(delta=0.05)
    with pytest.raises(EpsilonBudgetExhausted):
        prepare_invariant(t, 2, epsilons=[0.1, 0.1])
