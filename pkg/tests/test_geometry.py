from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import directed_hausdorff

from fatoukit.geometry import (Continuum, Disk, GeometryError, NoRoom, PointRegion, PolygonRegion, Rect,
                               ResolutionTooCoarse, UnionRegion, build_exhaustion, hausdorff_distance,
                               place_disks, region_from_description, station_layout, step_count)


def scipy_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    pa, pb = np.column_stack([a.real, a.imag]), np.column_stack([b.real, b.imag])
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])


# -- step_count ----------------------------------------------------------------------
@pytest.mark.parametrize("m, expected", [(0, 0), (1, 2), (3, 14)])
def test_step_count_examples(m, expected):
    assert step_count(m) == expected


def test_step_count_matches_flowchart_block_lengths():
    # count Delta_m -> B_{m,1} -> Delta_{m,1} -> ... -> B_{m,2^m} -> Delta_{m+1} explicitly
    for m in range(8):
        block = 0
        for n in range(1, 2 ** m + 1):
            block += 1  # into B_{m,n}
            block += 1  # into Delta_{m,n} (or Delta_{m+1} after the last disk)
        assert step_count(m + 1) - step_count(m) == block == 2 ** (m + 1)


@given(st.integers(min_value=0, max_value=60))
def test_step_count_recursion(m):
    assert step_count(m + 1) == step_count(m) + 2 ** (m + 1)


def test_step_count_rejects_negative_level():
    with pytest.raises(ValueError):
        step_count(-1)


# -- continua and exhaustions -----------------------------------------------------------
def test_continuum_outside_normalization_disk_is_rejected():
    with pytest.raises(GeometryError):
        Continuum(np.array([0.0, 0.34]), resolution=1.0)


def test_continuum_gap_above_resolution_is_rejected():
    with pytest.raises(GeometryError):
        Continuum(np.array([-0.1, 0.1]), resolution=0.05)


def test_continuum_text_round_trip():
    J = Continuum.segment()
    back = Continuum.from_text("# header\n" + J.to_text(), J.resolution)
    assert np.array_equal(back.samples, J.samples)


def test_continuum_text_errors_name_the_line():
    with pytest.raises(GeometryError, match="line 2"):
        Continuum.from_text("0 0\n0.1\n", 1.0)


def test_singleton_exhaustion_is_disks():
    J = Continuum.singleton(0.0)
    X = build_exhaustion(J, 3)
    for j, level in enumerate(X.levels):
        r = (1 / 3) * 2.0 ** (-j)
        assert X.radii[j] == pytest.approx(r)
        z = level.boundary_samples(512)
        assert np.allclose(np.abs(z), r, atol=1e-9)


def test_segment_exhaustion_gaps_certified_by_dense_sampling():
    J = Continuum.segment()
    X = build_exhaustion(J, 2)
    for j in range(1, 3):
        gap = X.radii[j - 1] - X.radii[j]
        b = X.levels[j].boundary_samples(10_000)
        # distance to the boundary of X_{j-1} equals r_{j-1} minus the distance to J
        dist_to_outer = X.radii[j - 1] - J.distance(b)
        assert np.min(dist_to_outer) >= gap * (1 - 1e-6)


def test_exhaustion_needs_fine_enough_polyline():
    J = Continuum(np.linspace(-0.2, 0.2, 5).astype(complex), resolution=0.1)
    with pytest.raises(ResolutionTooCoarse):
        build_exhaustion(J, 3)


# -- disk schedule -------------------------------------------------------------------------
@pytest.fixture(scope="module")
def segment_schedule():
    J = Continuum.segment()
    X = build_exhaustion(J, 4)
    return J, X, place_disks(X, J, 3)


def test_level_zero_has_one_disk_in_its_shell(segment_schedule):
    J, X, B = segment_schedule
    assert len(B.level(0)) == 1
    d = B.disks[(0, 1)]
    z = d.boundary_samples(512)
    dist = J.distance(z)
    assert np.all(dist < X.radii[0]) and np.all(dist > X.radii[1])


def test_level_two_disks_pairwise_disjoint(segment_schedule):
    _, _, B = segment_schedule
    disks = B.level(2)
    assert len(disks) == 4
    b2 = B.radii[2]
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(disks[i].center - disks[j].center) > 2 * b2


def test_schedule_invariants(segment_schedule):
    J, X, B = segment_schedule
    assert all(b < 0.5 for b in B.radii)
    assert all(B.radii[m + 1] < B.radii[m] for m in range(len(B.radii) - 1))
    for (m, n), d in B.disks.items():
        dist = J.distance(d.center)
        assert X.radii[m] - dist - d.radius >= d.radius / 2 - 1e-12
        assert dist - d.radius - X.radii[m + 1] >= d.radius / 2 - 1e-12


def test_singleton_centers_within_shell_bound():
    J = Continuum.singleton(0.0)
    X = build_exhaustion(J, 4)
    B = place_disks(X, J, 3)
    for (m, _), d in B.disks.items():
        assert abs(d.center) <= X.radii[m] + B.radii[m]


def test_centers_approach_the_continuum(segment_schedule):
    J, _, B = segment_schedule
    ref = J.reference_samples()
    dists = [scipy_hausdorff(B.centers(range(0, m + 1)), ref) for m in range(4)]
    assert all(dists[m + 1] <= dists[m] + 1e-15 for m in range(3))
    assert all(B.eps_h[m + 1] <= B.eps_h[m] + 1e-15 for m in range(len(B.eps_h) - 1))


def test_no_room_reports_level():
    # round shells of a point hold about 2 pi t / (2 b) ~ 19 disks, so level 5 (32 disks) cannot fit
    J = Continuum.singleton(0.0)
    X = build_exhaustion(J, 6)
    with pytest.raises(NoRoom, match="5"):
        place_disks(X, J, 5)


def test_place_disks_needs_next_level():
    J = Continuum.singleton(0.0)
    X = build_exhaustion(J, 2)
    with pytest.raises(GeometryError):
        place_disks(X, J, 2)


# -- stations -----------------------------------------------------------------------------
def test_station_examples():
    S = station_layout(3)
    assert S.deltas[1] == Disk(4.0, 1.0)
    assert S.delta_mns[(1, 1)] == Disk(4 + 2j, 1.0)
    assert abs(S.deltas[1].center - S.delta_mns[(1, 1)].center) == pytest.approx(2.0)
    assert S.pairwise_disjoint()


# -- Hausdorff -----------------------------------------------------------------------------
def test_hausdorff_examples():
    a = np.array([0.1 + 0.2j, -0.3j])
    assert hausdorff_distance(a, a) == 0.0
    assert hausdorff_distance(np.array([0j]), np.array([3 + 4j])) == pytest.approx(5.0)


def test_hausdorff_of_two_disks_against_brute_force():
    rng = np.random.default_rng(7)

    def fill(c, n=10_000):
        r = np.sqrt(rng.random(n))
        return c + r * np.exp(2j * np.pi * rng.random(n))

    A, B = fill(0.0), fill(2.0)
    ours = hausdorff_distance(Disk(0.0, 1.0), Disk(2.0, 1.0))
    assert ours == pytest.approx(scipy_hausdorff(A, B), abs=0.05)
    assert ours == pytest.approx(2.0, abs=0.01)


def test_hausdorff_of_empty_set_is_an_error():
    with pytest.raises(GeometryError):
        hausdorff_distance(np.array([], dtype=complex), np.array([0j]))


points = st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                  min_size=1, max_size=20).map(lambda v: np.array(v, dtype=complex))


@given(points, points)
def test_hausdorff_matches_scipy(a, b):
    assert hausdorff_distance(a, b) == pytest.approx(scipy_hausdorff(a, b), abs=1e-12)


@given(points, points, points)
def test_hausdorff_triangle_inequality(a, b, c):
    assert hausdorff_distance(a, c) <= hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12


# -- regions ---------------------------------------------------------------------------------
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.floats(min_value=0.01, max_value=3),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_disk_margin_is_signed_distance(c, r, z):
    d = Disk(c, r)
    assert float(d.margin(np.array([z]))[0]) == pytest.approx(r - abs(z - c), abs=1e-12)


@pytest.mark.parametrize("region", [
    Disk(1 + 2j, 0.5),
    PointRegion(0.25 - 1j),
    Rect(0.0, 1.0, -2.0, 3.0),
    PolygonRegion(Disk(0.0, 1.0).shape()),
    UnionRegion([Disk(0.0, 1.0), Disk(5.0, 0.5)]),
])
def test_region_description_round_trip(region):
    back = region_from_description(region.describe())
    z = np.array([0.3 + 0.1j, 5.2, 1 + 2.4j, -3j])
    assert np.allclose(back.margin(z), region.margin(z), atol=1e-12)


@settings(max_examples=30)
@given(st.floats(min_value=0.05, max_value=2.0), st.integers(min_value=8, max_value=256))
def test_disk_samples_lie_in_the_disk(r, n):
    d = Disk(0.5j, r)
    z = d.samples(n, n // 4)
    assert np.all(d.margin(z) >= -1e-12)


def test_polygon_margin_sign():
    sq = Rect(0.0, 1.0, 0.0, 1.0)
    assert float(sq.margin(np.array([0.5 + 0.5j]))[0]) == pytest.approx(0.5)
    assert float(sq.margin(np.array([2 + 0.5j]))[0]) == pytest.approx(-1.0)
    assert math.isclose(float(sq.margin(np.array([1 + 0.5j]))[0]), 0.0, abs_tol=1e-12)
