"""Staged construction of polynomial stages ``f_1, f_2, ...``.

Each stage is one call to :func:`fatoukit.approx.simultaneous_approximate`.
Stage one prescribes affine behavior on a fixed-point disk, on the start
region ``Omega_1`` and on every scheduled disk ``B_{m,n}``; stage ``k + 1``
copies ``f_k`` on everything built so far (the window ``C̄_k``) and adds the
maps that carry the new station disks along the next block of the
itinerary. Markers are frozen by interpolation so that their orbits land on
the attracting fixed point 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .approx import (ApproximationError, CompactTarget, HermiteConstraint, TubeEscapesG,
                     simultaneous_approximate, stability_budget)
from .geometry import (GOLDEN_ANGLE, Continuum, Core, Disk, DiskSchedule, Exhaustion, GeometryError,
                       PointRegion, Region, StationLayout, UnionRegion, WindowFamily, build_exhaustion,
                       NORMALIZATION_RADIUS, place_disks, station_center, station_layout, step_count)
from .polynomial import PolynomialMap

DRIVER_DEGREE_CAP = 1200
BUDGET_FLOOR = 1e-12
MARKER_DISK_DIVISOR = 1000.0


class ConstructionError(RuntimeError):
    """A stage could not be built; ``stages`` holds the stages finished so far."""

    def __init__(self, message: str, stages: list | None = None):
        super().__init__(message)
        self.stages = list(stages or [])


class BudgetCollapse(ConstructionError):
    pass


class EpsilonBudgetExhausted(ConstructionError):
    pass


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------
@dataclass
class FlowStep:
    """Itinerary entry: after ``step`` iterates the start region lies in ``region``."""

    step: int
    label: str
    region: Region
    kind: str


@dataclass
class StagePlan:
    """Start region, markers, tolerances and the itinerary for ``K`` stages.

    ``Omega_n`` is the closed disk about ``omega_center`` of radius
    ``omega_radius + omega_spread * 4^-n``; marker ``x_n`` sits at a fraction
    ``marker_offset`` of the way out from ``Omega_n`` towards ``Omega_{n-1}``,
    at angle ``n`` times the golden angle. The fast radius decay keeps each
    marker well away from the next start region in relative terms, which is
    what the later stages pay for. Station compacts for level ``m`` are disks
    of radius ``station_factor * b_m`` about ``b_{m,n}``. Every affine target
    is fitted to within ``fidelity`` times the radius of its image, so that
    the itinerary maps stay close to similarities at the scale of the tube.
    """

    K: int
    epsilons: list
    omega_center: complex = 2.0 / 3.0
    omega_radius: float = 1.0 / 4608.0
    omega_spread: float = 1.0 / 12.0
    marker_offset: float = 0.6
    contraction: float = 0.45
    station_factor: float = 1.0
    fidelity: float = 1.0 / 256.0
    fixed_radius: float = 1.0 / 32.0
    marker_images: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("a plan needs at least one stage")
        if len(self.epsilons) < self.K:
            raise ValueError("one epsilon per stage is required")
        eps = np.asarray(self.epsilons[: self.K], dtype=float)
        if np.any(eps <= 0) or np.any(eps > 0.5 ** np.arange(1, self.K + 1) + 1e-15) or eps.sum() >= 0.5:
            raise ValueError("epsilons must satisfy 0 < eps_k <= 2^-k with sum below 1/2")
        if self.omega_radius + self.omega_spread >= 1.0 / 9.0:
            raise ValueError("Omega_0 must stay inside the disk of radius 1/9 about 2/3")

    @property
    def omega(self) -> Disk:
        return Disk(self.omega_center, self.omega_radius)

    def omega_n(self, n: int) -> Disk:
        return Disk(self.omega_center, self.omega_radius + self.omega_spread * 4.0 ** (-n))

    def marker(self, n: int) -> complex:
        inner, outer = self.omega_n(n).radius, self.omega_n(n - 1).radius
        r = inner + self.marker_offset * (outer - inner)
        return self.omega_center + r * complex(math.cos(n * GOLDEN_ANGLE), math.sin(n * GOLDEN_ANGLE))

    @property
    def markers(self) -> list:
        return [self.marker(n) for n in range(1, self.K + 1)]

    def epsilon(self, k: int) -> float:
        return float(self.epsilons[k - 1])

    def marker_orbit(self, n: int, j: int) -> complex:
        """``x_n^j``; beyond the stored orbit the marker sits on the fixed point 1."""
        imgs = self.marker_images[n]
        return imgs[j] if j < len(imgs) else 1.0 + 0j

    def flowchart(self, k: int, geo: "Geometry") -> list:
        """Itinerary of ``Omega_k`` under ``f_k``: steps ``0..N_k``."""
        steps = [FlowStep(0, f"Omega{k}", self.omega_n(k), "start")]
        for m in range(k):
            base = step_count(m)
            if m >= 1:
                steps.append(FlowStep(base, f"Delta{m}", geo.stations.deltas[m], "Delta"))
            for n in range(1, 2 ** m + 1):
                steps.append(FlowStep(base + 2 * n - 1, f"B{m},{n}", geo.disks.disks[(m, n)], "B"))
                if n < 2 ** m:
                    steps.append(FlowStep(base + 2 * n, f"Delta{m},{n}", geo.stations.delta_mns[(m, n)], "Delta_mn"))
        steps.append(FlowStep(step_count(k), f"Delta{k}", geo.stations.deltas[k], "Delta"))
        return steps

    def describe(self) -> dict:
        return {
            "K": self.K,
            "epsilons": [float(e) for e in self.epsilons[: self.K]],
            "omega_center": [self.omega_center.real if isinstance(self.omega_center, complex) else self.omega_center, 0.0],
            "omega_radius": self.omega_radius,
            "omega_spread": self.omega_spread,
            "marker_offset": self.marker_offset,
            "contraction": self.contraction,
            "station_factor": self.station_factor,
            "fidelity": self.fidelity,
            "fixed_radius": self.fixed_radius,
        }


def default_epsilons(K: int) -> list:
    return [2.0 ** (-k - 2) for k in range(1, K + 1)]


def default_plan(J: Continuum | None, K: int) -> StagePlan:
    """Plan with the default start region, marker spiral and ``eps_k = 2^-(k+2)``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return StagePlan(K=K, epsilons=default_epsilons(K))


# ---------------------------------------------------------------------------
# Geometry bundle
# ---------------------------------------------------------------------------
@dataclass
class Geometry:
    """Everything placed in the plane before any function is built."""

    mode: str
    core: Core
    exhaustion: Exhaustion
    disks: DiskSchedule
    stations: StationLayout
    window_kind: str = "nested-simply-connected"
    extra: list = field(default_factory=list)
    tight: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def max_level(self) -> int:
        return self.disks.max_level


def oscillating_geometry(J: Continuum, K: int) -> Geometry:
    """Exhaustion with ``K + 1`` levels, disks for levels ``0..K-1`` and stations up to ``K``."""
    X = build_exhaustion(J, K)
    X.certify()
    B = place_disks(X, J, K - 1)
    return Geometry(mode="oscillating", core=J, exhaustion=X, disks=B, stations=station_layout(K))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------
@dataclass
class StageFunction:
    """Stage ``k``: the polynomial, the compacts it was fitted on, and how."""

    k: int
    poly: PolynomialMap
    compacts: list
    window: Region
    provenance: dict

    def __call__(self, z):
        return self.poly(z)


def _h_affine(plan: StagePlan, geo: Geometry, m: int, n: int) -> PolynomialMap:
    a = geo.disks.disks[(m, n)].center
    if n < 2 ** m:
        return PolynomialMap.affine_through(a, station_center(m, n), 0.5)
    return PolynomialMap.affine_through(a, complex(4 * (m + 1), 0), 1.0)


def _affine_tolerance(plan: StagePlan, eps: float, image_radius: float) -> float:
    return min(eps, plan.fidelity * image_radius)


def _b_targets(plan: StagePlan, geo: Geometry, eps: float) -> list:
    out = []
    for (m, n), disk in sorted(geo.disks.disks.items()):
        h = _h_affine(plan, geo, m, n)
        tol = _affine_tolerance(plan, eps / 2, abs(h.coefficients[1]) * disk.radius)
        out.append(CompactTarget(disk, h, tol, f"B{m},{n}"))
    return out


def _contracting(src: Disk, dst_center: complex, dst_radius: float) -> PolynomialMap:
    return PolynomialMap.affine_through(src.center, dst_center, dst_radius / src.radius)


def build_stage_one(plan: StagePlan, geo: Geometry, *, degree_cap: int = DRIVER_DEGREE_CAP,
                    density: int = 128, phase: float = 0.0) -> StageFunction:
    """Fit ``f_1``: attracting fixed point at 1, ``x_1 -> 1``, ``Omega_1 -> B_{0,1}``
    and every scheduled disk onto its station."""
    eps = plan.epsilon(1)
    theta = plan.contraction
    b0 = geo.disks.disks[(0, 1)]
    om1 = plan.omega_n(1)
    x1 = plan.marker(1)
    fixed = Disk(1.0, plan.fixed_radius)
    targets = [
        CompactTarget(fixed, PolynomialMap.affine(0.5, 0.5), min(eps / 2, plan.fixed_radius / 8), "fixed"),
        CompactTarget(PointRegion(x1), PolynomialMap.constant(1.0), eps / 2, "x1"),
        CompactTarget(om1, _contracting(om1, b0.center, theta * b0.radius),
                      _affine_tolerance(plan, eps / 2, theta * b0.radius), "Omega1"),
    ]
    targets += _b_targets(plan, geo, eps)
    for t in geo.extra:
        tol = min(t.tolerance, geo.tight.get(t.label, 1.0) * eps)
        targets.append(CompactTarget(t.compact, t.target, tol, t.label))
    constraints = [HermiteConstraint(1.0, 1.0, 0.5), HermiteConstraint(x1, 1.0)]
    poly, cert = simultaneous_approximate(targets, constraints, degree_cap, density=density, phase=phase)
    window = UnionRegion(t.compact for t in targets)
    stage = StageFunction(1, poly, [(t.label, t.compact, t.tolerance) for t in targets], window,
                          {"certificate": cert.as_dict(), "epsilon": eps})
    plan.marker_images[1] = [x1]
    if plan.K >= 2:
        plan.marker_images[2] = list(_orbit_points(poly, plan.marker(2), step_count(1)))
    return stage


def _orbit_points(f: Callable, z: complex, n: int) -> np.ndarray:
    out = [complex(z)]
    for _ in range(n):
        out.append(complex(f(out[-1])))
    return np.array(out)


def _tube(f: Callable, z: np.ndarray, n: int) -> list:
    out = [z]
    for _ in range(n):
        out.append(np.asarray(f(out[-1])))
    return out


def flow_slack(f: Callable, plan: StagePlan, geo: Geometry, k: int, start: Region, upto: int,
               n_boundary: int = 256, n_interior: int = 64, phase: float = 0.0) -> tuple[float, list]:
    """Least containment slack of ``start`` along the stage-``k`` itinerary,
    for steps ``1..upto`` (excluding the final station when it is not yet
    reached by ``f``)."""
    z = start.samples(n_boundary, n_interior, phase)
    tube = _tube(f, z, upto)
    worst = math.inf
    rows = []
    for s in plan.flowchart(k, geo):
        if 1 <= s.step <= upto:
            mg = float(np.min(s.region.margin(tube[s.step])))
            rows.append((s.step, s.label, mg))
            worst = min(worst, mg)
    return worst, tube


def _k3_disk(f: StageFunction, plan: StagePlan, geo: Geometry, k: int, phase: float = 0.0) -> tuple[Disk, dict]:
    """Compact ``K_3`` inside ``Delta_k`` around ``f_k^{N_k}(Omega_{k+1})``.

    A disk about the image of ``Omega``'s center, fattened by a third of the
    distance from the image to the marker image that must stay outside.
    """
    Nk = step_count(k)
    z = plan.omega_n(k + 1).samples(512, 128, phase)
    img = f.poly.iterate(z, Nk)
    c = complex(f.poly.iterate(plan.omega_center, Nk))
    R = float(np.max(np.abs(img - c)))
    xm = plan.marker_orbit(k + 1, Nk)
    dm = abs(xm - c)
    if not dm > R:
        raise ConstructionError(f"the marker image lies inside the image of Omega_{k + 1} at step {Nk}")
    R3 = R + (dm - R) / 3.0
    disk = Disk(c, R3)
    slack = float(np.min(geo.stations.deltas[k].margin(disk.boundary_samples(256))))
    if not slack > 0:
        raise ConstructionError(f"K_3 at stage {k + 1} is not inside Delta_{k}")
    return disk, {"image_radius": R, "marker_distance": dm, "radius": R3}


def build_stage_step(prev: StageFunction, plan: StagePlan, geo: Geometry, *,
                     degree_cap: int = DRIVER_DEGREE_CAP, density: int = 128,
                     phase: float = 0.0) -> StageFunction:
    """Fit ``f_{k+1}`` from ``f_k`` (``k = prev.k``)."""
    k = prev.k
    kk = k + 1
    eps = plan.epsilon(kk)
    theta = plan.contraction
    Nk = step_count(k)
    # containment slack of Omega_{k+1} along the itinerary under f_k
    k3, k3_info = _k3_disk(prev, plan, geo, k, phase)
    slack, tube = flow_slack(prev.poly, plan, geo, k, plan.omega_n(kk), Nk - 1, phase=phase)
    slack_k3 = float(np.min(k3.margin(prev.poly(tube[-1]))))
    slack = min(slack, slack_k3) if math.isfinite(slack) else slack_k3
    if not slack > 0:
        raise ConstructionError(f"Omega_{kk} does not follow the itinerary under f_{k} (slack {slack:.3g})")
    stab_eps = slack / 2
    G = prev.window
    try:
        budget = stability_budget(prev.poly, G, plan.omega_n(kk), Nk, stab_eps, detail=True)
    except TubeEscapesG as exc:
        raise ConstructionError(str(exc)) from exc
    delta = budget.delta
    if delta < BUDGET_FLOOR:
        raise BudgetCollapse(f"stability budget {delta:.3g} below solver resolution at stage {kk}")

    # compacts of C̄_k touched by the fattened tube get the stability budget
    fat_pts = np.concatenate(tube[:Nk]) if Nk >= 1 else tube[0]
    targets = []
    for label, comp, prev_tol in prev.compacts:
        touched = comp.kind != "point" and bool(np.any(comp.margin(fat_pts) > -stab_eps))
        tol = min(eps, delta) if touched else eps
        if comp.kind != "point":
            # never loosen: the drift after k stages stays within k times the
            # first tolerance, a small fraction of each affine image, so the
            # maps stay univalent on the scheduled disks
            tol = min(tol, prev_tol)
        if label in geo.tight:
            tol = min(tol, geo.tight[label] * eps)
        targets.append(CompactTarget(comp, prev.poly, tol, label))
    xk = plan.marker_orbit(kk, Nk)
    bk1 = geo.disks.disks[(k, 1)]
    # a small disk rather than the bare point: f_{k+1} must jump to 1 across
    # the narrow gap beside K_3, and holding it near 1 on a disk bounds f'
    # there by Cauchy's estimate, so replayed marker orbits stay stable
    rho = (abs(xk - k3.center) - k3.radius) / MARKER_DISK_DIVISOR
    targets.append(CompactTarget(Disk(xk, rho), PolynomialMap.constant(1.0), eps, f"x{kk}^N"))
    targets.append(CompactTarget(k3, _contracting(k3, bk1.center, theta * bk1.radius),
                                 _affine_tolerance(plan, eps, theta * bk1.radius), f"K3^{kk}"))
    for n in range(1, 2 ** k):
        st = Disk(station_center(k, n), plan.station_factor * geo.disks.radii[k])
        nxt = geo.disks.disks[(k, n + 1)]
        targets.append(CompactTarget(st, _contracting(st, nxt.center, theta * nxt.radius),
                                     _affine_tolerance(plan, eps, theta * nxt.radius), f"K{k},{n}"))

    constraints = [HermiteConstraint(1.0, 1.0, 0.5)]
    for n in range(1, kk + 1):
        last = step_count(n - 1)
        for j in range(last + 1):
            value = plan.marker_orbit(n, j + 1) if j < last else 1.0
            constraints.append(HermiteConstraint(plan.marker_orbit(n, j), value))
    poly, cert = simultaneous_approximate(targets, constraints, degree_cap, density=density, phase=phase)
    new_parts = [t.compact for t in targets[len(prev.compacts):]]
    window = UnionRegion([prev.window] + new_parts)
    stage = StageFunction(kk, poly, [(t.label, t.compact, t.tolerance) for t in targets], window, {
        "certificate": cert.as_dict(),
        "epsilon": eps,
        "budget": {"delta": delta, "eps": stab_eps, "lipschitz": budget.lipschitz,
                   "partial_sums": budget.partial_sums},
        "k3": {"center": [k3.center.real, k3.center.imag], **k3_info},
    })
    if kk + 1 <= plan.K:
        plan.marker_images[kk + 1] = list(_orbit_points(poly, plan.marker(kk + 1), step_count(kk)))
    return stage


def run_stages(plan: StagePlan, geo: Geometry, **kw) -> list:
    """Build ``f_1..f_K``; on failure raise :class:`ConstructionError` with the partial list."""
    stages: list = []
    try:
        stages.append(build_stage_one(plan, geo, **kw))
        for _ in range(plan.K - 1):
            stages.append(build_stage_step(stages[-1], plan, geo, **kw))
    except ConstructionError as exc:
        exc.stages = stages
        raise
    except (ApproximationError, GeometryError) as exc:
        raise ConstructionError(f"stage {len(stages) + 1} failed: {exc}", stages) from exc
    return stages


# ---------------------------------------------------------------------------
# Builds
# ---------------------------------------------------------------------------
@dataclass
class Build:
    """A plan, its geometry, the stages built so far and the mode-specific model."""

    mode: str
    plan: StagePlan
    geo: Geometry
    stages: list = field(default_factory=list)
    invariant: "InvariantTarget | None" = None
    baker: object = None

    def run(self, **kw) -> "Build":
        self.stages = run_stages(self.plan, self.geo, **kw)
        if self.geo.window_kind == "left-half-plane":
            family = WindowFamily(self.geo.window_kind)
            for s in self.stages:
                family.add(s.k, s.window)
        return self


def prepare_oscillating(J: Continuum, K: int, epsilons: list | None = None) -> Build:
    plan = default_plan(J, K)
    if epsilons is not None:
        plan = StagePlan(K=K, epsilons=list(epsilons))
    return Build("oscillating", plan, oscillating_geometry(J, K))


def build_oscillating(J: Continuum, K: int, **kw):
    """Stages ``f_1..f_K`` for the oscillating itinerary around ``J``, plus the report."""
    from .certify import certify_build

    b = prepare_oscillating(J, K).run(**kw)
    return b.stages, certify_build(b)


# -- invariant component ----------------------------------------------------
class PreconditionError(ValueError):
    """The inputs violate a stated precondition (reported as a configuration error)."""


INVARIANT_SHELL = 1.0 / 6.0


@dataclass
class InvariantTarget:
    """Domain ``D``, inset ``delta``, inner radius ``c`` and contraction ``h_delta``.

    ``inner`` is ``D^-delta`` and ``K`` the compact between ``D^-delta`` and
    ``D`` on which ``h_delta`` is prescribed (the closure of ``D^-delta``:
    the smallest admissible choice, which leaves the widest gap to the disk
    schedule).
    """

    D: Region
    delta: float
    c: float
    h_delta: PolynomialMap
    inner: Region
    K: Region
    d0_radius: float


def _inset(D: Region, t: float) -> Region | None:
    if D.kind == "disk":
        return Disk(D.center, D.radius - t) if D.radius > t else None
    g = D.shape().buffer(-t)
    if g.is_empty or g.area <= 0:
        return None
    from .geometry import PolygonRegion

    return PolygonRegion(g)


def make_invariant_target(D: Region | None = None, delta: float = 0.05, c: float | None = None) -> InvariantTarget:
    """Default ``D`` is the disk of radius 1/3 about 0; ``c`` defaults to 0.9 times the inradius at 0."""
    D = D if D is not None else Disk(0.0, NORMALIZATION_RADIUS)
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    inner = _inset(D, delta)
    if inner is None:
        raise PreconditionError(f"D^-delta is empty for delta = {delta}: no point of D is that deep")
    depth0 = float(np.atleast_1d(D.margin(0.0))[0])
    if not depth0 > 0:
        raise PreconditionError("D must contain 0")
    c = 0.9 * depth0 if c is None else float(c)
    if not 0 < c < depth0:
        raise PreconditionError(f"c = {c} does not give a disk about 0 compactly inside D")
    rmax = float(np.max(np.abs(D.boundary_samples(1024))))
    if rmax > NORMALIZATION_RADIUS + 1e-12:
        raise PreconditionError("D must lie in the closed disk of radius 1/3")
    d0 = rmax + INVARIANT_SHELL
    lam = min(0.25, 0.9 * (c / 2) / d0)
    return InvariantTarget(D, delta, c, PolynomialMap.affine(lam, 0.0), inner, inner, d0)


def invariant_epsilons(delta: float, K: int) -> list:
    return [delta * 2.0 ** (-k - 1) for k in range(1, K + 1)]


def invariant_geometry(target: InvariantTarget, K: int) -> Geometry:
    """Shells ``D_j`` of width ``r_0 2^-j`` around ``D̄`` carrying the disk schedule."""
    from .geometry import FilledCore, neighborhood_exhaustion

    core = FilledCore(target.D)
    X = neighborhood_exhaustion(core, INVARIANT_SHELL * 0.5 ** np.arange(K + 1))
    B = place_disks(X, core, K - 1)
    dropped = [key for key, d in B.disks.items() if float(np.max(target.K.margin(d.boundary_samples(64)))) > -1e-12]
    if dropped:
        raise GeometryError(f"scheduled disks {sorted(dropped)} meet the compact carrying h_delta")
    return Geometry(mode="invariant", core=core, exhaustion=X, disks=B, stations=station_layout(K),
                    info={"dropped_disks": 0})


def prepare_invariant(target: InvariantTarget, K: int, epsilons: list | None = None) -> Build:
    eps = list(epsilons) if epsilons is not None else invariant_epsilons(target.delta, K)
    total = float(np.sum(eps[:K]))
    if not total < target.c / 2:
        raise EpsilonBudgetExhausted(f"sum of epsilons {total:.3g} reaches c/2 = {target.c / 2:.3g}")
    plan = StagePlan(K=K, epsilons=eps)
    geo = invariant_geometry(target, K)
    geo.extra.append(CompactTarget(target.K, target.h_delta, plan.epsilon(1) / 2, "Kdelta"))
    return Build("invariant", plan, geo, invariant=target)


def build_invariant(target: InvariantTarget, K: int, **kw):
    from .certify import certify_build

    b = prepare_invariant(target, K).run(**kw)
    return b.stages, certify_build(b)


# -- Baker domain -------------------------------------------------------------
BAKER_TIGHT = 1.0 / 16.0
BAKER_CURVE_SPAN = 60.0


def baker_epsilons(delta: float, K: int) -> list:
    return [delta * 2.0 ** (-k - 1) / (k + 1) for k in range(1, K + 1)]


def baker_geometry(model, K: int) -> Geometry:
    """Disks accumulating on a stretch of ``∂U`` and the bounded representative of ``Ū``."""
    import shapely
    from shapely.geometry import LineString, Polygon

    from .geometry import DomainCore, PolygonRegion, Rect, neighborhood_exhaustion

    phi, fr = model.phi, model.frame
    t = np.linspace(-BAKER_CURVE_SPAN, BAKER_CURVE_SPAN, 8193)
    curve = np.asarray(phi(1j * t))
    outer = np.asarray(phi(Rect(0.0, BAKER_CURVE_SPAN, -BAKER_CURVE_SPAN, BAKER_CURVE_SPAN).boundary_samples(8192)))
    frame = shapely.make_valid(Polygon(np.column_stack([outer.real, outer.imag])))
    core = DomainCore(model.inside_u, curve, frame, label="U")
    X = neighborhood_exhaustion(core, 0.5 ** np.arange(K + 1))
    s0, s1 = fr.boundary_span
    piece = np.asarray(phi(1j * np.linspace(s0, s1, 257)))
    window = LineString(np.column_stack([piece.real, piece.imag])).buffer(1.5)
    B = place_disks(X, core, K - 1, window)
    x0, x1, y0, y1 = fr.window
    ring = np.asarray(phi(Rect(x0, x1, y0, y1).boundary_samples(2048)))
    ubar = PolygonRegion(shapely.make_valid(Polygon(np.column_stack([ring.real, ring.imag]))))
    geo = Geometry(mode="baker", core=core, exhaustion=X, disks=B, stations=station_layout(K),
                   window_kind="left-half-plane")
    geo.tight["U"] = BAKER_TIGHT
    geo.info["ubar"] = ubar
    return geo


def prepare_baker(model, K: int, epsilons: list | None = None) -> Build:
    eps = list(epsilons) if epsilons is not None else baker_epsilons(model.delta, K)
    total = float(np.sum(eps[:K]))
    if not total < model.delta:
        raise EpsilonBudgetExhausted(f"sum of epsilons {total:.3g} reaches delta = {model.delta:.3g}")
    plan = StagePlan(K=K, epsilons=eps)
    geo = baker_geometry(model, K)
    geo.extra.append(CompactTarget(geo.info["ubar"], model.h, plan.epsilon(1), "U"))
    return Build("baker", plan, geo, baker=model)


def build_baker(model, K: int, **kw):
    from .certify import certify_build

    b = prepare_baker(model, K).run(**kw)
    return b.stages, certify_build(b)
