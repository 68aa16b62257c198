"""Assemble the verification report of a staged build.

Every stage ``f_k`` is checked for

* ``contraction``: certified ``sup |f_k - f_{k-1}|`` on the previous
  window ``C̄_{k-1}`` is at most ``2^-(k-1)`` (``k >= 2``);
* ``itinerary``: the start region ``Omega_k`` lands in each scheduled disk
  and station at its step;
* ``univalence`` of ``f_k^j`` on ``Omega_k`` and on the scheduled disks;
* ``marker-hit`` / ``marker-freeze``: ``f_k^{N_n}(x_n) = 1`` and the stored
  marker orbits are reproduced;
* ``fixed-point``: ``f_k(1) = 1`` and ``f_k'(1) = 1/2``;

plus the mode-specific properties (limit-set surrogate and excursions for
the oscillating build, invariance for the invariant build, absorbing-domain
nesting, escape and the telescoping bound for the Baker build).
"""
from __future__ import annotations

import math

import numpy as np

from .approx import certified_sup_error, region_density
from .dynamics import (ORBIT_GUARD, BOUNDARY_SAMPLES, INTERIOR_SAMPLES, OverflowInIterate, iterate_samples,
                       verify_absorbing, verify_fixed_point, verify_flowchart, verify_invariance,
                       verify_markers, verify_univalence)
from .geometry import hausdorff_distance, step_count
from .report import VerificationReport

FIXED_POINT_TOL = 1e-10
MARKER_EXACT_TOL = 1e-10
MARKER_FREEZE_TOL = 1e-8
BAKER_STEPS = 30
TELESCOPE_STEPS = 10
W_SAMPLES = 100
INVARIANT_SAMPLES = 500


def _sup_bound(f, g, regions, density: int, phase: float) -> tuple[float, int]:
    worst, count = 0.0, 0
    for comp in regions:
        est = certified_sup_error(f, g, comp, 2 * region_density(comp, density), phase)
        worst = max(worst, est.bound)
        count += est.samples
    return worst, count


def _univalence_span(k: int, m: int, n: int) -> int:
    """Largest ``j`` for which the scheduled disk ``B_{m,n}`` stays on fitted compacts under ``f_k^j``.

    ``B_{m,n}`` follows the station chain of level ``m`` for ``2(2^m - n)``
    steps and then leaves it for ``Delta_{m+1}``.
    """
    return min(max(1, step_count(k - 1)), 2 * (2 ** m - n) + 1)


def certify_stage(report: VerificationReport, build, stage, *, samples: int = BOUNDARY_SAMPLES,
                  interior: int = INTERIOR_SAMPLES, phase: float = 0.0) -> None:
    plan, geo = build.plan, build.geo
    k = stage.k
    f = stage.poly
    pre = f"s{k}"
    density = 2 * samples

    if k >= 2:
        prev = build.stages[k - 2]
        value, count = _sup_bound(f, prev.poly, [c for _, c, _ in prev.compacts], density, phase)
        report.bound(f"{pre}.contraction", "contraction", value, 2.0 ** (-(k - 1)), count)

    for chk in verify_flowchart(stage, plan, geo, samples, interior, phase):
        if chk.trivial:
            continue
        report.positive(f"{pre}.itinerary.{chk.step:03d}.{chk.label}", "itinerary", chk.margin, chk.samples)

    uni_samples, uni_interior = 4 * samples, samples
    for j in range(1, max(1, step_count(k - 1)) + 1):
        _univalence_clause(report, f"{pre}.univalence.Omega{k}.j{j}", f, plan.omega_n(k), j,
                           uni_samples, uni_interior, phase)
    for (m, n), disk in sorted(geo.disks.disks.items()):
        if m > k - 1:
            continue
        for j in range(1, _univalence_span(k, m, n) + 1):
            _univalence_clause(report, f"{pre}.univalence.B{m},{n}.j{j}", f, disk, j,
                               uni_samples, uni_interior, phase)

    for rec in verify_markers(stage, plan, MARKER_EXACT_TOL, MARKER_FREEZE_TOL):
        report.bound(f"{pre}.marker-hit.x{rec.n}", "marker-hit", rec.residual, MARKER_FREEZE_TOL, 1)
        report.bound(f"{pre}.marker-freeze.x{rec.n}", "marker-freeze", rec.freeze_error, MARKER_FREEZE_TOL,
                     step_count(k - 1) + 1)
        if rec.n == k:
            report.bound(f"{pre}.marker-exact.x{rec.n}", "marker-hit", rec.interpolation, MARKER_EXACT_TOL, 1)

    fp = verify_fixed_point(f, FIXED_POINT_TOL, samples=samples)
    report.bound(f"{pre}.fixed-point.value", "fixed-point", fp.value_residual, FIXED_POINT_TOL, 1)
    report.bound(f"{pre}.fixed-point.multiplier", "fixed-point", fp.derivative_residual, FIXED_POINT_TOL, 1)
    report.note(f"{pre}.attraction_radius", fp.attraction_radius)

    if build.mode == "invariant":
        _certify_invariant(report, build, stage, samples, phase)
    elif build.mode == "baker":
        _certify_baker(report, build, stage, samples, phase)


def _univalence_clause(report, cid, f, domain, j, samples, interior, phase) -> None:
    try:
        u = verify_univalence(f, domain, j, samples, interior, phase)
    except OverflowInIterate:
        report.positive(cid, "univalence", -math.inf, samples + interior)
        return
    ok = u.critical_points == 0 and u.simple_boundary
    margin = u.min_derivative if ok else -abs(u.min_derivative) - 1.0
    report.positive(cid, "univalence", margin, u.samples)


def _eps_sum(plan, k: int) -> float:
    return float(sum(plan.epsilon(j) for j in range(1, k + 1)))


def _certify_invariant(report, build, stage, samples, phase) -> None:
    tg = build.invariant
    plan = build.plan
    k = stage.k
    n = max(INVARIANT_SAMPLES, 2 * samples)
    chk = verify_invariance(stage.poly, tg.inner, n, 0, phase, label="D^-delta")
    floor = tg.delta - _eps_sum(plan, k)
    report.positive(f"s{k}.invariance", "invariance", chk.margin, chk.samples, floor=max(floor, 0.0))
    if k == 1:
        value, count = _sup_bound(stage.poly, tg.h_delta, [tg.inner], 2 * samples, phase)
        report.bound("s1.h_delta", "invariance", value, plan.epsilon(1), count)


def _certify_baker(report, build, stage, samples, phase) -> None:
    model = build.baker
    plan = build.plan
    k = stage.k
    f = stage.poly
    pre = f"s{k}"
    # f_k(U^-delta) ⊂ U^-delta
    z = model.inset_samples(model.delta, max(INVARIANT_SAMPLES, 2 * samples), samples, phase)
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.asarray(f(z))
    margin = float(np.min(model.depth(w) - model.delta)) if np.all(np.isfinite(w)) else -math.inf
    floor = model.delta - _eps_sum(plan, k)
    report.positive(f"{pre}.invariance", "invariance", margin, z.size, floor=max(floor, 0.0))
    # nesting of f_k^n(W̄) in f_k^{n-1}(W)
    try:
        ab = verify_absorbing(f, model.W, BAKER_STEPS)
        nest = ab.min_margin
    except OverflowInIterate:
        nest = -math.inf
    report.positive(f"{pre}.nesting", "absorbing", nest, model.W.inner.size)
    # escape to the left: Re f^n(w) strictly decreasing
    ws = model.w_samples(W_SAMPLES, phase)
    tube = iterate_samples(f, ws, BAKER_STEPS, ORBIT_GUARD)
    steps = [np.max(tube[n].real - tube[n - 1].real) for n in range(1, BAKER_STEPS + 1)]
    worst = float(np.max(steps))
    report.positive(f"{pre}.escape", "escape", -worst if math.isfinite(worst) else -math.inf, ws.size)
    # telescoping against the model
    hz = ws.copy()
    dev = 0.0
    for n in range(1, TELESCOPE_STEPS + 1):
        hz = np.asarray(model.h(hz))
        dev = max(dev, float(np.max(np.abs(tube[n] - hz))))
    if not math.isfinite(dev):
        dev = math.inf
    bound = float(sum(j * plan.epsilon(j) for j in range(1, k + 1)))
    report.bound(f"{pre}.telescoping", "telescoping", dev, bound, ws.size)


def _certify_final(report, build, samples, phase) -> None:
    plan, geo, stages = build.plan, build.geo, build.stages
    K = len(stages)
    fK = stages[-1].poly
    for s in stages[:-2]:
        value, count = _sup_bound(fK, s.poly, [c for _, c, _ in s.compacts], 2 * samples, phase)
        report.bound(f"final.tail.s{s.k}", "contraction", value, 2.0 ** (1 - s.k), count)
    if build.mode != "oscillating":
        return
    ref = geo.core.reference_samples()
    dists = []
    for m in range(0, K - 1):
        centers = geo.disks.centers(range(0, m + 1))
        d = hausdorff_distance(centers, ref)
        diam = geo.core.diameter_bound + 2 * float(geo.exhaustion.radii[m])
        report.bound(f"final.limit-set.m{m}", "limit-set", d, diam + geo.disks.radii[m], centers.size + ref.size)
        dists.append(d)
    if len(dists) >= 2:
        report.positive("final.limit-set.improvement", "limit-set", dists[0] - dists[-1], len(dists))
    # excursions through the stations Delta_m
    c = np.array([plan.omega_center], dtype=complex)
    tube = iterate_samples(fK, c, step_count(K))
    re = [float(tube[step_count(m)][0].real) for m in range(0, K + 1)]
    for m, r in enumerate(re):
        report.note(f"final.excursion.m{m}", r)
    inc = min(re[m + 1] - re[m] for m in range(K)) if all(math.isfinite(r) for r in re) else -math.inf
    report.positive("final.excursion", "excursion", inc, K + 1)


def certify_build(build, *, samples: int = BOUNDARY_SAMPLES, interior: int | None = None,
                  phase: float = 0.0) -> VerificationReport:
    """Certify every stage of ``build`` and the truncated limit ``f_K``."""
    if samples < 64:
        raise ValueError("at least 64 boundary samples are required")
    interior = samples // 4 if interior is None else interior
    report = VerificationReport(build.mode, len(build.stages))
    for stage in build.stages:
        certify_stage(report, build, stage, samples=samples, interior=interior, phase=phase)
        _note_stage(report, stage)
    if build.stages:
        _certify_final(report, build, samples, phase)
    if build.mode == "baker":
        m = build.baker
        report.positive("model.gap", "absorbing", m.d, len(m.report.rows))
        report.positive("model.W-in-U", "absorbing", m.checks["W_in_U"], m.W.inner.size)
        report.positive("model.h-keeps-U", "absorbing", m.checks["h_U_in_U"], m.W.inner.size)
        report.positive("model.escape", "absorbing", m.checks["escape"], m.W.inner.size)
    report.note("config.samples", samples)
    report.note("config.interior", interior)
    report.note("config.phase", phase)
    report.note("plan.epsilons", [float(e) for e in build.plan.epsilons[: build.plan.K]])
    return report


def _note_stage(report, stage) -> None:
    pre = f"s{stage.k}"
    report.note(f"{pre}.degree", int(stage.poly.degree))
    prov = stage.provenance
    report.note(f"{pre}.epsilon", prov.get("epsilon"))
    cert = prov.get("certificate", {})
    for c in cert.get("compacts", []):
        report.note(f"{pre}.fit.{c['label']}.error", c["error"])
        report.note(f"{pre}.fit.{c['label']}.tolerance", c["tolerance"])
    report.note(f"{pre}.fit.max_residual", cert.get("max_residual"))
    if "budget" in prov:
        report.note(f"{pre}.budget.delta", prov["budget"]["delta"])
        report.note(f"{pre}.budget.eps", prov["budget"]["eps"])
