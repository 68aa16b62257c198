"""Orbits and the numeric checks of every dynamical clause.

All verifiers are pure functions of their inputs and the fixed
low-discrepancy sampling of :mod:`fatoukit.geometry`, so every margin they
report is reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely
from shapely.geometry import LinearRing, LineString, MultiLineString, Polygon

from .geometry import Disk, PointRegion, Region, step_count

ORBIT_GUARD = 1e12
ESCAPE_RADIUS = 10.0
BOUNDARY_SAMPLES = 256
INTERIOR_SAMPLES = 64


class OverflowInIterate(ArithmeticError):
    """An iterate left the guard disk where a finite value was required."""


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------
@dataclass
class Orbit:
    """``z, f(z), ..., f^n(z)``, cut short at the first value beyond the guard."""

    start: complex
    points: list
    overflow_at: int | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def last(self) -> complex:
        return self.points[-1]


def orbit(f: Callable, z: complex, n: int, guard: float = ORBIT_GUARD) -> Orbit:
    """Iterate ``f`` ``n`` times from ``z``; overflow is recorded, not raised."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = complex(z)
    pts = [w]
    for j in range(1, n + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            w = complex(f(w))
        if not (abs(w) <= guard):
            return Orbit(complex(z), pts, j)
        pts.append(w)
    return Orbit(complex(z), pts, None)


def iterate_samples(f: Callable, z: np.ndarray, n: int, guard: float = ORBIT_GUARD) -> list:
    """Images ``f^j(z)`` for ``j = 0..n``; values beyond the guard become NaN."""
    out = [np.asarray(z, dtype=complex)]
    w = out[0]
    for _ in range(n):
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.asarray(f(w), dtype=complex)
            w = np.where(np.abs(w) <= guard, w, np.nan)
        out.append(w)
    return out


def _finite_or_raise(w: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(w)):
        raise OverflowInIterate(f"{what}: an iterate exceeds the guard {ORBIT_GUARD:g}")
    return w


# ---------------------------------------------------------------------------
# Containment
# ---------------------------------------------------------------------------
@dataclass
class ContainmentCheck:
    """Least signed margin of ``f^step(samples)`` inside ``target``."""

    step: int
    label: str
    target: Region
    margin: float
    samples: int
    trivial: bool = False

    @property
    def passed(self) -> bool:
        return self.trivial or self.margin > 0


def _margin(region: Region, w: np.ndarray) -> float:
    if w.size == 0:
        return math.inf
    if not np.all(np.isfinite(w)):
        return -math.inf
    return float(np.min(region.margin(w)))


def verify_flowchart(stage, plan, geo, samples: int = BOUNDARY_SAMPLES, interior: int = INTERIOR_SAMPLES,
                     phase: float = 0.0, start: Region | None = None) -> list[ContainmentCheck]:
    """Check the stage-``k`` itinerary of ``Omega_k`` (or ``start``) step by step."""
    if samples < 64:
        raise ValueError("at least 64 boundary samples are required")
    k = stage.k
    region = start if start is not None else plan.omega_n(k)
    z = region.samples(samples, interior, phase)
    steps = plan.flowchart(k, geo)
    tube = iterate_samples(stage.poly, z, max(s.step for s in steps))
    out = []
    for s in steps:
        if s.step == 0:
            out.append(ContainmentCheck(0, s.label, s.region, 0.0, z.size, trivial=True))
            continue
        out.append(ContainmentCheck(s.step, s.label, s.region, _margin(s.region, tube[s.step]), z.size))
    return out


def verify_invariance(f: Callable, region: Region, samples: int = 500, interior: int = 0,
                      phase: float = 0.0, label: str = "invariance") -> ContainmentCheck:
    """Least margin of ``f(region)`` inside ``region`` on boundary (and interior) samples."""
    z = region.boundary_samples(samples, phase)
    if interior:
        z = np.concatenate([z, region.interior_samples(interior, phase)])
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.asarray(f(z), dtype=complex)
    return ContainmentCheck(1, label, region, _margin(region, w), z.size)


# ---------------------------------------------------------------------------
# Fixed point
# ---------------------------------------------------------------------------
@dataclass
class FixedPointReport:
    value_residual: float
    derivative_residual: float
    attraction_radius: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value_residual <= self.tolerance and self.derivative_residual <= self.tolerance


def _derivative(f: Callable, z):
    if hasattr(f, "derivative"):
        return f.derivative(z)
    h = 1e-7
    return (f(z + h) - f(z - h)) / (2 * h)


def verify_fixed_point(f: Callable, tol: float = 1e-10, point: complex = 1.0, multiplier: complex = 0.5,
                       samples: int = BOUNDARY_SAMPLES) -> FixedPointReport:
    """Residuals of ``f(1) = 1`` and ``f'(1) = 1/2`` plus an attraction radius.

    The radius is the largest ``r = j/64`` (``r <= 1/4``) for which
    ``|f'| < 1`` on the samples of the closed disk about the fixed point.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        v = complex(f(point))
        dv = complex(_derivative(f, point))
    radius = 0.0
    for j in range(16, 0, -1):
        r = j / 64.0
        z = Disk(point, r).samples(samples, samples // 4)
        with np.errstate(over="ignore", invalid="ignore"):
            d = np.abs(np.asarray(_derivative(f, z)))
        if np.all(np.isfinite(d)) and float(np.max(d)) < 1.0:
            radius = r
            break
    return FixedPointReport(abs(v - point), abs(dv - multiplier), radius, tol)


# ---------------------------------------------------------------------------
# Univalence
# ---------------------------------------------------------------------------
@dataclass
class UnivalenceReport:
    j: int
    min_derivative: float
    critical_points: int
    simple_boundary: bool
    samples: int

    @property
    def passed(self) -> bool:
        return self.min_derivative > 0 and self.critical_points == 0 and self.simple_boundary


def _iterate_with_derivative(f: Callable, z: np.ndarray, j: int):
    if hasattr(f, "iterate_with_derivative"):
        return f.iterate_with_derivative(z, j)
    w = np.asarray(z, dtype=complex)
    dw = np.ones(w.shape, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(j):
            dw = dw * np.asarray(_derivative(f, w))
            w = np.asarray(f(w), dtype=complex)
    return w, dw


def winding_number(values: np.ndarray) -> int:
    """Winding number about 0 of the closed polygon through ``values``."""
    v = np.asarray(values, dtype=complex)
    ratio = np.append(v[1:], v[:1]) / v
    return int(round(float(np.sum(np.angle(ratio))) / (2 * math.pi)))


def verify_univalence(f: Callable, domain: Region, j: int, samples: int = 1024,
                      interior: int = 256, phase: float = 0.0) -> UnivalenceReport:
    """Numeric univalence of ``f^j`` on ``domain``.

    (a) ``(f^j)'`` has no zero: its least modulus on dense samples is
    positive and the argument principle on the boundary counts no zeros.
    (b) The image of the sampled boundary is a simple closed polyline (and
    images of distinct parts do not meet).
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    parts = [p for p in domain.parts if not isinstance(p, PointRegion)]
    min_d, crit, simple, count = math.inf, 0, True, 0
    rings = []
    for part in parts:
        z = part.samples(samples, interior, phase)
        w, dw = _iterate_with_derivative(f, z, j)
        _finite_or_raise(w, "univalence")
        count += z.size
        min_d = min(min_d, float(np.min(np.abs(dw))))
        b = part.boundary_samples(samples, phase)
        wb, dwb = _iterate_with_derivative(f, b, j)
        _finite_or_raise(wb, "univalence")
        if np.any(dwb == 0):
            crit += 1
        else:
            crit += abs(winding_number(dwb))
        ring = LinearRing(np.column_stack([wb.real, wb.imag]))
        if not ring.is_simple:
            simple = False
        rings.append(ring)
    for a in range(len(rings)):
        for b in range(a + 1, len(rings)):
            if Polygon(rings[a]).buffer(0).intersects(Polygon(rings[b]).buffer(0)):
                simple = False
    if not parts:
        min_d = math.inf
    return UnivalenceReport(j, min_d, crit, simple, count)


# ---------------------------------------------------------------------------
# Markers
# ---------------------------------------------------------------------------
@dataclass
class MarkerRecord:
    """Marker ``x_n`` under ``f_k``.

    ``residual`` is ``|f_k^{N_n}(x_n) - 1|`` along the computed orbit,
    ``freeze_error`` the largest deviation from the stored orbit and
    ``interpolation`` (newest marker only) the residual of the exact
    condition ``f_k(x_k^{N_{k-1}}) = 1`` at the stored orbit point.
    """

    n: int
    residual: float
    freeze_error: float
    interpolation: float
    tolerance: float
    exact_tolerance: float

    @property
    def passed(self) -> bool:
        return (self.residual <= self.tolerance and self.freeze_error <= self.tolerance
                and self.interpolation <= self.exact_tolerance)


def verify_markers(stage, plan, exact_tol: float = 1e-10, freeze_tol: float = 1e-8) -> list[MarkerRecord]:
    """``|f_k^{N_n}(x_n) - 1|`` for ``n <= k`` and the replay of the stored orbits.

    The interpolation condition of the newest marker is held to
    ``exact_tol``; computed orbits accumulate rounding along the way and are
    held to ``freeze_tol``.
    """
    k = stage.k
    out = []
    for n in range(1, k + 1):
        x = plan.marker(n)
        span = max(step_count(n), step_count(k - 1))
        orb = orbit(stage.poly, x, span)
        pts = orb.points
        if orb.overflow_at is not None and orb.overflow_at <= step_count(n):
            residual = math.inf
        else:
            residual = abs(pts[step_count(n)] - 1.0)
        freeze = 0.0
        for j in range(0, step_count(k - 1) + 1):
            ref = plan.marker_orbit(n, j)
            freeze = max(freeze, abs(pts[j] - ref) if j < len(pts) else math.inf)
        interp = 0.0
        if n == k:
            with np.errstate(over="ignore", invalid="ignore"):
                interp = abs(complex(stage.poly(plan.marker_orbit(n, step_count(k - 1)))) - 1.0)
            if not math.isfinite(interp):
                interp = math.inf
        out.append(MarkerRecord(n, residual, freeze, interp, freeze_tol, exact_tol))
    return out


# ---------------------------------------------------------------------------
# Absorbing domains
# ---------------------------------------------------------------------------
@dataclass
class AbsorbingDomain:
    """Sampled absorbing domain ``W``.

    ``boundary`` is a closed polygon around a bounded representative of
    ``W``; ``genuine`` flags the vertices on the true boundary (as opposed to
    a truncation frame). ``inner`` samples the part of ``W̄`` whose images are
    tested, kept clear of the frame so truncation never shows up as a failure.
    """

    boundary: np.ndarray
    genuine: np.ndarray
    inner: np.ndarray

    def __post_init__(self):
        self.boundary = np.asarray(self.boundary, dtype=complex)
        self.genuine = np.asarray(self.genuine, dtype=bool)
        self.inner = np.asarray(self.inner, dtype=complex)
        if self.boundary.shape != self.genuine.shape:
            raise ValueError("one genuine flag per boundary vertex is required")

    @classmethod
    def from_region(cls, region: Region, n_boundary: int = 512, n_interior: int = 128) -> "AbsorbingDomain":
        b = region.boundary_samples(n_boundary)
        return cls(b, np.ones(b.size, dtype=bool), region.samples(n_boundary, n_interior))


@dataclass
class AbsorbingRow:
    n: int
    nesting_margin: float
    gap: float


@dataclass
class AbsorbingReport:
    rows: list
    d: float

    @property
    def min_margin(self) -> float:
        return min((r.nesting_margin for r in self.rows), default=math.inf)

    @property
    def min_gap(self) -> float:
        return min((r.gap for r in self.rows), default=math.inf)

    @property
    def passed(self) -> bool:
        return self.min_margin > 0 and self.min_gap > 0 and self.min_gap >= self.d


def _genuine_curves(w: np.ndarray, flags: np.ndarray):
    """Polylines through the consecutive runs of genuine vertices (cyclically)."""
    n = w.size
    if np.all(flags):
        return LineString(np.column_stack([np.append(w, w[0]).real, np.append(w, w[0]).imag]))
    start = int(np.argmin(flags))  # a frame vertex, so runs do not wrap
    order = np.roll(np.arange(n), -start)
    runs, cur = [], []
    for i in order:
        if flags[i]:
            cur.append(w[i])
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    lines = []
    for r in runs:
        r = np.array(r)
        if r.size == 1:
            r = np.array([r[0], r[0]])
        lines.append(np.column_stack([r.real, r.imag]))
    return MultiLineString(lines)


def verify_absorbing(h: Callable, W: AbsorbingDomain, n_max: int = 30, d: float = 0.0) -> AbsorbingReport:
    """Nesting ``h^n(W̄) ⊂ h^{n-1}(W)`` and gaps ``dist(h^n(W), h^{n-1}(∂W))``.

    Membership in ``h^{n-1}(W)`` is decided against the image polygon of the
    sampled boundary; the signed margin is the distance to the image of the
    genuine boundary (positive inside).
    """
    boundary = W.boundary
    inner = W.inner
    rows = []
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_max + 1):
            img_inner = _finite_or_raise(np.asarray(h(inner), dtype=complex), f"absorbing step {n}")
            poly = Polygon(np.column_stack([boundary.real, boundary.imag]))
            if not poly.is_valid:
                poly = poly.buffer(0)
            curves = _genuine_curves(boundary, W.genuine)
            pts = shapely.points(img_inner.real, img_inner.imag)
            dist = shapely.distance(curves, pts)
            inside = shapely.contains_xy(poly, img_inner.real, img_inner.imag)
            signed = np.where(inside, dist, -dist)
            rows.append(AbsorbingRow(n, float(np.min(signed)), float(np.min(dist))))
            inner = img_inner
            boundary = _finite_or_raise(np.asarray(h(boundary), dtype=complex), f"absorbing step {n}")
    return AbsorbingReport(rows, d)


# ---------------------------------------------------------------------------
# Escape-time grid
# ---------------------------------------------------------------------------
BOUNDED = 0
ESCAPED = 1
OVERFLOW = 2


@dataclass
class EscapeGrid:
    """Per-pixel escape classification on a rectangular window.

    Row 0 is the top of the window; pixel ``(i, j)`` samples the center of
    its cell. ``steps`` holds the escape step (0 for bounded pixels).
    """

    window: tuple
    width: int
    height: int
    max_iter: int
    escape_radius: float
    classes: np.ndarray
    steps: np.ndarray

    def pixel_centers(self) -> np.ndarray:
        return pixel_centers(self.window, self.width, self.height)

    def to_ppm(self) -> bytes:
        """Binary P6 image: red = escape step, green = bounded, blue = overflow."""
        rgb = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        esc = self.classes == ESCAPED
        rgb[..., 0] = np.where(esc, np.minimum(self.steps, 255), 0).astype(np.uint8)
        rgb[..., 1] = np.where(self.classes == BOUNDED, 255, 0).astype(np.uint8)
        rgb[..., 2] = np.where(self.classes == OVERFLOW, 255, 0).astype(np.uint8)
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + rgb.tobytes()

    @classmethod
    def read_ppm_classes(cls, data: bytes) -> np.ndarray:
        """Recover the class array from :meth:`to_ppm` output."""
        parts = data.split(b"\n", 3)
        if parts[0] != b"P6":
            raise ValueError("not a binary P6 pixmap")
        w, h = (int(t) for t in parts[1].split())
        rgb = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
        out = np.full((h, w), ESCAPED, dtype=np.int8)
        out[rgb[..., 1] == 255] = BOUNDED
        out[rgb[..., 2] == 255] = OVERFLOW
        return out


def pixel_centers(window: Sequence[float], width: int, height: int) -> np.ndarray:
    x0, x1, y0, y1 = (float(v) for v in window)
    xs = x0 + (np.arange(width) + 0.5) * (x1 - x0) / width
    ys = y1 - (np.arange(height) + 0.5) * (y1 - y0) / height
    return xs[None, :] + 1j * ys[:, None]


def escape_grid(f: Callable, window: Sequence[float], res, max_iter: int = 64,
                escape_radius: float = ESCAPE_RADIUS) -> EscapeGrid:
    """Classify each pixel by the first step ``t >= 1`` with ``|f^t| > escape_radius``.

    The test runs after applying ``f``, so a pixel already outside the
    radius escapes at step 1. A non-finite iterate counts as overflow.
    """
    width, height = (res, res) if isinstance(res, (int, np.integer)) else (int(res[0]), int(res[1]))
    if width < 1 or height < 1:
        raise ValueError("resolution must be at least one pixel")
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must have positive width and height")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    z = pixel_centers(window, width, height).ravel()
    classes = np.full(z.size, BOUNDED, dtype=np.int8)
    steps = np.zeros(z.size, dtype=np.int64)
    active = np.arange(z.size)
    w = z.copy()
    for t in range(1, max_iter + 1):
        if active.size == 0:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.asarray(f(w), dtype=complex)
        bad = ~np.isfinite(w)
        esc = ~bad & (np.abs(w) > escape_radius)
        classes[active[bad]] = OVERFLOW
        classes[active[esc]] = ESCAPED
        steps[active[bad | esc]] = t
        keep = ~(bad | esc)
        active = active[keep]
        w = w[keep]
    return EscapeGrid((x0, x1, y0, y1), width, height, max_iter, escape_radius,
                      classes.reshape(height, width), steps.reshape(height, width))
