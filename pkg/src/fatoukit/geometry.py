"""Planar scaffolding: regions, continua, nested exhaustions, disk schedules
and station disks.

Every region answers three questions used throughout the package:

* ``boundary_samples(n)`` and ``interior_samples(n)``: deterministic sample
  points (equispaced boundary, low-discrepancy interior);
* ``margin(z)``: a signed distance, positive inside and equal to (a lower
  bound for) the distance from ``z`` to the complement; negative outside,
  where it equals minus the distance to the region.

Containment of one sampled set in another is then the statement that the
minimum margin is positive, and the margin itself is the reported slack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import LineString, MultiPoint, Point, Polygon
from shapely.geometry.base import BaseGeometry

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
NORMALIZATION_RADIUS = 1.0 / 3.0
_QUAD_SEGS = 64


class GeometryError(ValueError):
    """Invalid geometric input or an uncertifiable configuration."""


class ResolutionTooCoarse(GeometryError):
    pass


class NoRoom(GeometryError):
    def __init__(self, level: int, detail: str):
        super().__init__(f"no room for the level-{level} disks: {detail}")
        self.level = level


def _z(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _pts(z: np.ndarray):
    z = np.atleast_1d(_z(z))
    return shapely.points(z.real, z.imag)


def _r2_sequence(n: int, phase: float = 0.0) -> np.ndarray:
    """Additive-recurrence low-discrepancy points in the unit square."""
    g = 1.32471795724474602596  # plastic number
    a = np.array([1.0 / g, 1.0 / (g * g)])
    k = np.arange(1, n + 1)[:, None]
    return np.mod(0.5 + phase + k * a, 1.0)


def circle_points(center: complex, radius: float, n: int, phase: float = 0.0) -> np.ndarray:
    """``n`` equispaced points on a circle, offset half a step (plus ``phase``)."""
    t = 2.0 * np.pi * (np.arange(n) + 0.5 + phase) / n
    return center + radius * np.exp(1j * t)


def _resample_curve(coords: np.ndarray, n: int, phase: float = 0.0) -> np.ndarray:
    """``n`` points equispaced by arclength along a closed polyline."""
    seg = np.abs(np.diff(coords))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s = (np.arange(n) + 0.5 + phase) / n * total
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    return coords[idx] + frac * (coords[idx + 1] - coords[idx])


def _ring_coords(ring) -> np.ndarray:
    xy = np.asarray(ring.coords)
    return xy[:, 0] + 1j * xy[:, 1]


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------
class Region:
    """Closed planar compact set with sampling and signed-distance queries."""

    kind = "region"

    def boundary_samples(self, n: int, phase: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def interior_samples(self, n: int, phase: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def margin(self, z) -> np.ndarray:
        raise NotImplementedError

    def samples(self, n_boundary: int = 256, n_interior: int = 64, phase: float = 0.0) -> np.ndarray:
        return np.concatenate([self.boundary_samples(n_boundary, phase), self.interior_samples(n_interior, phase)])

    def contains(self, z, slack: float = 0.0):
        return self.margin(z) >= -slack

    def distance(self, z):
        return np.maximum(0.0, -self.margin(z))

    @property
    def parts(self) -> tuple["Region", ...]:
        return (self,)

    def bounding_box(self) -> tuple[float, float, float, float]:
        b = self.boundary_samples(256)
        return float(b.real.min()), float(b.real.max()), float(b.imag.min()), float(b.imag.max())

    def shape(self) -> BaseGeometry:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(Region):
    """Disk with center and radius. Used both as an open disk (the
    station and schedule disks) and, as a compact, for its closure; margins
    do not distinguish the two."""

    center: complex
    radius: float
    kind = "disk"

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise GeometryError(f"disk radius must be positive, got {self.radius}")

    def boundary_samples(self, n: int, phase: float = 0.0) -> np.ndarray:
        return circle_points(self.center, self.radius, n, phase)

    def interior_samples(self, n: int, phase: float = 0.0) -> np.ndarray:
        k = np.arange(n)
        r = self.radius * np.sqrt((k + 0.5) / n)
        return self.center + r * np.exp(1j * (k * GOLDEN_ANGLE + 2 * np.pi * phase))

    def margin(self, z):
        return self.radius - np.abs(_z(z) - self.center)

    def bounding_box(self):
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def shape(self):
        return Point(self.center.real, self.center.imag).buffer(self.radius, quad_segs=_QUAD_SEGS)

    def describe(self):
        return {"type": "disk", "center": [self.center.real, self.center.imag], "radius": self.radius}

    def disjoint_from(self, other: "Disk") -> bool:
        """Open-disk disjointness (tangent closures allowed)."""
        return abs(self.center - other.center) >= self.radius + other.radius

    def gap_to(self, other: "Disk") -> float:
        return abs(self.center - other.center) - self.radius - other.radius


@dataclass(frozen=True)
class PointRegion(Region):
    """A single point, viewed as a degenerate compact."""

    point: complex
    kind = "point"

    def __post_init__(self):
        object.__setattr__(self, "point", complex(self.point))

    def boundary_samples(self, n: int, phase: float = 0.0):
        return np.array([self.point])

    def interior_samples(self, n: int, phase: float = 0.0):
        return np.array([], dtype=complex)

    def margin(self, z):
        return -np.abs(_z(z) - self.point)

    def bounding_box(self):
        p = self.point
        return p.real, p.real, p.imag, p.imag

    def shape(self):
        return Point(self.point.real, self.point.imag)

    def describe(self):
        return {"type": "point", "point": [self.point.real, self.point.imag]}


@dataclass(frozen=True)
class Rect(Region):
    """Closed axis-parallel rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    x1: float
    y0: float
    y1: float
    kind = "rect"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError("degenerate rectangle")

    def boundary_samples(self, n: int, phase: float = 0.0):
        c = np.array([complex(self.x0, self.y0), complex(self.x1, self.y0), complex(self.x1, self.y1),
                      complex(self.x0, self.y1), complex(self.x0, self.y0)])
        return _resample_curve(c, n, phase)

    def interior_samples(self, n: int, phase: float = 0.0):
        u = _r2_sequence(n, phase)
        return (self.x0 + u[:, 0] * (self.x1 - self.x0)) + 1j * (self.y0 + u[:, 1] * (self.y1 - self.y0))

    def margin(self, z):
        z = _z(z)
        dx = np.maximum(self.x0 - z.real, z.real - self.x1)
        dy = np.maximum(self.y0 - z.imag, z.imag - self.y1)
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
        inside = np.minimum(-dx, -dy)
        return np.where((dx <= 0) & (dy <= 0), inside, -outside)

    def bounding_box(self):
        return self.x0, self.x1, self.y0, self.y1

    def shape(self):
        return shapely.box(self.x0, self.y0, self.x1, self.y1)

    def describe(self):
        return {"type": "rect", "bounds": [self.x0, self.x1, self.y0, self.y1]}


class PolygonRegion(Region):
    """Closed region bounded by a shapely polygon (possibly with holes)."""

    kind = "polygon"

    def __init__(self, polygon: BaseGeometry):
        if polygon.is_empty or polygon.area <= 0:
            raise GeometryError("empty polygon region")
        self.polygon = polygon
        self._boundary = polygon.boundary
        shapely.prepare(self.polygon)

    def _rings(self):
        geoms = getattr(self._boundary, "geoms", [self._boundary])
        return [_ring_coords(g) for g in geoms]

    def boundary_samples(self, n: int, phase: float = 0.0):
        rings = self._rings()
        lengths = np.array([np.sum(np.abs(np.diff(r))) for r in rings])
        counts = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
        return np.concatenate([_resample_curve(r, c, phase) for r, c in zip(rings, counts)])

    def interior_samples(self, n: int, phase: float = 0.0):
        x0, y0, x1, y1 = self.polygon.bounds
        out = np.empty(0, dtype=complex)
        m = max(n, 16)
        while out.size < n and m < 1 << 22:
            u = _r2_sequence(m, phase)
            z = (x0 + u[:, 0] * (x1 - x0)) + 1j * (y0 + u[:, 1] * (y1 - y0))
            out = z[shapely.contains_xy(self.polygon, z.real, z.imag)]
            m *= 2
        return out[:n]

    def margin(self, z):
        z = np.atleast_1d(_z(z))
        p = _pts(z)
        d = shapely.distance(self._boundary, p)
        inside = shapely.contains_xy(self.polygon, z.real, z.imag) | (d == 0)
        return np.where(inside, d, -d)

    def bounding_box(self):
        x0, y0, x1, y1 = self.polygon.bounds
        return x0, x1, y0, y1

    def shape(self):
        return self.polygon

    def describe(self):
        return {"type": "polygon", "wkt": self.polygon.wkt}


class NeighborhoodRegion(Region):
    """Closed ``r``-neighborhood ``{z : dist(z, core) <= r}`` of a core set."""

    kind = "neighborhood"

    def __init__(self, core: "Core", radius: float):
        if not radius > 0:
            raise GeometryError("neighborhood radius must be positive")
        self.core = core
        self.radius = float(radius)
        self._poly = core.shape().buffer(self.radius, quad_segs=_QUAD_SEGS)

    def boundary_samples(self, n: int, phase: float = 0.0):
        raw = PolygonRegion(self._poly).boundary_samples(n, phase)
        return self.core.project_to_level(raw, self.radius)

    def interior_samples(self, n: int, phase: float = 0.0):
        return PolygonRegion(self._poly).interior_samples(n, phase)

    def margin(self, z):
        return self.radius - self.core.distance(z)

    def bounding_box(self):
        x0, y0, x1, y1 = self._poly.bounds
        return x0, x1, y0, y1

    def shape(self):
        return self._poly

    def describe(self):
        return {"type": "neighborhood", "radius": self.radius, "core": self.core.describe()}


class UnionRegion(Region):
    """Finite union of pairwise disjoint regions."""

    kind = "union"

    def __init__(self, parts: Iterable[Region]):
        flat: list[Region] = []
        for p in parts:
            flat.extend(p.parts)
        if not flat:
            raise GeometryError("empty union")
        self._parts = tuple(flat)

    @property
    def parts(self):
        return self._parts

    def boundary_samples(self, n: int, phase: float = 0.0):
        return np.concatenate([p.boundary_samples(n, phase) for p in self._parts])

    def interior_samples(self, n: int, phase: float = 0.0):
        return np.concatenate([p.interior_samples(n, phase) for p in self._parts])

    def margin(self, z):
        z = _z(z)
        out = np.full(np.shape(z), -np.inf)
        for p in self._parts:
            out = np.maximum(out, p.margin(z))
        return out

    def bounding_box(self):
        boxes = np.array([p.bounding_box() for p in self._parts])
        return boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max()

    def shape(self):
        return shapely.union_all([p.shape() for p in self._parts])

    def describe(self):
        return {"type": "union", "parts": [p.describe() for p in self._parts]}


class SampledRegion(Region):
    """Region known through a membership test plus a sampled boundary curve.

    Used for images of rectangles under closed-form conformal maps, where
    membership is decided exactly through the inverse map and distances come
    from a dense boundary polyline.
    """

    kind = "sampled"

    def __init__(self, boundary_curve: np.ndarray, inside: Callable[[np.ndarray], np.ndarray],
                 interior_fn: Callable[[int, float], np.ndarray], label: str = ""):
        curve = _z(boundary_curve)
        if curve[0] != curve[-1]:
            curve = np.append(curve, curve[0])
        self._curve = curve
        self._line = LineString(np.column_stack([curve.real, curve.imag]))
        self._inside = inside
        self._interior_fn = interior_fn
        self.label = label

    def boundary_samples(self, n: int, phase: float = 0.0):
        return _resample_curve(self._curve, n, phase)

    def interior_samples(self, n: int, phase: float = 0.0):
        return self._interior_fn(n, phase)

    def margin(self, z):
        z = np.atleast_1d(_z(z))
        d = shapely.distance(self._line, _pts(z))
        return np.where(self._inside(z), d, -d)

    def shape(self):
        return Polygon(np.column_stack([self._curve.real, self._curve.imag]))

    def describe(self):
        return {"type": "sampled", "label": self.label}


def region_from_description(desc: dict) -> Region:
    """Inverse of ``Region.describe`` for the serializable region kinds."""
    t = desc["type"]
    if t == "disk":
        return Disk(complex(*desc["center"]), desc["radius"])
    if t == "point":
        return PointRegion(complex(*desc["point"]))
    if t == "rect":
        return Rect(*desc["bounds"])
    if t == "polygon":
        return PolygonRegion(shapely.from_wkt(desc["wkt"]))
    if t == "union":
        return UnionRegion(region_from_description(p) for p in desc["parts"])
    raise GeometryError(f"region type {t!r} cannot be rebuilt from a description")


# ---------------------------------------------------------------------------
# Cores: the sets whose metric neighborhoods form exhaustions
# ---------------------------------------------------------------------------
class Core:
    """A closed set with an exact distance function and a shapely proxy."""

    def distance(self, z) -> np.ndarray:
        raise NotImplementedError

    def shape(self) -> BaseGeometry:
        raise NotImplementedError

    def reference_samples(self) -> np.ndarray:
        """Points representing the set (for Hausdorff surrogates)."""
        raise NotImplementedError

    def project_to_level(self, z: np.ndarray, r: float) -> np.ndarray:
        """Nudge points near the level set ``dist = r`` onto it (by bisection
        along the direction away from their nearest core point)."""
        return z

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Continuum(Core):
    """A planar continuum given by ordered samples (polyline or point cloud).

    ``resolution`` is the declared maximal gap between consecutive samples;
    it bounds how far the polyline may stray from the true set.
    """

    samples: np.ndarray
    resolution: float = 1.0 / 64
    kind: str = "polyline"

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.samples, dtype=complex)).copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if s.size == 0:
            raise GeometryError("continuum has no samples")
        if not np.all(np.isfinite(s)):
            raise GeometryError("continuum samples must be finite")
        if self.kind not in ("polyline", "points"):
            raise GeometryError(f"unknown continuum kind {self.kind!r}")
        far = np.abs(s) >= NORMALIZATION_RADIUS
        if np.any(far):
            worst = s[np.argmax(np.abs(s))]
            raise GeometryError(f"continuum sample {worst} lies outside the disk of radius 1/3 about 0")
        if not self.resolution > 0:
            raise GeometryError("resolution must be positive")
        if s.size > 1 and self.max_gap() > self.resolution * (1 + 1e-12):
            raise GeometryError(f"consecutive sample gap {self.max_gap():.3g} exceeds the declared resolution "
                                f"{self.resolution:.3g}")

    def max_gap(self) -> float:
        return float(np.max(np.abs(np.diff(self.samples)))) if self.samples.size > 1 else 0.0

    @property
    def diameter_bound(self) -> float:
        s = self.samples
        if s.size == 1:
            return 0.0
        tree = s[:, None] - s[None, :] if s.size <= 4096 else None
        if tree is not None:
            return float(np.max(np.abs(tree)))
        return float(2 * np.max(np.abs(s - s.mean())))

    def shape(self):
        s = self.samples
        if s.size == 1:
            return Point(s[0].real, s[0].imag)
        if self.kind == "points":
            return MultiPoint(np.column_stack([s.real, s.imag]))
        return LineString(np.column_stack([s.real, s.imag]))

    def distance(self, z):
        z = _z(z)
        scalar = z.ndim == 0
        s = self.samples
        if s.size == 1 or self.kind == "points":
            d = np.min(np.abs(np.atleast_1d(z)[:, None] - s[None, :]), axis=1)
        else:
            d = _polyline_distance(np.atleast_1d(z), s)
        return float(d[0]) if scalar else d.reshape(z.shape)

    def reference_samples(self):
        return np.asarray(self.samples)

    def project_to_level(self, z, r):
        return _project_level(self.distance, z, r, self.shape())

    def describe(self):
        return {"type": "continuum", "kind": self.kind, "resolution": self.resolution,
                "samples": [[float(v.real), float(v.imag)] for v in self.samples]}

    @classmethod
    def segment(cls, a: complex = -1 / 6, b: complex = 1 / 6, resolution: float = 1.0 / 128) -> "Continuum":
        """Straight segment from ``a`` to ``b`` sampled at the given resolution."""
        n = max(2, int(math.ceil(abs(b - a) / resolution)) + 1)
        return cls(np.linspace(complex(a), complex(b), n), resolution)

    @classmethod
    def singleton(cls, p: complex = 0.0) -> "Continuum":
        return cls(np.array([complex(p)]), 1.0 / 64)

    @classmethod
    def from_text(cls, text: str, resolution: float, kind: str = "polyline") -> "Continuum":
        pts = []
        for ln, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise GeometryError(f"line {ln}: expected 're im', got {line!r}")
            try:
                pts.append(complex(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise GeometryError(f"line {ln}: not numeric: {line!r}") from exc
        return cls(np.array(pts), resolution, kind)

    def to_text(self) -> str:
        return "".join(f"{repr(float(v.real))} {repr(float(v.imag))}\n" for v in self.samples)


def _polyline_distance(z: np.ndarray, verts: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Exact distance from points to a polyline (vectorized segment projection)."""
    a = verts[:-1]
    ab = verts[1:] - a
    ab2 = np.abs(ab) ** 2
    out = np.empty(z.size)
    for i in range(0, z.size, chunk):
        zz = z[i:i + chunk, None]
        t = np.where(ab2 > 0, ((zz - a) * np.conj(ab)).real / np.where(ab2 > 0, ab2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        out[i:i + chunk] = np.min(np.abs(zz - (a + t * ab)), axis=1)
    return out


def _project_level(dist: Callable, z: np.ndarray, r: float, shape: BaseGeometry) -> np.ndarray:
    """Move each point radially (away from its nearest core point) to ``dist = r``."""
    z = _z(z).copy()
    if z.size == 0:
        return z
    nearest = shapely.shortest_line(shape, _pts(z))
    start = np.array([complex(*ln.coords[0]) for ln in nearest])
    direction = z - start
    norm = np.abs(direction)
    ok = norm > 0
    u = np.where(ok, direction / np.where(ok, norm, 1.0), 0)
    lo = np.zeros(z.size)
    hi = np.full(z.size, 2.0 * r)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        inside = dist(start + mid * u) <= r
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return np.where(ok, start + lo * u, z)


class FilledCore(Core):
    """A filled closed region (disk or polygon) used as an exhaustion core."""

    def __init__(self, region: Region):
        if region.kind not in ("disk", "polygon", "rect"):
            raise GeometryError("filled core must be a disk, rectangle or polygon")
        self.region = region

    def distance(self, z):
        return np.maximum(0.0, -self.region.margin(z))

    def shape(self):
        return self.region.shape()

    def reference_samples(self):
        return self.region.boundary_samples(512)

    def project_to_level(self, z, r):
        if self.region.kind == "disk":
            c, rad = self.region.center, self.region.radius
            w = _z(z) - c
            return c + (rad + r) * w / np.abs(w)
        return _project_level(self.distance, z, r, self.shape())

    def describe(self):
        return {"type": "filled", "region": self.region.describe()}


class DomainCore(Core):
    """Closure of an unbounded domain given by a membership test and a long
    sampled piece of its boundary; distances are exact near that piece."""

    def __init__(self, inside: Callable[[np.ndarray], np.ndarray], boundary_curve: np.ndarray,
                 frame_polygon: BaseGeometry, label: str = ""):
        self._inside = inside
        curve = _z(boundary_curve)
        self._line = LineString(np.column_stack([curve.real, curve.imag]))
        self._curve = curve
        self._frame = frame_polygon
        self.label = label

    def distance(self, z):
        z = _z(z)
        flat = np.atleast_1d(z)
        d = shapely.distance(self._line, _pts(flat))
        d = np.where(self._inside(flat), 0.0, d)
        return float(d[0]) if z.ndim == 0 else d.reshape(z.shape)

    def shape(self):
        return self._frame

    def reference_samples(self):
        return self._curve

    def project_to_level(self, z, r):
        return _project_level(self.distance, z, r, self._line)

    def describe(self):
        return {"type": "domain", "label": self.label}


# ---------------------------------------------------------------------------
# Exhaustions and disk schedules
# ---------------------------------------------------------------------------
@dataclass
class Exhaustion:
    """Nested closed neighborhoods ``X_0 ⊃ X_1 ⊃ ... ⊃ X_M`` of a core."""

    core: Core
    radii: np.ndarray
    levels: list
    gaps: np.ndarray
    resolution: float
    certified_gaps: np.ndarray = field(default=None)  # type: ignore[assignment]

    @property
    def level_count(self) -> int:
        return len(self.levels)

    def certify(self, n_boundary: int = 2048) -> np.ndarray:
        """Sampled lower bounds for ``dist(X_j, boundary of X_{j-1})``.

        Each boundary sample of ``X_j`` at core distance ``d`` is at least
        ``r_{j-1} - d`` away from the complement of ``X_{j-1}``.
        """
        out = []
        ref = self.core.reference_samples()
        for j in range(1, len(self.levels)):
            b = self.levels[j].boundary_samples(n_boundary)
            d = self.core.distance(b)
            out.append(float(np.min(self.radii[j - 1] - d)))
            if np.any(self.core.distance(ref) > self.radii[j]):
                raise GeometryError(f"a reference sample escapes level {j}")
        self.certified_gaps = np.array(out)
        return self.certified_gaps


def exhaustion_radii(rho: float, count: int) -> np.ndarray:
    return rho * 0.5 ** np.arange(count)


def build_exhaustion(J: Continuum, M: int, radii: Sequence[float] | None = None) -> Exhaustion:
    """Levels ``X_0..X_M`` as closed ``r_j``-neighborhoods of the continuum.

    By default ``r_j = rho * 2^-j`` with ``rho = min(1/3, 1/3 - max|J|)``, the
    largest geometric sequence of ratio one half keeping ``X_0`` inside the
    closed disk of radius 1/3.
    """
    if M < 1:
        raise GeometryError("an exhaustion needs at least two levels (M >= 1)")
    if radii is None:
        rho = min(NORMALIZATION_RADIUS, NORMALIZATION_RADIUS - float(np.max(np.abs(J.samples))))
        r = exhaustion_radii(rho, M + 1)
    else:
        r = np.asarray(radii, dtype=float)
        if r.size != M + 1 or np.any(np.diff(r) >= 0) or r[-1] <= 0:
            raise GeometryError("radii must be positive and strictly decreasing, one per level")
        if float(np.max(np.abs(J.samples))) + r[0] > NORMALIZATION_RADIUS + 1e-15:
            raise GeometryError("X_0 would leave the closed disk of radius 1/3")
    if J.samples.size > 1 and J.kind == "polyline" and J.max_gap() > r[-1] * (1 + 1e-9):
        raise ResolutionTooCoarse(f"sample gap {J.max_gap():.3g} exceeds the finest radius r_M = {r[-1]:.3g}")
    return neighborhood_exhaustion(J, r, J.resolution)


def neighborhood_exhaustion(core: Core, radii: Sequence[float], resolution: float = 0.0) -> Exhaustion:
    r = np.asarray(radii, dtype=float)
    levels = [NeighborhoodRegion(core, rj) for rj in r]
    ex = Exhaustion(core=core, radii=r, levels=levels, gaps=r[:-1] - r[1:], resolution=resolution)
    return ex


@dataclass
class DiskSchedule:
    """Level-``m`` disks ``B_{m,n}``, ``1 <= n <= 2^m``."""

    disks: dict
    radii: list
    margins: dict
    eps_h: list

    @property
    def max_level(self) -> int:
        return len(self.radii) - 1

    def centers(self, levels: Iterable[int] | None = None) -> np.ndarray:
        keys = sorted(self.disks)
        if levels is not None:
            keep = set(levels)
            keys = [k for k in keys if k[0] in keep]
        return np.array([self.disks[k].center for k in keys])

    def level(self, m: int) -> list[Disk]:
        return [self.disks[(m, n)] for n in range(1, 2 ** m + 1)]


def _mid_curves(core: Core, t: float, window: BaseGeometry | None) -> list[np.ndarray]:
    """Closed/open polylines at distance ``t`` from the core, oriented and
    started at their topmost (then leftmost) vertex for determinism."""
    poly = shapely.orient_polygons(core.shape().buffer(t, quad_segs=4 * _QUAD_SEGS)) \
        if hasattr(shapely, "orient_polygons") else core.shape().buffer(t, quad_segs=4 * _QUAD_SEGS)
    boundary = poly.boundary
    if window is not None:
        boundary = boundary.intersection(window)
    geoms = [g for g in getattr(boundary, "geoms", [boundary]) if not g.is_empty and g.length > 0]
    curves = []
    for g in geoms:
        c = _ring_coords(g)
        if g.is_ring:
            # counterclockwise, starting at the topmost-leftmost vertex
            body = c[:-1]
            area = np.sum((body.real * np.roll(body.imag, -1)) - (np.roll(body.real, -1) * body.imag))
            if area < 0:
                body = body[::-1]
            top = np.lexsort((body.real, -np.round(body.imag, 12)))[0]
            body = np.roll(body, -top)
            c = np.append(body, body[0])
        curves.append(c)
    curves.sort(key=lambda c: (-round(float(np.max(c.imag)), 9), round(float(np.min(c.real)), 9)))
    return curves


def _arclength_points(curves: list[np.ndarray], fractions: np.ndarray) -> np.ndarray:
    lengths = np.array([np.sum(np.abs(np.diff(c))) for c in curves])
    total = lengths.sum()
    starts = np.concatenate([[0.0], np.cumsum(lengths)])
    out = []
    for f in fractions:
        s = f * total
        i = min(int(np.searchsorted(starts, s, side="right") - 1), len(curves) - 1)
        c = curves[i]
        seg = np.abs(np.diff(c))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        local = s - starts[i]
        k = int(np.clip(np.searchsorted(cum, local, side="right") - 1, 0, len(seg) - 1))
        frac = (local - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append(c[k] + frac * (c[k + 1] - c[k]))
    return np.array(out)


def disk_radius(gap_next: float, m: int) -> float:
    return min(gap_next / 4.0, 2.0 ** (-m - 2))


def place_disks(X: Exhaustion, J: Core, M: int, window: BaseGeometry | None = None) -> DiskSchedule:
    """Place ``2^m`` disjoint disks in each annular shell ``Int(X_m) \\ X_{m+1}``.

    Centers sit at arclength positions ``(n - 1/2) / 2^m`` along the shell's
    mid-curve (the level set of the core distance halfway between ``r_m`` and
    ``r_{m+1}``), optionally clipped to ``window``.
    """
    if M < 0:
        raise GeometryError("max level must be nonnegative")
    if M + 1 >= X.level_count:
        raise GeometryError(f"level {M} needs X_{M + 1} but the exhaustion stops at X_{X.level_count - 1}")
    r = X.radii
    disks, margins, radii = {}, {}, []
    for m in range(M + 1):
        b = disk_radius(r[m] - r[m + 1], m)
        if radii and not b < radii[-1]:
            b = 0.5 * radii[-1]
        radii.append(b)
        t = 0.5 * (r[m] + r[m + 1])
        curves = _mid_curves(J, t, window)
        if not curves:
            raise NoRoom(m, "the mid-curve is empty")
        count = 2 ** m
        centers = _arclength_points(curves, (np.arange(count) + 0.5) / count)
        centers = J.project_to_level(centers, t)
        d = J.distance(centers)
        slack = np.minimum(r[m] - d - b, d - b - r[m + 1])
        if np.any(slack < b / 2 - 1e-12):
            raise NoRoom(m, f"a disk comes within {float(np.min(slack)):.3g} of the shell boundary")
        if count > 1:
            sep = np.abs(centers[:, None] - centers[None, :]) + np.diag(np.full(count, np.inf))
            if np.min(sep) <= 2 * b:
                raise NoRoom(m, f"centers only {float(np.min(sep)):.3g} apart for radius {b:.3g}")
        for n in range(1, count + 1):
            disks[(m, n)] = Disk(complex(centers[n - 1]), b)
            margins[(m, n)] = float(slack[n - 1])
    sched = DiskSchedule(disks=disks, radii=radii, margins=margins, eps_h=[])
    ref = J.reference_samples()
    for m in range(M + 1):
        c = sched.centers(range(m, M + 1))
        sched.eps_h.append(directed_distance(ref, c))
    return sched


# ---------------------------------------------------------------------------
# Stations and window families
# ---------------------------------------------------------------------------
def station_center(m: int, n: int) -> complex:
    return complex(4 * m, 2 * n)


@dataclass
class StationLayout:
    """Unit station disks ``Delta_m = D(4m, 1)`` and ``Delta_{m,n} = D(4m + 2ni, 1)``."""

    deltas: dict
    delta_mns: dict

    def all_disks(self) -> list[tuple[tuple, Disk]]:
        out = [(("D", m), d) for m, d in sorted(self.deltas.items())]
        out += [(("D", m, n), d) for (m, n), d in sorted(self.delta_mns.items())]
        return out

    def pairwise_disjoint(self) -> bool:
        disks = [d for _, d in self.all_disks()]
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                if not disks[i].disjoint_from(disks[j]):
                    return False
        return True


def station_layout(M: int) -> StationLayout:
    if M < 1:
        raise GeometryError("station layout needs M >= 1")
    deltas = {m: Disk(complex(4 * m, 0), 1.0) for m in range(1, M + 1)}
    mns = {(m, n): Disk(station_center(m, n), 1.0) for m in range(1, M + 1) for n in range(1, 2 ** m + 1)}
    return StationLayout(deltas, mns)


@dataclass
class WindowFamily:
    """Bounded representatives ``C̄_k`` of the exhaustion ``C_1 ⊂ C_2 ⊂ ...``.

    ``kind`` is ``"nested-simply-connected"`` or ``"left-half-plane"``; in
    the second case every window must also lie in ``{Re z < 4k - 2}``.
    """

    kind: str
    windows: dict = field(default_factory=dict)

    def add(self, k: int, region: Region) -> None:
        if self.kind == "left-half-plane":
            x0, x1, _, _ = region.bounding_box()
            if x1 >= 4 * k - 2:
                raise GeometryError(f"window {k} reaches Re z = {x1:.3g}, outside Re z < {4 * k - 2}")
        self.windows[k] = region

    def stations_in_gap(self, k: int, stations: Iterable[Region]) -> float:
        """Least margin by which ``stations`` avoid ``C̄_k`` (positive = clear)."""
        w = self.windows[k]
        worst = np.inf
        for s in stations:
            worst = min(worst, float(np.min(-w.margin(s.boundary_samples(256)))),
                        float(np.min(-w.margin(s.interior_samples(64)))) if s.kind != "point" else np.inf)
        return worst


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------
def _as_samples(A, density: int) -> np.ndarray:
    if isinstance(A, Region):
        return A.samples(density, density // 4)
    if isinstance(A, Core):
        return A.reference_samples()
    arr = np.atleast_1d(np.asarray(A, dtype=complex))
    return arr


def directed_distance(A: np.ndarray, B: np.ndarray) -> float:
    """``max_{a in A} min_{b in B} |a - b|`` via a k-d tree."""
    A = np.atleast_1d(_z(A))
    B = np.atleast_1d(_z(B))
    tree = cKDTree(np.column_stack([B.real, B.imag]))
    d, _ = tree.query(np.column_stack([A.real, A.imag]))
    return float(np.max(d))


def hausdorff_distance(A, B, density: int = 4096) -> float:
    """Symmetric Hausdorff distance of two sample sets (regions are sampled)."""
    a = _as_samples(A, density)
    b = _as_samples(B, density)
    if a.size == 0 or b.size == 0:
        raise GeometryError("Hausdorff distance of an empty set")
    return max(directed_distance(a, b), directed_distance(b, a))


def step_count(m: int) -> int:
    """``N_m = 2^(m+1) - 2``: iterates from the start region to station ``Delta_m``."""
    if m < 0:
        raise ValueError("level must be nonnegative")
    return 2 ** (m + 1) - 2
