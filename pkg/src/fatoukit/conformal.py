"""Closed-form conformal maps of the right half-plane and the Baker model.

A map ``phi`` from ``H = {Re z > 0}`` onto a domain ``U`` is written as a
pipeline of elementary steps applied left to right, for example::

    square; affine(-1, 0)        # z -> -z**2

Steps: ``affine(a, b)`` (``a z + b``), ``inv`` (``1/z``), ``square``
(inverse: principal square root), ``exp`` (inverse: principal log) and
``log`` (inverse: exp). Every step carries its inverse and derivative, so
``h = phi o T o phi^-1`` with ``T(z) = z + 1`` is available in closed form.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import LineString

from .dynamics import AbsorbingDomain, AbsorbingReport, verify_absorbing
from .geometry import Rect


class ConformalError(ValueError):
    """Base class for descriptor and model failures."""


class NotInvertible(ConformalError):
    pass


class GapNotFound(ConformalError):
    pass


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Step:
    name: str
    a: complex = 1.0
    b: complex = 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.name == "affine":
                return self.a * z + self.b
            if self.name == "inv":
                return 1.0 / z
            if self.name == "square":
                return z * z
            if self.name == "exp":
                return np.exp(z)
            if self.name == "log":
                return np.log(z)
        raise ConformalError(f"unknown step {self.name!r}")

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        with np.errstate(all="ignore"):
            if self.name == "affine":
                return (w - self.b) / self.a
            if self.name == "inv":
                return 1.0 / w
            if self.name == "square":
                return np.sqrt(w)
            if self.name == "exp":
                return np.log(w)
            if self.name == "log":
                return np.exp(w)
        raise ConformalError(f"unknown step {self.name!r}")

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.name == "affine":
                return np.full(z.shape, self.a, dtype=complex)
            if self.name == "inv":
                return -1.0 / (z * z)
            if self.name == "square":
                return 2.0 * z
            if self.name == "exp":
                return np.exp(z)
            if self.name == "log":
                return 1.0 / z
        raise ConformalError(f"unknown step {self.name!r}")

    def to_text(self) -> str:
        if self.name == "affine":
            return f"affine({_fmt(self.a)}, {_fmt(self.b)})"
        return self.name


def _fmt(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    return f"{c.real!r}{'+' if c.imag >= 0 else '-'}{abs(c.imag)!r}j"


_STEP_RE = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class ConformalMap:
    """Composition of :class:`Step` objects, applied first to last."""

    steps: tuple

    @classmethod
    def parse(cls, text: str) -> "ConformalMap":
        steps = []
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            m = _STEP_RE.match(chunk)
            if not m:
                raise ConformalError(f"cannot parse step {chunk.strip()!r}")
            name, args = m.group(1), m.group(2)
            if name == "affine":
                try:
                    vals = [complex(t.replace(" ", "")) for t in (args or "").split(",")]
                except ValueError as exc:
                    raise ConformalError(f"bad affine arguments {args!r}") from exc
                if len(vals) != 2:
                    raise ConformalError("affine takes two arguments (slope, shift)")
                if vals[0] == 0:
                    raise NotInvertible("affine step with zero slope")
                steps.append(Step("affine", vals[0], vals[1]))
            elif name in ("inv", "square", "exp", "log"):
                if args not in (None, ""):
                    raise ConformalError(f"step {name!r} takes no arguments")
                steps.append(Step(name))
            else:
                raise ConformalError(f"unknown step {name!r}")
        if not steps:
            raise ConformalError("empty conformal map")
        return cls(tuple(steps))

    def to_text(self) -> str:
        return "; ".join(s.to_text() for s in self.steps)

    def __call__(self, z):
        w = np.asarray(z, dtype=complex)
        for s in self.steps:
            w = s(w)
        return w if np.ndim(z) else complex(w)

    def inverse(self, w):
        z = np.asarray(w, dtype=complex)
        for s in reversed(self.steps):
            z = s.inverse(z)
        return z if np.ndim(w) else complex(z)

    def derivative(self, z):
        w = np.asarray(z, dtype=complex)
        d = np.ones(w.shape, dtype=complex)
        for s in self.steps:
            d = d * s.derivative(w)
            w = s(w)
        return d if np.ndim(z) else complex(d)

    def is_affine(self) -> bool:
        return all(s.name == "affine" for s in self.steps)


class Conjugate:
    """``h = phi o T o phi^-1`` with ``T(z) = z + shift``."""

    def __init__(self, phi: ConformalMap, shift: float = 1.0):
        self.phi = phi
        self.shift = shift

    def __call__(self, w):
        return self.phi(np.asarray(self.phi.inverse(w)) + self.shift) if np.ndim(w) else \
            complex(self.phi(self.phi.inverse(w) + self.shift))

    def derivative(self, w):
        z = np.asarray(self.phi.inverse(w))
        with np.errstate(all="ignore"):
            d = np.asarray(self.phi.derivative(z + self.shift)) / np.asarray(self.phi.derivative(z))
        return d if np.ndim(w) else complex(d)


# ---------------------------------------------------------------------------
# Baker model
# ---------------------------------------------------------------------------
@dataclass
class ZetaFrame:
    """Rectangles in the ``zeta = phi^-1(w)`` plane that bound the sampling.

    ``window`` is the piece of ``H`` whose image is the bounded
    representative of ``Ū``; ``w_outer`` and ``w_inner`` frame the absorbing
    domain ``W = phi(H_1)`` (the left edge ``Re zeta = 1`` is its genuine
    boundary); ``boundary_span`` is the stretch of ``Re zeta = 0`` along
    which the disk schedule accumulates.
    """

    window: tuple = (0.0, 34.0, 27.5, 32.5)
    w_outer: tuple = (1.0, 4.0, 28.0, 32.0)
    w_inner: tuple = (1.0, 2.0, 29.0, 31.0)
    boundary_span: tuple = (-3.0, -1.0)


def _rect_boundary(box, n: int) -> np.ndarray:
    x0, x1, y0, y1 = box
    return Rect(x0, x1, y0, y1).boundary_samples(n)


@dataclass
class BakerModel:
    """Conjugacy model ``h``, absorbing domain ``W`` and gap ``d`` for ``U = phi(H)``."""

    phi: ConformalMap
    delta: float
    h: Conjugate
    W: AbsorbingDomain
    d: float
    frame: ZetaFrame
    report: AbsorbingReport
    checks: dict = field(default_factory=dict)

    def inside_u(self, w) -> np.ndarray:
        """Membership in ``U`` through the inverse branch."""
        z = np.asarray(self.phi.inverse(w))
        back = np.asarray(self.phi(z))
        ok = np.abs(back - np.asarray(w)) <= 1e-9 * np.maximum(1.0, np.abs(np.asarray(w)))
        return ok & (z.real > 0)

    def window_region(self, n: int = 2048) -> np.ndarray:
        """Boundary polygon of the bounded representative of ``Ū``."""
        return self.phi(_rect_boundary(self.frame.window, n))

    def w_samples(self, n: int, phase: float = 0.0) -> np.ndarray:
        """``n`` deterministic samples of ``W̄`` inside the inner frame."""
        x0, x1, y0, y1 = self.frame.w_inner
        r = Rect(x0, x1, y0, y1)
        nb = max(4, n // 2)
        z = np.concatenate([r.boundary_samples(nb, phase), r.interior_samples(n - nb, phase)])
        return self.phi(z)

    def u_boundary_curve(self, span: float = 60.0, n: int = 4096) -> np.ndarray:
        t = np.linspace(-span, span, n)
        return self.phi(1j * t)

    def depth(self, w, span: float = 60.0) -> np.ndarray:
        """Signed distance to the sampled ``∂U`` (positive inside ``U``)."""
        if "_line" not in self.__dict__:
            c = self.u_boundary_curve(span, 8193)
            self.__dict__["_line"] = LineString(np.column_stack([c.real, c.imag]))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        d = shapely.distance(self.__dict__["_line"], shapely.points(w.real, w.imag))
        return np.where(self.inside_u(w), d, -d)

    def inset_samples(self, delta: float, n_boundary: int, n_interior: int = 0,
                      phase: float = 0.0) -> np.ndarray:
        """Samples of ``U^-delta`` inside the window.

        Boundary points are ``phi(i t)`` pushed a distance ``delta`` along
        the inward normal ``phi'(i t) / |phi'(i t)|`` (exact for affine
        ``phi``); interior points are window samples of depth beyond ``delta``.
        """
        x0, x1, y0, y1 = self.frame.window
        u = (np.arange(n_boundary) + 0.5 + phase) / n_boundary
        t = 1j * (y0 + (u % 1.0) * (y1 - y0))
        d = np.asarray(self.phi.derivative(t))
        pts = np.asarray(self.phi(t)) + delta * d / np.abs(d)
        if n_interior:
            z = np.asarray(self.phi(Rect(max(x0, 1e-9), x1, y0, y1).interior_samples(4 * n_interior, phase)))
            z = z[self.depth(z) > delta][:n_interior]
            pts = np.concatenate([pts, z])
        return pts

    def describe(self) -> dict:
        return {"phi": self.phi.to_text(), "delta": self.delta, "d": self.d,
                "frame": {"window": list(self.frame.window), "w_outer": list(self.frame.w_outer),
                          "w_inner": list(self.frame.w_inner),
                          "boundary_span": list(self.frame.boundary_span)}}


def _check_inverse(phi: ConformalMap, box) -> float:
    x0, x1, y0, y1 = box
    # the closed edge Re z = 0 sits on branch cuts of some inverses
    z = Rect(max(x0, 1e-6), x1, y0, y1).samples(256, 256)
    back = np.asarray(phi.inverse(phi(z)))
    return float(np.max(np.abs(back - z) / np.maximum(1.0, np.abs(z))))


def make_baker_model(phi: ConformalMap | str, delta: float, n_max: int = 30,
                     frame: ZetaFrame | None = None, n_boundary: int = 1024) -> BakerModel:
    """Materialize ``h`` and ``W`` and certify the absorbing-domain properties on samples."""
    if isinstance(phi, str):
        phi = ConformalMap.parse(phi)
    if not delta > 0:
        raise ConformalError("delta must be positive")
    frame = frame or ZetaFrame()
    for box in (frame.window, frame.w_outer, frame.w_inner):
        if box[0] < 0 or not (box[1] > box[0] and box[3] > box[2]):
            raise ConformalError(f"frame box {box} must be a nondegenerate rectangle in Re z >= 0")
    err = max(_check_inverse(phi, frame.window), _check_inverse(phi, frame.w_outer))
    if not err <= 1e-9:
        raise NotInvertible(f"the inverse branch does not undo the map on the frame (error {err:.3g})")
    h = Conjugate(phi, 1.0)
    outer = _rect_boundary(frame.w_outer, n_boundary)
    genuine = np.abs(outer.real - frame.w_outer[0]) <= 1e-12
    x0, x1, y0, y1 = frame.w_inner
    inner_box = Rect(x0, x1, y0, y1)
    W = AbsorbingDomain(phi(outer), genuine, phi(inner_box.samples(n_boundary // 2, n_boundary // 8)))
    report = verify_absorbing(h, W, n_max)
    d = report.min_gap
    if not d > 0 or report.min_margin <= 0:
        raise GapNotFound(f"nesting or gap fails on samples (margin {report.min_margin:.3g}, gap {d:.3g})")
    model = BakerModel(phi, delta, h, W, d, frame, report)
    # W̄ ⊂ U, h(Ū) ⊂ U and escape of h^n on W, on samples
    wz = W.inner
    model.checks["W_in_U"] = float(np.min(np.asarray(phi.inverse(wz)).real))
    x0, x1, y0, y1 = frame.window
    uz = phi(Rect(x0 + 1e-9, x1, y0, y1).samples(256, 64))
    model.checks["h_U_in_U"] = float(np.min(np.asarray(phi.inverse(h(uz))).real))
    far = np.asarray(wz)
    for _ in range(n_max):
        far = h(far)
    model.checks["escape"] = float(np.min(np.abs(far)) - np.max(np.abs(wz)))
    if not (model.checks["W_in_U"] > 0 and model.checks["h_U_in_U"] > 0):
        raise GapNotFound("W̄ or h(Ū) leaves U on samples")
    return model
