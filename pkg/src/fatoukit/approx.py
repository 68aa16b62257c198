"""Simultaneous polynomial approximation on disjoint compacts with
Hermite interpolation, sup-norm certification and perturbation budgets.

The solver works in a scaled Newton basis on discrete Leja points of the
pooled boundary samples, which stays well conditioned at high degree. The
interpolation conditions are linear rows on the coefficient vector; they are
eliminated by the nullspace method and the free part is a weighted
least-squares fit with Lawson reweighting. Fitting in one basis (rather than
fixing a low-degree interpolant first and correcting it) avoids the large
cancellations that otherwise cap the attainable accuracy.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lstsq as _lstsq, solve_triangular

from .geometry import Disk, PointRegion, Region, circle_points
from .polynomial import PolynomialMap, newton_basis, newton_basis_derivative

DEFAULT_DEGREE_CAP = 96
HERMITE_TOLERANCE = 1e-10


class ApproximationError(RuntimeError):
    """Base class for solver failures."""


class CompactsNotDisjoint(ApproximationError):
    pass


class DegreeCapExceeded(ApproximationError):
    def __init__(self, best: PolynomialMap, certificate: "Certificate"):
        worst = max(range(len(certificate.labels)), key=lambda i: certificate.ratios[i])
        super().__init__(
            f"degree cap {certificate.degree_cap} reached; best degree {certificate.degree} leaves "
            f"{certificate.labels[worst]!r} at error {certificate.errors[worst]:.3g} "
            f"against tolerance {certificate.tolerances[worst]:.3g}")
        self.best = best
        self.certificate = certificate


class ConstraintOutsideCompacts(UserWarning):
    pass


class TubeEscapesG(ApproximationError):
    pass


@dataclass
class CompactTarget:
    """Approximate ``target`` on ``compact`` to within ``tolerance``."""

    compact: Region
    target: Callable
    tolerance: float
    label: str = ""

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive for {self.label or 'compact'}")


@dataclass(frozen=True)
class HermiteConstraint:
    """Interpolation condition ``p(point) = value`` (and ``p'(point) = derivative``)."""

    point: complex
    value: complex
    derivative: complex | None = None


@dataclass
class SupEstimate:
    """Sampled sup-norm of ``p - target`` and its one-sided sampling gap.

    ``value`` is the maximum over the samples; the true supremum over the
    compact is at most ``value + gap`` (Lipschitz bound times half the sample
    spacing, estimated on a slightly enlarged boundary).
    """

    value: float
    gap: float
    samples: int

    @property
    def bound(self) -> float:
        return self.value + self.gap

    def __float__(self) -> float:
        return self.value


@dataclass
class Certificate:
    labels: list
    tolerances: list
    errors: list
    gaps: list
    residuals: list
    degree: int
    degree_cap: int
    history: list = field(default_factory=list)

    @property
    def ratios(self) -> list:
        return [e / t for e, t in zip(self.errors, self.tolerances)]

    @property
    def max_residual(self) -> float:
        return max((r for pair in self.residuals for r in pair), default=0.0)

    @property
    def success(self) -> bool:
        return all(e <= t for e, t in zip(self.errors, self.tolerances)) and self.max_residual <= HERMITE_TOLERANCE

    def as_dict(self) -> dict:
        return {
            "degree": self.degree,
            "degree_cap": self.degree_cap,
            "compacts": [
                {"label": l, "tolerance": t, "error": e, "gap": g}
                for l, t, e, g in zip(self.labels, self.tolerances, self.errors, self.gaps)
            ],
            "max_residual": self.max_residual,
        }


def _target_values(target, z):
    return np.asarray(target(z), dtype=complex)


def _target_derivative(target, z):
    if hasattr(target, "derivative"):
        return np.asarray(target.derivative(z), dtype=complex)
    h = 1e-6
    return (np.asarray(target(z + h)) - np.asarray(target(z - h))) / (2 * h)


def _spacing(K: Region, n: int) -> float:
    b = K.boundary_samples(n)
    if b.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(np.append(b, b[0])))))


def _enlarged_boundary(K: Region, n: int, pad: float) -> np.ndarray:
    """Samples on the boundary of a slight enlargement of ``K``."""
    if isinstance(K, Disk):
        return circle_points(K.center, K.radius + pad, n, 0.25)
    b = K.boundary_samples(n, 0.25)
    if b.size == 0:
        return b
    centroid = np.mean(b)
    w = b - centroid
    nrm = np.abs(w)
    return b + pad * np.where(nrm > 0, w / np.where(nrm > 0, nrm, 1.0), 0)


def certified_sup_error(p: Callable, target: Callable, K: Region, density: int = 1024,
                        phase: float = 0.0) -> SupEstimate:
    """Max of ``|p - target|`` over ``density`` boundary samples of ``K``.

    By the maximum principle this is the supremum over the whole compact up
    to the sampling gap reported alongside it.
    """
    parts = K.parts
    value, gap, count = 0.0, 0.0, 0
    for part in parts:
        z = part.boundary_samples(density, phase)
        count += z.size
        with np.errstate(over="ignore", invalid="ignore"):
            err = np.abs(np.asarray(p(z)) - _target_values(target, z))
        v = float(np.max(err)) if z.size else 0.0
        if not np.isfinite(v):
            v = math.inf
        value = max(value, v)
        if isinstance(part, PointRegion) or z.size < 2:
            continue
        h = _spacing(part, density)
        pad = max(h, 1e-9)
        ze = np.concatenate([z, _enlarged_boundary(part, density, pad)])
        with np.errstate(over="ignore", invalid="ignore"):
            dp = p.derivative(ze) if hasattr(p, "derivative") else (p(ze + 1e-7) - p(ze - 1e-7)) / 2e-7
            lip = float(np.max(np.abs(np.asarray(dp) - _target_derivative(target, ze))))
        if not np.isfinite(lip):
            lip = math.inf
        gap = max(gap, 0.5 * lip * h)
    return SupEstimate(value, gap, count)


# ---------------------------------------------------------------------------
# Least-squares machinery
# ---------------------------------------------------------------------------
def leja_nodes(z: np.ndarray, start: Sequence[complex], count: int) -> tuple[list, list, list]:
    """Continue a node sequence greedily by discrete Leja selection on ``z``.

    Returns ``(nodes, scales, picks)`` for the full sequence (``start``
    first); ``picks`` holds the sample index of each chosen node (``-1`` for
    the prescribed ones). Each scale normalizes the next Newton basis
    function to maximum modulus one on ``z``, which keeps the basis well
    conditioned.
    """
    nodes: list = []
    scales: list = []
    picks: list = []
    cur = np.ones(z.size, dtype=complex)
    logp = np.zeros(z.size)
    total = len(start) + count
    for k in range(total):
        if k < len(start):
            x, idx = complex(start[k]), -1
        elif not nodes:
            idx = int(np.argmax(np.abs(z - z.mean())))
            x = complex(z[idx])
        else:
            idx = int(np.argmax(logp))
            x = complex(z[idx])
        nxt = cur * (z - x)
        s = float(np.max(np.abs(nxt)))
        if not s > 0:
            s = 1.0
        nodes.append(x)
        scales.append(s)
        picks.append(idx)
        cur = nxt / s
        with np.errstate(divide="ignore"):
            logp += np.log(np.abs(z - x))
    return nodes, scales, picks


def _initial_count(part: Region, density: int) -> int:
    if isinstance(part, PointRegion):
        return 1
    if isinstance(part, Disk):
        return density
    x0, x1, y0, y1 = part.bounding_box()
    perim = 2 * ((x1 - x0) + (y1 - y0))
    return int(min(8 * density, max(density, density * perim / math.pi)))


def region_density(K: Region, density: int) -> int:
    """Boundary sample count that resolves every part of ``K`` as finely as a disk at ``density``.

    Long thin parts get proportionally more samples (up to eightfold).
    """
    return max(_initial_count(part, density) for part in K.parts)


class _Problem:
    """Pooled samples, weights and targets of one approximation request."""

    def __init__(self, parts: list, targets: Sequence[CompactTarget], counts: list, phase: float):
        zs, vals, w, part_of = [], [], [], []
        for p, ((i, part), n) in enumerate(zip(parts, counts)):
            z = part.boundary_samples(n, phase)
            zs.append(z)
            vals.append(_target_values(targets[i].target, z))
            w.append(np.full(z.size, 1.0 / targets[i].tolerance))
            part_of.append(np.full(z.size, p))
        self.z = np.concatenate(zs)
        self.values = np.concatenate(vals)
        self.weights = np.concatenate(w)
        self.part_of = np.concatenate(part_of)


def _check_disjoint(targets: Sequence[CompactTarget]) -> None:
    parts = [(i, p) for i, t in enumerate(targets) for p in t.compact.parts]
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            (i, P), (j, Q) = parts[a], parts[b]
            if i == j:
                continue
            if isinstance(P, Disk) and isinstance(Q, Disk):
                gap = P.gap_to(Q)
            else:
                gap = min(float(np.min(-Q.margin(P.samples(128, 32)))) if P.kind != "point"
                          else float(np.min(-Q.margin(np.array([P.point])))),
                          float(np.min(-P.margin(Q.samples(128, 32)))) if Q.kind != "point"
                          else float(np.min(-P.margin(np.array([Q.point])))))
            if not gap > 0:
                raise CompactsNotDisjoint(
                    f"compacts {targets[i].label or i!r} and {targets[j].label or j!r} are not disjoint (gap {gap:.3g})")


def _degree_schedule(start: int, cap: int) -> list[int]:
    out = []
    d = start
    while d <= cap:
        out.append(d)
        d = int(math.ceil(1.2 * d / 8.0)) * 8
    return out


def _constraint_rows(constraints: Sequence[HermiteConstraint], nodes: list, scales: list):
    rows, rhs = [], []
    for c in constraints:
        rows.append(newton_basis(np.array([c.point]), nodes, scales)[0])
        rhs.append(c.value)
        if c.derivative is not None:
            rows.append(newton_basis_derivative(c.point, nodes, scales))
            rhs.append(c.derivative)
    return np.array(rows, dtype=complex).reshape(len(rows), len(nodes) + 1), np.array(rhs, dtype=complex)


def simultaneous_approximate(targets: Sequence[CompactTarget], constraints: Sequence[HermiteConstraint] = (),
                             degree_cap: int = DEFAULT_DEGREE_CAP, *, density: int = 128,
                             certify_density: int = 512, phase: float = 0.0, lawson_steps: int = 4,
                             start_degree: int | None = None) -> tuple[PolynomialMap, Certificate]:
    """Find one polynomial close to every target and exact on every constraint.

    Degrees follow a fixed geometric schedule (so raising the cap only adds
    candidates) and the best certified iterate is kept. Raises
    :class:`DegreeCapExceeded` carrying the best iterate when no degree up to
    the cap meets every tolerance.
    """
    targets = list(targets)
    constraints = list(constraints)
    if not targets:
        raise ValueError("at least one compact target is required")
    _check_disjoint(targets)
    pts = [complex(c.point) for c in constraints]
    if len(set(pts)) != len(pts):
        raise ValueError("constraint points must be pairwise distinct")
    for c in constraints:
        if not any(np.any(t.compact.contains(np.array([c.point]), 1e-12)) for t in targets):
            warnings.warn(f"constraint point {c.point} lies outside every compact", ConstraintOutsideCompacts)
    m = sum(1 if c.derivative is None else 2 for c in constraints)
    if m - 1 > degree_cap:
        raise ApproximationError("more interpolation conditions than the degree cap allows")

    parts = [(i, part) for i, t in enumerate(targets) for part in t.compact.parts]
    counts = [_initial_count(part, density) for _, part in parts]
    start = start_degree if start_degree is not None else max(1, m)
    schedule = [d for d in _degree_schedule(start, degree_cap) if d >= m] or [m]

    best = None
    history = []
    for d in schedule:
        # Every part needs several samples per Leja node it receives, or the
        # least-squares fit is underdetermined between its samples.
        for _ in range(6):
            prob = _Problem(parts, targets, counts, phase)
            nodes, scales, picks = leja_nodes(prob.z, (), min(d, prob.z.size))
            chosen = np.array(picks, dtype=int)
            per_part = np.bincount(prob.part_of[chosen], minlength=len(parts))
            grew = False
            for p_, (_, part) in enumerate(parts):
                need = 4 * int(per_part[p_]) + 32
                if not isinstance(part, PointRegion) and counts[p_] < need:
                    counts[p_] = int(math.ceil(need / 64.0)) * 64
                    grew = True
            if not grew:
                break
        basis = newton_basis(prob.z, nodes, scales)
        coef = _constrained_fit(basis, prob, constraints, nodes, scales, lawson_steps)
        p = PolynomialMap(coef, np.array(nodes), np.array(scales))
        cert = _certify(p, targets, constraints, max(certify_density, 2 * max(counts)), phase, degree_cap)
        score = max(cert.ratios)
        if cert.max_residual > HERMITE_TOLERANCE:
            score = max(score, 1.0 + cert.max_residual)
        history.append((d, score))
        if best is None or score < best[0]:
            best = (score, p, cert)
        if cert.success:
            break
    score, p, cert = best
    cert.history = history
    if not cert.success:
        raise DegreeCapExceeded(p, cert)
    return p, cert


def _constrained_fit(basis: np.ndarray, prob: "_Problem", constraints, nodes, scales,
                     lawson_steps: int) -> np.ndarray:
    """Weighted least squares on the samples subject to the interpolation rows.

    The constraint rows are eliminated by the nullspace method: a QR
    factorization of their adjoint splits the coefficient space into a
    particular solution and a free part fitted by least squares. Lawson
    reweighting then pushes the fit towards the weighted minimax solution.
    """
    n = basis.shape[1]
    C, r = _constraint_rows(constraints, nodes, scales)
    m = C.shape[0]
    if m:
        Q, R = np.linalg.qr(C.conj().T, mode="complete")
        R1 = R[:m, :m]
        Q1, N = Q[:, :m], Q[:, m:]

        def particular(rhs):
            return Q1 @ solve_triangular(R1.conj().T, rhs, lower=True)

        c0 = particular(r)
    else:
        N = np.eye(n, dtype=complex)
        c0 = np.zeros(n, dtype=complex)
    A = basis @ N
    resid = prob.values - basis @ c0
    w = prob.weights.copy()
    y = np.zeros(A.shape[1], dtype=complex)
    if A.shape[1]:
        for step in range(lawson_steps + 1):
            y = _lstsq(A * w[:, None], resid * w, lapack_driver="gelsy", check_finite=False)[0]
            if step == lawson_steps:
                break
            ratio = np.abs(A @ y - resid) * prob.weights
            if np.max(ratio) <= 0.5:
                break
            w = w * np.sqrt(ratio / np.max(ratio) + 1e-3)
    coef = c0 + N @ y
    if m:
        # one step of iterative refinement on the interpolation rows
        coef = coef + particular(r - C @ coef)
    return coef


def _certify(p: PolynomialMap, targets, constraints, density, phase, cap) -> Certificate:
    errs, gaps = [], []
    for t in targets:
        est = certified_sup_error(p, t.target, t.compact, density, phase + 0.5)
        errs.append(est.value)
        gaps.append(est.gap)
    res = []
    for c in constraints:
        v, dv = p.value_and_derivative(c.point)
        res.append((abs(v - c.value), abs(dv - c.derivative) if c.derivative is not None else 0.0))
    return Certificate(labels=[t.label for t in targets], tolerances=[t.tolerance for t in targets],
                       errors=errs, gaps=gaps, residuals=res, degree=p.degree, degree_cap=cap)


# ---------------------------------------------------------------------------
# Perturbation budget
# ---------------------------------------------------------------------------
@dataclass
class BudgetReport:
    delta: float
    lipschitz: list
    partial_sums: list
    tube_gaps: list


def stability_budget(g: Callable, G: Region, K: Region, n: int, eps: float, *, density: int = 128,
                     ring: int = 12, detail: bool = False):
    """Largest certified ``delta`` such that ``sup_G |p - g| <= delta`` keeps
    ``sup_K |p^k - g^k| <= eps`` for ``1 <= k <= n``.

    With ``L_j`` the sampled sup of ``|g'|`` on the ``eps``-fattened tube
    ``g^j(K)``, the deviation after ``k`` steps is at most ``delta * S_k``
    where ``S_1 = 1`` and ``S_{k+1} = 1 + L_k S_k``. The budget is half of
    ``eps / max S_k``, further capped below half the least gap between a
    fattened tube and the boundary of ``G``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    z = K.samples(density, density // 4)
    offsets = eps * np.exp(2j * np.pi * (np.arange(ring) + 0.5) / ring)
    lips, gaps = [], []
    tube = z
    for j in range(n):
        fat = np.concatenate([tube, (tube[:, None] + offsets[None, :]).ravel()])
        gap = float(np.min(G.margin(fat)))
        if not gap > 0:
            raise TubeEscapesG(f"the eps-fattened orbit tube leaves G at step {j} (margin {gap:.3g})")
        gaps.append(gap)
        if j >= 1:
            d = np.asarray(g.derivative(fat) if hasattr(g, "derivative") else _target_derivative(g, fat))
            lips.append(float(np.max(np.abs(d))))
        if j < n - 1:
            tube = np.asarray(g(tube), dtype=complex)
    S = [1.0]
    for L in lips:
        S.append(1.0 + L * S[-1])
    delta = 0.5 * eps / max(S)
    delta = min(delta, 0.5 * min(gaps))
    if detail:
        return BudgetReport(delta, lips, S, gaps)
    return delta
