"""Complex polynomials stored in scaled Newton form.

A polynomial of degree ``d`` is kept as coefficients ``c_0..c_d``, nodes
``z_0..z_{d-1}`` and positive scales ``s_0..s_{d-1}``::

    p(z) = c_0 + (z - z_0)/s_0 * (c_1 + (z - z_1)/s_1 * (c_2 + ...))

With all nodes at 0 and all scales 1 this is the ordinary monomial form.
The nested layout is evaluated in a fixed Horner order, so results are
bit-reproducible, and it stays well conditioned at degrees where monomial
coefficients of a polynomial living on sets far from the origin would
overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class PolynomialFormatError(ValueError):
    """Raised when a coefficient file cannot be parsed."""


def _as_complex_array(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


@dataclass(frozen=True)
class PolynomialMap:
    """Polynomial ``p`` in scaled Newton form (see module docstring)."""

    coefficients: np.ndarray
    nodes: np.ndarray = field(default=None)  # type: ignore[assignment]
    scales: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        d = c.size - 1
        nodes = np.zeros(d, dtype=complex) if self.nodes is None else np.array(self.nodes, dtype=complex).ravel()
        scales = np.ones(d, dtype=float) if self.scales is None else np.array(self.scales, dtype=float).ravel()
        if nodes.size != d or scales.size != d:
            raise ValueError(f"need {d} nodes and scales for {d + 1} coefficients, got {nodes.size} and {scales.size}")
        if np.any(~(scales > 0)):
            raise ValueError("scales must be positive")
        for name, arr in (("coefficients", c), ("nodes", nodes), ("scales", scales)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- constructors -------------------------------------------------
    @classmethod
    def monomial(cls, coefficients: Sequence[complex]) -> "PolynomialMap":
        """Build from ascending monomial coefficients."""
        return cls(np.asarray(coefficients, dtype=complex))

    @classmethod
    def constant(cls, value: complex) -> "PolynomialMap":
        return cls(np.array([value], dtype=complex))

    @classmethod
    def affine(cls, slope: complex, intercept: complex) -> "PolynomialMap":
        """The map ``z -> slope*z + intercept``."""
        if slope == 0:
            return cls.constant(intercept)
        return cls(np.array([intercept, slope], dtype=complex))

    @classmethod
    def affine_through(cls, source: complex, image: complex, slope: complex) -> "PolynomialMap":
        """Affine map with the given slope sending ``source`` to ``image``."""
        return cls.affine(slope, image - slope * source)

    @classmethod
    def identity(cls) -> "PolynomialMap":
        return cls.affine(1.0, 0.0)

    # -- basic properties --------------------------------------------
    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def is_affine(self) -> bool:
        return self.degree <= 1

    def __repr__(self) -> str:
        return f"PolynomialMap(degree={self.degree})"

    # -- evaluation ---------------------------------------------------
    def __call__(self, z):
        zz = _as_complex_array(z)
        c, x, s = self.coefficients, self.nodes, self.scales
        v = np.full(zz.shape, c[-1], dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(self.degree - 1, -1, -1):
                v = c[k] + (zz - x[k]) / s[k] * v
        return v if np.ndim(z) else complex(v)

    def value_and_derivative(self, z):
        """Evaluate ``p`` and ``p'`` together by the differentiated Horner rule."""
        zz = _as_complex_array(z)
        c, x, s = self.coefficients, self.nodes, self.scales
        v = np.full(zz.shape, c[-1], dtype=complex)
        dv = np.zeros(zz.shape, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(self.degree - 1, -1, -1):
                t = (zz - x[k]) / s[k]
                dv = dv * t + v / s[k]
                v = c[k] + t * v
        if np.ndim(z):
            return v, dv
        return complex(v), complex(dv)

    def derivative(self, z):
        return self.value_and_derivative(z)[1]

    def iterate(self, z, n: int):
        """Return ``p^n(z)`` (``n`` compositions)."""
        w = _as_complex_array(z).copy()
        for _ in range(n):
            w = self(w)
        return w if np.ndim(z) else complex(w)

    def iterate_with_derivative(self, z, n: int):
        """Return ``(p^n(z), (p^n)'(z))`` by the chain rule along the orbit."""
        w = _as_complex_array(z).copy()
        dw = np.ones(w.shape, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(n):
                w, d = self.value_and_derivative(w)
                dw = dw * d
        return w, dw

    # -- algebra ------------------------------------------------------
    def to_monomial(self) -> np.ndarray:
        """Ascending monomial coefficients (only sensible at low degree)."""
        out = np.array([self.coefficients[-1]], dtype=complex)
        for k in range(self.degree - 1, -1, -1):
            # out <- c_k + (z - x_k)/s_k * out
            shifted = np.concatenate([[0.0], out]) - self.nodes[k] * np.concatenate([out, [0.0]])
            out = shifted / self.scales[k]
            out[0] += self.coefficients[k]
        return out

    def add_constant(self, a: complex) -> "PolynomialMap":
        c = self.coefficients.copy()
        c[0] += a
        return PolynomialMap(c, self.nodes, self.scales)

    def perturbed(self, index: int, amount: complex) -> "PolynomialMap":
        """Copy with coefficient ``index`` shifted by ``amount``."""
        c = self.coefficients.copy()
        c[index] += amount
        return PolynomialMap(c, self.nodes, self.scales)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolynomialMap):
            return NotImplemented
        return (
            np.array_equal(self.coefficients, other.coefficients)
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.scales, other.scales)
        )

    __hash__ = None  # type: ignore[assignment]

    # -- text format --------------------------------------------------
    def to_text(self) -> str:
        """Serialize losslessly.

        Header ``degree D`` followed by ``D + 1`` lines. Line ``k`` holds
        ``re(c_k) im(c_k)`` and, for ``k < D``, the node and scale
        ``re(z_k) im(z_k) s_k``. Floats are written with ``repr`` so the
        round trip is exact.
        """
        lines = [f"degree {self.degree}"]
        for k, ck in enumerate(self.coefficients):
            fields = [repr(float(ck.real)), repr(float(ck.imag))]
            if k < self.degree:
                xk = self.nodes[k]
                fields += [repr(float(xk.real)), repr(float(xk.imag)), repr(float(self.scales[k]))]
            lines.append(" ".join(fields))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolynomialMap":
        """Parse :meth:`to_text` output.

        Two-column lines (plain ``re im``) are accepted too; a file made only
        of those is an ordinary monomial coefficient list.
        """
        rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows or not rows[0].startswith("degree"):
            raise PolynomialFormatError("missing 'degree D' header")
        try:
            d = int(rows[0].split()[1])
        except (IndexError, ValueError) as exc:
            raise PolynomialFormatError(f"bad header {rows[0]!r}") from exc
        body = rows[1:]
        if d < 0 or len(body) != d + 1:
            raise PolynomialFormatError(f"header says degree {d} but found {len(body)} coefficient lines")
        coeffs, nodes, scales = [], [], []
        for k, row in enumerate(body):
            try:
                vals = [float(t) for t in row.split()]
            except ValueError as exc:
                raise PolynomialFormatError(f"line {k + 2}: not numeric: {row!r}") from exc
            if len(vals) == 2:
                coeffs.append(complex(vals[0], vals[1]))
                if k < d:
                    nodes.append(0j)
                    scales.append(1.0)
            elif len(vals) == 5 and k < d:
                coeffs.append(complex(vals[0], vals[1]))
                nodes.append(complex(vals[2], vals[3]))
                scales.append(vals[4])
            else:
                raise PolynomialFormatError(f"line {k + 2}: expected 2 or 5 fields, got {len(vals)}")
        if not all(np.isfinite(coeffs)) or not all(np.isfinite(nodes)) or not all(np.isfinite(scales)):
            raise PolynomialFormatError("non-finite value in coefficient file")
        try:
            return cls(np.array(coeffs), np.array(nodes, dtype=complex), np.array(scales, dtype=float))
        except ValueError as exc:
            raise PolynomialFormatError(str(exc)) from exc


def newton_basis(z: np.ndarray, nodes: Sequence[complex], scales: Sequence[float]) -> np.ndarray:
    """Matrix whose column ``k`` is the ``k``-th scaled Newton basis function at ``z``."""
    z = _as_complex_array(z)
    basis = np.ones((z.size, len(nodes) + 1), dtype=complex)
    for k, (x, s) in enumerate(zip(nodes, scales)):
        basis[:, k + 1] = basis[:, k] * (z - x) / s
    return basis


def newton_basis_derivative(z: complex, nodes: Sequence[complex], scales: Sequence[float]) -> np.ndarray:
    """Derivatives of all scaled Newton basis functions at one point ``z``."""
    m = len(nodes)
    b = np.zeros(m + 1, dtype=complex)
    db = np.zeros(m + 1, dtype=complex)
    b[0] = 1.0
    for k in range(m):
        b[k + 1] = b[k] * (z - nodes[k]) / scales[k]
        db[k + 1] = (db[k] * (z - nodes[k]) + b[k]) / scales[k]
    return db


class Composite:
    """Callable target built from maps applied in sequence (first map first).

    Supports the two calls the approximation engine needs: values and
    derivatives. Elements may be :class:`PolynomialMap` or any object with
    ``__call__`` and ``derivative``.
    """

    def __init__(self, maps: Iterable):
        self.maps = tuple(maps)

    def __call__(self, z):
        w = z
        for f in self.maps:
            w = f(w)
        return w

    def derivative(self, z):
        w = _as_complex_array(z)
        dw = np.ones(w.shape, dtype=complex)
        for f in self.maps:
            dw = dw * f.derivative(w)
            w = f(w)
        return dw if np.ndim(z) else complex(dw)


class FunctionTarget:
    """Wrap closed-form callables ``f`` and ``df`` as a target map."""

    def __init__(self, f, df=None, label: str = ""):
        self._f = f
        self._df = df
        self.label = label

    def __call__(self, z):
        return self._f(z)

    def derivative(self, z):
        if self._df is not None:
            return self._df(z)
        zz = _as_complex_array(z)
        h = 1e-6 * np.maximum(1.0, np.abs(zz))
        return (self._f(zz + h) - self._f(zz - h)) / (2 * h)
