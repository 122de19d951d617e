"""Exterior algebra of 0- to 3-forms on a three-dimensional coordinate chart.

Coefficients are symbolic :class:`~lorfol.expr.Expression` objects, so every
operation here is exact; numbers only appear when a form is evaluated.

Basis conventions (coordinates ``c1, c2, c3``):

* 1-forms: ``a1 dc1 + a2 dc2 + a3 dc3``
* 2-forms: ``b12 dc1^dc2 + b13 dc1^dc3 + b23 dc2^dc3`` in that order
* 3-forms: ``v dc1^dc2^dc3``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex
from .expr import Expression, as_expr, differentiate, simplify
from .grid import chunked_map


class ChartMismatch(ValueError):
    pass


def _exprs(values, k: int) -> tuple:
    vals = tuple(simplify(as_expr(v)) for v in values)
    if len(vals) != k:
        raise ValueError(f"expected {k} coefficients, got {len(vals)}")
    return vals


def _broadcast(values, size: Optional[int]) -> np.ndarray:
    arrs = [np.asarray(v, dtype=float) for v in values]
    if size is None:
        shape = np.broadcast_shapes(*[a.shape for a in arrs])
    else:
        shape = (size,)
    return np.stack([np.broadcast_to(a, shape) for a in arrs])


def _size_of(bindings: Mapping) -> Optional[int]:
    for v in bindings.values():
        if isinstance(v, np.ndarray) and v.ndim == 1:
            return len(v)
    return None


@dataclass(frozen=True)
class DeckMap:
    """Diagonal affine map ``c_i -> scale_i * c_i + shift_i``.

    Scales and shifts are expressions in named constants only, for example
    ``(lambda, 1, 1/lambda)`` with shifts ``(0, 2*pi, 0)``.
    """

    scales: tuple
    shifts: tuple

    def __init__(self, scales: Sequence, shifts: Sequence):
        object.__setattr__(self, "scales", tuple(simplify(as_expr(s)) for s in scales))
        object.__setattr__(self, "shifts", tuple(simplify(as_expr(s)) for s in shifts))
        if len(self.scales) != len(self.shifts):
            raise ValueError("scales and shifts differ in length")

    @property
    def dim(self) -> int:
        return len(self.scales)

    def numeric(self, constants: Mapping[str, float]) -> tuple:
        s = np.array([float(ex.evaluate(e, constants)) for e in self.scales])
        b = np.array([float(ex.evaluate(e, constants)) for e in self.shifts])
        return s, b

    def check_invertible(self, constants: Mapping[str, float]) -> None:
        s, _ = self.numeric(constants)
        if np.any(s == 0):
            raise ValueError("deck transformation is not invertible (zero scale)")

    def apply(self, coords: Sequence[np.ndarray], constants, power: int = 1) -> list:
        """Image of points under the ``power``-th iterate (negative allowed)."""
        s, b = self.numeric(constants)
        out = [np.asarray(c, dtype=float) for c in coords]
        step = 1 if power >= 0 else -1
        for _ in range(abs(power)):
            if step > 0:
                out = [s[i] * out[i] + b[i] for i in range(len(out))]
            else:
                out = [(out[i] - b[i]) / s[i] for i in range(len(out))]
        return out

    def substitution(self, names: Sequence[str]) -> dict:
        return {n: self.scales[i] * ex.Var(n) + self.shifts[i] for i, n in enumerate(names)}

    def to_json(self) -> dict:
        return {"scales": [str(e) for e in self.scales], "shifts": [str(e) for e in self.shifts]}

    @classmethod
    def from_json(cls, data: Mapping) -> "DeckMap":
        return cls(data["scales"], data["shifts"])


@dataclass(frozen=True)
class Chart:
    coords: tuple = ("x", "y", "z")
    periods: tuple = (None, None, None)
    deck: Optional[DeckMap] = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "periods", tuple(self.periods))
        if len(self.coords) != 3 or len(set(self.coords)) != 3:
            raise ValueError(f"a chart needs three distinct coordinate names, got {self.coords}")
        if len(self.periods) != 3:
            raise ValueError("one period (or None) per coordinate")
        if self.deck is not None and self.deck.dim != 3:
            raise ValueError("deck transformation must act on all three coordinates")

    def to_json(self) -> dict:
        return {
            "coords": list(self.coords),
            "periods": list(self.periods),
            "deck": None if self.deck is None else self.deck.to_json(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Chart":
        deck = data.get("deck")
        return cls(tuple(data["coords"]), tuple(data.get("periods", (None,) * 3)),
                   DeckMap.from_json(deck) if deck else None)


class _Form:
    degree = -1
    ncoef = 0

    def __init__(self, chart: Chart, coefficients: Sequence):
        self.chart = chart
        self.coefficients = _exprs(coefficients, self.ncoef)

    def __eq__(self, other):
        return type(self) is type(other) and self.chart == other.chart and self.coefficients == other.coefficients

    def __hash__(self):
        return hash((type(self), self.chart, self.coefficients))

    def __repr__(self):
        coefs = ", ".join(str(c) for c in self.coefficients)
        return f"{type(self).__name__}({coefs})"

    def evaluate(self, bindings: Mapping) -> np.ndarray:
        """Coefficient values, shape ``(ncoef, ...)``."""
        def run(b):
            return _broadcast([ex.evaluate(c, b) for c in self.coefficients], _size_of(b))

        return chunked_map(run, bindings)

    def is_zero(self) -> bool:
        return all(ex.is_zero(c) for c in self.coefficients)

    def _new(self, coefficients):
        return type(self)(self.chart, coefficients)

    def __add__(self, other):
        _same_chart(self, other)
        return self._new([a + b for a, b in zip(self.coefficients, other.coefficients)])

    def __sub__(self, other):
        _same_chart(self, other)
        return self._new([a - b for a, b in zip(self.coefficients, other.coefficients)])

    def __neg__(self):
        return self._new([-a for a in self.coefficients])

    def scale(self, g) -> "_Form":
        g = as_expr(g)
        return self._new([g * a for a in self.coefficients])

    def to_json(self) -> dict:
        return {"chart": self.chart.to_json(), "coefficients": [str(c) for c in self.coefficients]}

    @classmethod
    def from_json(cls, data: Mapping):
        return cls(Chart.from_json(data["chart"]), data["coefficients"])


class Form1(_Form):
    degree, ncoef = 1, 3


class Form2(_Form):
    degree, ncoef = 2, 3


class Form3(_Form):
    degree, ncoef = 3, 1


class VectorField(_Form):
    degree, ncoef = -1, 3


def _same_chart(a, b):
    if a.chart != b.chart:
        raise ChartMismatch(f"forms live on different charts: {a.chart.coords} vs {b.chart.coords}")


def d0(f, chart: Chart) -> Form1:
    f = as_expr(f)
    return Form1(chart, [differentiate(f, c) for c in chart.coords])


def wedge11(a: Form1, b: Form1) -> Form2:
    _same_chart(a, b)
    a1, a2, a3 = a.coefficients
    b1, b2, b3 = b.coefficients
    return Form2(a.chart, [a1 * b2 - a2 * b1, a1 * b3 - a3 * b1, a2 * b3 - a3 * b2])


def wedge12(a: Form1, b: Form2) -> Form3:
    _same_chart(a, b)
    a1, a2, a3 = a.coefficients
    b12, b13, b23 = b.coefficients
    return Form3(a.chart, [a1 * b23 - a2 * b13 + a3 * b12])


def d1(a: Form1) -> Form2:
    c1, c2, c3 = a.chart.coords
    a1, a2, a3 = a.coefficients
    D = differentiate
    return Form2(a.chart, [
        D(a2, c1) - D(a1, c2),
        D(a3, c1) - D(a1, c3),
        D(a3, c2) - D(a2, c3),
    ])


def d2(b: Form2) -> Form3:
    c1, c2, c3 = b.chart.coords
    b12, b13, b23 = b.coefficients
    D = differentiate
    return Form3(b.chart, [D(b23, c1) - D(b13, c2) + D(b12, c3)])


def interior1(X: VectorField, a: Form1) -> Expression:
    _same_chart(X, a)
    return simplify(sum((x * c for x, c in zip(X.coefficients, a.coefficients)), ex.ZERO))


def interior2(X: VectorField, b: Form2) -> Form1:
    # i_X(dci^dcj) = X_i dcj - X_j dci
    _same_chart(X, b)
    X1, X2, X3 = X.coefficients
    b12, b13, b23 = b.coefficients
    return Form1(b.chart, [
        -(b12 * X2) - b13 * X3,
        b12 * X1 - b23 * X3,
        b13 * X1 + b23 * X2,
    ])


def interior3(X: VectorField, v: Form3) -> Form2:
    _same_chart(X, v)
    X1, X2, X3 = X.coefficients
    (f,) = v.coefficients
    return Form2(v.chart, [f * X3, -(f * X2), f * X1])


def lie1(X: VectorField, a: Form1) -> Form1:
    return d0(interior1(X, a), a.chart) + interior2(X, d1(a))


def lie2(X: VectorField, b: Form2) -> Form2:
    """Lie derivative by Cartan's formula ``L_X = i_X d + d i_X``."""
    return interior3(X, d2(b)) + d1(interior2(X, b))


def kernel_field(a: Form1, b: Form1) -> VectorField:
    """Cross product of the coefficient triples: annihilated by both forms."""
    _same_chart(a, b)
    a1, a2, a3 = a.coefficients
    b1, b2, b3 = b.coefficients
    return VectorField(a.chart, [a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])


def coordinate_field(chart: Chart, name: str) -> VectorField:
    return VectorField(chart, [1 if c == name else 0 for c in chart.coords])


def pullback1(a: Form1, deck: DeckMap) -> Form1:
    """Pull a 1-form back along a diagonal affine deck map."""
    sub = deck.substitution(a.chart.coords)
    return Form1(a.chart, [deck.scales[i] * ex.substitute(c, sub) for i, c in enumerate(a.coefficients)])


def form1(chart: Chart, *coefficients) -> Form1:
    return Form1(chart, coefficients)


def form2(chart: Chart, *coefficients) -> Form2:
    return Form2(chart, coefficients)
