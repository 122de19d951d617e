"""Named constructors for the concrete objects used throughout the package."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import expr as ex
from .dynamics import SuspensionFlow
from .einstein import DevelopingSpec
from .exterior import Chart, DeckMap, Form1
from .foliation import FormPair, check_frobenius, check_transverse_volume
from .grid import Grid
from .metric import NullMetric, check_deck_invariance

TWO_PI = 2 * math.pi


class UnknownEntryError(KeyError):
    pass


class InvalidOverrideError(ValueError):
    pass


class QuotientWarning(UserWarning):
    """The multiplier does not give a compact quotient."""


@dataclass
class CatalogEntry:
    name: str
    kind: str
    params: dict
    note: str
    build: Callable = field(repr=False)
    ranges: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)
    reference: bool = True

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "parameters": dict(self.params),
            "note": self.note,
            "grid_ranges": {k: list(v) for k, v in self.ranges.items()},
        }

    def grid(self, n=None, ranges: Mapping = None, threads: int = 1) -> Grid:
        r = dict(self.ranges)
        r.update(ranges or {})
        if n is None:
            n = {k: self.resolution.get(k, 8) for k in r}
        return Grid.uniform(r, n, threads)


def _check_lambda(lam, name="lambda", compact=False):
    lam = float(lam)
    if not lam > 0 or not math.isfinite(lam):
        raise InvalidOverrideError(f"{name} must be a positive number, got {lam}")
    if compact:
        trace = lam + 1 / lam
        if abs(trace - round(trace)) > 1e-9:
            warnings.warn(f"lambda + 1/lambda = {trace:.6g} is not an integer; the quotient is not a compact T^3_A",
                          QuotientWarning, stacklevel=3)
    return lam


def _flat_t3(p):
    chart = Chart(("x", "y", "z"), (TWO_PI,) * 3)
    return FormPair(Form1(chart, ["cos(x)", 0, "sin(x)"]), Form1(chart, [0, "cos(y)", "-sin(y)"]))


def _nonflat_t3a(p):
    lam = _check_lambda(p["lambda"], compact=True)
    deck = DeckMap(["lambda", 1, "1/lambda"], [0, "2*pi", 0])
    chart = Chart(("x", "y", "z"), (None, None, None), deck)
    w1 = Form1(chart, ["cos(y)", "lambda^(y/(2*pi))*sin(y)", 0])
    w2 = Form1(chart, ["sin(y)", "-lambda^(y/(2*pi))*cos(y)", 0])
    return FormPair(w1, w2, {"lambda": lam})


def _moussu_roussarie(first: bool):
    def build(p):
        chart = Chart(("x", "y", "r"), (1.0, 1.0, None))
        phi = ex.as_expr(p["phi"])
        if ex.free_names(phi) - {"r"} - set(ex.BUILTIN_CONSTANTS):
            raise InvalidOverrideError("phi must depend on r only")
        omega = [ex.Var("a"), ex.Var("b"), ex.ZERO]
        dr = ex.ONE if first else ex.parse("1-2*r")
        big = Form1(chart, [phi * omega[0], phi * omega[1], dr])
        return FormPair(big, Form1(chart, omega), {"a": float(p["a"]), "b": float(p["b"])})

    return build


def _incomplete_cylinder(p):
    lam = _check_lambda(p["lambda"])
    return NullMetric("-x2*ln(lambda)", deck=DeckMap(["lambda", 1], [0, 1]), constants={"lambda": lam})


def _desitter_null(p):
    return NullMetric("-2*ln(cosh((x1+x2)/sqrt(2)))")


def _clifton_pohl(p):
    c = float(p["scale"])
    if not c > 0 or c == 1:
        raise InvalidOverrideError("scale must be positive and different from 1")
    return NullMetric("-ln(x1^2+x2^2)", deck=DeckMap(["c", "c"], [0, 0]), constants={"c": c})


def _suspension(p):
    A = p["A"]
    A = np.asarray(A, dtype=float).reshape(2, 2)
    try:
        return SuspensionFlow(tuple(map(tuple, A)), p["speed"])
    except ValueError as e:
        raise InvalidOverrideError(str(e)) from None


def _affine_developing(p):
    return DevelopingSpec("arctan(s1)", "arctan(s2)")


_ENTRIES = {
    e.name: e
    for e in [
        CatalogEntry(
            "flat-t3", "FormPair", {},
            "Transversely Minkowski pair on T^3 with connection form dz; degenerates on the circles cos x = cos y = 0.",
            _flat_t3, {"x": (0.0, TWO_PI), "y": (0.0, TWO_PI), "z": (0.0, TWO_PI)},
        ),
        CatalogEntry(
            "nonflat-t3a", "FormPair", {"lambda": 2.0},
            "Pair on the universal cover of T^3_A with transverse volume -lambda^(y/2pi) dx^dy and nonconstant curvature; "
            "deck map (x, y, z) -> (lambda x, y + 2pi, z/lambda).",
            _nonflat_t3a, {"x": (0.0, 1.0), "y": (0.0, TWO_PI), "z": (0.0, 1.0)}, {"x": 3, "y": 64, "z": 3},
        ),
        CatalogEntry(
            "moussu-roussarie-1", "FormPair", {"phi": "sin(pi*r)", "a": 1.0, "b": math.sqrt(2.0)},
            "Model form dr + phi(r) w on T^2 x [0,1], paired with the linear form w = a dx + b dy.",
            _moussu_roussarie(True), {"x": (0.0, 1.0), "y": (0.0, 1.0), "r": (0.0, 1.0)},
        ),
        CatalogEntry(
            "moussu-roussarie-2", "FormPair", {"phi": "sin(pi*r)", "a": 1.0, "b": math.sqrt(2.0)},
            "Model form (1-2r) dr + phi(r) w on T^2 x [0,1], paired with w = a dx + b dy; the pair drops rank at r = 1/2.",
            _moussu_roussarie(False), {"x": (0.0, 1.0), "y": (0.0, 1.0), "r": (0.0, 1.0)},
        ),
        CatalogEntry(
            "incomplete-cylinder", "NullMetric", {"lambda": 2.0},
            "Metric lambda^(-x2) dx1 dx2 invariant under (x1, x2) -> (lambda x1, x2 + 1); "
            "lightlike geodesics along x2 are incomplete.",
            _incomplete_cylinder, {"x1": (-2.0, 2.0), "x2": (-2.0, 2.0)},
        ),
        CatalogEntry(
            "desitter-null", "NullMetric", {},
            "Liouville solution f = -2 ln cosh((x1+x2)/sqrt 2) with transverse curvature 1.",
            _desitter_null, {"x1": (-1.0, 1.0), "x2": (-1.0, 1.0)},
        ),
        CatalogEntry(
            "clifton-pohl", "NullMetric", {"scale": 2.0},
            "Classical incomplete metric dx1 dx2 / (x1^2 + x2^2) on the punctured plane, invariant under dilation; "
            "an extra integrator fixture.",
            _clifton_pohl, {"x1": (0.5, 2.0), "x2": (0.5, 2.0)}, reference=False,
        ),
        CatalogEntry(
            "suspension-A", "SuspensionFlow", {"A": [[2, 1], [1, 1]], "speed": "1"},
            "Suspension flow of the cat map on T^3_A; the speed may depend on (p1, p2, s).",
            _suspension,
        ),
        CatalogEntry(
            "einstein-affine", "DevelopingSpec", {},
            "Developing data (arctan s1, arctan s2): the affine chart of the Einstein torus swept by the hyperbolic flow.",
            _affine_developing, {"s1": (-2.0, 2.0), "s2": (-2.0, 2.0), "t": (-1.0, 1.0)},
        ),
    ]
}


def names() -> list:
    return list(_ENTRIES)


def entry(name: str) -> CatalogEntry:
    try:
        return _ENTRIES[name]
    except KeyError:
        raise UnknownEntryError(f"unknown catalog entry {name!r}; known: {', '.join(_ENTRIES)}") from None


def get(name: str, overrides: Mapping = None, **kw):
    """Construct the named object, applying parameter overrides."""
    e = entry(name)
    params = dict(e.params)
    over = dict(overrides or {})
    over.update(kw)
    for k, v in over.items():
        if k not in params:
            raise InvalidOverrideError(f"{name} has no parameter {k!r}")
        params[k] = v
    return e.build(params)


def list_entries() -> list:
    return [e.describe() for e in _ENTRIES.values()]


def verify_entry(name: str, overrides: Mapping = None, n=None) -> dict:
    """Run the entry's own verification and return its residuals."""
    e = entry(name)
    obj = get(name, overrides)
    if e.kind == "FormPair":
        g = e.grid(n)
        rep = check_frobenius(obj, g)
        return {"frobenius": max(rep.frobenius), "volume": check_transverse_volume(obj, g)}
    if e.kind == "NullMetric":
        out = {}
        if obj.deck is not None:
            out["deck"] = check_deck_invariance(obj, e.grid(n))
        return out
    if e.kind == "SuspensionFlow":
        return {"min_speed": obj.check_speed(), "lambda": obj.lam}
    return {}
