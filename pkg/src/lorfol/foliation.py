"""Transverse Lorentzian geometry of a defining pair of 1-forms.

A codimension-2 foliation ``T F = ker w1 & ker w2`` on a 3-dimensional
chart is transversely Lorentzian (with transverse volume ``w1^w2``) iff
``dw_i ^ w_i = 0`` and ``L_X(w1^w2) = 0`` for ``X`` tangent to the leaves;
equivalently there is a unique connection form ``w0`` with

    dw1 = w1 ^ w0,    dw2 = -w2 ^ w0,

and the transverse curvature ``K`` is defined by ``dw0 = K w1^w2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import expr as ex
from .exterior import (
    Chart,
    DeckMap,
    Form1,
    Form2,
    d1,
    d2,
    kernel_field,
    lie2,
    pullback1,
    wedge11,
    wedge12,
)
from .grid import Grid

RANK_THRESHOLD = 1e-8
DEFAULT_TOL = 1e-6


class NotLorentzianError(ValueError):
    """The pair fails the Frobenius or transverse-volume condition."""


class RankDeficientError(ValueError):
    """The pair drops rank at a point where it is required to be regular."""


class DegeneratePairError(ValueError):
    """The pair has rank < 2 at every grid point."""


@dataclass(frozen=True)
class FormPair:
    omega1: Form1
    omega2: Form1
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.omega1.chart != self.omega2.chart:
            raise ValueError("both forms must live on the same chart")
        object.__setattr__(self, "constants", dict(self.constants))

    def __hash__(self):
        return hash((self.omega1, self.omega2, tuple(sorted(self.constants.items()))))

    @property
    def chart(self) -> Chart:
        return self.omega1.chart

    def bindings(self, points: Mapping[str, np.ndarray]) -> dict:
        out = dict(self.constants)
        out.update(points)
        return out

    def volume(self) -> Form2:
        return wedge11(self.omega1, self.omega2)

    def with_constants(self, **constants) -> "FormPair":
        merged = dict(self.constants)
        merged.update(constants)
        return FormPair(self.omega1, self.omega2, merged)

    def to_json(self) -> dict:
        return {
            "chart": self.chart.to_json(),
            "omega1": [str(c) for c in self.omega1.coefficients],
            "omega2": [str(c) for c in self.omega2.coefficients],
            "constants": dict(self.constants),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FormPair":
        chart = Chart.from_json(data["chart"])
        return cls(Form1(chart, data["omega1"]), Form1(chart, data["omega2"]), data.get("constants", {}))


@dataclass
class VerificationReport:
    frobenius: tuple
    volume: Optional[float]
    grid: dict
    rank_drop_points: list
    checked_points: int

    def max_residual(self) -> float:
        vals = list(self.frobenius) + ([self.volume] if self.volume is not None else [])
        return max(vals)

    def to_json(self) -> dict:
        return {
            "frobenius_residual": list(self.frobenius),
            "volume_residual": self.volume,
            "grid": self.grid,
            "checked_points": self.checked_points,
            "rank_drop_points": self.rank_drop_points,
        }


@dataclass
class ConnectionForm:
    """Solution ``w0`` of the structure equations on a set of points."""

    symbolic: Optional[Form1]
    points: dict
    values: np.ndarray
    residual: float
    lstsq_residual: float
    route_agreement: Optional[float]
    method: str
    excluded_points: list
    grid: Optional[Grid] = None
    valid_mask: Optional[np.ndarray] = None

    def to_json(self) -> dict:
        return {
            "omega0": None if self.symbolic is None else [str(c) for c in self.symbolic.coefficients],
            "method": self.method,
            "residual": self.residual,
            "lstsq_residual": self.lstsq_residual,
            "route_agreement": self.route_agreement,
            "excluded_points": self.excluded_points,
        }


@dataclass
class CurvatureField:
    points: dict
    values: np.ndarray
    consistency_residual: float
    closed_form: Optional[ex.Expression]
    excluded_points: list

    def to_json(self) -> dict:
        return {
            "closed_form": None if self.closed_form is None else str(self.closed_form),
            "consistency_residual": self.consistency_residual,
            "min": float(np.min(self.values)) if self.values.size else None,
            "max": float(np.max(self.values)) if self.values.size else None,
            "excluded_points": self.excluded_points,
        }


@dataclass
class Classification:
    label: str
    minkowski_residual: float
    desitter_residual: float
    curvature_spread: float
    curvature_mean: float
    warning: Optional[str] = None

    def to_json(self) -> dict:
        out = {
            "label": self.label,
            "minkowski_residual": self.minkowski_residual,
            "desitter_residual": self.desitter_residual,
            "curvature_spread": self.curvature_spread,
            "curvature_mean": self.curvature_mean,
        }
        if self.warning:
            out["warning"] = self.warning
        return out


# --------------------------------------------------------------------------- helpers

def _points(grid) -> dict:
    return grid.points() if isinstance(grid, Grid) else {k: np.asarray(v, dtype=float) for k, v in grid.items()}


def _grid_spec(grid) -> dict:
    return grid.spec() if isinstance(grid, Grid) else {"points": len(next(iter(grid.values())))}


def _sample(points: Mapping, mask: np.ndarray, limit: int = 10) -> list:
    idx = np.flatnonzero(mask)[:limit]
    return [{k: float(v[i]) for k, v in points.items()} for i in idx]


def _volume_norm(pair: FormPair, bind: Mapping) -> np.ndarray:
    return np.sqrt(np.sum(pair.volume().evaluate(bind) ** 2, axis=0))


def _regular_mask(pair: FormPair, points: Mapping) -> np.ndarray:
    return _volume_norm(pair, pair.bindings(points)) > RANK_THRESHOLD


def _subset(points: Mapping, mask: np.ndarray) -> dict:
    return {k: v[mask] for k, v in points.items()}


def _eval_form(form, bind, n) -> np.ndarray:
    vals = form.evaluate(bind)
    return np.broadcast_to(vals, (vals.shape[0], n)) if vals.ndim == 1 else vals


# --------------------------------------------------------------------------- checks

def frobenius_residuals(pair: FormPair, points: Mapping) -> tuple:
    bind = pair.bindings(points)
    out = []
    for w in (pair.omega1, pair.omega2):
        three = wedge12(w, d1(w))
        out.append(float(np.max(np.abs(three.evaluate(bind)))))
    return tuple(out)


def check_frobenius(pair: FormPair, grid) -> VerificationReport:
    """Max |coefficient of w_i ^ dw_i| over the grid, for i = 1, 2."""
    points = _points(grid)
    n = len(next(iter(points.values())))
    if n == 0:
        raise ValueError("empty grid")
    mask = _regular_mask(pair, points)
    return VerificationReport(
        frobenius=frobenius_residuals(pair, points),
        volume=None,
        grid=_grid_spec(grid),
        rank_drop_points=_sample(points, ~mask),
        checked_points=n,
    )


def check_transverse_volume(pair: FormPair, grid) -> float:
    """Max of ``|L_X(w1^w2)| / |w1^w2|`` with ``X`` the unit kernel direction.

    The kernel field is the cross product of the two coefficient triples, so
    its length equals ``|w1^w2|``; dividing by ``|w1^w2|^2`` makes the residual
    independent of how the leaf direction is scaled.
    """
    points = _points(grid)
    mask = _regular_mask(pair, points)
    if not np.any(mask):
        raise DegeneratePairError("kernel field vanishes at every grid point")
    pts = _subset(points, mask)
    bind = pair.bindings(pts)
    X = kernel_field(pair.omega1, pair.omega2)
    lie = lie2(X, pair.volume())
    n = int(mask.sum())
    vals = _eval_form(lie, bind, n)
    norm2 = _volume_norm(pair, bind) ** 2
    return float(np.max(np.max(np.abs(vals), axis=0) / norm2))


def verify(pair: FormPair, grid) -> VerificationReport:
    report = check_frobenius(pair, grid)
    report.volume = check_transverse_volume(pair, grid)
    return report


# --------------------------------------------------------------------------- connection form

def _null_coordinate_omega0(pair: FormPair) -> Optional[Form1]:
    """Closed form when each form has a single coefficient, on distinct axes.

    For ``w1 = A dc_i`` and ``w2 = B dc_j``:
    ``w0 = (d_i B / B) dc_i - (d_j A / A) dc_j + (d_k B / B - d_k A / A) / 2 dc_k``.
    """
    nz1 = [i for i, c in enumerate(pair.omega1.coefficients) if not ex.is_zero(c)]
    nz2 = [i for i, c in enumerate(pair.omega2.coefficients) if not ex.is_zero(c)]
    if len(nz1) != 1 or len(nz2) != 1 or nz1 == nz2:
        return None
    i, j = nz1[0], nz2[0]
    (k,) = {0, 1, 2} - {i, j}
    A = pair.omega1.coefficients[i]
    B = pair.omega2.coefficients[j]
    names = pair.chart.coords
    D = ex.differentiate
    coef = [ex.ZERO] * 3
    coef[i] = D(B, names[i]) / B
    coef[j] = -(D(A, names[j]) / A)
    coef[k] = (D(B, names[k]) / B - D(A, names[k]) / A) / 2
    return Form1(pair.chart, coef)


def _general_omega0(pair: FormPair) -> Form1:
    """Closed-form solution of the structure equations by vector algebra.

    Identify 1-forms with vectors and 2-forms with their Hodge duals, so that
    ``a^w`` becomes ``a x w``. With ``a = w1``, ``b = w2``, ``n = a x b``,
    ``P = *dw1`` and ``Q = -*dw2`` the system reads ``a x w = P``,
    ``b x w = Q``; its solution is
    ``w = (-(Q.n) a + (P.n) b + g n) / |n|^2`` with
    ``g = (Q.a - P.b) / 2``. The two expressions for ``g`` agree exactly when
    the transverse volume is invariant.
    """
    a = list(pair.omega1.coefficients)
    b = list(pair.omega2.coefficients)
    B1 = d1(pair.omega1).coefficients
    B2 = d1(pair.omega2).coefficients
    P = [B1[2], -B1[1], B1[0]]
    Q = [-B2[2], B2[1], -B2[0]]
    n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]

    def dot(u, v):
        return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]

    norm2 = ex.simplify(dot(n, n))
    qn = ex.simplify(dot(Q, n))
    pn = ex.simplify(dot(P, n))
    g = ex.simplify((dot(Q, a) - dot(P, b)) / 2)
    coef = [(-(qn * a[i]) + pn * b[i] + g * n[i]) / norm2 for i in range(3)]
    return Form1(pair.chart, coef)


def structure_residual(pair: FormPair, omega0: Form1, points: Mapping) -> float:
    """Max coefficient of ``dw1 - w1^w0`` and ``dw2 + w2^w0``."""
    bind = pair.bindings(points)
    r1 = d1(pair.omega1) - wedge11(pair.omega1, omega0)
    r2 = d1(pair.omega2) + wedge11(pair.omega2, omega0)
    return float(max(np.max(np.abs(r1.evaluate(bind))), np.max(np.abs(r2.evaluate(bind)))))


def _structure_system(pair: FormPair, bind: Mapping, n: int):
    a = _eval_form(pair.omega1, bind, n).T
    b = _eval_form(pair.omega2, bind, n).T
    da = _eval_form(d1(pair.omega1), bind, n).T
    db = _eval_form(d1(pair.omega2), bind, n).T
    M = np.zeros((n, 6, 3))
    for off, c in ((0, a), (3, b)):
        # rows of c ^ w in the basis (12, 13, 23)
        M[:, off + 0, 0], M[:, off + 0, 1] = -c[:, 1], c[:, 0]
        M[:, off + 1, 0], M[:, off + 1, 2] = -c[:, 2], c[:, 0]
        M[:, off + 2, 1], M[:, off + 2, 2] = -c[:, 2], c[:, 1]
    rhs = np.concatenate([da, -db], axis=1)
    return M, rhs


def _lstsq_omega0(pair: FormPair, points: Mapping):
    n = len(next(iter(points.values())))
    bind = pair.bindings(points)
    M, rhs = _structure_system(pair, bind, n)
    w = np.einsum("nij,nj->ni", np.linalg.pinv(M), rhs)
    resid = np.einsum("nij,nj->ni", M, w) - rhs
    return w.T, float(np.max(np.abs(resid))) if n else 0.0


def _snap_constants(pair: FormPair, omega0: Form1, points: Mapping, residual: float):
    """Replace coefficients that are numerically constant by literals.

    The snapped form is kept only if it still satisfies the structure
    equations as well as the original, so this never trades accuracy for
    readability.
    """
    n = len(next(iter(points.values())))
    if n == 0:
        return omega0, residual
    vals = _eval_form(omega0, pair.bindings(points), n)
    coef = list(omega0.coefficients)
    changed = False
    for i, row in enumerate(vals):
        if not isinstance(coef[i], ex.Const) and np.ptp(row) <= 1e-12 * (1 + abs(row[0])):
            coef[i] = ex.Const(float(np.round(np.mean(row), 12)) + 0.0)
            changed = True
    if not changed:
        return omega0, residual
    snapped = Form1(pair.chart, coef)
    res = structure_residual(pair, snapped, points)
    if res <= max(residual, 1e-12):
        return snapped, res
    return omega0, residual


def solve_connection(pair: FormPair, grid, tol: float = DEFAULT_TOL, strict: bool = False) -> ConnectionForm:
    """Solve ``dw1 = w1^w0``, ``dw2 = -w2^w0`` for ``w0``.

    Two independent routes run side by side: a pointwise least-squares solve
    of the 6x3 linear system on the grid, and a symbolic closed form (the
    null-coordinate formula when the pair is diagonal, otherwise the general
    vector-algebra formula) checked by substitution. Points where the pair
    drops rank are excluded and reported, or raise when ``strict``.
    """
    points = _points(grid)
    frob = frobenius_residuals(pair, points)
    if max(frob) > tol:
        raise NotLorentzianError(f"Frobenius residuals {frob} exceed tolerance {tol}")
    vol = check_transverse_volume(pair, grid)
    if vol > tol:
        raise NotLorentzianError(f"transverse volume residual {vol} exceeds tolerance {tol}")

    mask = _regular_mask(pair, points)
    if strict and not np.all(mask):
        raise RankDeficientError(f"pair drops rank at {_sample(points, ~mask, 3)}")
    pts = _subset(points, mask)

    values, lsq_res = _lstsq_omega0(pair, pts)
    if lsq_res > tol:
        raise NotLorentzianError(f"structure equations not solvable: residual {lsq_res}")

    symbolic, method = _null_coordinate_omega0(pair), "null-coordinate"
    if symbolic is None:
        symbolic, method = _general_omega0(pair), "closed-form"
    try:
        sym_res = structure_residual(pair, symbolic, pts)
    except ex.EvaluationError:
        sym_res = np.inf
    agreement = None
    if sym_res <= tol:
        symbolic, sym_res = _snap_constants(pair, symbolic, pts, sym_res)
        sym_vals = _eval_form(symbolic, pair.bindings(pts), int(mask.sum()))
        agreement = float(np.max(np.abs(sym_vals - values))) if values.size else 0.0
        residual = sym_res
    else:
        symbolic, method, residual = None, "gridded", lsq_res
    return ConnectionForm(
        symbolic=symbolic,
        points=pts,
        values=values,
        residual=residual,
        lstsq_residual=lsq_res,
        route_agreement=agreement,
        method=method,
        excluded_points=_sample(points, ~mask),
        grid=grid if isinstance(grid, Grid) else None,
        valid_mask=mask,
    )


# --------------------------------------------------------------------------- curvature

def _gridded_d_omega0(conn: ConnectionForm, pair: FormPair) -> np.ndarray:
    """Exterior derivative of a gridded ``w0`` by central differences."""
    grid = conn.grid
    if grid is None or not np.all(conn.valid_mask):
        raise ValueError("gridded connection needs a full rectangular grid without excluded points")
    shape = grid.shape
    w = conn.values.reshape((3,) + shape)
    axis_of = {a.name: i for i, a in enumerate(grid.axes)}
    spacing = {a.name: (a.values()[1] - a.values()[0]) if a.n > 1 else 1.0 for a in grid.axes}

    def deriv(comp, name):
        if name not in axis_of:
            return np.zeros(shape)
        return np.gradient(w[comp], spacing[name], axis=axis_of[name])

    c1, c2, c3 = pair.chart.coords
    out = np.stack([
        deriv(1, c1) - deriv(0, c2),
        deriv(2, c1) - deriv(0, c3),
        deriv(2, c2) - deriv(1, c3),
    ])
    return out.reshape(3, -1)


def d_omega0_values(pair: FormPair, conn: ConnectionForm) -> np.ndarray:
    n = len(next(iter(conn.points.values()))) if conn.points else 0
    if conn.symbolic is not None:
        return _eval_form(d1(conn.symbolic), pair.bindings(conn.points), n)
    return _gridded_d_omega0(conn, pair)


def curvature(pair: FormPair, conn: ConnectionForm, grid=None) -> CurvatureField:
    """Transverse curvature from ``dw0 = K w1^w2``.

    ``K`` is read off the dominant coefficient of ``w1^w2``; the largest
    mismatch over the other two coefficients is the consistency residual.
    """
    pts = conn.points
    n = len(next(iter(pts.values()))) if pts else 0
    bind = pair.bindings(pts)
    dw0 = d_omega0_values(pair, conn)
    beta = _eval_form(pair.volume(), bind, n)
    k = np.argmax(np.abs(beta), axis=0)
    dom = np.take_along_axis(beta, k[None, :], axis=0)[0]
    ok = np.abs(dom) > RANK_THRESHOLD
    if n and not np.any(ok):
        raise DegeneratePairError("w1^w2 is below threshold at every point")
    K = np.take_along_axis(dw0, k[None, :], axis=0)[0][ok] / dom[ok]
    resid = float(np.max(np.abs(dw0[:, ok] - K * beta[:, ok]))) if K.size else 0.0

    closed = None
    if conn.symbolic is not None:
        nonzero = [i for i, c in enumerate(pair.volume().coefficients) if not ex.is_zero(c)]
        if len(nonzero) == 1:
            i = nonzero[0]
            closed = ex.simplify(d1(conn.symbolic).coefficients[i] / pair.volume().coefficients[i])
    return CurvatureField(
        points=_subset(pts, ok),
        values=K,
        consistency_residual=resid,
        closed_form=closed,
        excluded_points=conn.excluded_points + _sample(pts, ~ok),
    )


def classify(pair: FormPair, grid, tol: float = DEFAULT_TOL) -> Classification:
    """Minkowski (``dw0 = 0``), de Sitter (``dw0 = w1^w2``), constant or not."""
    conn = solve_connection(pair, grid, tol=tol)
    n = len(next(iter(conn.points.values())))
    dw0 = d_omega0_values(pair, conn)
    beta = _eval_form(pair.volume(), pair.bindings(conn.points), n)
    mink = float(np.max(np.abs(dw0))) if n else 0.0
    desit = float(np.max(np.abs(dw0 - beta))) if n else 0.0
    K = curvature(pair, conn).values
    spread = float(np.ptp(K)) if K.size else 0.0
    mean = float(np.mean(K)) if K.size else 0.0
    warning = None
    if mink <= tol and desit <= tol:
        label = "Minkowski" if mink <= desit else "deSitter"
        warning = "both Minkowski and de Sitter within tolerance; reporting the smaller residual"
        warnings.warn(warning)
    elif mink <= tol:
        label = "Minkowski"
    elif desit <= tol:
        label = "deSitter"
    elif spread <= tol:
        label = "constant"
    else:
        label = "nonconstant"
    return Classification(label, mink, desit, spread, mean, warning)


def curvature_crosscheck(f, grid, names=("x1", "x2"), constants: Optional[Mapping] = None) -> float:
    """Compare the pipeline curvature of ``(e^f dx1, dx2)`` with ``-f_12 e^-f``."""
    f = ex.as_expr(f)
    chart = Chart((names[0], names[1], "x3"))
    pair = FormPair(Form1(chart, [ex.Func("exp", f), 0, 0]), Form1(chart, [0, 1, 0]), constants or {})
    conn = solve_connection(pair, grid)
    field = curvature(pair, conn)
    f12 = ex.differentiate(ex.differentiate(f, names[0]), names[1])
    expected = ex.evaluate(-f12 * ex.Func("exp", -f), pair.bindings(field.points))
    return float(np.max(np.abs(field.values - expected))) if field.values.size else 0.0


# --------------------------------------------------------------------------- deck maps

def deck_factors(pair: FormPair, grid, deck: Optional[DeckMap] = None) -> dict:
    """Compare ``deck^* w_i`` with ``w_i``.

    Returns, per form, the best constant factor ``c`` with
    ``deck^* w_i ~ c w_i`` and the relative residual of that proportionality,
    plus the plain invariance residual (``c = 1``).
    """
    deck = deck or pair.chart.deck
    if deck is None:
        raise ValueError("no deck transformation")
    points = _points(grid)
    bind = pair.bindings(points)
    out = {}
    for key, w in (("omega1", pair.omega1), ("omega2", pair.omega2)):
        orig = w.evaluate(bind)
        pulled = pullback1(w, deck).evaluate(bind)
        c = float(np.sum(orig * pulled) / np.sum(orig * orig))
        scale = np.max(np.abs(orig))
        out[key] = {
            "factor": c,
            "proportionality_residual": float(np.max(np.abs(pulled - c * orig)) / scale),
            "invariance_residual": float(np.max(np.abs(pulled - orig)) / scale),
        }
    return out
