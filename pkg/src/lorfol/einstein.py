"""The Einstein torus ``RP^1 x RP^1`` and a hyperbolic conformal action on it.

Each ``RP^1`` factor is parametrized by an angle in ``R / pi Z`` through
``theta = arctan x``, so the Minkowski plane ``(x, y)`` with metric
``dx dy`` sits inside as the complement of the two circles ``theta = pi/2``
and ``phi = pi/2``. The linear map ``(x, y) -> (lambda x, y / lambda)``
extends to the whole torus; in the angle chart it reads
``theta -> atan2(lambda sin theta, cos theta)``, which is regular at the pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import expr as ex

POLE_EPS = 1e-12
P_POINT = (math.pi / 2, 0.0)
Q_POINT = (0.0, math.pi / 2)


class IdealCircleError(ValueError):
    """The point lies on a circle at infinity of the affine chart."""


class ExcludedPointError(ValueError):
    """The point is one of the two fixed points where the invariant metric degenerates."""


def reduce_angle(a):
    r = np.mod(a, math.pi)
    return np.where(r >= math.pi, 0.0, r) if isinstance(r, np.ndarray) else (0.0 if r >= math.pi else float(r))


def _angle_dist(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi / 2, math.pi) - math.pi / 2
    return np.abs(d)


@dataclass(frozen=True)
class EinPoint:
    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(reduce_angle(self.theta)))
        object.__setattr__(self, "phi", float(reduce_angle(self.phi)))

    def as_tuple(self) -> tuple:
        return (self.theta, self.phi)

    def is_near(self, other, tol: float = 1e-9) -> bool:
        return bool(_angle_dist(self.theta, other[0]) < tol and _angle_dist(self.phi, other[1]) < tol)

    def is_excluded(self, tol: float = 1e-9) -> bool:
        return self.is_near(P_POINT, tol) or self.is_near(Q_POINT, tol)


@dataclass(frozen=True)
class HyperbolicParam:
    lam: float = 2.0

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError("lambda must exceed 1")


def _lam(h) -> float:
    return h.lam if isinstance(h, HyperbolicParam) else HyperbolicParam(float(h)).lam


# ---------------------------------------------------------------------- chart

def embed_psi(x, y):
    """``(x, y) -> (arctan x, arctan y)`` reduced to ``[0, pi)``."""
    th, ph = reduce_angle(np.arctan(x)), reduce_angle(np.arctan(y))
    if np.ndim(th) == 0:
        return EinPoint(th, ph)
    return th, ph


def unembed(pt) -> tuple:
    th, ph = (pt.theta, pt.phi) if isinstance(pt, EinPoint) else pt
    th, ph = np.asarray(th, dtype=float), np.asarray(ph, dtype=float)
    if np.any(_angle_dist(th, math.pi / 2) < POLE_EPS) or np.any(_angle_dist(ph, math.pi / 2) < POLE_EPS):
        raise IdealCircleError("point lies on the ideal circle of the affine chart")
    x, y = np.tan(th), np.tan(ph)
    return (float(x), float(y)) if x.ndim == 0 else (x, y)


def pole_grid(n: int = 50, margin: float = 0.1):
    """``n x n`` angles in ``[-pi/2 + margin, pi/2 - margin]`` (both factors)."""
    a = np.linspace(-math.pi / 2 + margin, math.pi / 2 - margin, n)
    th, ph = np.meshgrid(a, a, indexing="ij")
    return th.ravel(), ph.ravel()


def pullback_identity_residual(n: int = 50, margin: float = 0.1) -> float:
    """Relative gap between ``dx dy`` transported by ``psi^-1`` and ``1/(cos^2 cos^2)``.

    The Jacobian factors ``dx/dtheta`` and ``dy/dphi`` are obtained by exact
    differentiation of ``tan``, independently of the closed form.
    """
    th, ph = pole_grid(n, margin)
    jac = ex.differentiate(ex.parse("tan(theta)"), "theta")
    transported = ex.evaluate(jac, {"theta": th}) * ex.evaluate(jac, {"theta": ph})
    closed = 1.0 / (np.cos(th) ** 2 * np.cos(ph) ** 2)
    return float(np.max(np.abs(transported - closed) / np.abs(closed)))


def chart_metric(x, y):
    """Coefficient of ``g0 = dx dy / (1 + x^2 y^2)``."""
    return 1.0 / (1.0 + np.asarray(x) ** 2 * np.asarray(y) ** 2)


def invariant_metric(theta, phi):
    """Coefficient of ``dtheta dphi / (cos^2 theta cos^2 phi + sin^2 theta sin^2 phi)``."""
    th, ph = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    den = np.cos(th) ** 2 * np.cos(ph) ** 2 + np.sin(th) ** 2 * np.sin(ph) ** 2
    if np.any(den < 1e-14):
        raise ExcludedPointError("invariant metric is singular at p and q")
    out = 1.0 / den
    return float(out) if out.ndim == 0 else out


def transported_chart_metric(x, y):
    """``g0`` pushed forward by ``psi``: chart coefficient times ``(1+x^2)(1+y^2)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return chart_metric(x, y) * (1 + x ** 2) * (1 + y ** 2)


# ---------------------------------------------------------------------- the action

def factor_action(lam: float, t, theta):
    """``x -> lam^t x`` on one ``RP^1`` factor, written in the angle."""
    k = np.power(lam, t)
    return reduce_angle(np.arctan2(k * np.sin(theta), np.cos(theta)))


def factor_derivative(lam: float, t, theta):
    """``d/dtheta`` of :func:`factor_action`: ``lam^t / (cos^2 + lam^(2t) sin^2)``."""
    k = np.power(lam, t)
    return k / (np.cos(theta) ** 2 + k * k * np.sin(theta) ** 2)


def fA_apply(h, n, pt):
    lam = _lam(h)
    if isinstance(pt, EinPoint):
        return EinPoint(factor_action(lam, n, pt.theta), factor_action(lam, -n, pt.phi))
    th, ph = pt
    return factor_action(lam, n, th), factor_action(lam, -n, ph)


def orbit(h, t, pt):
    """Flow ``exp(t a) x exp(-t a)``: ``(x, y) -> (lam^t x, lam^-t y)``."""
    return fA_apply(h, t, pt)


def orbit_speed(h, pt) -> tuple:
    """``d/dt`` of the orbit at ``t = 0``: ``ln(lam) sin cos`` in each factor (opposite signs)."""
    lam = _lam(h)
    th, ph = (pt.theta, pt.phi) if isinstance(pt, EinPoint) else pt
    c = math.log(lam)
    return c * np.sin(th) * np.cos(th), -c * np.sin(ph) * np.cos(ph)


def fA_isometry_residual(h, n_grid: int = 64, power: int = 1) -> float:
    """Max relative change of the invariant metric under pullback by ``f_A^power``.

    The grid uses cell centers of ``[0, pi)^2``, which avoids ``p`` and ``q``.
    """
    lam = _lam(h)
    a = (np.arange(n_grid) + 0.5) * math.pi / n_grid
    th, ph = (m.ravel() for m in np.meshgrid(a, a, indexing="ij"))
    th2, ph2 = fA_apply(lam, power, (th, ph))
    pulled = invariant_metric(th2, ph2) * factor_derivative(lam, power, th) * factor_derivative(lam, -power, ph)
    base = invariant_metric(th, ph)
    return float(np.max(np.abs(pulled - base) / base))


def g0_isometry_residual(h, n: int = 5, samples: int = 200, seed: int = 0) -> float:
    """``g0``-norm of ``d(f_A^n)`` on the affine chart; exactly 1 for an isometry."""
    lam = _lam(h)
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-5, 5, (2, samples))
    k = lam ** n
    # diag(k, 1/k): dx dy scales by 1, and (kx)(y/k) = xy
    ratio = chart_metric(k * x, y / k) * k * (1 / k) / chart_metric(x, y)
    return float(np.max(np.abs(ratio - 1)))


# ---------------------------------------------------------------------- developing map

@dataclass(frozen=True)
class DevelopingSpec:
    P1: ex.Expression
    P2: ex.Expression
    names: tuple = ("s1", "s2")
    t_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "P1", ex.simplify(ex.as_expr(self.P1)))
        object.__setattr__(self, "P2", ex.simplify(ex.as_expr(self.P2)))
        object.__setattr__(self, "names", tuple(self.names))

    def to_json(self) -> dict:
        return {"P1": str(self.P1), "P2": str(self.P2), "names": list(self.names), "t_range": list(self.t_range)}


@dataclass
class DevelopingReport:
    theta: np.ndarray
    phi: np.ndarray
    sigma_min: float
    rank_drop: list

    def to_json(self) -> dict:
        return {"sigma2_min": self.sigma_min, "rank_drop_points": self.rank_drop, "samples": int(self.theta.size)}


def developing_map(spec: DevelopingSpec, h, points: Mapping[str, np.ndarray],
                   constants: Optional[Mapping] = None, step: float = 1e-6) -> DevelopingReport:
    """Evaluate ``D(x, t) = (exp(ta) P1(x), exp(-ta) P2(x))`` and its rank.

    ``points`` binds the two chart names and ``t``. The 2x3 Jacobian is
    taken by central differences; points whose smaller singular value is
    below 1e-8 are listed as rank-drop witnesses.
    """
    lam = _lam(h)
    constants = dict(constants or {})
    n1, n2 = spec.names
    base = {k: np.asarray(v, dtype=float) for k, v in points.items()}
    size = len(base["t"])

    def D(b):
        bind = dict(constants)
        bind.update(b)
        p1 = np.broadcast_to(ex.evaluate(spec.P1, bind), (size,))
        p2 = np.broadcast_to(ex.evaluate(spec.P2, bind), (size,))
        return factor_action(lam, b["t"], p1), factor_action(lam, -b["t"], p2)

    th, ph = D(base)
    cols = []
    for name in (n1, n2, "t"):
        plus, minus = dict(base), dict(base)
        plus[name] = base[name] + step
        minus[name] = base[name] - step
        tp, pp = D(plus)
        tm, pm = D(minus)
        dth = (np.mod(tp - tm + math.pi / 2, math.pi) - math.pi / 2) / (2 * step)
        dph = (np.mod(pp - pm + math.pi / 2, math.pi) - math.pi / 2) / (2 * step)
        cols.append(np.stack([dth, dph], axis=-1))
    J = np.stack(cols, axis=-1)  # (size, 2, 3)
    sig = np.linalg.svd(J, compute_uv=False)[:, 1]
    bad = np.flatnonzero(sig < 1e-8)[:10]
    drops = [{k: float(v[i]) for k, v in base.items()} for i in bad]
    return DevelopingReport(th, ph, float(np.min(sig)), drops)


# ---------------------------------------------------------------------- equicontinuity

@dataclass
class EquicontinuityResult:
    sup: float
    argmax: int
    sup_doubled: float
    equicontinuous: bool

    def to_json(self) -> dict:
        return {
            "sup": self.sup,
            "argmax_n": self.argmax,
            "sup_doubled_window": self.sup_doubled,
            "classification": "equicontinuous" if self.equicontinuous else "non-equicontinuous",
        }


def derivative_norms(h, pt: EinPoint, ns: np.ndarray) -> np.ndarray:
    """Euclidean operator norm of ``d(f_A^n)`` at ``pt`` in the angle chart."""
    lam = _lam(h)
    a = factor_derivative(lam, ns.astype(float), pt.theta)
    b = factor_derivative(lam, -ns.astype(float), pt.phi)
    return np.maximum(np.abs(a), np.abs(b))


def equicontinuity_probe(h, pt: EinPoint, N: int, tol: float = 1e-9) -> EquicontinuityResult:
    """Sup over ``|n| <= N`` of ``|d(f_A^n)|`` and a doubling-window verdict.

    The point counts as equicontinuous when widening the window to ``2N``
    does not raise the sup (relative tolerance ``tol``).
    """
    if not isinstance(pt, EinPoint):
        pt = EinPoint(*pt)
    if pt.is_excluded():
        raise ExcludedPointError("the probe is undefined at the fixed points p and q")
    ns = np.arange(-N, N + 1)
    norms = derivative_norms(h, pt, ns)
    sup = float(np.max(norms))
    ns2 = np.arange(-2 * N, 2 * N + 1)
    sup2 = float(np.max(derivative_norms(h, pt, ns2)))
    return EquicontinuityResult(sup, int(ns[np.argmax(norms)]), sup2, abs(sup2 - sup) <= tol * max(1.0, sup))


def point_from(x=None, y=None, theta=None, phi=None) -> EinPoint:
    """Build a point from any mix of affine (x, y) and angle (theta, phi) coordinates."""
    if (x is None) == (theta is None) or (y is None) == (phi is None):
        raise ValueError("give exactly one of x/theta and one of y/phi")
    th = math.atan(x) if theta is None else theta
    ph = math.atan(y) if phi is None else phi
    return EinPoint(th, ph)
