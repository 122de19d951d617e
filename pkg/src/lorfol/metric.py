"""Lorentzian metrics ``e^f dx1 dx2`` in null coordinates and their geodesics.

In null coordinates the only nonzero Christoffel symbols are
``G^1_11 = f_1`` and ``G^2_22 = f_2``, so the geodesic equations decouple
into ``x1'' = -f_1 x1'^2`` and ``x2'' = -f_2 x2'^2``. Lightlike geodesics
along ``x2`` can run off to infinity in finite affine time; the integrator
below detects that by watching the velocity blow up while the step size
collapses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex
from .exterior import Chart, DeckMap, Form1
from .foliation import FormPair
from .grid import Grid

BLOWUP_SPEED = 1e8
BLOWUP_STEP = 1e-12
FIT_WINDOW = 20

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


class IntegrationError(RuntimeError):
    """Step size fell below its floor without the blow-up signature."""


class NoDeckError(ValueError):
    pass


@dataclass(frozen=True)
class NullMetric:
    f: ex.Expression
    names: tuple = ("x1", "x2")
    deck: Optional[DeckMap] = None
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "f", ex.simplify(ex.as_expr(self.f)))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "constants", dict(self.constants))
        if len(self.names) != 2 or self.names[0] == self.names[1]:
            raise ValueError("a null metric needs two distinct coordinate names")
        if self.deck is not None:
            if self.deck.dim != 2:
                raise ValueError("deck transformation must act on both coordinates")
            self.deck.check_invertible(self.constants)
        extra = ex.free_names(self.f) - set(self.names) - set(self.constants) - set(ex.BUILTIN_CONSTANTS)
        if extra:
            raise ValueError(f"unbound names in f: {sorted(extra)}")

    def __hash__(self):
        return hash((self.f, self.names, self.deck, tuple(sorted(self.constants.items()))))

    @property
    def f1(self) -> ex.Expression:
        return ex.differentiate(self.f, self.names[0])

    @property
    def f2(self) -> ex.Expression:
        return ex.differentiate(self.f, self.names[1])

    def with_constants(self, **constants) -> "NullMetric":
        merged = dict(self.constants)
        merged.update(constants)
        return NullMetric(self.f, self.names, self.deck, merged)

    def _bind(self, x1, x2) -> dict:
        b = dict(self.constants)
        b[self.names[0]] = x1
        b[self.names[1]] = x2
        return b

    def conformal_factor(self, x1, x2):
        return np.exp(ex.evaluate(self.f, self._bind(x1, x2)))

    def energy(self, x1, x2, v1, v2):
        """``g(v, v)`` up to the convention ``g = e^f dx1 dx2`` (symmetrized)."""
        return self.conformal_factor(x1, x2) * v1 * v2

    def to_form_pair(self) -> FormPair:
        """The null coframe ``(e^f dx1, dx2)`` on a 3-chart with a dummy leaf coordinate."""
        chart = Chart((self.names[0], self.names[1], "x3"))
        return FormPair(Form1(chart, [ex.Func("exp", self.f), 0, 0]), Form1(chart, [0, 1, 0]), self.constants)

    def to_json(self) -> dict:
        return {
            "f": str(self.f),
            "names": list(self.names),
            "deck": None if self.deck is None else self.deck.to_json(),
            "constants": dict(self.constants),
        }


@dataclass
class GeodesicState:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).copy()
        self.v = np.asarray(self.v, dtype=float).copy()
        self.t = float(self.t)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (n, 2)
    v: np.ndarray  # (n, 2)
    energy: np.ndarray
    wraps: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)

    def final(self) -> GeodesicState:
        return GeodesicState(self.x[-1], self.v[-1], self.t[-1])

    def columns(self) -> dict:
        cols = {
            "t": self.t,
            "x1": self.x[:, 0],
            "x2": self.x[:, 1],
            "v1": self.v[:, 0],
            "v2": self.v[:, 1],
            "energy": self.energy,
        }
        if self.wraps is not None:
            cols["wraps"] = self.wraps
        return cols


@dataclass
class CompletenessVerdict:
    tag: str  # "reached-horizon" | "blow-up"
    t_end: float
    t_star: Optional[float]
    t_star_uncertainty: Optional[float]
    energy_drift: float
    steps: int
    rejected: int
    max_speed: float
    min_step: float

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "t_end": self.t_end,
            "t_star": self.t_star,
            "t_star_uncertainty": self.t_star_uncertainty,
            "energy_drift": self.energy_drift,
            "steps": self.steps,
            "rejected_steps": self.rejected,
            "max_speed": self.max_speed,
            "min_step": self.min_step,
        }


def geodesic_rhs(m: NullMetric, s: GeodesicState) -> np.ndarray:
    """Time derivative ``(x1', x2', v1', v2')`` of a geodesic state."""
    b = m._bind(s.x[0], s.x[1])
    f1 = float(ex.evaluate(m.f1, b))
    f2 = float(ex.evaluate(m.f2, b))
    return np.array([s.v[0], s.v[1], -f1 * s.v[0] ** 2, -f2 * s.v[1] ** 2])


def _rhs_factory(m: NullMetric):
    f1, f2, consts, (n1, n2) = m.f1, m.f2, m.constants, m.names

    def rhs(y):
        b = dict(consts)
        b[n1], b[n2] = y[0], y[1]
        g1 = float(ex.evaluate(f1, b))
        g2 = float(ex.evaluate(f2, b))
        return np.array([y[2], y[3], -g1 * y[2] ** 2, -g2 * y[3] ** 2])

    return rhs


def _dopri_step(rhs, y, h, k1):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(rhs(yi))
    y5 = y + h * sum(b * kj for b, kj in zip(_B5, k))
    err = h * sum((b5 - b4) * kj for b5, b4, kj in zip(_B5, _B4, k))
    return y5, err, k[6]


def _fit_blowup(t: np.ndarray, speed: np.ndarray, window: int):
    """Root of the least-squares line through ``(t, 1/|v|)`` on the last points."""
    tt = t[-window:]
    w = 1.0 / speed[-window:]
    slope, icpt = np.polyfit(tt - tt[-1], w, 1)
    if slope >= 0:
        return None
    return tt[-1] - icpt / slope


def integrate(
    m: NullMetric,
    s0: GeodesicState,
    horizon: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    h0: Optional[float] = None,
    max_steps: int = 1_000_000,
    t_eval: Optional[Sequence[float]] = None,
    record: bool = True,
):
    """Adaptive Dormand-Prince 5(4) integration of the geodesic equations.

    Steps are controlled by a PI controller on the scaled error norm. The
    run stops at ``s0.t + horizon``, or as soon as an accepted step is both
    shorter than ``BLOWUP_STEP`` and ends with speed above ``BLOWUP_SPEED``;
    in the latter case the blow-up parameter is extrapolated from the last
    ``FIT_WINDOW`` accepted steps. With ``t_eval`` the steps are clipped so
    that those parameters are hit exactly and only they are recorded.

    Returns ``(trajectory, verdict)``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rhs = _rhs_factory(m)
    t = s0.t
    t_end = s0.t + horizon
    y = np.concatenate([s0.x, s0.v])
    e0 = float(m.energy(*y))
    stops = sorted(float(v) for v in t_eval) if t_eval is not None else []
    stops = [v for v in stops if s0.t <= v <= t_end]
    stop_i = 0

    ts, ys = [t], [y.copy()]
    if stops and stops[0] == t:
        stop_i = 1
    fit_t, fit_v = [t], [float(np.hypot(y[2], y[3]))]

    k1 = rhs(y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h0, horizon)
    err_prev = 1e-4
    steps = rejected = 0
    min_step = math.inf
    tag, t_star, unc = "reached-horizon", None, None

    while t < t_end:
        if steps + rejected >= max_steps:
            raise IntegrationError(f"step budget {max_steps} exhausted at t={t}")
        target = stops[stop_i] if stop_i < len(stops) else t_end
        hit = t + h >= target
        h_try = target - t if hit else h
        h_floor = 4 * np.spacing(max(abs(t), 1.0))
        if h_try < h_floor and not hit:
            raise IntegrationError(f"step size {h_try:.3g} below floor at t={t} without blow-up signature")

        y_new, err, k7 = _dopri_step(rhs, y, h_try, k1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.all(np.isfinite(y_new)):
            en = math.inf

        if en <= 1.0:
            t = target if hit else t + h_try
            y, k1 = y_new, k7
            steps += 1
            min_step = min(min_step, h_try)
            speed = float(np.hypot(y[2], y[3]))
            fit_t.append(t)
            fit_v.append(speed)
            if len(fit_t) > FIT_WINDOW + 5:
                del fit_t[0], fit_v[0]
            at_stop = stop_i < len(stops) and t == stops[stop_i]
            if at_stop:
                stop_i += 1
            if record and (not stops or at_stop):
                ts.append(t)
                ys.append(y.copy())
            # a large speed alone is not growth: require it to rise at every step of the fit window
            grew = len(fit_v) > FIT_WINDOW and bool(np.all(np.diff(fit_v[-FIT_WINDOW - 1:]) > 0))
            if speed > BLOWUP_SPEED and h_try < BLOWUP_STEP and grew:
                tag = "blow-up"
                tf, vf = np.array(fit_t), np.array(fit_v)
                w = min(FIT_WINDOW, len(tf))
                t_star = _fit_blowup(tf, vf, w)
                half = _fit_blowup(tf, vf, max(3, w // 2))
                if t_star is None:
                    t_star = t
                spread = abs(t_star - half) if half is not None else abs(t_star - t)
                unc = spread + abs(t_star - t) + 10 * rtol * max(1.0, abs(t_star))
                if record and stops:
                    ts.append(t)
                    ys.append(y.copy())
                break
            fac = 0.9 * en ** (-0.7 / 5) * err_prev ** (0.4 / 5) if en > 0 else 10.0
            fac = min(10.0, max(0.2, fac))
            err_prev = max(en, 1e-4)
            if not hit:
                h = h_try * fac
            else:
                h = max(h, h_try * fac) if h_try < h else h_try * fac
        else:
            rejected += 1
            fac = 0.9 * en ** (-1 / 5) if np.isfinite(en) else 0.1
            h = h_try * max(0.1, min(0.9, fac))

    arr = np.array(ys)
    energy = m.energy(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    energy = np.broadcast_to(np.asarray(energy, dtype=float), (len(arr),)).copy()
    final_e = float(m.energy(*y))
    drift = abs(final_e - e0) / abs(e0) if e0 != 0 else abs(final_e - e0)
    traj = Trajectory(np.array(ts), arr[:, :2].copy(), arr[:, 2:].copy(), energy)
    speeds = np.hypot(arr[:, 2], arr[:, 3])
    verdict = CompletenessVerdict(
        tag=tag,
        t_end=float(t),
        t_star=None if t_star is None else float(t_star),
        t_star_uncertainty=None if unc is None else float(unc),
        energy_drift=float(drift),
        steps=steps,
        rejected=rejected,
        max_speed=float(max(np.max(speeds), np.hypot(y[2], y[3]))),
        min_step=float(min_step),
    )
    return traj, verdict


def check_deck_invariance(m: NullMetric, grid) -> float:
    """Max relative mismatch ``|e^(f o g) s1 s2 - e^f| / e^f`` over the grid."""
    if m.deck is None:
        raise NoDeckError("metric has no deck transformation")
    pts = grid.points() if isinstance(grid, Grid) else {k: np.asarray(v, float) for k, v in grid.items()}
    x1, x2 = pts[m.names[0]], pts[m.names[1]]
    s, _ = m.deck.numeric(m.constants)
    y1, y2 = m.deck.apply([x1, x2], m.constants)
    pulled = m.conformal_factor(y1, y2) * s[0] * s[1]
    base = m.conformal_factor(x1, x2)
    return float(np.max(np.abs(pulled - base) / np.abs(base)))


def project_to_quotient(traj: Trajectory, deck: DeckMap, constants: Mapping = None, axis: Optional[int] = None) -> Trajectory:
    """Map every sample into the fundamental domain ``0 <= x_axis < shift``.

    ``axis`` defaults to the coordinate with a nonzero shift and unit scale.
    Positions move by ``g^(-k)``, velocities by its differential.
    """
    constants = constants or {}
    s, b = deck.numeric(constants)
    if axis is None:
        cand = [i for i in range(len(s)) if b[i] != 0 and s[i] == 1]
        if not cand:
            raise ValueError("deck map has no translation axis to wrap along")
        axis = cand[0]
    period = b[axis]
    k = np.floor(traj.x[:, axis] / period).astype(int)
    x = traj.x.copy()
    v = traj.v.copy()
    for kk in np.unique(k):
        sel = k == kk
        moved = deck.apply([x[sel, i] for i in range(x.shape[1])], constants, power=-int(kk))
        for i in range(x.shape[1]):
            x[sel, i] = moved[i]
            v[sel, i] = v[sel, i] * s[i] ** (-float(kk))
    # guard against x landing exactly on the upper edge through rounding
    x[:, axis] = np.where(x[:, axis] >= period, x[:, axis] - period, x[:, axis])
    return Trajectory(traj.t.copy(), x, v, traj.energy.copy(), k)


def project_state(s: GeodesicState, deck: DeckMap, constants: Mapping = None, axis: Optional[int] = None) -> GeodesicState:
    one = Trajectory(np.array([s.t]), s.x[None, :], s.v[None, :], np.zeros(1))
    p = project_to_quotient(one, deck, constants, axis)
    return GeodesicState(p.x[0], p.v[0], s.t)
