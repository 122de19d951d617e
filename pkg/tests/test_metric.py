import math

import numpy as np
import pytest

from lorfol import catalog
from lorfol.exterior import DeckMap
from lorfol.grid import Grid
from lorfol.metric import (
    GeodesicState,
    NoDeckError,
    NullMetric,
    check_deck_invariance,
    geodesic_rhs,
    integrate,
    project_state,
    project_to_quotient,
)

PLANE = Grid.uniform({"x1": (-2, 2), "x2": (-2, 2)}, 9)


def cylinder(lam=2.0):
    return catalog.get("incomplete-cylinder", {"lambda": lam})


def test_rhs_examples():
    s = GeodesicState([0.3, -0.4], [1.5, 2.0])
    assert np.all(geodesic_rhs(NullMetric("0"), s)[2:] == 0)
    r = geodesic_rhs(cylinder(), GeodesicState([0.1, 0.7], [0.0, 3.0]))
    assert r[3] == pytest.approx(math.log(2) * 9.0, rel=1e-15)
    assert r[2] == 0
    r = geodesic_rhs(NullMetric("-ln(x1)"), GeodesicState([2.0, 0.0], [3.0, 0.0]))
    assert r[2] == pytest.approx(9.0 / 2.0, rel=1e-15)


def test_flat_straight_line():
    traj, v = integrate(NullMetric("0"), GeodesicState([0.0, 0.0], [1.0, -2.0]), 50.0)
    assert v.tag == "reached-horizon"
    assert v.energy_drift == 0
    np.testing.assert_allclose(traj.x[-1], [50.0, -100.0], rtol=1e-14)


def test_cylinder_closed_form_and_blowup():
    ts = np.linspace(0, 1.4, 15)
    traj, _ = integrate(cylinder(), GeodesicState([0.0, 0.0], [0.0, 1.0]), 1.4, t_eval=ts)
    ln2 = math.log(2)
    np.testing.assert_allclose(traj.x[:, 1], -np.log(1 - ts * ln2) / ln2, rtol=1e-8, atol=1e-12)
    _, v = integrate(cylinder(), GeodesicState([0.0, 0.0], [0.0, 1.0]), 100.0)
    assert v.tag == "blow-up"
    assert abs(v.t_star - 1 / ln2) <= 0.01 / ln2
    assert abs(v.t_star - 1 / ln2) <= v.t_star_uncertainty
    assert v.max_speed > 1e8 and v.min_step < 1e-12


def test_log_metric_is_complete():
    traj, v = integrate(NullMetric("-ln(x1)"), GeodesicState([1.0, 0.0], [1.0, 0.0]), 10.0)
    assert v.tag == "reached-horizon"
    assert traj.x[-1, 0] == pytest.approx(math.exp(10.0), rel=1e-7)


def test_fast_but_smooth_is_not_blowup():
    # speed far above the threshold, but steps stay large: no blow-up
    _, v = integrate(NullMetric("0"), GeodesicState([0.0, 0.0], [1e9, 0.0]), 1.0)
    assert v.tag == "reached-horizon"


@pytest.mark.parametrize("f,x0,v0,horizon", [
    ("0.3*sin(x1)*cos(x2)", [1.0, 1.0], [0.3, 0.2], 20.0),
    ("-2*ln(cosh((x1+x2)/sqrt(2)))", [0.5, -0.3], [-0.2, 0.4], 3.0),
    ("x1*x2/(1+x1^2+x2^2)", [0.0, 0.0], [1.0, -1.0], 10.0),
])
def test_energy_conserved(f, x0, v0, horizon):
    m = NullMetric(f)
    _, v = integrate(m, GeodesicState(x0, v0), horizon)
    assert v.tag == "reached-horizon"
    assert v.energy_drift <= 1e-6


def test_null_directions_decouple():
    m = NullMetric("sin(x1)*x2 + 0.3*x1^2")
    traj, _ = integrate(m, GeodesicState([0.2, 0.1], [1.0, 0.0]), 3.0)
    assert np.all(traj.v[:, 1] == 0) and np.all(traj.x[:, 1] == 0.1)
    traj, _ = integrate(m, GeodesicState([0.2, 0.1], [0.0, -1.0]), 3.0)
    assert np.all(traj.v[:, 0] == 0) and np.all(traj.x[:, 0] == 0.2)


@pytest.mark.parametrize("lam", [1.5, 2.0, 4.0])
def test_blowup_estimate_stable_under_tolerance(lam):
    s0 = GeodesicState([0.0, 0.0], [0.0, 1.0])
    _, a = integrate(cylinder(lam), s0, 100.0, rtol=1e-9)
    _, b = integrate(cylinder(lam), s0, 100.0, rtol=5e-10)
    assert a.tag == b.tag == "blow-up"
    assert abs(a.t_star - b.t_star) < a.t_star_uncertainty
    assert abs(a.t_star - 1 / math.log(lam)) < 1e-8


def test_deck_invariance_examples():
    assert check_deck_invariance(cylinder(), PLANE) <= 1e-15
    assert check_deck_invariance(NullMetric("0", deck=DeckMap([1, 1], [0.7, 0])), PLANE) == 0
    shifted = NullMetric("-x2*ln(lambda)", deck=DeckMap([1, 1], ["tau", 0]), constants={"lambda": 2.0, "tau": 0.4})
    assert check_deck_invariance(shifted, PLANE) <= 1e-15
    broken = NullMetric("-x2*ln(lambda)", deck=DeckMap([1, 1], [0, 1]), constants={"lambda": 2.0})
    assert check_deck_invariance(broken, PLANE) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(NoDeckError):
        check_deck_invariance(NullMetric("0"), PLANE)


def test_project_wraps():
    m = cylinder()
    same = project_state(GeodesicState([0.4, 0.25], [1.0, 2.0]), m.deck, m.constants)
    np.testing.assert_array_equal(same.x, [0.4, 0.25])

    one = project_state(GeodesicState([0.4, 1.5], [1.0, 2.0]), m.deck, m.constants)
    np.testing.assert_allclose(one.x, [0.2, 0.5])
    np.testing.assert_allclose(one.v, [0.5, 2.0])

    two = project_state(GeodesicState([0.4, 2.5], [1.0, 2.0]), m.deck, m.constants)
    np.testing.assert_allclose(two.x, [0.1, 0.5])
    np.testing.assert_allclose(two.v, [0.25, 2.0])

    back = project_state(GeodesicState([0.4, -0.5], [1.0, 2.0]), m.deck, m.constants)
    np.testing.assert_allclose(back.x, [0.8, 0.5])
    np.testing.assert_allclose(back.v, [2.0, 2.0])


def test_projection_keeps_energy():
    m = cylinder()
    traj, _ = integrate(m, GeodesicState([0.5, 2.5], [0.3, -1.0]), 10.0)
    p = project_to_quotient(traj, m.deck, m.constants)
    e = m.energy(p.x[:, 0], p.x[:, 1], p.v[:, 0], p.v[:, 1])
    np.testing.assert_allclose(e, traj.energy, rtol=1e-12)
    assert np.all((p.x[:, 1] >= 0) & (p.x[:, 1] < 1))


def test_deck_equivariance():
    m = cylinder()
    s0 = GeodesicState([0.5, 2.5], [0.3, -1.0])
    ts = np.linspace(0, 10, 41)
    a, _ = integrate(m, s0, 10.0, t_eval=ts)
    pa = project_to_quotient(a, m.deck, m.constants)
    b, _ = integrate(m, project_state(s0, m.deck, m.constants), 10.0, t_eval=ts)
    pb = project_to_quotient(b, m.deck, m.constants)
    assert pa.wraps[-1] - pa.wraps[0] <= -3
    same = pa.wraps - pa.wraps[0] == pb.wraps - pb.wraps[0]
    assert same.mean() > 0.9
    assert np.max(np.abs(pa.x[same] - pb.x[same])) <= 1e-8
    assert np.max(np.abs(pa.v[same] - pb.v[same])) <= 1e-8


def test_t_eval_hits_requested_parameters():
    ts = [0.0, 0.25, 0.5, 2.0]
    traj, _ = integrate(NullMetric("x1*x2"), GeodesicState([0.1, 0.2], [0.5, 0.5]), 2.0, t_eval=ts)
    np.testing.assert_array_equal(traj.t, ts)


def test_metric_rejects_unbound_names():
    with pytest.raises(ValueError):
        NullMetric("-x2*ln(mu)")


def test_form_pair_of_metric_has_same_volume():
    m = NullMetric("x1*x2")
    p = m.to_form_pair()
    pts = {"x1": np.array([0.3, -0.5]), "x2": np.array([0.7, 0.2]), "x3": np.zeros(2)}
    vol = p.volume().evaluate(p.bindings(pts))
    np.testing.assert_allclose(np.abs(vol[0]), np.exp(pts["x1"] * pts["x2"]), rtol=1e-14)
