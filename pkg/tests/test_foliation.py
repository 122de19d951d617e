import json
import math

import numpy as np
import pytest

from lorfol import catalog
from lorfol import expr as ex
from lorfol.exterior import Chart, Form1
from lorfol.foliation import (
    FormPair,
    NotLorentzianError,
    RankDeficientError,
    check_frobenius,
    check_transverse_volume,
    classify,
    curvature,
    curvature_crosscheck,
    deck_factors,
    solve_connection,
    structure_residual,
    verify,
)
from lorfol.grid import Grid
from lorfol.metric import NullMetric

XYZ = Chart(("x", "y", "z"))
CUBE = Grid.uniform({"x": (-1, 1), "y": (-1, 1), "z": (-1, 1)}, 6)


def pair(w1, w2, **consts):
    return FormPair(Form1(XYZ, w1), Form1(XYZ, w2), consts)


def liouville_grid(n):
    return Grid.uniform({"x1": (-1, 1), "x2": (-1, 1), "x3": (0, 1)}, n)


def test_frobenius_examples():
    flat = catalog.get("flat-t3")
    rep = check_frobenius(flat, catalog.entry("flat-t3").grid(16))
    assert max(rep.frobenius) <= 1e-12
    assert max(check_frobenius(pair([1, 0, 0], [0, 1, 0]), CUBE).frobenius) == 0
    contact = check_frobenius(pair([0, "x", 1], [0, 1, 0]), CUBE)
    assert contact.frobenius[0] == pytest.approx(1.0, abs=1e-15)
    assert contact.frobenius[1] == 0


def test_transverse_volume_examples():
    assert check_transverse_volume(catalog.get("nonflat-t3a"), catalog.entry("nonflat-t3a").grid(8)) <= 1e-14
    assert check_transverse_volume(pair([1, 0, 0], [0, 1, 0]), CUBE) == 0
    assert check_transverse_volume(pair(["exp(z)", 0, 0], [0, 1, 0]), CUBE) > 0.5


def test_verify_reports_rank_drop_circles():
    flat = catalog.get("flat-t3")
    g = Grid.uniform({"x": (0, math.pi), "y": (0, math.pi), "z": (0, 1)}, {"x": 3, "y": 3, "z": 2})
    rep = verify(flat, g)
    assert rep.rank_drop_points
    assert all(abs(math.cos(p["x"])) < 1e-12 and abs(math.cos(p["y"])) < 1e-12 for p in rep.rank_drop_points)
    assert rep.max_residual() <= 1e-12
    json.dumps(rep.to_json())


def test_connection_flat_is_dz():
    conn = solve_connection(catalog.get("flat-t3"), catalog.entry("flat-t3").grid(12))
    assert [ex.evaluate(c, {}) for c in conn.symbolic.coefficients] == [0.0, 0.0, 1.0]
    assert conn.residual == 0.0
    assert conn.route_agreement <= 1e-12


def test_connection_nonflat_closed_form():
    p = catalog.get("nonflat-t3a")
    conn = solve_connection(p, catalog.entry("nonflat-t3a").grid())
    y = conn.points["y"]
    expected = np.stack([2.0 ** (-y / (2 * math.pi)) * np.cos(2 * y), np.sin(2 * y), 0 * y])
    assert np.max(np.abs(conn.values - expected)) <= 1e-12
    assert conn.residual <= 1e-12
    assert conn.route_agreement <= 1e-12


def test_connection_null_coordinates():
    chart = Chart(("x1", "x2", "x3"))
    f1, f2 = ex.parse("sin(x1*x2) + x2"), ex.parse("x1^2 - cos(x2)")
    p = FormPair(Form1(chart, [ex.Func("exp", f1), 0, 0]), Form1(chart, [0, ex.Func("exp", f2), 0]))
    conn = solve_connection(p, liouville_grid(7))
    assert conn.method == "null-coordinate"
    pts = conn.points
    expected = np.stack([
        np.broadcast_to(ex.evaluate(ex.differentiate(f2, "x1"), pts), pts["x1"].shape),
        -ex.evaluate(ex.differentiate(f1, "x2"), pts),
        np.zeros_like(pts["x1"]),
    ])
    assert np.max(np.abs(conn.values - expected)) <= 1e-12


def test_connection_rejects_contact_pair():
    with pytest.raises(NotLorentzianError):
        solve_connection(pair([0, "x", 1], [0, 1, 0]), CUBE)


def test_connection_rank_drop_excluded_or_strict():
    mr2 = catalog.get("moussu-roussarie-2")
    g = catalog.entry("moussu-roussarie-2").grid(9)
    conn = solve_connection(mr2, g)
    assert conn.excluded_points and all(abs(p["r"] - 0.5) < 1e-12 for p in conn.excluded_points)
    with pytest.raises(RankDeficientError):
        solve_connection(mr2, g, strict=True)


def test_curvature_examples():
    flat = catalog.get("flat-t3")
    g = catalog.entry("flat-t3").grid(10)
    assert np.max(np.abs(curvature(flat, solve_connection(flat, g)).values)) == 0

    p = catalog.get("nonflat-t3a", {"lambda": 3.0})
    K = curvature(p, solve_connection(p, catalog.entry("nonflat-t3a").grid()))
    y = K.points["y"]
    lam = 3.0
    expected = -lam ** (-y / math.pi) * (math.log(lam) / (2 * math.pi) * np.cos(2 * y) + 2 * np.sin(2 * y))
    assert np.max(np.abs(K.values - expected)) <= 1e-12
    assert K.closed_form is not None
    assert K.consistency_residual <= 1e-12

    ds = catalog.get("desitter-null").to_form_pair()
    Kd = curvature(ds, solve_connection(ds, liouville_grid(9)))
    assert np.max(np.abs(Kd.values - 1)) <= 1e-12


def test_liouville_identity():
    f = ex.parse("-2*ln(cosh((x1+x2)/sqrt(2)))")
    f12 = ex.differentiate(ex.differentiate(f, "x1"), "x2")
    rng = np.random.default_rng(0)
    pts = {"x1": rng.uniform(-2, 2, 50), "x2": rng.uniform(-2, 2, 50)}
    assert np.max(np.abs(ex.evaluate(f12 + ex.Func("exp", f), pts))) < 1e-14


def test_classify_examples():
    assert classify(catalog.get("flat-t3"), catalog.entry("flat-t3").grid(8)).label == "Minkowski"
    assert classify(catalog.get("desitter-null").to_form_pair(), liouville_grid(8)).label == "deSitter"
    assert classify(catalog.get("nonflat-t3a"), catalog.entry("nonflat-t3a").grid()).label == "nonconstant"


def test_classify_constant_curvature():
    # shifting f by -ln 4 multiplies K = -f12 e^-f by 4
    p = NullMetric("-2*ln(cosh((x1+x2)/sqrt(2))) - ln(4)").to_form_pair()
    c = classify(p, liouville_grid(8))
    assert c.label == "constant"
    assert c.curvature_mean == pytest.approx(4.0, rel=1e-12)


def test_classify_tie_warns():
    # dw0 = 0 and w1^w2 = 1e-7 are both within the tolerance
    p = pair([1, 0, 0], [0, "1e-7", 0])
    with pytest.warns(UserWarning):
        c = classify(p, CUBE, tol=1e-6)
    assert c.label == "Minkowski"


@pytest.mark.parametrize("n", [8, 32])
def test_classification_stable_under_refinement(n):
    assert classify(catalog.get("flat-t3"), catalog.entry("flat-t3").grid(n)).label == "Minkowski"
    assert classify(catalog.get("desitter-null").to_form_pair(), liouville_grid(n)).label == "deSitter"


def test_crosscheck_examples():
    g = liouville_grid(11)
    assert curvature_crosscheck("0", g) == 0
    assert curvature_crosscheck("x1*x2", g) <= 1e-9
    assert curvature_crosscheck("-2*ln(cosh((x1+x2)/sqrt(2)))", g) <= 1e-9
    chart = Chart(("x1", "x2", "x3"))
    p = FormPair(Form1(chart, ["exp(x1*x2)", 0, 0]), Form1(chart, [0, 1, 0]))
    K = curvature(p, solve_connection(p, g))
    assert np.max(np.abs(K.values + np.exp(-K.points["x1"] * K.points["x2"]))) <= 1e-12


def test_crosscheck_random_functions():
    rng = np.random.default_rng(77)
    g = liouville_grid(9)
    done = 0
    while done < 10:
        f = ex.random_expression(rng, ["x1", "x2"], depth=4)
        if any(isinstance(s, ex.Func) and s.name == "abs" for s in ex.subexpressions(f)):
            continue
        assert curvature_crosscheck(f, g) <= 1e-6, str(f)
        done += 1


def _catalog_pairs():
    out = []
    for name in catalog.names():
        e = catalog.entry(name)
        if e.kind == "FormPair":
            out.append((name, catalog.get(name), e.grid(7 if name != "nonflat-t3a" else None)))
        elif e.kind == "NullMetric":
            ranges = dict(e.ranges, x3=(0.0, 1.0))
            out.append((name, catalog.get(name).to_form_pair(), Grid.uniform(ranges, 6)))
    return out


@pytest.mark.parametrize("name,p,g", _catalog_pairs(), ids=lambda v: v if isinstance(v, str) else "")
def test_connection_is_unique(name, p, g):
    conn = solve_connection(p, g)
    assert conn.symbolic is not None
    base = structure_residual(p, conn.symbolic, conn.points)
    c1 = p.chart.coords[0]
    bumped = conn.symbolic + Form1(p.chart, [1e-3 if c == c1 else 0 for c in p.chart.coords])
    assert structure_residual(p, bumped, conn.points) > base + 1e-4


def test_gauge_covariance_of_curvature():
    p = catalog.get("nonflat-t3a")
    g = ex.parse("exp(0.3*sin(x + z) + 0.2*cos(y))")
    q = FormPair(p.omega1.scale(g), p.omega2.scale(1 / g), p.constants)
    grid = catalog.entry("nonflat-t3a").grid({"x": 4, "y": 32, "z": 4})
    Kp = curvature(p, solve_connection(p, grid))
    Kq = curvature(q, solve_connection(q, grid))
    vol_p = p.volume().evaluate(p.bindings(grid.points()))
    vol_q = q.volume().evaluate(q.bindings(grid.points()))
    assert np.max(np.abs(vol_p - vol_q)) <= 1e-12
    assert np.max(np.abs(Kp.values - Kq.values)) <= 1e-8


def test_deck_factors_scale_by_lambda():
    for lam in (2.0, (3 + math.sqrt(5)) / 2):
        p = catalog.get("nonflat-t3a", {"lambda": lam})
        out = deck_factors(p, catalog.entry("nonflat-t3a").grid(8))
        for key in ("omega1", "omega2"):
            assert out[key]["factor"] == pytest.approx(lam, rel=1e-12)
            assert out[key]["proportionality_residual"] <= 1e-12


def test_nonflat_curvature_scales_under_deck():
    # forms scale by lambda under the deck map, so K(y + 2 pi) = K(y) / lambda^2
    lam = 2.0
    y = np.linspace(0, 2 * math.pi, 17)

    def K(y):
        return -lam ** (-y / math.pi) * (math.log(lam) / (2 * math.pi) * np.cos(2 * y) + 2 * np.sin(2 * y))

    np.testing.assert_allclose(K(y + 2 * math.pi), K(y) / lam ** 2, rtol=1e-12, atol=1e-14)


def test_pair_json_round_trip():
    p = catalog.get("nonflat-t3a")
    q = FormPair.from_json(json.loads(json.dumps(p.to_json())))
    assert q.omega1 == p.omega1 and q.omega2 == p.omega2 and q.constants == p.constants
