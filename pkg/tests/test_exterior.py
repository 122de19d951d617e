import math

import numpy as np
import pytest

from lorfol import catalog
from lorfol import expr as ex
from lorfol.exterior import (
    Chart,
    ChartMismatch,
    DeckMap,
    Form1,
    Form2,
    VectorField,
    coordinate_field,
    d1,
    d2,
    interior1,
    interior2,
    kernel_field,
    lie2,
    pullback1,
    wedge11,
    wedge12,
)
from lorfol.grid import Grid

XYZ = Chart(("x", "y", "z"))
DX, DY, DZ = (Form1(XYZ, [int(i == j) for j in range(3)]) for i in range(3))


def values(form, pts, **consts):
    b = dict(pts)
    b.update(consts)
    return form.evaluate(b)


def random_points(rng, n=40, lo=-1.0, hi=1.0):
    return {k: rng.uniform(lo, hi, n) for k in "xyz"}


def smooth(rng, depth=3):
    while True:
        e = ex.random_expression(rng, "xyz", depth)
        if not any(isinstance(s, ex.Func) and s.name == "abs" for s in ex.subexpressions(e)):
            return e


def test_wedge_basis():
    assert wedge11(DX, DY).coefficients == (ex.ONE, ex.ZERO, ex.ZERO)
    assert wedge12(DZ, wedge11(DX, DY)).coefficients == (ex.ONE,)


def test_wedge_self_is_zero():
    rng = np.random.default_rng(0)
    w = Form1(XYZ, [smooth(rng) for _ in range(3)])
    assert np.all(values(wedge11(w, w), random_points(rng)) == 0)


def test_nonflat_volume():
    p = catalog.get("nonflat-t3a")
    x, y = np.meshgrid(np.linspace(0, 1, 10), np.linspace(0, 2 * math.pi, 10))
    pts = {"x": x.ravel(), "y": y.ravel(), "z": np.zeros(100)}
    got = values(p.volume(), pts, **p.constants)
    expected = -(2.0 ** (pts["y"] / (2 * math.pi)))
    assert np.max(np.abs(got[0] - expected)) < 1e-14
    assert np.all(got[1:] == 0)


def test_flat_frobenius_form3_vanishes():
    p = catalog.get("flat-t3")
    rng = np.random.default_rng(1)
    w = p.omega1
    assert np.max(np.abs(values(wedge12(w, d1(w)), random_points(rng)))) < 1e-15


def test_contact_form():
    w = Form1(XYZ, [0, "x", 1])
    r = wedge12(w, d1(w))
    assert ex.evaluate(r.coefficients[0], {"x": 0.7}) == 1.0


def test_d1_examples():
    w = Form1(XYZ, ["cos(x)", 0, "sin(x)"])
    assert ex.simplify(d1(w).coefficients[1]) == ex.parse("cos(x)")
    assert d1(w).coefficients[0] == ex.ZERO and d1(w).coefficients[2] == ex.ZERO
    assert d1(DX).is_zero()

    rng = np.random.default_rng(2)
    lam = {"lambda": 2.0}
    v = Form1(XYZ, ["cos(y)", "lambda^(y/(2*pi))*sin(y)", 0])
    pts = random_points(rng, lo=0, hi=6)
    got = values(d1(v), pts, **lam)
    assert np.max(np.abs(got[0] - np.sin(pts["y"]))) < 1e-14
    assert np.all(got[1:] == 0)


def test_d1_against_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(10):
        w = Form1(XYZ, [smooth(rng) for _ in range(3)])
        pts = random_points(rng, 10)
        got = values(d1(w), pts)

        def partial(i, var):
            plus, minus = dict(pts), dict(pts)
            plus[var] = pts[var] + h
            minus[var] = pts[var] - h
            diff = (ex.evaluate(w.coefficients[i], plus) - ex.evaluate(w.coefficients[i], minus)) / (2 * h)
            return np.broadcast_to(diff, pts["x"].shape)

        fd = np.stack([partial(1, "x") - partial(0, "y"), partial(2, "x") - partial(0, "z"), partial(2, "y") - partial(1, "z")])
        assert np.max(np.abs(got - fd) / (1 + np.abs(got))) < 1e-6


def test_d2_examples():
    b = Form2(XYZ, [0, 0, "x"])
    assert ex.evaluate(d2(b).coefficients[0], {}) == 1.0


def test_dd_nonflat_connection_closed():
    w0 = Form1(XYZ, ["lambda^(-y/(2*pi))*cos(2*y)", "sin(2*y)", 0])
    r = d2(d1(w0))
    rng = np.random.default_rng(4)
    assert np.max(np.abs(values(r, random_points(rng), **{"lambda": 2.0}))) < 1e-14


def test_dd_zero_random_and_catalog():
    rng = np.random.default_rng(5)
    g = Grid.uniform({"x": (-1, 1), "y": (-1, 1), "z": (-1, 1)}, 5).points()
    forms = [Form1(XYZ, [ex.random_expression(rng, "xyz", 4) for _ in range(3)]) for _ in range(20)]
    for w in forms:
        assert np.max(np.abs(values(d2(d1(w)), g))) <= 1e-9
    for name in catalog.names():
        if catalog.entry(name).kind != "FormPair":
            continue
        p = catalog.get(name)
        for w in (p.omega1, p.omega2):
            pts = dict(zip(w.chart.coords, g.values()))
            assert np.max(np.abs(values(d2(d1(w)), pts, **p.constants))) <= 1e-9


def test_wedge_antisymmetry():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a = Form1(XYZ, [ex.random_expression(rng, "xyz", 3) for _ in range(3)])
        b = Form1(XYZ, [ex.random_expression(rng, "xyz", 3) for _ in range(3)])
        pts = random_points(rng)
        assert np.array_equal(values(wedge11(a, b), pts), -values(wedge11(b, a), pts))


def test_interior_examples():
    dz_field = coordinate_field(XYZ, "z")
    assert interior2(dz_field, wedge11(DX, DY)).is_zero()
    got = interior2(dz_field, wedge11(DX, DZ))
    assert [ex.evaluate(c, {}) for c in got.coefficients] == [-1.0, 0.0, 0.0]
    p = catalog.get("nonflat-t3a")
    assert interior2(coordinate_field(p.chart, "z"), p.volume()).is_zero()


def test_interior_against_bilinear_form():
    # i_X b applied to Y equals b(X, Y) with b(u, v) = sum_{i<j} b_ij (u_i v_j - u_j v_i)
    rng = np.random.default_rng(7)
    for _ in range(10):
        bc = rng.normal(size=3)
        X = rng.normal(size=3)
        Y = rng.normal(size=3)
        b = Form2(XYZ, list(bc))
        iX = interior2(VectorField(XYZ, list(X)), b)
        lhs = sum(ex.evaluate(c, {}) * y for c, y in zip(iX.coefficients, Y))
        pairs = [(0, 1), (0, 2), (1, 2)]
        rhs = sum(bc[k] * (X[i] * Y[j] - X[j] * Y[i]) for k, (i, j) in enumerate(pairs))
        assert abs(lhs - rhs) < 1e-13


def test_lie_examples():
    dz_field = coordinate_field(XYZ, "z")
    assert lie2(dz_field, wedge11(DX, DY)).is_zero()
    got = lie2(coordinate_field(XYZ, "x"), Form2(XYZ, ["x", 0, 0]))
    assert [ex.evaluate(ex.simplify(c), {}) for c in got.coefficients] == [1.0, 0.0, 0.0]
    p = catalog.get("nonflat-t3a")
    r = lie2(coordinate_field(p.chart, "z"), p.volume())
    rng = np.random.default_rng(8)
    assert np.all(values(r, random_points(rng), **p.constants) == 0)


def _matrix(b):
    b12, b13, b23 = b
    z = np.zeros_like(b12)
    return np.array([[z, b12, b13], [-b12, z, b23], [-b13, -b23, z]])


def test_cartan_matches_finite_difference_lie():
    # coordinate formula (L_X b)_ij = X^k d_k b_ij + b_kj d_i X^k + b_ik d_j X^k, partials by differences
    rng = np.random.default_rng(9)
    h = 1e-4
    names = "xyz"
    for _ in range(8):
        X = VectorField(XYZ, [smooth(rng, 3) for _ in range(3)])
        b = Form2(XYZ, [smooth(rng, 3) for _ in range(3)])
        pts = random_points(rng, 20)

        def shifted(k, sgn):
            q = dict(pts)
            q[names[k]] = pts[names[k]] + sgn * h
            return q

        B = _matrix(values(b, pts))
        Xv = values(X, pts)
        dB = [(_matrix(values(b, shifted(k, 1))) - _matrix(values(b, shifted(k, -1)))) / (2 * h) for k in range(3)]
        dX = [(values(X, shifted(k, 1)) - values(X, shifted(k, -1))) / (2 * h) for k in range(3)]  # dX[i][k] = d_i X^k
        L = sum(Xv[k] * dB[k] for k in range(3))
        L = L + np.einsum("kj...,ik...->ij...", B, np.array(dX)) + np.einsum("ik...,jk...->ij...", B, np.array(dX))
        fd = np.stack([L[0, 1], L[0, 2], L[1, 2]])
        got = values(lie2(X, b), pts)
        assert np.max(np.abs(got - fd) / (1 + np.abs(got))) < 1e-5


def test_kernel_field_examples():
    k = kernel_field(DX, DY)
    assert [ex.evaluate(c, {}) for c in k.coefficients] == [0.0, 0.0, 1.0]

    p = catalog.get("flat-t3")
    kf = kernel_field(p.omega1, p.omega2)
    rng = np.random.default_rng(10)
    pts = random_points(rng, lo=0, hi=2 * math.pi)
    x, y = pts["x"], pts["y"]
    expected = np.stack([-np.sin(x) * np.cos(y), np.cos(x) * np.sin(y), np.cos(x) * np.cos(y)])
    assert np.max(np.abs(values(kf, pts) - expected)) < 1e-15
    on_circle = {"x": np.array([math.pi / 2]), "y": np.array([math.pi / 2]), "z": np.array([0.3])}
    assert np.max(np.abs(values(kf, on_circle))) < 1e-15

    q = catalog.get("nonflat-t3a")
    kq = kernel_field(q.omega1, q.omega2)
    assert kq.coefficients[0] == ex.ZERO and kq.coefficients[1] == ex.ZERO
    assert abs(values(kq, {"x": np.array([0.0]), "y": np.array([1.0]), "z": np.array([0.0])}, **q.constants)[2, 0]) > 0


def test_kernel_field_annihilated():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = Form1(XYZ, [smooth(rng) for _ in range(3)])
        b = Form1(XYZ, [smooth(rng) for _ in range(3)])
        k = kernel_field(a, b)
        pts = random_points(rng, 100)
        kv = values(k, pts)
        big = np.linalg.norm(kv, axis=0) > 1e-6
        for w in (a, b):
            r = values(Form1(XYZ, [interior1(k, w), 0, 0]), pts)[0]
            assert np.all(np.abs(r[big]) <= 1e-12 * (1 + np.linalg.norm(kv, axis=0)[big] * np.linalg.norm(values(w, pts), axis=0)[big]))


def test_chart_mismatch():
    other = Chart(("x", "y", "r"))
    with pytest.raises(ChartMismatch):
        wedge11(DX, Form1(other, [1, 0, 0]))


def test_chart_rejects_repeated_names():
    with pytest.raises(ValueError):
        Chart(("x", "x", "z"))


def test_pullback_by_deck():
    deck = DeckMap(["lambda", 1, "1/lambda"], [0, "2*pi", 0])
    p = catalog.get("nonflat-t3a")
    pulled = pullback1(p.omega1, deck)
    rng = np.random.default_rng(12)
    pts = random_points(rng, lo=0, hi=6)
    np.testing.assert_allclose(values(pulled, pts, **p.constants), 2.0 * values(p.omega1, pts, **p.constants), rtol=1e-13, atol=1e-13)


def test_form_json_round_trip():
    w = Form1(XYZ, ["cos(x)", 0, "sin(x)"])
    assert Form1.from_json(w.to_json()) == w
