"""Command line interface.

Exit codes: 0 success, 1 verification or classification failure,
2 usage or expression errors, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import catalog, dynamics, einstein, foliation, metric
from . import expr as ex
from .exterior import Chart, Form1, d1
from .grid import Grid, parallel
from .io import csv_text, dumps

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, payload, message):
        super().__init__(message)
        self.payload = payload


# ---------------------------------------------------------------------- parsing helpers

def _floats(text, n=None, name="value"):
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    elif isinstance(text, (int, float)):
        vals = [float(text)]
    else:
        try:
            vals = [float(ex.evaluate(ex.parse(v), {})) for v in str(text).split(",")]
        except (ex.ParseError, ex.EvaluationError) as e:
            raise UsageError(f"bad {name} {text!r}: {e}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{name} needs {n} comma-separated values, got {len(vals)}")
    return vals


def _kv(items, name):
    out = {}
    if isinstance(items, dict):
        return {k: v for k, v in items.items()}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{name} entries look like name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _constants(args) -> dict:
    consts = {k: _floats(v, 1, f"constant {k}")[0] for k, v in _kv(args.const, "--const").items()}
    if args.lam is not None:
        consts["lambda"] = float(args.lam)
    return consts


def _ranges(args) -> dict:
    out = {}
    for k, v in _kv(args.range, "--range").items():
        if isinstance(v, (list, tuple)):
            lo, hi = v
        else:
            parts = str(v).split(":")
            if len(parts) != 2:
                raise UsageError(f"--range {k} needs lo:hi")
            lo, hi = (_floats(p, 1, "range bound")[0] for p in parts)
        out[k] = (float(lo), float(hi))
    return out


def _resolution(args, default=None):
    n = args.grid if args.grid is not None else default
    if n is None:
        return None
    n = int(n)
    if n < 2:
        raise UsageError("grid resolution must be at least 2 per axis")
    return n


def _split_forms(text):
    parts = [p.strip() for p in text.split(";")] if ";" in text else [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"a 1-form needs three coefficients separated by ';' or ',', got {text!r}")
    return parts


def _source_count(args, keys):
    return sum(getattr(args, k, None) is not None for k in keys)


def _catalog_overrides(name, consts):
    params = catalog.entry(name).params
    return {k: v for k, v in consts.items() if k in params}


def _load_pair(args):
    keys = ("catalog", "omega1", "input")
    if _source_count(args, keys) != 1:
        raise UsageError("give exactly one input source: --catalog, --omega1/--omega2 or --input")
    consts = _constants(args)
    if args.catalog is not None:
        e = catalog.entry(args.catalog)
        if e.kind != "FormPair":
            if e.kind == "NullMetric":
                m = catalog.get(args.catalog, _catalog_overrides(args.catalog, consts))
                pair = m.to_form_pair()
                ranges = dict(e.ranges)
                ranges["x3"] = (0.0, 1.0)
                return pair, ranges, {k: 8 for k in ranges}
            raise UsageError(f"catalog entry {args.catalog} is a {e.kind}, not a form pair")
        pair = catalog.get(args.catalog, _catalog_overrides(args.catalog, consts))
        extra = {k: v for k, v in consts.items() if k not in e.params}
        if extra:
            pair = pair.with_constants(**extra)
        return pair, dict(e.ranges), {k: e.resolution.get(k, 8) for k in e.ranges}
    if args.input is not None:
        with open(args.input) as fh:
            data = json.load(fh)
        pair = foliation.FormPair.from_json(data)
        if consts:
            pair = pair.with_constants(**consts)
        ranges = {c: (-1.0, 1.0) for c in pair.chart.coords}
        ranges.update({k: tuple(v) for k, v in data.get("ranges", {}).items()})
        return pair, ranges, {k: 8 for k in ranges}
    if args.omega2 is None:
        raise UsageError("--omega1 needs --omega2")
    coords = tuple(c.strip() for c in (args.coords or "x,y,z").split(","))
    chart = Chart(coords)
    pair = foliation.FormPair(Form1(chart, _split_forms(args.omega1)), Form1(chart, _split_forms(args.omega2)), consts)
    ranges = {c: (-1.0, 1.0) for c in coords}
    return pair, ranges, {k: 8 for k in ranges}


def _pair_grid(args, ranges, res, threads):
    ranges = dict(ranges)
    ranges.update(_ranges(args))
    n = _resolution(args)
    return Grid.uniform(ranges, n if n is not None else {k: res.get(k, 8) for k in ranges}, threads)


def _load_metric(args):
    keys = ("catalog", "f", "input")
    if _source_count(args, keys) != 1:
        raise UsageError("give exactly one input source: --catalog, --f or --input")
    consts = _constants(args)
    if args.catalog is not None:
        e = catalog.entry(args.catalog)
        if e.kind != "NullMetric":
            raise UsageError(f"catalog entry {args.catalog} is a {e.kind}, not a metric")
        return catalog.get(args.catalog, _catalog_overrides(args.catalog, consts)), e
    if args.input is not None:
        with open(args.input) as fh:
            data = json.load(fh)
        from .exterior import DeckMap

        deck = DeckMap.from_json(data["deck"]) if data.get("deck") else None
        merged = dict(data.get("constants", {}))
        merged.update(consts)
        return metric.NullMetric(data["f"], tuple(data.get("names", ("x1", "x2"))), deck, merged), None
    try:
        return metric.NullMetric(args.f, constants=consts), None
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load_flow(args):
    consts = _constants(args)
    if args.catalog is not None and args.catalog != "suspension-A":
        if catalog.entry(args.catalog).kind != "SuspensionFlow":
            raise UsageError(f"catalog entry {args.catalog} is not a suspension flow")
    A = _floats(args.A, 4, "--A") if args.A is not None else [2, 1, 1, 1]
    speed = args.speed if args.speed is not None else "1"
    try:
        return dynamics.SuspensionFlow(((A[0], A[1]), (A[2], A[3])), speed, consts,
                                       allow_nonhyperbolic=bool(args.allow_nonhyperbolic))
    except ValueError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------- commands

def _grid_columns(points, **values):
    cols = {k: v for k, v in points.items()}
    cols.update(values)
    return cols


def cmd_verify(args):
    pair, ranges, res = _load_pair(args)
    g = _pair_grid(args, ranges, res, args.threads)
    rep = foliation.verify(pair, g)
    tol = args.tol
    out = rep.to_json()
    out["tolerance"] = tol
    out["passed"] = rep.max_residual() <= tol
    if args.format == "csv":
        pts = g.points()
        bind = pair.bindings(pts)
        res1 = foliation.wedge12(pair.omega1, d1(pair.omega1)).evaluate(bind)[0]
        res2 = foliation.wedge12(pair.omega2, d1(pair.omega2)).evaluate(bind)[0]
        return _grid_columns(pts, frobenius1=res1, frobenius2=res2), out["passed"]
    return out, out["passed"]


def cmd_connection(args):
    pair, ranges, res = _load_pair(args)
    g = _pair_grid(args, ranges, res, args.threads)
    conn = foliation.solve_connection(pair, g, tol=args.tol, strict=bool(args.strict))
    if args.format == "csv":
        return _grid_columns(conn.points, w1=conn.values[0], w2=conn.values[1], w3=conn.values[2]), True
    out = conn.to_json()
    out["grid"] = g.spec()
    return out, True


def cmd_curvature(args):
    pair, ranges, res = _load_pair(args)
    g = _pair_grid(args, ranges, res, args.threads)
    conn = foliation.solve_connection(pair, g, tol=args.tol)
    K = foliation.curvature(pair, conn)
    if args.format == "csv":
        return _grid_columns(K.points, K=K.values), True
    out = K.to_json()
    out["grid"] = g.spec()
    out["omega0"] = conn.to_json()["omega0"]
    return out, True


def cmd_classify(args):
    pair, ranges, res = _load_pair(args)
    g = _pair_grid(args, ranges, res, args.threads)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c = foliation.classify(pair, g, tol=args.tol)
    out = c.to_json()
    ok = True
    if args.expect is not None:
        out["expected"] = args.expect
        ok = c.label == args.expect
    return out, ok


def _initial_state(args, m):
    x0 = _floats(args.x0, 2, "--x0") if args.x0 is not None else [0.0, 0.0]
    if args.v0 is None:
        v0 = [0.0, 1.0]
    else:
        v0 = _floats(args.v0, None, "--v0")
        if len(v0) == 1:
            v0 = [0.0, v0[0]]
        elif len(v0) != 2:
            raise UsageError("--v0 takes one value (lightlike along x2) or two")
    return metric.GeodesicState(x0, v0)


def _run_geodesic(args):
    m, _ = _load_metric(args)
    s0 = _initial_state(args, m)
    horizon = float(args.horizon) if args.horizon is not None else 10.0
    if not horizon > 0:
        raise UsageError("--horizon must be positive")
    traj, verdict = metric.integrate(m, s0, horizon, rtol=args.rtol, atol=args.atol)
    return m, traj, verdict


def cmd_geodesic(args):
    m, traj, verdict = _run_geodesic(args)
    if args.project:
        if m.deck is None:
            raise UsageError("--project needs a metric with a deck transformation")
        traj = metric.project_to_quotient(traj, m.deck, m.constants)
    if args.format == "csv":
        return traj.columns(), True
    out = {"verdict": verdict.to_json(), "metric": m.to_json(), "samples": len(traj),
           "final": {"t": traj.t[-1], "x": traj.x[-1], "v": traj.v[-1]}}
    return out, True


def cmd_completeness(args):
    m, traj, verdict = _run_geodesic(args)
    out = verdict.to_json()
    out["metric"] = m.to_json()
    ok = True
    if args.expect is not None:
        out["expected"] = args.expect
        complete = verdict.tag == "reached-horizon"
        ok = complete == (args.expect == "complete")
    return out, ok


def cmd_cocycle(args):
    F = _load_flow(args)
    x = _floats(args.x, 3, "--x") if args.x is not None else [0.0, 0.0, 0.0]
    t = float(args.t) if args.t is not None else 1.0
    if not 0 <= x[2] <= 1:
        raise UsageError("fiber coordinate s must be in [0, 1]")
    end = dynamics.flow(F, x, t)
    out = {
        "flow": F.to_json(),
        "lambda_A": F.lam,
        "x": x,
        "t": t,
        "phi_t_x": end,
        "u": dynamics.cocycle_u(F, x, t),
        "u_s2": dynamics.cocycle_s2(F, x, t),
    }
    if args.format == "csv":
        ts = np.linspace(0.0, t, int(args.samples or 11))
        us = dynamics.cocycle_u(F, np.repeat([x], len(ts), axis=0), ts)
        return {"t": ts, "u": us}, True
    return out, True


def cmd_probe_qa(args):
    F = _load_flow(args)
    rng = np.random.default_rng(int(args.seed))
    samples = rng.random((int(args.samples or 16), 3))
    tmax = float(args.tmax) if args.tmax is not None else 10.0
    res = dynamics.quasi_anosov_probe(F, samples, tmax)
    out = res.to_json()
    out["flow"] = F.to_json()
    if args.format == "csv":
        return {"p1": samples[:, 0], "p2": samples[:, 1], "s": samples[:, 2],
                "t_plus": res.t_plus, "t_minus": res.t_minus}, res.quasi_anosov
    return out, res.quasi_anosov


def cmd_bundle_solve(args):
    F = _load_flow(args)
    T = float(args.T) if args.T is not None else 1.0
    n = _resolution(args, 16)
    eta = args.eta_shift if args.eta_shift is not None else "0"
    if args.section == "both":
        rep = dynamics.hyperbolicity_report(F, T, n, args.bundle_tol, eta, args.max_iter)
        if args.format == "csv":
            cols = rep.unstable.candidate.columns()
            cols["f_ss"] = rep.stable.candidate.values.ravel()
            return cols, True
        return rep.to_json(), True
    sec = 1 if args.section == "uu" else 2
    sol = dynamics.strong_bundle_solve(F, eta, T, n, args.bundle_tol, args.max_iter, section=sec)
    if args.format == "csv":
        return sol.candidate.columns(), True
    return sol.to_json(), True


def _ein_point(args):
    try:
        return einstein.point_from(
            x=None if args.x is None else _floats(args.x, 1, "--x")[0],
            y=None if args.y is None else _floats(args.y, 1, "--y")[0],
            theta=None if args.theta is None else _floats(args.theta, 1, "--theta")[0],
            phi=None if args.phi is None else _floats(args.phi, 1, "--phi")[0],
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_einstein(args):
    lam = float(args.lam) if args.lam is not None else 2.0
    try:
        h = einstein.HyperbolicParam(lam)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.action == "pullback-check":
        n = _resolution(args, 50)
        margin = float(args.margin) if args.margin is not None else 0.1
        out = {
            "pullback_residual": einstein.pullback_identity_residual(n, margin),
            "isometry_residual": einstein.fA_isometry_residual(h),
            "g0_isometry_residual": einstein.g0_isometry_residual(h),
            "grid": n,
            "pole_margin": margin,
        }
        ok = out["pullback_residual"] <= args.tol and out["isometry_residual"] <= args.tol
        return out, ok
    pt = _ein_point(args)
    if args.action == "orbit":
        lo, hi = (-2.0, 2.0)
        if args.t_range is not None:
            lo, hi = _floats(args.t_range.replace(":", ","), 2, "--t-range")
        ts = np.linspace(lo, hi, int(args.samples or 41))
        th, ph = einstein.orbit(h, ts, (np.full_like(ts, pt.theta), np.full_like(ts, pt.phi)))
        cols = {"t": ts, "theta": th, "phi": ph}
        if args.format == "csv":
            return cols, True
        return {"lambda": lam, "start": [pt.theta, pt.phi], "samples": cols}, True
    N = int(args.N) if args.N is not None else 10
    res = einstein.equicontinuity_probe(h, pt, N)
    out = res.to_json()
    out.update({"lambda": lam, "N": N, "point": [pt.theta, pt.phi]})
    ok = True
    if args.expect is not None:
        out["expected"] = args.expect
        ok = out["classification"] == args.expect
    if args.format == "csv":
        ns = np.arange(-N, N + 1)
        return {"n": ns, "norm": einstein.derivative_norms(h, pt, ns)}, ok
    return out, ok


def cmd_catalog(args):
    if args.action == "list":
        entries = catalog.list_entries()
        if args.format == "csv":
            return {"name": [e["name"] for e in entries], "kind": [e["kind"] for e in entries]}, True
        return {"entries": entries}, True
    if args.name is None:
        raise UsageError("catalog get needs a name")
    e = catalog.entry(args.name)
    consts = _constants(args)
    obj = catalog.get(args.name, _catalog_overrides(args.name, consts))
    out = e.describe()
    out["object"] = obj.to_json()
    out["verification"] = catalog.verify_entry(args.name, _catalog_overrides(args.name, consts))
    return out, True


def cmd_export_grid(args):
    if args.expr is None:
        raise UsageError("export-grid needs --expr")
    e = ex.parse(args.expr)
    consts = _constants(args)
    ranges = _ranges(args)
    for name in sorted(ex.free_names(e) - set(consts) - set(ex.BUILTIN_CONSTANTS)):
        ranges.setdefault(name, (-1.0, 1.0))
    if not ranges:
        raise UsageError("nothing to grid over; give --range name=lo:hi")
    g = Grid.uniform(ranges, _resolution(args, 16), args.threads)
    pts = g.points()
    bind = dict(consts)
    bind.update(pts)
    vals = np.broadcast_to(np.asarray(ex.evaluate(e, bind), dtype=float), (g.size,))
    cols = _grid_columns(pts, value=vals)
    if args.format == "csv":
        return cols, True
    return {"expr": str(e), "grid": g.spec(), "min": float(vals.min()), "max": float(vals.max())}, True


# ---------------------------------------------------------------------- parser

def _common(p, inputs=()):
    p.add_argument("--config", help="JSON file whose keys mirror the long flags")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--output", "-o", help="write to this file instead of stdout")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--const", action="append", metavar="NAME=VALUE", help="bind a named constant")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--grid", type=int, default=None, help="points per axis")
    p.add_argument("--range", action="append", metavar="NAME=LO:HI")
    if "pair" in inputs or "metric" in inputs or "flow" in inputs:
        p.add_argument("--catalog")
        p.add_argument("--input", help="JSON description of the object")
    if "pair" in inputs:
        p.add_argument("--omega1", help="three DSL coefficients separated by ';'")
        p.add_argument("--omega2")
        p.add_argument("--coords", help="coordinate names, default x,y,z")
    if "metric" in inputs:
        p.add_argument("--f", help="conformal exponent f(x1, x2)")
        p.add_argument("--x0")
        p.add_argument("--v0")
        p.add_argument("--horizon", type=float)
        p.add_argument("--rtol", type=float, default=None)
        p.add_argument("--atol", type=float, default=None)
    if "flow" in inputs:
        p.add_argument("--A", help="four integers a,b,c,d for [[a,b],[c,d]]")
        p.add_argument("--speed", help="speed expression in p1, p2, s")
        p.add_argument("--allow-nonhyperbolic", dest="allow_nonhyperbolic", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lorfol", description="Transversely Lorentzian foliations toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, helptext in [
        ("verify", cmd_verify, "Frobenius and transverse-volume residuals"),
        ("connection", cmd_connection, "connection form w0"),
        ("curvature", cmd_curvature, "transverse curvature K"),
        ("classify", cmd_classify, "Minkowski / de Sitter / constant / nonconstant"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _common(p, ("pair",))
        if name == "connection":
            p.add_argument("--strict", action="store_true", default=None, help="fail on rank-drop points")
        if name == "classify":
            p.add_argument("--expect", choices=["Minkowski", "deSitter", "constant", "nonconstant"])
        p.set_defaults(func=fn)

    for name, fn in [("geodesic", cmd_geodesic), ("completeness", cmd_completeness)]:
        p = sub.add_parser(name, help="integrate a geodesic of e^f dx1 dx2")
        _common(p, ("metric",))
        if name == "geodesic":
            p.add_argument("--project", action="store_true", default=None, help="map samples into the fundamental domain")
        else:
            p.add_argument("--expect", choices=["complete", "incomplete"])
        p.set_defaults(func=fn)

    p = sub.add_parser("cocycle", help="deformation cocycle u(x, t)")
    _common(p, ("flow",))
    p.add_argument("--x", help="p1,p2,s")
    p.add_argument("--t", type=float)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_cocycle)

    p = sub.add_parser("probe-qa", help="quasi-Anosov probe")
    _common(p, ("flow",))
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tmax", type=float)
    p.set_defaults(func=cmd_probe_qa)

    p = sub.add_parser("bundle-solve", help="strong bundles by contraction")
    _common(p, ("flow",))
    p.add_argument("--T", type=float)
    p.add_argument("--eta-shift", dest="eta_shift", help="c(p1,p2,s) in eta = s_k + c X")
    p.add_argument("--section", choices=["uu", "ss", "both"], default=None)
    p.add_argument("--bundle-tol", dest="bundle_tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.set_defaults(func=cmd_bundle_solve)

    p = sub.add_parser("einstein", help="Einstein torus tools")
    p.add_argument("action", choices=["orbit", "equicont", "pullback-check"])
    _common(p)
    for k in ("x", "y", "theta", "phi"):
        p.add_argument(f"--{k}")
    p.add_argument("--N", type=int)
    p.add_argument("--t-range", dest="t_range")
    p.add_argument("--samples", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--expect", choices=["equicontinuous", "non-equicontinuous"])
    p.set_defaults(func=cmd_einstein)

    p = sub.add_parser("catalog", help="named objects")
    p.add_argument("action", choices=["list", "get"])
    p.add_argument("name", nargs="?")
    _common(p)
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("export-grid", help="evaluate an expression on a grid")
    _common(p)
    p.add_argument("--expr")
    p.set_defaults(func=cmd_export_grid)
    return ap


_DEFAULTS = {
    "format": "json",
    "threads": 1,
    "tol": 1e-6,
    "seed": 0,
    "rtol": 1e-9,
    "atol": 1e-12,
    "section": "uu",
    "bundle_tol": 1e-12,
    "max_iter": 500,
}


def _apply_config(args, parser):
    if args.config is None:
        return
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {args.config}: {e}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    for key, value in cfg.items():
        dest = key.replace("-", "_").lstrip("_")
        if dest == "lambda":
            dest = "lam"
        if dest in ("command", "func", "config"):
            continue
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, dest) is None:
            if dest in ("const", "range") and isinstance(value, dict):
                value = [f"{k}={v if not isinstance(v, (list, tuple)) else ':'.join(map(str, v))}" for k, v in value.items()]
            setattr(args, dest, value)


def _emit(result, args):
    if args.format == "csv":
        if not (isinstance(result, dict) and all(isinstance(v, (np.ndarray, list)) for v in result.values())):
            text = dumps(result) + "\n"
        else:
            text = csv_text(result)
    else:
        text = dumps(result) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        _apply_config(args, parser)
        for k, v in _DEFAULTS.items():
            if getattr(args, k, None) is None and hasattr(args, k):
                setattr(args, k, v)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", catalog.QuotientWarning)
            with parallel(args.threads):
                result, ok = args.func(args)
        _emit(result, args)
        return EXIT_OK if ok else EXIT_FAIL
    except (UsageError, ex.ParseError, catalog.UnknownEntryError, catalog.InvalidOverrideError) as e:
        msg = e.args[0] if isinstance(e, KeyError) else str(e)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except ex.UnboundNameError as e:
        print(f"error: unbound name {e.args[0]!r}", file=sys.stderr)
        return EXIT_USAGE
    except (foliation.NotLorentzianError, foliation.RankDeficientError, foliation.DegeneratePairError,
            dynamics.NotHyperbolicError, einstein.ExcludedPointError, einstein.IdealCircleError,
            metric.NoDeckError) as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (metric.IntegrationError, dynamics.ConvergenceError, ex.DomainError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
