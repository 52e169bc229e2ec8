"""Command-line entry point: ``flatflow <subcommand> ...``.

Exit status is 0 on success, 1 when validation or a verification fails and
2 for usage errors (bad flags, unreadable files).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .canonical import dumps, export_surface
from .covers import (
    cover_from_sidecar,
    double,
    orientation_double,
    trace_commutation,
    unfold,
    verify_flat_cover,
)
from .ergodicity import MODES, ExperimentConfig, discrepancy_csv_rows, report_text, run_experiment
from .errors import FlatflowError, ParseError, SurfaceSyntaxError, ValidationError
from .flow import event_records, make_state, trace_billiard, trace_geodesic
from .holonomy import develop, holonomy_group, is_really_flat
from .report import export_cover, surface_report
from .surface import FlatSurface, load_surface


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load(path: str) -> FlatSurface:
    try:
        return load_surface(_read(path))
    except SurfaceSyntaxError as exc:
        raise ParseError(f"{path}:{exc.line}:{exc.column}: {exc}") from None
    except FlatflowError as exc:
        raise _with_path(exc, path) from None


def _with_path(exc: FlatflowError, path: str) -> FlatflowError:
    exc.args = (f"{path}: {exc}",)
    return exc


def _write(path: str | None, text: str, out):
    if path is None or path == "-":
        out.write(text)
    else:
        Path(path).write_text(text)


def _seed(args) -> int:
    env = os.environ.get("FLATFLOW_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"FLATFLOW_SEED must be an integer, got {env!r}") from None
    return args.seed


# -- subcommands -----------------------------------------------------------------------

def cmd_validate(args, out):
    s = _load(args.surface)
    rep = surface_report(s)
    if args.json:
        out.write(dumps(rep) + "\n")
        return 0
    out.write(f"polygons: {rep['polygons']}  gluings: {rep['gluings']}  walls: {rep['walls']}\n")
    out.write(f"area: {s.area!r}\n")
    out.write(f"chi={s.euler_characteristic}\n")
    out.write(f"orientable: {str(s.orientable).lower()}\n")
    out.write(f"gauss-bonnet residual: {s.gauss_bonnet_residual():.3e}\n")
    singular = [c for c in rep["cone_points"] if c["singular"]]
    if not singular:
        out.write("singularities: none\n")
    for c in singular:
        where = " (boundary)" if c["boundary"] else ""
        out.write(f"cone point {c['corners'][0][0]}:{c['corners'][0][1]}{where}: "
                  f"angle {c['angle']!r} = 2pi * {c['angle_over_2pi']}\n")
    return 0


def cmd_holonomy(args, out):
    s = _load(args.surface)
    atlas = develop(s)
    group = holonomy_group(s, atlas)
    rf = is_really_flat(s)
    doc = {
        "group": group.structure,
        "order": group.order,
        "trivial": group.trivial,
        "elements": [str(h) for h in group.elements],
        "generators": {str(gi): str(h) for gi, h in sorted(atlas.developed.items())},
        "really_flat": rf.verdict,
        "irrational_walls": [list(w) for w in rf.irrational_walls],
    }
    out.write(dumps(doc) + "\n")
    return 0


def _emit_cover(args, total, cover, out):
    text = export_surface(total)
    _write(args.output, text, out)
    sidecar = args.map or (args.output + ".map" if args.output and args.output != "-" else None)
    if sidecar:
        Path(sidecar).write_text(dumps(export_cover(cover)) + "\n")
    return 0


def cmd_unfold(args, out):
    total, cover, _ = unfold(_load(args.surface))
    return _emit_cover(args, total, cover, out)


def cmd_double(args, out):
    total, cover = double(_load(args.surface))
    return _emit_cover(args, total, cover, out)


def cmd_orient(args, out):
    total, cover = orientation_double(_load(args.surface))
    return _emit_cover(args, total, cover, out)


def _pair(text: str, what: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must look like x,y") from None
    return x, y


def cmd_trace(args, out):
    s = _load(args.surface)
    if ":" not in args.start:
        raise UsageError("--start must look like POLY:x,y")
    pid, _, xy = args.start.rpartition(":")
    if pid not in s.index:
        raise UsageError(f"unknown polygon {pid!r}")
    point = _pair(xy, "--start")
    if (args.angle is None) == (args.dir is None):
        raise UsageError("give exactly one of --angle and --dir")
    if args.angle is not None:
        state = make_state(s, pid, point, angle=args.angle)
    else:
        state = make_state(s, pid, point, direction=_pair(args.dir, "--dir"))
    if args.billiard:
        traj = trace_billiard(s, state, args.length, stop_on_singular=True)
    else:
        traj = trace_geodesic(s, state, args.length, stop_on_singular=True)
    rows = event_records(s, traj)
    fh = out if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_index", "t", "polygon_id", "x", "y", "event_type", "edge_or_gluing_id"])
        for r in rows:
            w.writerow([r[0], repr(float(r[1])), r[2], repr(float(r[3])), repr(float(r[4])), r[5], r[6]])
    finally:
        if fh is not out:
            fh.close()
    if args.svg:
        Path(args.svg).write_text(render_svg(s, traj))
    return 0


def render_svg(surface: FlatSurface, traj) -> str:
    """Each polygon in its own panel with the pieces of the path that lie in it."""
    size, pad = 220, 20
    panels = []
    for p, poly in enumerate(surface.polygons):
        xs = [v[0] for v in poly.vertices]
        ys = [v[1] for v in poly.vertices]
        x0, y0 = min(xs), min(ys)
        k = (size - 2 * pad) / max(max(xs) - x0, max(ys) - y0)

        def tr(pt):
            return (pad + k * (pt[0] - x0), size - pad - k * (pt[1] - y0))
        ox = p * size
        pts = " ".join(f"{ox + a:.3f},{b:.3f}" for a, b in map(tr, poly.vertices))
        body = [f'<polygon points="{pts}" fill="#f4f4f4" stroke="#333"/>',
                f'<text x="{ox + 4}" y="14" font-size="12">{poly.id}</text>']
        for q, a, b, _ in traj.segments():
            if q == p:
                (ax, ay), (bx, by) = tr(a), tr(b)
                body.append(f'<line x1="{ox + ax:.3f}" y1="{ay:.3f}" x2="{ox + bx:.3f}" '
                            f'y2="{by:.3f}" stroke="#c22" stroke-width="0.6"/>')
        panels.extend(body)
    width = size * len(surface.polygons)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{size}">\n'
            + "\n".join(panels) + "\n</svg>\n")


def cmd_ergodicity(args, out):
    s = _load(args.surface)
    tests = tuple(t for t in args.tests.split(",") if t)
    cfg = ExperimentConfig(mode=args.mode, n_samples=args.samples, length=args.length,
                           depth=args.depth, seed=_seed(args), angle=args.angle,
                           via_cover=args.via_cover, test_functions=tests)
    report = run_experiment(s, cfg)
    _write(args.out, report_text(report), out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in discrepancy_csv_rows(report):
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return 0


def cmd_lift_check(args, out):
    base = _load(args.base)
    total = _load(args.cover)
    try:
        doc = json.loads(_read(args.map))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.map}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    cover = cover_from_sidecar(base, total, doc)
    rng = np.random.default_rng(_seed(args))
    gap = trace_commutation(cover, rng, args.events, args.runs)
    rep = verify_flat_cover(cover, seed=_seed(args), samples=args.samples, loops=args.loops)
    ok = gap <= args.tol and rep.ok
    for line in rep.lines():
        out.write(line + "\n")
    out.write(f"{'PASS' if gap <= args.tol else 'FAIL'} lift_project_commutation: "
              f"{args.runs} run(s) x {args.events} events, worst gap {gap:.3e}\n")
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------------------

def build_parser() -> ArgumentParser:
    p = ArgumentParser(prog="flatflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=ArgumentParser)
    sub.required = True

    v = sub.add_parser("validate", help="check a surface and print its invariants")
    v.add_argument("surface")
    v.add_argument("--json", action="store_true", help="print the full report as JSON")
    v.set_defaults(func=cmd_validate)

    h = sub.add_parser("holonomy", help="holonomy group and really-flat verdict")
    h.add_argument("surface")
    h.set_defaults(func=cmd_holonomy)

    for name, func, text in (("unfold", cmd_unfold, "very flat cover (doubling first if needed)"),
                             ("double", cmd_double, "double of a bordered surface"),
                             ("orient", cmd_orient, "orientation double cover")):
        c = sub.add_parser(name, help=text)
        c.add_argument("surface")
        c.add_argument("-o", "--output", help="total surface (default stdout)")
        c.add_argument("--map", help="cover sidecar path (default OUTPUT.map)")
        c.set_defaults(func=func)

    t = sub.add_parser("trace", help="trace a geodesic or billiard path to CSV")
    t.add_argument("--surface", required=True)
    t.add_argument("--start", required=True, help="POLY:x,y")
    t.add_argument("--angle", type=float, help="direction angle in radians")
    t.add_argument("--dir", help="direction vector x,y")
    t.add_argument("--length", type=float, required=True)
    t.add_argument("--billiard", action="store_true")
    t.add_argument("--out", help="CSV path (default stdout)")
    t.add_argument("--svg", help="also draw the path")
    t.set_defaults(func=cmd_trace)

    e = sub.add_parser("ergodicity", help="equidistribution experiment")
    e.add_argument("--surface", required=True)
    e.add_argument("--mode", choices=MODES, default="generic")
    e.add_argument("--samples", type=int, default=20)
    e.add_argument("--length", type=float, default=1e4)
    e.add_argument("--depth", type=int, default=2)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--angle", type=float, help="fixed direction (directional, billiard, parallel-family)")
    e.add_argument("--via-cover", action="store_true", help="trace on the unfolding and project")
    e.add_argument("--tests", default="one,cell:0", help="comma separated test functions")
    e.add_argument("--out", help="report path (default stdout)")
    e.add_argument("--csv", help="per-sample discrepancy series")
    e.set_defaults(func=cmd_ergodicity)

    lc = sub.add_parser("lift-check", help="verify a cover and lift/trace commutation")
    lc.add_argument("base")
    lc.add_argument("cover")
    lc.add_argument("--map", required=True)
    lc.add_argument("--events", type=int, default=1000)
    lc.add_argument("--runs", type=int, default=3)
    lc.add_argument("--samples", type=int, default=1000)
    lc.add_argument("--loops", type=int, default=20)
    lc.add_argument("--tol", type=float, default=1e-6)
    lc.add_argument("--seed", type=int, default=0)
    lc.set_defaults(func=cmd_lift_check)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "length", None) is not None and not (
                math.isfinite(args.length) and args.length >= 0):
            raise UsageError("--length must be a finite non-negative number")
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"flatflow: usage error: {exc}\n")
        return 2
    except (ValidationError, ParseError) as exc:
        err.write(f"flatflow: invalid surface: {type(exc).__name__}: {exc}\n")
        return 1
    except FlatflowError as exc:
        err.write(f"flatflow: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
