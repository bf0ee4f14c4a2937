"""Command line interface.

Subcommands: ``generate`` builds reference meshes, ``smooth`` runs one
smoothing method, ``quality`` summarizes a mesh, ``modify`` runs the
collapse-and-smooth repair loop, and ``compare`` benchmarks several
methods from the same start. Exit codes: 0 on success, 1 for usage
errors, 2 for data errors (unreadable or inconsistent meshes).
"""

import argparse
import json
import sys
import time

import numpy as np

from .errors import MeshError, MeshFileError
from .fileio import load_mesh, save_mesh
from .generators import generate
from .mesh import TRI
from .quality import QualityFn, QualityKind, quality_report
from .smoothing import (ImplicitCircle, ImplicitSphere, Polyline2D,
                        SmoothConfig, smooth)
from .svg import render_svg
from .topology import remove_bad_elements

#: smoothing method name -> objective kind (None: Laplacian variants)
METHODS = {
    "laplace": None,
    "laplace-weighted": None,
    "q2": QualityKind.Q2,
    "q3": QualityKind.Q3,
    "lambda1": QualityKind.LAMBDA1,
    "lambda2": QualityKind.LAMBDA2,
    "lambda3": QualityKind.LAMBDA3,
    "lambda4": QualityKind.LAMBDA4,
    "lambda5": QualityKind.LAMBDA5,
    "mr": QualityKind.MEAN_RATIO,
    "sqrt-mr": QualityKind.SQRT_MEAN_RATIO,
}

_COMPARE_TET = "laplace,lambda1,lambda2,lambda3,lambda4,lambda5,sqrt-mr"
_COMPARE_POLY = "laplace,laplace-weighted,q2,sqrt-mr,mr"


class _Parser(argparse.ArgumentParser):
    """Argument parser that reserves exit code 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_measure(mesh):
    if mesh.is_tet_mesh:
        return "mr"
    if all(e.kind == TRI for e in mesh.elements):
        return "mr"
    return "iq2"


def _report_row(mesh, measure, method, iterations, converged, wall_ms):
    rep = quality_report(mesh, QualityFn(measure))
    row = rep.to_dict()
    row.update(method=method, iterations=iterations, converged=converged,
               wall_ms=round(wall_ms, 3))
    return row


def _write_report(path, payload):
    text = json.dumps(payload, indent=2)
    if path == "-":
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _print_row(row):
    print(f"{row['method']:>16}  avg {row['average']:8.4f}  "
          f"min {row['min']:8.4f}  max {row['max']:8.4f}  "
          f"invalid {row['invalid_count']:3d}  iters {row['iterations']:5d}  "
          f"{'conv' if row['converged'] else 'stop'}  "
          f"{row['wall_ms']:9.1f} ms")


def _fit_projection(mesh, kind):
    """Build a projection geometry from the fixed vertices and tag them."""
    fixed = mesh.vertices[mesh.fixed]
    if fixed.shape[0] < 3:
        raise MeshError("projection needs at least 3 fixed vertices")
    if kind == "circle":
        if mesh.dim != 2:
            raise MeshError("circle projection expects a planar mesh")
        center = fixed.mean(axis=0)
        radius = float(np.linalg.norm(fixed - center, axis=1).mean())
        geom = ImplicitCircle(center, radius)
    elif kind == "sphere":
        if mesh.dim != 3:
            raise MeshError("sphere projection expects a 3D mesh")
        center = fixed.mean(axis=0)
        radius = float(np.linalg.norm(fixed - center, axis=1).mean())
        geom = ImplicitSphere(center, radius)
    elif kind == "polyline":
        if mesh.dim != 2:
            raise MeshError("polyline projection expects a planar mesh")
        geom = Polyline2D(_boundary_loop(mesh), closed=True)
    else:
        raise MeshError(f"unknown projection kind {kind!r}")
    mesh.tag_geometry(geom)
    return geom


def _boundary_loop(mesh):
    """Fixed boundary vertices chained into one closed loop."""
    succ = {}
    for a, b in mesh.boundary_edges():
        succ.setdefault(a, []).append(b)
        succ.setdefault(b, []).append(a)
    if not succ:
        raise MeshError("mesh has no boundary to project onto")
    start = min(succ)
    loop = [start]
    prev = None
    while True:
        nbrs = succ[loop[-1]]
        if len(nbrs) != 2:
            raise MeshError("boundary is not a single closed loop")
        nxt = nbrs[0] if nbrs[0] != prev else nbrs[1]
        if nxt == start:
            break
        prev = loop[-1]
        loop.append(nxt)
        if len(loop) > mesh.n_vertices:
            raise MeshError("boundary is not a single closed loop")
    return mesh.vertices[loop]


def _smooth_config(args):
    kind = METHODS[args.method]
    if kind is None:
        return SmoothConfig(
            method=args.method, max_iters=args.iters, conv_tol=args.tol,
            jacobi=args.jacobi, project=bool(args.project))
    fn = QualityFn(kind)
    return SmoothConfig(
        method="gradient-ascent", quality=fn, max_iters=args.iters,
        conv_tol=args.tol, step_rho=args.rho, normalize=args.normalize,
        project=bool(args.project), adaptive=args.adaptive_weights)


def _cmd_generate(args):
    mesh = generate(args.kind, args.n, sigma=args.sigma, seed=args.seed)
    save_mesh(mesh, args.out)
    print(f"{args.kind}(n={args.n}): {mesh.n_vertices} vertices, "
          f"{mesh.n_elements} elements -> {args.out}")
    return 0


def _cmd_smooth(args):
    mesh = load_mesh(args.infile)
    if args.project:
        _fit_projection(mesh, args.project)
    cfg = _smooth_config(args)
    result = smooth(mesh, cfg)
    save_mesh(mesh, args.out)
    measure = args.measure or _default_measure(mesh)
    row = _report_row(mesh, measure, args.method, result.iterations,
                      result.converged, result.wall_ms)
    _print_row(row)
    if args.report:
        _write_report(args.report, row)
    if args.svg:
        render_svg(mesh, args.svg)
    return 0


def _cmd_quality(args):
    mesh = load_mesh(args.infile)
    measure = args.measure or _default_measure(mesh)
    t0 = time.perf_counter()
    row = _report_row(mesh, measure, "none", 0, True,
                      (time.perf_counter() - t0) * 1e3)
    _print_row(row)
    if args.report:
        _write_report(args.report, row)
    if args.svg:
        render_svg(mesh, args.svg)
    return 0


def _cmd_modify(args):
    mesh = load_mesh(args.infile)
    t0 = time.perf_counter()
    log = remove_bad_elements(mesh, threshold=args.remove_below,
                              max_passes=args.max_passes)
    wall = (time.perf_counter() - t0) * 1e3
    save_mesh(mesh, args.out)
    row = _report_row(mesh, "iq2", f"remove-below-{args.remove_below:g}",
                      log.n_passes, log.success, wall)
    row["collapsed"] = log.collapsed_total
    _print_row(row)
    if args.report:
        _write_report(args.report, row)
    return 0 if log.success else 2


def _cmd_compare(args):
    base = load_mesh(args.infile)
    measure = args.measure or _default_measure(base)
    named = args.methods or (_COMPARE_TET if base.is_tet_mesh
                             else _COMPARE_POLY)
    methods = [m.strip() for m in named.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise MeshError(f"unknown method {m!r}; "
                            f"choose from {sorted(METHODS)}")
    rows = [_report_row(base, measure, "initial", 0, True, 0.0)]
    _print_row(rows[0])
    for m in methods:
        mesh = base.copy()
        ns = argparse.Namespace(
            method=m, iters=args.iters, tol=args.tol, rho=args.rho,
            normalize=args.normalize, jacobi=False, project=None,
            adaptive_weights=False)
        result = smooth(mesh, _smooth_config(ns))
        row = _report_row(mesh, measure, m, result.iterations,
                          result.converged, result.wall_ms)
        rows.append(row)
        _print_row(row)
    if args.report:
        _write_report(args.report, {"measure": measure, "rows": rows})
    return 0


def _build_parser():
    p = _Parser(prog="meshsmooth",
                description="Mesh quality improvement by smoothing and "
                            "local repair.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a reference mesh")
    g.add_argument("--kind", required=True,
                   choices=["square_tri", "square_mixed", "disk_tri",
                            "ball_tet"])
    g.add_argument("--n", type=int, required=True, help="resolution")
    g.add_argument("--sigma", type=float, default=0.0,
                   help="perturbation amplitude in mean edge lengths")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(run=_cmd_generate)

    def common(sp, measure=True):
        sp.add_argument("--in", dest="infile", required=True)
        if measure:
            sp.add_argument("--measure", choices=["mr", "iq2", "iq3"],
                            default=None, help="report measure (default: "
                            "mr for triangles/tets, iq2 otherwise)")
        sp.add_argument("--report", default=None,
                        help="write a JSON report here ('-' for stdout)")

    s = sub.add_parser("smooth", help="smooth a mesh with one method")
    common(s)
    s.add_argument("--method", required=True, choices=sorted(METHODS))
    s.add_argument("--out", required=True)
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--tol", type=float, default=None,
                   help="convergence displacement (default 1e-8 x bbox)")
    s.add_argument("--rho", type=float, default=1.0,
                   help="initial line search step")
    s.add_argument("--normalize", choices=["global", "per_element"],
                   default=None)
    s.add_argument("--jacobi", action="store_true",
                   help="simultaneous Laplacian updates")
    s.add_argument("--project", choices=["circle", "sphere", "polyline"],
                   default=None, help="slide fixed vertices along a geometry "
                   "fitted to them")
    s.add_argument("--adaptive-weights", action="store_true",
                   help="re-derive q2 element weights every iteration")
    s.add_argument("--svg", default=None, help="write a quality picture here")
    s.set_defaults(run=_cmd_smooth)

    q = sub.add_parser("quality", help="report mesh quality")
    common(q)
    q.add_argument("--svg", default=None, help="write a quality picture here")
    q.set_defaults(run=_cmd_quality)

    m = sub.add_parser("modify", help="collapse away low-quality triangles")
    common(m, measure=False)
    m.add_argument("--out", required=True)
    m.add_argument("--remove-below", type=float, default=0.6,
                   help="isoperimetric quotient threshold")
    m.add_argument("--max-passes", type=int, default=100)
    m.set_defaults(run=_cmd_modify)

    c = sub.add_parser("compare", help="run several methods from one start")
    common(c)
    c.add_argument("--methods", default=None,
                   help="comma-separated method list (default: the Laplacian "
                   "plus the measures defined for the mesh kind)")
    c.add_argument("--iters", type=int, default=1000)
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--rho", type=float, default=1.0)
    c.add_argument("--normalize", choices=["global", "per_element"],
                   default=None)
    c.set_defaults(run=_cmd_compare)
    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.run(args)
    except (MeshFileError, MeshError, ValueError, OSError) as exc:
        print(f"meshsmooth: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
