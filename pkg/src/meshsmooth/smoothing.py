"""Smoothing drivers: Laplacian sweeps and line-searched gradient flows.

The Laplacian update moves a vertex to the arithmetic (or element-type
weighted) mean of its neighbours; it is the exact minimizer, one vertex
at a time, of the squared-edge-length energy, which is why it appears
here next to the explicit gradient methods. Gradient methods maximize a
concave mesh objective (or minimize an energy) with backtracking line
search, so every accepted step improves the objective by construction.

All drivers mutate the mesh they are given; callers wanting to keep the
input use ``mesh.copy()`` first (the estimator wrappers do).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .quality import (QualityFn, QualityKind, ascent_sign, c_elem,
                      element_values, grad_mesh_quality,
                      lambda_edges_diagonal, mesh_quality)

#: line search gives up when the step factor falls below this
RHO_FLOOR = 1e-16


# -- projection geometries -------------------------------------------------

class Geometry:
    """Base class for projection targets; ``project`` maps a point to its
    nearest point on the geometry and is idempotent."""

    def project(self, p):
        raise NotImplementedError


class FixedPoint(Geometry):
    """Pins a vertex to one location (corners, feature points)."""

    def __init__(self, point):
        self.point = np.asarray(point, dtype=float)

    def project(self, p):
        return self.point.copy()


class ImplicitCircle(Geometry):
    """Circle of given center and radius in the plane.

    The center itself projects to angle zero on the circle (the
    smallest-angle tie break), keeping projection deterministic.
    """

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def project(self, p):
        d = np.asarray(p, dtype=float) - self.center
        n = np.linalg.norm(d)
        if n == 0.0:
            d = np.zeros_like(self.center)
            d[0] = 1.0
            n = 1.0
        return self.center + self.radius * d / n


class ImplicitSphere(ImplicitCircle):
    """Sphere of given center and radius; same tie break as the circle."""


class Polyline2D(Geometry):
    """Closed or open polyline; projects to the nearest segment point.

    Ties go to the segment with the smallest index, so projection stays
    deterministic.
    """

    def __init__(self, points, closed=True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs at least 2 points")
        self.points = pts
        self.closed = bool(closed)
        a = pts
        b = np.roll(pts, -1, axis=0) if closed else pts[1:]
        if closed:
            self._a, self._b = a, b
        else:
            self._a, self._b = a[:-1], b

    def project(self, p):
        p = np.asarray(p, dtype=float)
        ab = self._b - self._a
        denom = (ab * ab).sum(axis=1)
        denom[denom == 0.0] = 1.0
        t = np.clip(((p - self._a) * ab).sum(axis=1) / denom, 0.0, 1.0)
        cand = self._a + t[:, None] * ab
        d2 = ((cand - p) ** 2).sum(axis=1)
        return cand[int(np.argmin(d2))]


def project_vertices(mesh, movable=None):
    """Project every movable tagged vertex onto its geometry.

    Returns the largest displacement any vertex experienced.
    """
    if movable is None:
        movable = mesh.movable_mask(project=True)
    worst = 0.0
    for v, geom in mesh.geometry_tags.items():
        if not movable[v]:
            continue
        target = geom.project(mesh.vertices[v])
        worst = max(worst, float(np.linalg.norm(target - mesh.vertices[v])))
        mesh.vertices[v] = target
    return worst


# -- Laplacian sweeps ------------------------------------------------------

def laplace_step(mesh, movable=None, jacobi=False, project=False):
    """One Laplacian sweep: each movable vertex moves to the mean of its
    edge neighbours.

    The default order is sequential (Gauss-Seidel) by increasing vertex
    index, so later vertices already see updated neighbours;
    ``jacobi=True`` updates all vertices simultaneously from the old
    coordinates. With ``project=True`` a tagged vertex moves to the
    projection of its neighbour mean onto its geometry, so it slides
    along the geometry instead of being pulled off it. Returns the
    maximum vertex displacement.
    """
    if movable is None:
        movable = mesh.movable_mask(project)
    verts = mesh.vertices
    source = verts.copy() if jacobi else verts
    new = verts.copy() if jacobi else None
    worst = 0.0
    for v in np.nonzero(movable)[0]:
        star = mesh.vertex_star(v)
        if len(star) == 0:
            continue
        target = source[star].mean(axis=0)
        if project:
            geom = mesh.geometry_tags.get(int(v))
            if geom is not None:
                target = geom.project(target)
        worst = max(worst, float(np.linalg.norm(target - verts[v])))
        (new if jacobi else verts)[v] = target
    if jacobi:
        mesh.vertices = new
    return worst


def _edge_weights(mesh, v, star):
    edge_map = mesh.edge_elements()
    w = np.empty(len(star))
    for i, u in enumerate(star):
        key = (v, u) if v < u else (u, v)
        w[i] = sum(c_elem(mesh.elements[e].n_verts) for e in edge_map[key])
    return w


def laplace_weighted_step(mesh, movable=None, jacobi=False, project=False):
    """One element-type weighted Laplacian sweep.

    Each neighbour is weighted by the sum, over the elements containing
    that edge, of the element's edge-energy constant (sqrt(3)/6 per
    triangle, 1/2 per quadrilateral, 1/(2 tan(pi/n)) per n-gon); the
    update is the zero of the weighted edge-energy gradient. Weights
    are divided by their maximum before use, which makes the sweep
    bitwise identical to :func:`laplace_step` whenever they are all
    equal (any all-triangle mesh with interior edges only).
    ``project=True`` slides tagged vertices as in :func:`laplace_step`.
    """
    if mesh.is_tet_mesh:
        raise MeshError("weighted Laplacian is for planar/surface meshes")
    if movable is None:
        movable = mesh.movable_mask(project)
    verts = mesh.vertices
    source = verts.copy() if jacobi else verts
    new = verts.copy() if jacobi else None
    worst = 0.0
    for v in np.nonzero(movable)[0]:
        star = mesh.vertex_star(v)
        if len(star) == 0:
            continue
        w = _edge_weights(mesh, v, star)
        w = w / w.max()
        target = (w[:, None] * source[star]).sum(axis=0) / w.sum()
        if project:
            geom = mesh.geometry_tags.get(int(v))
            if geom is not None:
                target = geom.project(target)
        worst = max(worst, float(np.linalg.norm(target - verts[v])))
        (new if jacobi else verts)[v] = target
    if jacobi:
        mesh.vertices = new
    return worst


# -- gradient ascent with backtracking -------------------------------------

def scale_invariant_direction(grad, mode="global"):
    """Rescale a gradient so step lengths are insensitive to mesh scale.

    ``mode="global"`` divides by the square root of the gradient norm
    (zero stays zero). Per-element balancing needs the element-wise
    decomposition and lives in
    ``grad_mesh_quality(..., normalize_elements=True)``.
    """
    if mode != "global":
        raise ValueError(
            "only mode='global' operates on an assembled gradient; use "
            "grad_mesh_quality(normalize_elements=True) for per-element scaling")
    g = np.asarray(grad, dtype=float)
    n = np.linalg.norm(g)
    if n == 0.0:
        return g.copy()
    return g / np.sqrt(n)


@dataclass
class SmoothConfig:
    """Options for :func:`smooth`.

    ``method`` is one of ``"laplace"``, ``"laplace-weighted"`` or
    ``"gradient-ascent"`` (the latter needs ``quality``; energy kinds
    are minimized automatically). ``conv_tol`` is the maximum vertex
    displacement below which a sweep counts as converged; ``None``
    defaults to 1e-8 times the bounding-box diagonal. The line search
    starts at ``step_rho`` and multiplies by ``ls_shrink`` until the
    objective gain exceeds ``ls_slope`` times the expected first-order
    gain, giving up below ``RHO_FLOOR``. ``project=True`` slides tagged
    vertices along their geometry: Laplacian sweeps project each target
    as it is computed, gradient steps are projected after the step, and
    convergence is judged by the net motion of the whole iteration.
    ``precondition=True`` (edge energy only) divides the gradient by
    the per-vertex Hessian diagonal, turning the step into the
    simultaneous Laplacian update. ``adaptive=True`` re-derives the
    per-element weights of a Q2 objective before each step from the
    element's response to a small quality-gradient probe.
    """

    method: str = "laplace"
    quality: QualityFn = None
    max_iters: int = 200
    conv_tol: float = None
    step_rho: float = 1.0
    ls_shrink: float = 0.5
    ls_slope: float = 1e-4
    project: bool = False
    jacobi: bool = False
    normalize: str = None
    precondition: bool = False
    adaptive: bool = False
    adaptive_step: float = 1e-3
    adaptive_improve_tol: float = 1e-5
    adaptive_quality_floor: float = 0.6
    adaptive_shrink: float = 0.99


@dataclass
class SmoothResult:
    """Outcome of a smoothing run."""

    method: str
    iterations: int
    converged: bool
    final_quality: float
    trace: list = field(default_factory=list)
    wall_ms: float = 0.0


def gradient_ascent_step(mesh, fn, cfg, movable=None):
    """One accepted line-search step on the objective ``fn``.

    Returns ``(displacement, stalled)``: the maximum vertex movement of
    the accepted step, and whether the search hit the step floor
    without finding an acceptable point. The Armijo test guarantees the
    (sign-adjusted) objective never decreases on acceptance.
    """
    if movable is None:
        movable = mesh.movable_mask(cfg.project)
    sign = ascent_sign(fn.kind)
    g = sign * grad_mesh_quality(mesh, fn, movable=movable)
    if cfg.precondition:
        # Exact per-vertex Newton step of the quadratic edge energy: the
        # full step is the simultaneous Laplacian update, so the
        # iteration keeps contracting even when energy differences fall
        # below float resolution.
        if fn.kind != QualityKind.LAMBDA_EDGES:
            raise ValueError("precondition applies to the edge energy only")
        if cfg.normalize is not None:
            raise ValueError("precondition and normalize are exclusive")
        d = g / lambda_edges_diagonal(mesh, fn)[:, None]
    elif cfg.normalize == "global":
        d = scale_invariant_direction(g)
    elif cfg.normalize == "per_element":
        d = sign * grad_mesh_quality(mesh, fn, movable=movable,
                                     normalize_elements=True)
        if float((g * d).sum()) <= 0.0:
            d = g
    elif cfg.normalize is None:
        d = g
    else:
        raise ValueError(f"unknown normalize mode {cfg.normalize!r}")
    slope = float((g * d).sum())
    if slope == 0.0:
        return 0.0, False
    f0 = sign * mesh_quality(mesh, fn)
    base = mesh.vertices.copy()
    rho = cfg.step_rho
    while rho >= RHO_FLOOR:
        mesh.vertices = base + rho * d
        f1 = sign * mesh_quality(mesh, fn)
        if f1 >= f0 + cfg.ls_slope * rho * slope:
            step = rho * np.linalg.norm(d, axis=1)
            return float(step.max()), False
        rho *= cfg.ls_shrink
    mesh.vertices = base
    return 0.0, True


def adaptive_weights(mesh, fn, step=1e-3, improve_tol=1e-5,
                     quality_floor=0.6, shrink=0.99):
    """Re-derive per-element weights from a small quality probe.

    A probe configuration is formed by moving the free vertices ``step``
    along the gradient of the summed isoperimetric quotient. Elements
    that are still poor (iq2 below ``quality_floor``) but already
    improving under the probe (gain above ``improve_tol``) get their
    weight multiplied by ``shrink``; renormalizing the mean back to 1
    then shifts relative emphasis onto the stuck elements. Returns the
    new weight vector (the input ``fn`` is not modified).
    """
    iq_fn = QualityFn(QualityKind.IQ2)
    w = fn.weights_for(mesh).copy()
    before = element_values(mesh, iq_fn)
    g = grad_mesh_quality(mesh, iq_fn)
    base = mesh.vertices
    mesh.vertices = base + step * g
    try:
        after = element_values(mesh, iq_fn)
    finally:
        mesh.vertices = base
    lowered = (after - before > improve_tol) & (before < quality_floor)
    w[lowered] *= shrink
    return w / w.mean()


_TRACE_FN = QualityFn(QualityKind.LAMBDA_EDGES)


def smooth(mesh, cfg=None):
    """Run the configured smoothing method on ``mesh`` until convergence.

    The mesh is modified in place. Convergence means the maximum vertex
    displacement of a full sweep (projection included) fell below the
    tolerance; a gradient run that exhausts its line search stops with
    ``converged=False``. The per-iteration trace records the objective
    for gradient methods and the edge energy for Laplacian methods.
    """
    cfg = cfg or SmoothConfig()
    t0 = time.perf_counter()
    tol = cfg.conv_tol
    if tol is None:
        diag = mesh.bbox_diagonal()
        tol = 1e-8 * (diag if diag > 0 else 1.0)
    movable = mesh.movable_mask(cfg.project)
    if cfg.method == "gradient-ascent":
        if cfg.quality is None:
            raise ValueError("gradient-ascent needs cfg.quality")
        fn = cfg.quality
        trace_fn = fn
    elif cfg.method in ("laplace", "laplace-weighted"):
        fn = None
        trace_fn = _TRACE_FN
    else:
        raise ValueError(f"unknown method {cfg.method!r}")
    if cfg.adaptive:
        if fn is None or fn.kind != QualityKind.Q2:
            raise ValueError("adaptive weights require a Q2 objective")
    trace = []
    converged = False
    iters = 0
    for _ in range(cfg.max_iters):
        stalled = False
        before = mesh.vertices.copy() if cfg.project else None
        if fn is None:
            if cfg.method == "laplace":
                disp = laplace_step(mesh, movable=movable, jacobi=cfg.jacobi,
                                    project=cfg.project)
            else:
                disp = laplace_weighted_step(mesh, movable=movable,
                                             jacobi=cfg.jacobi,
                                             project=cfg.project)
        else:
            if cfg.adaptive:
                fn.weights = adaptive_weights(
                    mesh, fn, step=cfg.adaptive_step,
                    improve_tol=cfg.adaptive_improve_tol,
                    quality_floor=cfg.adaptive_quality_floor,
                    shrink=cfg.adaptive_shrink)
            disp, stalled = gradient_ascent_step(mesh, fn, cfg, movable=movable)
        if cfg.project:
            project_vertices(mesh, movable=movable)
            # convergence is judged by the net motion: a vertex pulled off
            # its geometry and snapped back may not have moved at all
            disp = float(
                np.linalg.norm(mesh.vertices - before, axis=1).max())
        iters += 1
        trace.append(mesh_quality(mesh, trace_fn))
        if stalled:
            break
        if disp < tol:
            converged = True
            break
    final = trace[-1] if trace else mesh_quality(mesh, trace_fn)
    return SmoothResult(
        method=cfg.method if fn is None else fn.kind.value,
        iterations=iters,
        converged=converged,
        final_quality=final,
        trace=trace,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
