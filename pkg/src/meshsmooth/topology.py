"""Local connectivity edits for triangle meshes.

Edge collapse and edge swap are the classical repair moves: collapse
removes a short edge (and the triangles flanking it) when the local
link permits, swap replaces the diagonal of a convex triangle pair by
the other diagonal when that raises the worse of the two isoperimetric
quotients. :func:`vertex_split` is the inverse of a collapse for
high-valence vertices. :func:`remove_bad_elements` alternates smoothing
with collapses until no element falls below a quality threshold.

All operations either complete, or raise :class:`OperationRejected`
leaving the mesh untouched. They apply to triangle meshes only; other
element kinds raise :class:`TopologyError`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OperationRejected, TopologyError
from .mesh import TRI, Element, Mesh
from .quality import QualityFn, QualityKind, element_values, iq2
from .smoothing import SmoothConfig, smooth


def _require_triangles(mesh):
    if any(e.kind != TRI for e in mesh.elements):
        raise TopologyError("connectivity edits require an all-triangle mesh")


def _shared_and_opposite(mesh, u, v):
    """Elements containing edge (u, v) and their opposite vertices."""
    key = (u, v) if u < v else (v, u)
    shared = mesh.edge_elements().get(key)
    if not shared:
        raise OperationRejected(f"no edge ({u}, {v}) in the mesh")
    opposite = set()
    for e in shared:
        opposite.update(w for w in mesh.elements[e].verts if w not in (u, v))
    return list(shared), opposite


def _drop_vertex(mesh, dead):
    """Remove one (now unreferenced) vertex and renumber the rest."""
    keep = np.ones(mesh.n_vertices, dtype=bool)
    keep[dead] = False
    remap = np.cumsum(keep) - 1
    mesh.vertices = mesh.vertices[keep]
    mesh.fixed = mesh.fixed[keep]
    mesh.elements = [Element(e.kind, tuple(int(remap[w]) for w in e.verts))
                     for e in mesh.elements]
    mesh.geometry_tags = {int(remap[v]): g for v, g in mesh.geometry_tags.items()
                          if v != dead}


def can_collapse(mesh, u, v):
    """Check whether :func:`edge_collapse` would succeed, without editing."""
    try:
        _collapse_plan(mesh, u, v)
    except OperationRejected:
        return False
    return True


def _collapse_plan(mesh, u, v):
    _require_triangles(mesh)
    shared, opposite = _shared_and_opposite(mesh, u, v)
    if len(shared) > 2:
        raise OperationRejected("edge has more than two incident triangles")
    if mesh.fixed[u] and mesh.fixed[v]:
        raise OperationRejected("both endpoints are fixed")
    # The link condition: every vertex adjacent to both endpoints must be
    # the apex of a triangle on the edge, else the collapse would pinch
    # the mesh (duplicate edges, lost elements).
    common = set(mesh.vertex_star(u)) & set(mesh.vertex_star(v))
    if common != opposite:
        raise OperationRejected("link condition fails: collapse would pinch")
    if mesh.fixed[u]:
        kept, dead = u, v
    elif mesh.fixed[v]:
        kept, dead = v, u
    else:
        kept, dead = u, v
    return shared, kept, dead


def edge_collapse(mesh, u, v):
    """Collapse edge (u, v) into a single vertex; returns its new index.

    A free pair merges at the edge midpoint; if one endpoint is fixed,
    the free one moves onto it and the fixed coordinates are untouched.
    Two fixed endpoints, a missing edge, or a link-condition violation
    raise :class:`OperationRejected` and leave the mesh unchanged.
    """
    shared, kept, dead = _collapse_plan(mesh, u, v)
    if not mesh.fixed[kept]:
        mesh.vertices[kept] = 0.5 * (mesh.vertices[u] + mesh.vertices[v])
    drop = set(shared)
    mesh.elements = [
        e if dead not in e.verts
        else Element(e.kind, tuple(kept if w == dead else w for w in e.verts))
        for i, e in enumerate(mesh.elements) if i not in drop
    ]
    _drop_vertex(mesh, dead)
    mesh.invalidate()
    if mesh.dim == 3:
        mesh.reset_ref_normals()
    return kept if kept < dead else kept - 1


def edge_swap(mesh, u, v):
    """Replace the diagonal (u, v) of a convex triangle pair by the
    other diagonal, if that strictly raises the worse isoperimetric
    quotient of the pair.

    Works on planar meshes only. Rejections (boundary edge, non-convex
    quad, existing opposite diagonal, no quality gain) leave the mesh
    unchanged.
    """
    _require_triangles(mesh)
    if mesh.dim != 2:
        raise TopologyError("edge swap is defined for planar meshes")
    shared, _ = _shared_and_opposite(mesh, u, v)
    if len(shared) != 2:
        raise OperationRejected("swap needs an interior edge (two triangles)")
    ea, eb = (mesh.elements[i] for i in shared)
    # Orient so ea runs u -> v; then the quad cycle is u, d, v, c with
    # c opposite in ea and d opposite in eb.
    if not _has_directed_edge(ea, u, v):
        ea, eb = eb, ea
        shared = [shared[1], shared[0]]
    if not (_has_directed_edge(ea, u, v) and _has_directed_edge(eb, v, u)):
        raise OperationRejected("triangles around the edge are inconsistently oriented")
    c = next(w for w in ea.verts if w not in (u, v))
    d = next(w for w in eb.verts if w not in (u, v))
    key = (c, d) if c < d else (d, c)
    if key in mesh.edge_elements():
        raise OperationRejected("opposite diagonal already exists")
    quad = mesh.vertices[[u, d, v, c]]
    e1 = np.roll(quad, -1, axis=0) - quad
    e2 = np.roll(e1, -1, axis=0)
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if not np.all(cross > 0.0):
        raise OperationRejected("quad around the edge is not strictly convex")
    old = min(iq2(mesh.vertices[list(ea.verts)]),
              iq2(mesh.vertices[list(eb.verts)]))
    new_a, new_b = (u, d, c), (d, v, c)
    new = min(iq2(mesh.vertices[list(new_a)]), iq2(mesh.vertices[list(new_b)]))
    if not new > old:
        raise OperationRejected("swap would not improve the worse triangle")
    mesh.elements[shared[0]] = Element(TRI, new_a)
    mesh.elements[shared[1]] = Element(TRI, new_b)
    mesh.invalidate()


def _has_directed_edge(elem, a, b):
    vs = elem.verts
    n = len(vs)
    return any(vs[i] == a and vs[(i + 1) % n] == b for i in range(n))


def vertex_split(mesh, v, direction, eps_scale=1e-3):
    """Split an interior vertex into two along a direction.

    The star of ``v`` is cut by the plane through ``v`` orthogonal to
    nothing in particular: each link vertex is classified by the sign of
    its offset from ``v`` dotted with ``direction``, and the two arcs
    must be contiguous (exactly two sign changes around the link). The
    two copies sit ``eps_scale`` times the mean incident edge length
    apart along ``direction``, and two new triangles stitch the arcs to
    the new edge. Collapsing that edge immediately restores the original
    connectivity, which makes the split the inverse of a collapse.

    Returns the index of the added vertex. Planar meshes only; boundary
    or fixed vertices, ambiguous classifications (a link vertex exactly
    on the cut), and non-contiguous arcs are rejected.
    """
    _require_triangles(mesh)
    if mesh.dim != 2:
        raise TopologyError("vertex split is defined for planar meshes")
    if mesh.fixed[v]:
        raise OperationRejected("cannot split a fixed vertex")
    link, closed = mesh.ordered_link(v)
    if not closed:
        raise OperationRejected("vertex split needs an interior vertex")
    d = np.asarray(direction, dtype=float)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise OperationRejected("zero split direction")
    d = d / n
    offsets = mesh.vertices[link] - mesh.vertices[v]
    side = np.sign(offsets @ d)
    if np.any(side == 0.0):
        raise OperationRejected("a link vertex lies exactly on the cut")
    flips = [i for i in range(len(link))
             if side[i] > 0 > side[(i + 1) % len(link)]
             or side[i] < 0 < side[(i + 1) % len(link)]]
    if len(flips) != 2:
        raise OperationRejected("direction does not cut the link into two arcs")
    eps = eps_scale * float(np.linalg.norm(offsets, axis=1).mean())
    minus = mesh.n_vertices
    base = mesh.vertices[v].copy()
    mesh.vertices = np.vstack([mesh.vertices, base - eps * d])
    mesh.vertices[v] = base + eps * d
    mesh.fixed = np.append(mesh.fixed, False)
    star_ids = set(mesh.vertex_elements(v))
    pos = {w: i for i, w in enumerate(link)}
    for ei in star_ids:
        e = mesh.elements[ei]
        first = next(w for w in e.verts if w != v and
                     _has_directed_edge(e, v, w))
        if side[pos[first]] < 0:
            mesh.elements[ei] = Element(
                TRI, tuple(minus if w == v else w for w in e.verts))
    for i in flips:
        w = link[(i + 1) % len(link)]
        if side[i] > 0:
            mesh.elements.append(Element(TRI, (v, w, minus)))
        else:
            mesh.elements.append(Element(TRI, (minus, w, v)))
    mesh.invalidate()
    return minus


@dataclass
class RemovalLog:
    """Per-pass record of :func:`remove_bad_elements`."""

    passes: list = field(default_factory=list)
    collapsed_total: int = 0
    success: bool = False

    @property
    def n_passes(self):
        return len(self.passes)


def remove_bad_elements(mesh, threshold=0.6, smooth_cfg=None, max_passes=100):
    """Alternate smoothing and edge collapses until every triangle has
    isoperimetric quotient at least ``threshold``.

    Each pass first smooths to convergence (default: weighted Q2 ascent
    on the free vertices), then walks the remaining bad triangles from
    worst to best and collapses the shortest collapsible edge of each;
    one collapse per bad triangle per pass keeps the edit local. The
    loop ends when no triangle is bad (``success``) or when a pass finds
    bad triangles but no legal collapse.

    Fixed vertices are never moved or merged away, so the fixed
    boundary survives bitwise.
    """
    _require_triangles(mesh)
    if smooth_cfg is None:
        smooth_cfg = SmoothConfig(
            method="gradient-ascent", quality=QualityFn(QualityKind.Q2),
            max_iters=2000)
    iq_fn = QualityFn(QualityKind.IQ2)
    log = RemovalLog()
    for n_pass in range(1, max_passes + 1):
        result = smooth(mesh, smooth_cfg)
        vals = element_values(mesh, iq_fn)
        bad = np.nonzero(vals < threshold)[0]
        entry = {
            "pass": n_pass,
            "bad_after_smooth": int(bad.size),
            "min_iq2": float(vals.min()) if vals.size else 1.0,
            "smooth_iters": result.iterations,
            "collapsed": 0,
        }
        if bad.size == 0:
            log.passes.append(entry)
            log.success = True
            break
        # Collapses renumber vertices and elements, so each target is
        # remembered by its vertex set and looked up again just in time.
        order = bad[np.argsort(vals[bad])]
        targets = [frozenset(mesh.elements[i].verts) for i in order]
        for key in targets:
            lookup = {frozenset(e.verts): i for i, e in enumerate(mesh.elements)}
            ei = lookup.get(key)
            if ei is None:
                continue
            e = mesh.elements[ei]
            lengths = [(float(np.linalg.norm(mesh.vertices[a] - mesh.vertices[b])),
                        a, b) for a, b in e.edges()]
            for _, a, b in sorted(lengths):
                try:
                    edge_collapse(mesh, a, b)
                except OperationRejected:
                    continue
                entry["collapsed"] += 1
                break
        log.collapsed_total += entry["collapsed"]
        log.passes.append(entry)
        if entry["collapsed"] == 0:
            break
    return log
