"""Mesh container and connectivity queries.

A :class:`Mesh` holds a vertex coordinate array, a flat element list, a
fixed-vertex mask and optional per-vertex geometry tags used for
projection. Planar and surface meshes may mix triangles, quadrilaterals
and larger polygons in one element list; tetrahedral meshes are
homogeneous.

Connectivity (vertex stars, edge and face incidence, boundary
classification) is derived lazily and cached; any topological edit must
call :meth:`Mesh.invalidate` (the operations in :mod:`meshsmooth.topology`
do). Coordinate updates do not touch connectivity and need no
invalidation. Instances are not thread-safe under mutation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import TopologyError
from .geometry import polygon_normal

TRI = "tri"
QUAD = "quad"
POLY = "poly"
TET = "tet"

_PLANAR_KINDS = (TRI, QUAD, POLY)


@dataclass(frozen=True)
class Element:
    """One mesh element: a kind tag and a vertex index tuple."""

    kind: str
    verts: tuple

    def __post_init__(self):
        v = tuple(int(i) for i in self.verts)
        object.__setattr__(self, "verts", v)
        if len(set(v)) != len(v):
            raise ValueError(f"element has repeated vertices: {v}")
        n = len(v)
        ok = (self.kind == TRI and n == 3) or (self.kind == QUAD and n == 4) \
            or (self.kind == POLY and n >= 5) or (self.kind == TET and n == 4)
        if not ok:
            raise ValueError(f"kind {self.kind!r} cannot have {n} vertices")

    @staticmethod
    def tri(a, b, c):
        return Element(TRI, (a, b, c))

    @staticmethod
    def quad(a, b, c, d):
        return Element(QUAD, (a, b, c, d))

    @staticmethod
    def polygon(verts):
        verts = tuple(verts)
        kind = {3: TRI, 4: QUAD}.get(len(verts), POLY)
        return Element(kind, verts)

    @staticmethod
    def tet(a, b, c, d):
        return Element(TET, (a, b, c, d))

    @property
    def n_verts(self):
        return len(self.verts)

    def edges(self):
        """Vertex index pairs of the element's edges.

        Polygons yield their cyclic boundary; tetrahedra all six pairs.
        """
        v = self.verts
        if self.kind == TET:
            return [(v[i], v[j]) for i in range(4) for j in range(i + 1, 4)]
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def faces(self):
        """Triangular faces of a tetrahedron (one per opposite vertex)."""
        if self.kind != TET:
            raise ValueError("only tetrahedra have faces")
        a, b, c, d = self.verts
        return [(b, c, d), (a, c, d), (a, b, d), (a, b, c)]


def _norm_edge(a, b):
    return (a, b) if a < b else (b, a)


class Mesh:
    """Vertices, elements, fixed flags and cached connectivity.

    Parameters
    ----------
    vertices : array_like, shape (n, 2) or (n, 3)
    elements : sequence of Element
    fixed : array_like of bool, optional
        Vertices that smoothing must not move. Defaults to all free.
    """

    def __init__(self, vertices, elements, fixed=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise ValueError("vertices must be an (n, 2) or (n, 3) array")
        self.elements = list(elements)
        if fixed is None:
            self.fixed = np.zeros(len(self.vertices), dtype=bool)
        else:
            self.fixed = np.asarray(fixed, dtype=bool).copy()
            if self.fixed.shape != (len(self.vertices),):
                raise ValueError("fixed mask must have one flag per vertex")
        #: per-vertex projection targets, vertex index -> Geometry
        self.geometry_tags = {}
        self._cache = {}
        self._validate()
        self._ref_normals = None
        if self.dim == 3 and not self.is_tet_mesh and self.elements:
            self.reset_ref_normals()

    # -- basic structure ------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def is_tet_mesh(self):
        return bool(self.elements) and self.elements[0].kind == TET

    @property
    def ref_normals(self):
        """Reference normals fixing the orientation sign of surface elements."""
        return self._ref_normals

    def reset_ref_normals(self):
        """Capture element normals from the current coordinates."""
        self._ref_normals = np.array(
            [polygon_normal(self.vertices[list(e.verts)]) for e in self.elements])

    def _validate(self):
        n = self.n_vertices
        for i, e in enumerate(self.elements):
            if not isinstance(e, Element):
                raise TypeError(f"element {i} is not an Element")
            for v in e.verts:
                if not 0 <= v < n:
                    raise ValueError(f"element {i} references vertex {v} of {n}")
        kinds = {e.kind for e in self.elements}
        if TET in kinds and kinds != {TET}:
            raise ValueError("tetrahedra cannot be mixed with planar elements")
        if TET in kinds and self.dim != 3:
            raise ValueError("tetrahedral meshes need 3D coordinates")

    @classmethod
    def from_polygons(cls, vertices, cells, fixed=None):
        """Build a planar or surface mesh from vertex index lists."""
        return cls(vertices, [Element.polygon(c) for c in cells], fixed=fixed)

    @classmethod
    def from_tets(cls, vertices, tets, fixed=None):
        """Build a tetrahedral mesh from vertex index quadruples."""
        return cls(vertices, [Element.tet(*t) for t in tets], fixed=fixed)

    def copy(self):
        m = Mesh(self.vertices.copy(), list(self.elements), fixed=self.fixed.copy())
        m.geometry_tags = dict(self.geometry_tags)
        if self._ref_normals is not None:
            m._ref_normals = self._ref_normals.copy()
        return m

    def element_coords(self, e):
        """Coordinate array of one element (rows follow its vertex order)."""
        return self.vertices[list(self.elements[e].verts)]

    def bbox_diagonal(self):
        if self.n_vertices == 0:
            return 0.0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def mean_edge_length(self):
        """Mean length over the unique edges of the mesh."""
        edges = self.edges()
        if not edges:
            return 0.0
        idx = np.array(edges)
        d = self.vertices[idx[:, 0]] - self.vertices[idx[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean())

    # -- cached connectivity --------------------------------------------

    def invalidate(self):
        """Drop cached connectivity after a topological edit."""
        self._cache.clear()

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def vertex_elements(self, v=None):
        """Element indices incident to each vertex (or to one vertex)."""
        def build():
            inc = [[] for _ in range(self.n_vertices)]
            for i, e in enumerate(self.elements):
                for w in e.verts:
                    inc[w].append(i)
            return inc
        inc = self._cached("vertex_elements", build)
        return inc if v is None else inc[v]

    def edge_elements(self):
        """Map from normalized edge (a, b), a < b, to incident element indices."""
        def build():
            em = {}
            for i, e in enumerate(self.elements):
                for a, b in e.edges():
                    em.setdefault(_norm_edge(a, b), []).append(i)
            return em
        return self._cached("edge_elements", build)

    def edges(self):
        """Sorted list of unique normalized edges."""
        return self._cached("edges", lambda: sorted(self.edge_elements()))

    def vertex_star(self, v):
        """Vertices connected to ``v`` by an edge, as a sorted array.

        An isolated vertex has an empty star.
        """
        def build():
            star = [set() for _ in range(self.n_vertices)]
            for a, b in self.edge_elements():
                star[a].add(b)
                star[b].add(a)
            return [np.array(sorted(s), dtype=int) for s in star]
        return self._cached("vertex_star", build)[v]

    def shared_elements(self, v, w):
        """Indices of elements containing both ``v`` and ``w``, sorted.

        The result is symmetric in its arguments; for an interior edge of
        a manifold planar mesh it has exactly two entries.
        """
        a = self.vertex_elements(v)
        b = set(self.vertex_elements(w))
        return [i for i in a if i in b]

    # -- boundary and manifold checks -----------------------------------

    def boundary_edges(self):
        """Normalized edges incident to exactly one element (planar/surface)."""
        if self.is_tet_mesh:
            raise TopologyError("boundary_edges is for planar or surface meshes")
        return sorted(e for e, inc in self.edge_elements().items() if len(inc) == 1)

    def boundary_faces(self):
        """Sorted vertex triples of faces incident to exactly one tet."""
        if not self.is_tet_mesh:
            raise TopologyError("boundary_faces is for tetrahedral meshes")
        def build():
            census = {}
            for e in self.elements:
                for f in e.faces():
                    census[tuple(sorted(f))] = census.get(tuple(sorted(f)), 0) + 1
            return census
        census = self._cached("face_census", build)
        bad = [f for f, c in census.items() if c > 2]
        if bad:
            raise TopologyError(f"face {bad[0]} is shared by more than 2 tets")
        return sorted(f for f, c in census.items() if c == 1)

    def classify_boundary(self):
        """Boolean mask of boundary vertices.

        Planar and surface meshes: vertices of edges incident to exactly
        one element. Tetrahedral meshes: vertices of faces incident to
        exactly one tet. Raises :class:`TopologyError` for non-manifold
        incidence (an edge or face shared more than twice) and for pinch
        vertices, where the boundary through a vertex is not a single
        curve. Calling it twice returns the same mask.
        """
        mask = np.zeros(self.n_vertices, dtype=bool)
        if self.is_tet_mesh:
            for f in self.boundary_faces():
                mask[list(f)] = True
            return mask
        count = np.zeros(self.n_vertices, dtype=int)
        for (a, b), inc in self.edge_elements().items():
            if len(inc) > 2:
                raise TopologyError(f"edge ({a}, {b}) is shared by {len(inc)} elements")
            if len(inc) == 1:
                mask[a] = mask[b] = True
                count[a] += 1
                count[b] += 1
        pinched = np.nonzero((count != 0) & (count != 2))[0]
        if pinched.size:
            raise TopologyError(
                f"vertex {pinched[0]} lies on {count[pinched[0]]} boundary edges "
                "(boundary is not a single curve)")
        return mask

    def ordered_link(self, v):
        """Link vertices of ``v`` in an all-triangle star, in cyclic order.

        Returns ``(link, closed)`` where ``link`` follows the orientation
        of the incident triangles. For an interior vertex the link is a
        closed cycle (``closed=True``); for a boundary vertex it is an
        open chain starting and ending at the boundary neighbours.
        """
        inc = self.vertex_elements(v)
        succ = {}
        for i in inc:
            e = self.elements[i]
            if e.kind != TRI:
                raise TopologyError("ordered_link needs an all-triangle star")
            a, b, c = e.verts
            if a == v:
                succ[b] = c
            elif b == v:
                succ[c] = a
            else:
                succ[a] = b
        if not succ:
            return [], False
        starts = set(succ) - set(succ.values())
        if starts:
            if len(starts) != 1:
                raise TopologyError(f"star of vertex {v} is not a single fan")
            cur, closed = starts.pop(), False
        else:
            cur, closed = min(succ), True
        link = [cur]
        while cur in succ:
            cur = succ[cur]
            if cur == link[0]:
                break
            link.append(cur)
            if len(link) > len(succ) + 1:
                raise TopologyError(f"star of vertex {v} is not a single fan")
        if not closed and len(link) != len(succ) + 1:
            raise TopologyError(f"star of vertex {v} is not a single fan")
        return link, closed

    # -- evaluation support ---------------------------------------------

    def batches(self):
        """Elements grouped by (kind, vertex count) for vectorized evaluation.

        Returns a dict mapping ``(kind, n)`` to ``(element_ids, vert_ids)``
        where ``element_ids`` has shape (m,) and ``vert_ids`` (m, n).
        """
        def build():
            groups = {}
            for i, e in enumerate(self.elements):
                groups.setdefault((e.kind, e.n_verts), []).append(i)
            return {
                key: (np.array(ids, dtype=int),
                      np.array([self.elements[i].verts for i in ids], dtype=int))
                for key, ids in groups.items()
            }
        return self._cached("batches", build)

    def movable_mask(self, project=False):
        """Vertices a smoothing sweep may move.

        Free vertices always; fixed vertices only when projection is on
        and the vertex has a geometry tag (it then slides along its
        geometry).
        """
        mask = ~self.fixed
        if project:
            for v in self.geometry_tags:
                mask[v] = True
        return mask

    def tag_geometry(self, geometry, vertices=None):
        """Attach a projection geometry to vertices (default: all fixed ones)."""
        if vertices is None:
            vertices = np.nonzero(self.fixed)[0]
        for v in vertices:
            self.geometry_tags[int(v)] = geometry


def check_mesh(mesh, manifold=False):
    """Validate a mesh argument; returns it for chaining.

    Raises TypeError or ValueError for structural problems. With
    ``manifold=True`` also runs boundary classification, which rejects
    non-manifold and pinched connectivity.
    """
    if not isinstance(mesh, Mesh):
        raise TypeError(f"expected a Mesh, got {type(mesh).__name__}")
    if not np.isfinite(mesh.vertices).all():
        raise ValueError("mesh has non-finite vertex coordinates")
    mesh._validate()
    if manifold and mesh.n_elements:
        mesh.classify_boundary()
    return mesh
