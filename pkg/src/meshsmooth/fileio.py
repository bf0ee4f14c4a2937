"""Plain-text mesh files.

Planar and surface meshes use an OFF-style format with a trailing
``fixed`` line; tetrahedral meshes use the node/ele pair convention
(pass the ``.node`` path, the ``.ele`` sibling is implied). Both loaders
skip blank lines and ``#`` comments and report malformed content with
file name and line number. Coordinates are written with 17 significant
digits, so a save/load round trip reproduces them bitwise.
"""

import os

import numpy as np

from .errors import MeshFileError
from .mesh import Element, Mesh

_FMT = "%.17g"


def save_mesh(mesh, path):
    """Write a mesh; dispatches on the mesh kind.

    Tetrahedral meshes require a ``.node`` path. Returns the path
    written (the ``.node`` one for tets).
    """
    path = os.fspath(path)
    if mesh.is_tet_mesh:
        if not path.endswith(".node"):
            raise ValueError("tetrahedral meshes are saved to a .node path")
        return _save_node_ele(mesh, path)
    return _save_off(mesh, path)


def load_mesh(path):
    """Read a mesh written by :func:`save_mesh`.

    A ``.node`` path loads the node/ele pair; anything else is parsed
    as the OFF-style polygon format.
    """
    path = os.fspath(path)
    if path.endswith(".node"):
        return _load_node_ele(path)
    return _load_off(path)


# -- OFF-style polygon format ----------------------------------------------

def _save_off(mesh, path):
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_elements} 0"]
    for v in mesh.vertices:
        lines.append(" ".join(_FMT % x for x in v))
    for e in mesh.elements:
        lines.append(" ".join(str(x) for x in (e.n_verts, *e.verts)))
    lines.append("fixed " + " ".join(str(int(f)) for f in mesh.fixed))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


class _Reader:
    """Token lines of a text file, with 1-based line numbers for errors."""

    def __init__(self, path):
        self.path = path
        with open(path) as fh:
            raw = fh.readlines()
        self.lines = []
        for no, text in enumerate(raw, start=1):
            body = text.split("#", 1)[0].strip()
            if body:
                self.lines.append((no, body.split()))
        self.pos = 0
        self.line = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise MeshFileError(f"unexpected end of file, expected {what}",
                                path=self.path, line=self.line)
        self.line, tokens = self.lines[self.pos]
        self.pos += 1
        return tokens

    def peek(self):
        return self.lines[self.pos][1] if self.pos < len(self.lines) else None

    def fail(self, message):
        raise MeshFileError(message, path=self.path, line=self.line)

    def ints(self, tokens, what):
        try:
            return [int(t) for t in tokens]
        except ValueError:
            self.fail(f"expected integers for {what}, got {' '.join(tokens)}")

    def floats(self, tokens, what):
        try:
            return [float(t) for t in tokens]
        except ValueError:
            self.fail(f"expected numbers for {what}, got {' '.join(tokens)}")


def _load_off(path):
    r = _Reader(path)
    header = r.next("OFF header")
    if header != ["OFF"]:
        r.fail("first line must be 'OFF'")
    counts = r.ints(r.next("vertex and element counts"), "the counts line")
    if len(counts) != 3:
        r.fail("counts line must hold three integers")
    nv, ne = counts[0], counts[1]
    verts = []
    dim = None
    for _ in range(nv):
        row = r.floats(r.next("a vertex"), "a vertex")
        if dim is None:
            dim = len(row)
            if dim not in (2, 3):
                r.fail("vertices must have 2 or 3 coordinates")
        elif len(row) != dim:
            r.fail(f"expected {dim} coordinates, got {len(row)}")
        verts.append(row)
    elems = []
    for _ in range(ne):
        row = r.ints(r.next("an element"), "an element")
        if len(row) < 1 or row[0] != len(row) - 1:
            r.fail("element line must read: count followed by that many indices")
        if row[0] < 3:
            r.fail("elements need at least 3 vertices")
        elems.append(row[1:])
    fixed = None
    tail = r.peek()
    if tail is not None and tail[0] == "fixed":
        row = r.ints(r.next("the fixed line")[1:], "the fixed line")
        if len(row) != nv:
            r.fail(f"fixed line must list {nv} flags")
        fixed = np.array(row, dtype=bool)
    try:
        return Mesh.from_polygons(np.array(verts, dtype=float), elems,
                                  fixed=fixed)
    except ValueError as exc:
        raise MeshFileError(str(exc), path=path) from exc


# -- node/ele pair for tetrahedra ------------------------------------------

def _ele_path(node_path):
    return node_path[: -len(".node")] + ".ele"


def _save_node_ele(mesh, path):
    lines = [f"{mesh.n_vertices} 3 0 1"]
    for i, (v, f) in enumerate(zip(mesh.vertices, mesh.fixed), start=1):
        lines.append(f"{i} " + " ".join(_FMT % x for x in v) + f" {int(f)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    lines = [f"{mesh.n_elements} 4 0"]
    for i, e in enumerate(mesh.elements, start=1):
        lines.append(f"{i} " + " ".join(str(v + 1) for v in e.verts))
    with open(_ele_path(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _load_node_ele(path):
    r = _Reader(path)
    header = r.ints(r.next("the node header"), "the node header")
    if len(header) != 4:
        r.fail("node header must read: count dimension attributes markers")
    nv, dim, n_attr, n_marker = header
    if dim != 3:
        r.fail("node files describe 3D points")
    width = 1 + dim + n_attr + n_marker
    rows = np.empty((nv, dim))
    fixed = np.zeros(nv, dtype=bool)
    base = None
    for k in range(nv):
        row = r.floats(r.next("a node"), "a node")
        if len(row) != width:
            r.fail(f"node line must hold {width} fields")
        if base is None:
            base = int(row[0])
            if base not in (0, 1):
                r.fail("node numbering must start at 0 or 1")
        idx = int(row[0]) - base
        if idx != k:
            r.fail("node lines must be consecutively numbered")
        rows[k] = row[1:1 + dim]
        if n_marker:
            fixed[k] = row[1 + dim + n_attr] != 0.0
    if base is None:
        base = 1
    ele = _ele_path(path)
    if not os.path.exists(ele):
        raise MeshFileError("matching .ele file not found", path=ele)
    r = _Reader(ele)
    header = r.ints(r.next("the ele header"), "the ele header")
    if len(header) != 3:
        r.fail("ele header must read: count nodes-per-tet attributes")
    nt, per, n_attr = header
    if per != 4:
        r.fail("only 4-node tetrahedra are supported")
    tets = np.empty((nt, 4), dtype=int)
    for k in range(nt):
        row = r.ints(r.next("a tetrahedron"), "a tetrahedron")
        if len(row) != 1 + per + n_attr:
            r.fail(f"tetrahedron line must hold {1 + per + n_attr} fields")
        if row[0] - base != k:
            r.fail("tetrahedron lines must be consecutively numbered")
        tets[k] = [v - base for v in row[1:5]]
    try:
        return Mesh(rows, [Element.tet(*t) for t in tets],
                    fixed=fixed if n_marker else None)
    except ValueError as exc:
        raise MeshFileError(str(exc), path=ele) from exc
