"""Reference meshes for tests, benchmarks and the command line.

Every generator is deterministic: the tetrahedral ball derives its
point-placement seed from the resolution, and :func:`perturbed` takes
an explicit seed. Boundary vertices come out fixed, interior vertices
free.
"""

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshError
from .geometry import tet_volume
from .mesh import Element, Mesh


def square_tri(n):
    """Unit square split into a right-triangle grid.

    ``n`` cells per side give (n+1)^2 vertices and 2 n^2 triangles; each
    grid cell is cut along its up-diagonal. Boundary vertices are fixed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    verts, fixed = _grid(n)
    elems = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = _cell(n, i, j)
            elems.append(Element.tri(v00, v10, v11))
            elems.append(Element.tri(v00, v11, v01))
    return Mesh(verts, elems, fixed=fixed)


def square_mixed(n):
    """Unit square with quadrilaterals on the left half, triangles on
    the right.

    Same grid as :func:`square_tri`; cells with ``i < n // 2`` stay
    quads, the rest split into triangle pairs. ``n`` must be at least 2
    so both kinds occur. Boundary vertices are fixed.
    """
    if n < 2:
        raise ValueError("n must be at least 2 for a mixed mesh")
    verts, fixed = _grid(n)
    elems = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = _cell(n, i, j)
            if i < n // 2:
                elems.append(Element.quad(v00, v10, v11, v01))
            else:
                elems.append(Element.tri(v00, v10, v11))
                elems.append(Element.tri(v00, v11, v01))
    return Mesh(verts, elems, fixed=fixed)


def _grid(n):
    ij = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ij, ij)
    verts = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    fixed = np.zeros((n + 1) ** 2, dtype=bool)
    fixed[idx[0, :]] = fixed[idx[-1, :]] = True
    fixed[idx[:, 0]] = fixed[idx[:, -1]] = True
    return verts, fixed


def _cell(n, i, j):
    v00 = j * (n + 1) + i
    return v00, v00 + 1, v00 + n + 1, v00 + n + 2


def disk_tri(n):
    """Unit disk triangulated in concentric rings.

    Ring ``k`` (1..n) holds 6k vertices at radius ``k/n``, giving
    1 + 3 n (n+1) vertices and 6 n^2 triangles. The outer ring is fixed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    pts = [np.zeros(2)]
    for k in range(1, n + 1):
        ang = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        r = k / n
        pts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    verts = np.vstack(pts)

    def off(k):
        return 1 + 3 * k * (k - 1)

    elems = []
    for j in range(6):
        elems.append(Element.tri(0, 1 + j, 1 + (j + 1) % 6))
    for k in range(2, n + 1):
        ni, no = 6 * (k - 1), 6 * k
        for s in range(6):
            a = [off(k - 1) + (s * (k - 1) + i) % ni for i in range(k)]
            b = [off(k) + (s * k + i) % no for i in range(k + 1)]
            for i in range(k):
                elems.append(Element.tri(b[i], b[i + 1], a[i]))
            for i in range(k - 1):
                elems.append(Element.tri(a[i], b[i + 1], a[i + 1]))
    fixed = np.zeros(len(verts), dtype=bool)
    fixed[off(n):] = True
    return Mesh(verts, elems, fixed=fixed)


def ball_tet(n):
    """Unit ball filled with tetrahedra.

    Interior points sit on a jittered cubic lattice of spacing ``2/n``
    (kept ``0.35`` spacings clear of the sphere), boundary points on a
    Fibonacci spiral over the sphere with matching surface density; the
    Delaunay triangulation of the union supplies the tetrahedra, which
    are reordered to positive volume. Surface vertices are fixed. The
    jitter stream is seeded from ``n``, so the mesh is reproducible.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    h = 2.0 / n
    rng = np.random.default_rng(900 + n)
    ax = np.arange(-n, n + 1) * h
    gx, gy, gz = np.meshgrid(ax, ax, ax)
    lattice = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    lattice = lattice[np.linalg.norm(lattice, axis=1) <= 1.0 - 0.85 * h]
    lattice = lattice + rng.uniform(-0.15 * h, 0.15 * h, lattice.shape)
    m = max(32, int(round(4.0 * np.pi / (h * h))))
    surface = _fibonacci_sphere(m)
    pts = np.vstack([lattice, surface])
    tets = Delaunay(pts).simplices
    coords = pts[tets]
    vols = np.array([tet_volume(c) for c in coords])
    flip = vols < 0
    tets[flip, 0], tets[flip, 1] = tets[flip, 1].copy(), tets[flip, 0].copy()
    good = np.abs(vols) > 1e-10 * h ** 3
    elems = [Element.tet(*t) for t in tets[good]]
    mesh = Mesh(pts, elems)
    mesh.fixed = mesh.classify_boundary().copy()
    return mesh


def _fibonacci_sphere(m):
    i = np.arange(m) + 0.5
    phi = np.pi * (np.sqrt(5.0) - 1.0) * i
    z = 1.0 - 2.0 * i / m
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def perturbed(mesh, sigma, seed=0):
    """Copy of ``mesh`` with uniform noise on the free vertices.

    The amplitude is ``sigma`` times the mean edge length; each free
    coordinate receives an independent uniform offset in
    ``[-amplitude, amplitude]`` from a generator seeded with ``seed``.
    """
    out = mesh.copy()
    if sigma == 0.0:
        return out
    amp = sigma * out.mean_edge_length()
    rng = np.random.default_rng(seed)
    free = ~out.fixed
    noise = rng.uniform(-amp, amp, (int(free.sum()), out.dim))
    out.vertices[free] += noise
    return out


_GENERATORS = {
    "square_tri": square_tri,
    "square_mixed": square_mixed,
    "disk_tri": disk_tri,
    "ball_tet": ball_tet,
}


def generate(kind, n, sigma=0.0, seed=0):
    """Build a named reference mesh, optionally perturbed."""
    try:
        build = _GENERATORS[kind]
    except KeyError:
        raise MeshError(f"unknown mesh kind {kind!r}; "
                        f"choose from {sorted(_GENERATORS)}") from None
    mesh = build(n)
    if sigma:
        mesh = perturbed(mesh, sigma, seed=seed)
    return mesh
