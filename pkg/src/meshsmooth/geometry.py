"""Element-level geometric quantities and their analytic gradients.

All functions take plain coordinate arrays, one vertex per row, and return
values or per-vertex gradient arrays of the same shape. Polygons are given
by their vertices in cyclic order, tetrahedra by their four vertices.

The gradients here are exact; the test suite checks every one of them
against central finite differences.
"""

import numpy as np

from .errors import MeshError, SingularityError

# machine-scale cutoff used to flag degenerate configurations
_DEGENERATE = 1e-30


def _as3d(x):
    """Pad 2D coordinate rows with a zero z column; pass 3D through."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 3:
        return x
    if x.shape[-1] == 2:
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., :2] = x
        return out
    raise ValueError(f"expected 2D or 3D coordinates, got shape {x.shape}")


def polygon_normal(x):
    """Area-weighted normal of a (not necessarily planar) polygon.

    Computed as the cyclic sum x_0 x x_1 + x_1 x x_2 + ... + x_{n-1} x x_0.
    Its length is twice the polygon area; for planar 2D input the result
    points along +z for counterclockwise order.

    Parameters
    ----------
    x : array_like, shape (n, 2) or (n, 3), n >= 3
        Polygon vertices in cyclic order.

    Returns
    -------
    ndarray, shape (3,)
    """
    x = _as3d(x)
    if x.shape[0] < 3:
        raise ValueError("polygon needs at least 3 vertices")
    return np.cross(x, np.roll(x, -1, axis=0)).sum(axis=0)


def polygon_area(x, signed=False):
    """Area of a polygon.

    For 2D input the shoelace formula gives a signed area (positive for
    counterclockwise order); ``signed=False`` returns its absolute value.
    For 3D input the area is half the length of :func:`polygon_normal`
    and ``signed`` is not available (orientation in space needs a
    reference normal, which mesh-level code supplies).
    """
    x = np.asarray(x, dtype=float)
    nu = polygon_normal(x)
    if x.shape[1] == 2:
        a = 0.5 * nu[2]
        return a if signed else abs(a)
    if signed:
        raise ValueError("signed area of a 3D polygon needs a reference normal")
    return 0.5 * np.linalg.norm(nu)


def tri_area(x, signed=False):
    """Area of a triangle, optionally signed (2D only)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3, 2) and x.shape != (3, 3):
        raise ValueError(f"expected 3 vertices in 2D or 3D, got shape {x.shape}")
    return polygon_area(x, signed=signed)


def tet_volume(x):
    """Signed volume of a tetrahedron (positive for right-handed order)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4, 3):
        raise ValueError(f"expected 4 vertices in 3D, got shape {x.shape}")
    return float(np.linalg.det(x[1:] - x[0])) / 6.0


def perimeter(x):
    """Sum of the cyclic edge lengths of a polygon."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("perimeter needs at least 2 vertices")
    return float(np.linalg.norm(x - np.roll(x, -1, axis=0), axis=1).sum())


def grad_tet_volume(x):
    """Gradient of the signed tetrahedron volume.

    The derivative with respect to each vertex is one sixth of the
    opposite face's cross-product normal, oriented so the value agrees
    with central differences:

        d vol / d x_i = (1/6) nu(face opposite x_i, reversed order)

    Returns
    -------
    ndarray, shape (4, 3)
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4, 3):
        raise ValueError(f"expected 4 vertices in 3D, got shape {x.shape}")
    g = np.empty((4, 3))
    g[0] = polygon_normal(x[[3, 2, 1]])
    g[1] = polygon_normal(x[[3, 0, 2]])
    g[2] = polygon_normal(x[[3, 1, 0]])
    g[3] = polygon_normal(x[[0, 1, 2]])
    return g / 6.0


def _perp(v):
    # rotate 2D vectors by -90 degrees (the 2D analogue of v x z_hat)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def grad_tri_area(x, signed=False):
    """Gradient of the triangle area.

    2D with ``signed=True``: gradient of the shoelace area, defined for
    every configuration (the signed area is a polynomial).

    3D (or 2D unsigned): gradient of the unsigned area
    (x_next - x_prev) x unit_normal / 2; raises
    :class:`SingularityError` for degenerate (zero-area) triangles,
    where the unsigned area is not differentiable.

    Returns
    -------
    ndarray, same shape as ``x``
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != 3:
        raise ValueError("expected a triangle")
    if x.shape[1] == 2 and signed:
        # d A / d x_i = perp(x_{i+1} - x_{i-1}) / 2
        return 0.5 * _perp(np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0))
    x3 = _as3d(x)
    nu = polygon_normal(x3)
    nn = np.linalg.norm(nu)
    if nn < _DEGENERATE:
        raise SingularityError("degenerate triangle has no area gradient")
    g = 0.5 * np.cross(np.roll(x3, -1, axis=0) - np.roll(x3, 1, axis=0), nu / nn)
    return g if x.shape[1] == 3 else g[:, :2]


def grad_polygon_area(x, signed=False, ref_normal=None):
    """Gradient of the polygon area with respect to each vertex.

    2D: gradient of the shoelace area, perp(x_{i+1} - x_{i-1}) / 2,
    negated for ``signed=False`` when the signed area is negative.
    3D: gradient of ||nu||/2, which is (x_{i+1} - x_{i-1}) x n_hat / 2
    with n_hat the unit polygon normal; pass ``ref_normal`` to get the
    gradient of the area signed against that reference.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[1] == 2:
        g = 0.5 * _perp(np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0))
        if not signed and polygon_area(x, signed=True) < 0:
            g = -g
        return g
    nu = polygon_normal(x)
    nn = np.linalg.norm(nu)
    if nn < _DEGENERATE:
        raise SingularityError("degenerate polygon has no area gradient")
    g = 0.5 * np.cross(np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0), nu / nn)
    if ref_normal is not None and float(np.dot(nu, ref_normal)) < 0:
        g = -g
    return g


def grad_perimeter(x):
    """Gradient of the cyclic perimeter.

    Each row is the sum of the two unit vectors pointing from the
    neighbouring vertices toward x_i, so every row has norm at most 2.
    Coincident adjacent vertices raise :class:`SingularityError`.
    """
    x = np.asarray(x, dtype=float)
    e = x - np.roll(x, -1, axis=0)         # x_i - x_{i+1}
    ln = np.linalg.norm(e, axis=1)
    if np.any(ln < _DEGENERATE):
        raise SingularityError("zero-length edge has no perimeter gradient")
    u = e / ln[:, None]                     # unit(x_i - x_{i+1})
    return u - np.roll(u, 1, axis=0)        # + unit(x_i - x_{i-1})


def grad_norm_pow(x, n):
    """Gradient of ||x||^n, which is n * x * ||x||^(n-2).

    At x = 0 the gradient is zero for n >= 2 and undefined otherwise
    (raises :class:`SingularityError`).
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    if r < _DEGENERATE:
        if n >= 2:
            return np.zeros_like(x)
        raise SingularityError(f"||x||^{n} is not differentiable at 0")
    return n * x * r ** (n - 2)


def grad_area_boundary_node(x0, link):
    """Gradient of the total surface area with respect to a boundary vertex.

    ``link`` is the open curve (x_1, ..., x_n) of neighbouring vertices,
    ordered consistently with the element orientation, so x_1 and x_n are
    the two boundary neighbours. For a flat patch the interior terms of
    the per-element area gradients cancel and what remains is

        (x_1 - x_n) x n_hat / 2

    with n_hat the unit normal of the triangle (x_0, x_1, x_n). When that
    triangle is degenerate (straight boundary through x_0) the mean
    normal of the link fan is used instead; if that is degenerate too, a
    :class:`SingularityError` is raised.

    Returns
    -------
    ndarray, shape (3,) for 3D input, (2,) for 2D input
    """
    x0 = np.asarray(x0, dtype=float)
    link = np.asarray(link, dtype=float)
    if link.shape[0] < 2:
        raise ValueError("boundary link needs at least 2 vertices")
    dim = x0.shape[0]
    p0, ln = _as3d(x0), _as3d(link)
    nu = polygon_normal(np.array([p0, ln[0], ln[-1]]))
    nn = np.linalg.norm(nu)
    if nn < _DEGENERATE * max(1.0, np.abs(ln).max()) + _DEGENERATE:
        # straight boundary: estimate the surface normal from the whole fan
        nu = np.zeros(3)
        for a, b in zip(ln[:-1], ln[1:]):
            nu += polygon_normal(np.array([p0, a, b]))
        nn = np.linalg.norm(nu)
        if nn < _DEGENERATE:
            raise SingularityError("degenerate boundary fan has no area gradient")
    g = 0.5 * np.cross(ln[0] - ln[-1], nu / nn)
    return g if dim == 3 else g[:2]


# Contributions of a polygonal face to the volume gradient at its first
# vertex. Each entry maps face size -> list of (coefficient, vertex
# positions within the face) pairs; the contribution is the weighted sum
# of polygon normals over those vertex subsets. Averaging the cone
# volume over all triangulations of the face (2, 5 and 14 of them for
# squares, pentagons and hexagons) produces exactly these combinations;
# the test suite re-derives them by enumeration.
_FACE_VOLUME_TABLES = {
    3: [(1.0, (0, 1, 2))],
    4: [(0.5, (0, 1, 3)), (0.5, (0, 1, 2, 3))],
    5: [(2 / 5, (0, 1, 4)), (1 / 5, (0, 1, 2, 4)),
        (1 / 5, (0, 1, 3, 4)), (1 / 5, (0, 1, 2, 3, 4))],
    6: [(5 / 14, (0, 1, 5)), (2 / 14, (0, 1, 2, 5)),
        (2 / 14, (0, 1, 3, 5)), (2 / 14, (0, 1, 4, 5)),
        (2 / 14, (0, 1, 2, 3, 4, 5)), (1 / 14, (0, 1, 2, 4, 5))],
}


def grad_vol_boundary_node(x0, faces):
    """Gradient of the enclosed volume with respect to a boundary vertex.

    ``faces`` lists the boundary faces incident to x_0, each as a cyclic
    vertex-coordinate array with x_0 first and a consistent (outward)
    orientation. Triangular faces contribute nu(face)/6; larger faces
    contribute the triangulation-averaged equivalent, supported up to
    hexagons. Summed over a closed fan of faces around x_0 this equals
    the derivative of the enclosed volume; for an all-triangle fan it
    collapses to nu(link curve)/6.

    Parameters
    ----------
    x0 : array_like, shape (3,)
    faces : sequence of array_like, each shape (n_i, 3) with 3 <= n_i <= 6

    Returns
    -------
    ndarray, shape (3,)
    """
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros(3)
    for f in faces:
        f = np.asarray(f, dtype=float)
        if not np.array_equal(f[0], x0):
            raise ValueError("each face must list x0 as its first vertex")
        table = _FACE_VOLUME_TABLES.get(f.shape[0])
        if table is None:
            raise MeshError(
                f"volume gradient supports faces with up to 6 vertices, got {f.shape[0]}")
        for coeff, pos in table:
            g += coeff * polygon_normal(f[list(pos)])
    return g / 6.0
