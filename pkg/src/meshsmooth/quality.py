"""Element quality measures, mesh-level objectives and their gradients.

Two families of measures live here.

Normalized ratios, equal to 1 exactly on regular elements and going
negative with inverted orientation:

* ``mean_ratio`` for triangles, area / (sqrt(3)/12 * sum of squared
  edge lengths), and for tetrahedra, 12 * (3|vol|)^(2/3) / (sum of
  squared edge lengths) carrying the sign of the volume.
* ``iq2`` for polygons, area / (c * perimeter^2), and ``iq3`` for
  tetrahedra, volume / (c * surface_area^(3/2)), with the constant
  chosen per element type so regular elements score 1.

Concave objectives, equal to 0 exactly on regular elements, whose
gradient ascent smooths and untangles:

* ``q2_element``: area minus a weighted multiple of perimeter^2 (or of
  the squared-edge-length energy).
* ``q3_element``: volume minus a weighted multiple of one of the
  ``lambda_variant`` energies (products of face areas and perimeters,
  powers of face areas, or powers of edge lengths).

Mesh-level evaluation (:func:`mesh_quality`, :func:`grad_mesh_quality`)
is vectorized over batches of same-shaped elements; the scalar element
functions above stay deliberately independent so the tests can check
the two routes against each other.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshError, SingularityError
from .geometry import (grad_perimeter, grad_tri_area, perimeter, polygon_area,
                       polygon_normal, tet_volume, tri_area)
from .mesh import TET, TRI

_TINY = 1e-30

SQRT3 = math.sqrt(3.0)

#: triangle mean-ratio denominator constant, area = C * lambda on equilateral
C_MR_TRI = SQRT3 / 12.0

#: tetrahedron isoperimetric constant, vol = C * area^(3/2) on the regular tet
C_IQ3_TET = 1.0 / (6.0 * math.sqrt(2.0) * 3.0 ** 0.75)

#: mean-ratio numerator coefficient for tetrahedra; the normalizing ratio
#: lambda_regular / (3 * vol_regular)^(2/3) happens to be exactly 12
MR_TET_COEF = 12.0


def c_iq2(n):
    """Isoperimetric constant for an n-gon: area = c * perimeter^2 when regular."""
    return 1.0 / (4.0 * n * math.tan(math.pi / n))


def c_elem(n):
    """Edge-energy weight of an n-gon in the mesh-level edge objective.

    sqrt(3)/6 for triangles, 1/2 for quadrilaterals. The mesh objective
    (1/2) * sum_e c_elem(n_e) * lambda(x_e) halves the double counting of
    interior edges; the constant that makes area - c * lambda vanish on a
    regular n-gon is therefore c_elem(n) / 2 (see :func:`c_q2_lambda`).
    """
    return 1.0 / (2.0 * math.tan(math.pi / n))


def c_q2_lambda(n):
    """Element constant with area = c * lambda(edge energy) on a regular n-gon."""
    return 1.0 / (4.0 * math.tan(math.pi / n))


# canonical regular tetrahedron with unit edges, used to normalize the
# energy family so that vol - lambda_i / c_lambda(i) vanishes when regular
_REG_TET = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.5, SQRT3 / 2.0, 0.0],
    [0.5, SQRT3 / 6.0, math.sqrt(2.0 / 3.0)],
])

_TET_FACES = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
_TET_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


# -- scalar element measures -----------------------------------------------

def lambda_edges(x, cell="polygon"):
    """Sum of squared edge lengths of one element.

    ``cell="polygon"`` sums the cyclic boundary edges; ``cell="tet"``
    sums all six vertex pairs. The argument is required because four
    rows of 3D coordinates could be either a quadrilateral or a
    tetrahedron.
    """
    x = np.asarray(x, dtype=float)
    if cell == "tet":
        if x.shape != (4, 3):
            raise ValueError("a tet needs 4 vertices in 3D")
        return float(sum(np.dot(x[i] - x[j], x[i] - x[j]) for i, j in _TET_PAIRS))
    if cell != "polygon":
        raise ValueError(f"cell must be 'polygon' or 'tet', got {cell!r}")
    d = x - np.roll(x, -1, axis=0)
    return float((d * d).sum())


def lambda_variant(x, i):
    """Edge/face energy of a tetrahedron, variants 1 to 5.

    With ``hat_k`` the face opposite vertex k:

    1. sum of area(hat_k) * perimeter(hat_k)
    2. sum of area(hat_k)^(3/2)
    3. (sum of squared edge lengths)^(3/2)
    4. sum of cubed edge lengths
    5. (total face area)^(3/2)

    All five are homogeneous of degree 3, like the volume.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4, 3):
        raise ValueError("a tet needs 4 vertices in 3D")
    if i == 1:
        return float(sum(tri_area(x[list(f)]) * perimeter(x[list(f)])
                         for f in _TET_FACES))
    if i == 2:
        return float(sum(tri_area(x[list(f)]) ** 1.5 for f in _TET_FACES))
    if i == 3:
        return lambda_edges(x, cell="tet") ** 1.5
    if i == 4:
        return float(sum(np.linalg.norm(x[a] - x[b]) ** 3 for a, b in _TET_PAIRS))
    if i == 5:
        return float(sum(tri_area(x[list(f)]) for f in _TET_FACES)) ** 1.5
    raise ValueError(f"lambda variant must be 1..5, got {i}")


def grad_lambda_variant(x, i):
    """Gradient of :func:`lambda_variant` with respect to each vertex."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4, 3):
        raise ValueError("a tet needs 4 vertices in 3D")
    g = np.zeros((4, 3))
    if i == 1:
        for f in _TET_FACES:
            pts = x[list(f)]
            a, p = tri_area(pts), perimeter(pts)
            g[list(f)] += p * grad_tri_area(pts) + a * grad_perimeter(pts)
        return g
    if i == 2:
        for f in _TET_FACES:
            pts = x[list(f)]
            g[list(f)] += 1.5 * math.sqrt(tri_area(pts)) * grad_tri_area(pts)
        return g
    if i == 3:
        s = lambda_edges(x, cell="tet")
        return 1.5 * math.sqrt(s) * 2.0 * (4.0 * x - x.sum(axis=0))
    if i == 4:
        for a, b in _TET_PAIRS:
            d = x[a] - x[b]
            n = np.linalg.norm(d)
            if n < _TINY:
                raise SingularityError("zero-length edge in cubed-edge energy")
            g[a] += 3.0 * n * d
            g[b] -= 3.0 * n * d
        return g
    if i == 5:
        total = 0.0
        ga = np.zeros((4, 3))
        for f in _TET_FACES:
            pts = x[list(f)]
            total += tri_area(pts)
            ga[list(f)] += grad_tri_area(pts)
        return 1.5 * math.sqrt(total) * ga
    raise ValueError(f"lambda variant must be 1..5, got {i}")


#: energy of the regular unit tet divided by its volume, per variant;
#: dividing lambda_i by this constant calibrates vol - lambda_i/c to
#: vanish on regular tetrahedra
C_LAMBDA = {i: lambda_variant(_REG_TET, i) / tet_volume(_REG_TET)
            for i in range(1, 6)}


def _signed_area(x, ref_normal=None):
    x = np.asarray(x, dtype=float)
    if x.shape[1] == 2:
        return polygon_area(x, signed=True)
    a = polygon_area(x)
    if ref_normal is not None and float(np.dot(polygon_normal(x), ref_normal)) < 0:
        return -a
    return a


def mean_ratio(x, ref_normal=None):
    """Mean ratio of a triangle (3 rows) or tetrahedron (4 rows).

    1 exactly on regular elements, negative when inverted. Triangle:
    area / (sqrt(3)/12 * sum of squared edges) = 4*sqrt(3)*area / sum of
    squared edges. Tetrahedron: 12 * (3|vol|)^(2/3) / sum of squared
    edges, with the sign of the volume. Orientation of surface triangles
    is resolved against ``ref_normal`` (unsigned if omitted).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 3:
        lam = lambda_edges(x)
        if lam < _TINY:
            raise SingularityError("degenerate triangle in mean ratio")
        return _signed_area(x, ref_normal) / (C_MR_TRI * lam)
    if x.shape == (4, 3):
        lam = lambda_edges(x, cell="tet")
        if lam < _TINY:
            raise SingularityError("degenerate tet in mean ratio")
        v = tet_volume(x)
        return math.copysign(MR_TET_COEF * (3.0 * abs(v)) ** (2.0 / 3.0) / lam, v)
    raise ValueError("mean ratio needs a triangle or a tetrahedron")


def iq2(x, ref_normal=None):
    """Isoperimetric quotient of a polygon: area / (c * perimeter^2).

    1 exactly on regular n-gons (with the matching n-gon constant),
    negative when inverted, at most 1 otherwise.
    """
    x = np.asarray(x, dtype=float)
    p = perimeter(x)
    if p < _TINY:
        raise SingularityError("degenerate polygon in iq2")
    return _signed_area(x, ref_normal) / (c_iq2(x.shape[0]) * p * p)


def iq3(x):
    """Isoperimetric quotient of a tetrahedron: vol / (c * area^(3/2))."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4, 3):
        raise ValueError("a tet needs 4 vertices in 3D")
    area = sum(tri_area(x[list(f)]) for f in _TET_FACES)
    if area < _TINY:
        raise SingularityError("degenerate tet in iq3")
    return tet_volume(x) / (C_IQ3_TET * area ** 1.5)


def q2_element(x, variant="perim", w=1.0, ref_normal=None):
    """Concave polygon objective: area - w * c * (negative term).

    ``variant="perim"`` subtracts w * c_iq2(n) * perimeter^2;
    ``variant="lambda"`` subtracts w * c_q2_lambda(n) * (sum of squared
    edges). With w = 1 the value is 0 exactly on regular n-gons and
    negative otherwise; the per-element weight w scales only the
    subtracted term, so raising w penalizes that element harder.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    a = _signed_area(x, ref_normal)
    if variant == "perim":
        return a - w * c_iq2(n) * perimeter(x) ** 2
    if variant == "lambda":
        return a - w * c_q2_lambda(n) * lambda_edges(x)
    raise ValueError(f"variant must be 'perim' or 'lambda', got {variant!r}")


def q3_element(x, lam=5, w=1.0):
    """Concave tetrahedron objective: vol - w * lambda_lam / c_lambda(lam).

    0 exactly on regular tets when w = 1; ``lam`` selects which
    :func:`lambda_variant` energy is subtracted.
    """
    return tet_volume(x) - w * lambda_variant(x, lam) / C_LAMBDA[lam]


# -- quality function selector ---------------------------------------------

class QualityKind(enum.Enum):
    """Mesh-level quality objectives and report measures."""

    MEAN_RATIO = "mr"
    SQRT_MEAN_RATIO = "sqrt-mr"
    IQ2 = "iq2"
    IQ3 = "iq3"
    Q2 = "q2"
    Q3 = "q3"
    LAMBDA_EDGES = "lambda-edges"
    LAMBDA1 = "lambda1"
    LAMBDA2 = "lambda2"
    LAMBDA3 = "lambda3"
    LAMBDA4 = "lambda4"
    LAMBDA5 = "lambda5"
    #: experimental: product of per-element iq2 values; optimized through
    #: its logarithm, only defined while every element is valid
    IQ2_PRODUCT = "iq2-product"

    @classmethod
    def from_name(cls, name):
        for k in cls:
            if k.value == name:
                return k
        raise ValueError(f"unknown quality kind {name!r}")

    @property
    def is_descent(self):
        """True for pure energies that are minimized rather than maximized."""
        return self in (QualityKind.LAMBDA_EDGES, QualityKind.LAMBDA1,
                        QualityKind.LAMBDA2, QualityKind.LAMBDA3,
                        QualityKind.LAMBDA4, QualityKind.LAMBDA5)


def ascent_sign(kind):
    """+1 for maximized objectives, -1 for minimized energies."""
    return -1.0 if kind.is_descent else 1.0


@dataclass
class QualityFn:
    """A quality kind plus per-element weights and options.

    Weights must be positive, one per element, defaulting to 1. For the
    Q2/Q3 objectives they scale the subtracted term inside each element
    value; for the ratio measures and energies they weight the
    mesh-level aggregation. ``variant`` picks the Q2 negative term and
    ``q3_lambda`` the energy subtracted by Q3.
    """

    kind: QualityKind
    weights: np.ndarray = None
    variant: str = "perim"
    q3_lambda: int = 5

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = QualityKind.from_name(self.kind)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(self.weights <= 0):
                raise ValueError("element weights must be positive")

    def weights_for(self, mesh):
        if self.weights is None:
            return np.ones(mesh.n_elements)
        if self.weights.shape != (mesh.n_elements,):
            raise ValueError("need one weight per element")
        return self.weights


def _as_fn(fn):
    if isinstance(fn, QualityFn):
        return fn
    return QualityFn(fn)


_POLY_KINDS = {QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO,
               QualityKind.IQ2, QualityKind.Q2, QualityKind.LAMBDA_EDGES,
               QualityKind.IQ2_PRODUCT}
_TET_KINDS = {QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO,
              QualityKind.IQ3, QualityKind.Q3, QualityKind.LAMBDA_EDGES,
              QualityKind.LAMBDA1, QualityKind.LAMBDA2, QualityKind.LAMBDA3,
              QualityKind.LAMBDA4, QualityKind.LAMBDA5}


def _check_kind(mesh, kind):
    if mesh.is_tet_mesh:
        if kind not in _TET_KINDS:
            raise MeshError(f"{kind.value} is not defined for tetrahedral meshes")
    else:
        if kind not in _POLY_KINDS:
            raise MeshError(f"{kind.value} is not defined for planar/surface meshes")
        if kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
            if any(e.kind != TRI for e in mesh.elements):
                raise MeshError("mean ratio needs an all-triangle mesh")


# -- vectorized polygon batches --------------------------------------------

def _first_bad(elem_ids, bad_rows):
    return int(elem_ids[np.nonzero(bad_rows)[0][0]])


def _poly_geometry(X, dim, refs):
    """Shared per-batch quantities for polygon elements."""
    E = X - np.roll(X, -1, axis=1)
    L2 = (E * E).sum(axis=2)
    L = np.sqrt(L2)
    perim = L.sum(axis=1)
    lam = L2.sum(axis=1)
    nxt = np.roll(X, -1, axis=1)
    if dim == 2:
        area = 0.5 * (X[..., 0] * nxt[..., 1] - X[..., 1] * nxt[..., 0]).sum(axis=1)
        sign = None
        nu_hat = None
    else:
        nu = np.cross(X, nxt).sum(axis=1)
        nn = np.linalg.norm(nu, axis=1)
        sign = np.where((nu * refs).sum(axis=1) >= 0, 1.0, -1.0)
        area = 0.5 * sign * nn
        with np.errstate(invalid="ignore", divide="ignore"):
            nu_hat = nu / np.where(nn < _TINY, 1.0, nn)[:, None]
        nu_hat[nn < _TINY] = np.nan
    return E, L, perim, lam, area, sign, nu_hat


def _poly_grad_area(X, dim, sign, nu_hat):
    d = np.roll(X, -1, axis=1) - np.roll(X, 1, axis=1)
    if dim == 2:
        return 0.5 * np.stack([d[..., 1], -d[..., 0]], axis=-1)
    return 0.5 * sign[:, None, None] * np.cross(d, nu_hat[:, None, :])


def _poly_grad_perim(E, L, elem_ids):
    if np.any(L < _TINY):
        raise SingularityError("zero-length edge in perimeter gradient",
                               element=_first_bad(elem_ids, (L < _TINY).any(axis=1)))
    u = E / L[:, :, None]
    return u - np.roll(u, 1, axis=1)


def _poly_values(kind, fn, X, dim, refs, w, elem_ids):
    n = X.shape[1]
    _, _, perim, lam, area, _, _ = _poly_geometry(X, dim, refs)
    if kind == QualityKind.Q2:
        if fn.variant == "perim":
            return area - w * c_iq2(n) * perim ** 2
        if fn.variant == "lambda":
            return area - w * c_q2_lambda(n) * lam
        raise ValueError(f"unknown q2 variant {fn.variant!r}")
    if kind in (QualityKind.IQ2, QualityKind.IQ2_PRODUCT):
        if np.any(perim < _TINY):
            raise SingularityError("degenerate polygon in iq2",
                                   element=_first_bad(elem_ids, perim < _TINY))
        return area / (c_iq2(n) * perim ** 2)
    if kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
        if np.any(lam < _TINY):
            raise SingularityError("degenerate triangle in mean ratio",
                                   element=_first_bad(elem_ids, lam < _TINY))
        mr = area / (C_MR_TRI * lam)
        if kind == QualityKind.MEAN_RATIO:
            return mr
        return np.copysign(np.sqrt(np.abs(mr)), mr)
    if kind == QualityKind.LAMBDA_EDGES:
        return 0.5 * c_elem(n) * w * lam
    raise MeshError(f"{kind.value} has no per-element polygon value")


def _poly_grads(kind, fn, X, dim, refs, w, elem_ids, include_area):
    n = X.shape[1]
    E, L, perim, lam, area, sign, nu_hat = _poly_geometry(X, dim, refs)
    if kind == QualityKind.LAMBDA_EDGES:
        gl = 2.0 * (E - np.roll(E, 1, axis=1))
        return 0.5 * c_elem(n) * w[:, None, None] * gl
    if kind == QualityKind.Q2 and fn.variant == "lambda":
        g = -w[:, None, None] * c_q2_lambda(n) * 2.0 * (E - np.roll(E, 1, axis=1))
        if include_area:
            g = g + _poly_grad_area(X, dim, sign, nu_hat)
        return g
    gp = _poly_grad_perim(E, L, elem_ids)
    if kind == QualityKind.Q2:
        g = -(w * c_iq2(n) * 2.0 * perim)[:, None, None] * gp
        if include_area:
            g = g + _poly_grad_area(X, dim, sign, nu_hat)
        return g
    ga = _poly_grad_area(X, dim, sign, nu_hat)
    if kind in (QualityKind.IQ2, QualityKind.IQ2_PRODUCT):
        if np.any(perim < _TINY):
            raise SingularityError("degenerate polygon in iq2 gradient",
                                   element=_first_bad(elem_ids, perim < _TINY))
        scale = 1.0 / (c_iq2(n) * perim ** 2)
        return scale[:, None, None] * (ga - (2.0 * area / perim)[:, None, None] * gp)
    if kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
        gl = 2.0 * (E - np.roll(E, 1, axis=1))
        scale = 1.0 / (C_MR_TRI * lam)
        gmr = scale[:, None, None] * (ga - (area / lam)[:, None, None] * gl)
        if kind == QualityKind.MEAN_RATIO:
            return gmr
        mr = area / (C_MR_TRI * lam)
        if np.any(np.abs(mr) < _TINY):
            raise SingularityError(
                "zero mean ratio has no square-root gradient",
                element=_first_bad(elem_ids, np.abs(mr) < _TINY))
        return gmr / (2.0 * np.sqrt(np.abs(mr)))[:, None, None]
    raise MeshError(f"{kind.value} has no polygon gradient")


# -- vectorized tet batches ------------------------------------------------

def _tet_geometry(X):
    d1, d2, d3 = X[:, 1] - X[:, 0], X[:, 2] - X[:, 0], X[:, 3] - X[:, 0]
    vol = np.einsum("ij,ij->i", np.cross(d1, d2), d3) / 6.0
    lam = np.zeros(len(X))
    for a, b in _TET_PAIRS:
        diff = X[:, a] - X[:, b]
        lam += (diff * diff).sum(axis=1)
    return vol, lam


def _tet_grad_vol(X):
    g = np.empty_like(X)
    g[:, 0] = np.cross(X[:, 2] - X[:, 3], X[:, 1] - X[:, 3])
    g[:, 1] = np.cross(X[:, 0] - X[:, 3], X[:, 2] - X[:, 3])
    g[:, 2] = np.cross(X[:, 1] - X[:, 3], X[:, 0] - X[:, 3])
    g[:, 3] = np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0])
    return g / 6.0


def _tet_faces_geometry(X, elem_ids):
    """Areas, perimeters and their gradients for all four faces.

    Returns (areas (m,4), perims (m,4), grad_area (m,4,4,3),
    grad_perim (m,4,4,3)) where the second axis indexes the face and the
    third the tet vertex the gradient refers to.
    """
    m = len(X)
    areas = np.empty((m, 4))
    perims = np.empty((m, 4))
    ga = np.zeros((m, 4, 4, 3))
    gp = np.zeros((m, 4, 4, 3))
    for fi, f in enumerate(_TET_FACES):
        P = X[:, list(f), :]
        nu = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        nn = np.linalg.norm(nu, axis=1)
        if np.any(nn < _TINY):
            raise SingularityError("degenerate tet face",
                                   element=_first_bad(elem_ids, nn < _TINY))
        areas[:, fi] = 0.5 * nn
        nu_hat = nu / nn[:, None]
        d = np.roll(P, -1, axis=1) - np.roll(P, 1, axis=1)
        gaf = 0.5 * np.cross(d, nu_hat[:, None, :])
        E = P - np.roll(P, -1, axis=1)
        L = np.linalg.norm(E, axis=2)
        if np.any(L < _TINY):
            raise SingularityError("zero-length tet edge",
                                   element=_first_bad(elem_ids, (L < _TINY).any(axis=1)))
        perims[:, fi] = L.sum(axis=1)
        u = E / L[:, :, None]
        gpf = u - np.roll(u, 1, axis=1)
        for j, vtx in enumerate(f):
            ga[:, fi, vtx] = gaf[:, j]
            gp[:, fi, vtx] = gpf[:, j]
    return areas, perims, ga, gp


def _tet_values(kind, fn, X, w, elem_ids):
    vol, lam = _tet_geometry(X)
    if kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
        if np.any(lam < _TINY):
            raise SingularityError("degenerate tet in mean ratio",
                                   element=_first_bad(elem_ids, lam < _TINY))
        mr = np.copysign(MR_TET_COEF * (3.0 * np.abs(vol)) ** (2.0 / 3.0) / lam, vol)
        if kind == QualityKind.MEAN_RATIO:
            return mr
        return np.copysign(np.sqrt(np.abs(mr)), mr)
    if kind == QualityKind.LAMBDA3:
        return lam ** 1.5
    if kind == QualityKind.LAMBDA4:
        val = np.zeros(len(X))
        for a, b in _TET_PAIRS:
            val += np.linalg.norm(X[:, a] - X[:, b], axis=1) ** 3
        return val
    areas, perims, _, _ = _tet_faces_geometry(X, elem_ids)
    if kind == QualityKind.IQ3:
        return vol / (C_IQ3_TET * areas.sum(axis=1) ** 1.5)
    if kind == QualityKind.Q3:
        li = fn.q3_lambda
        return vol - w * _tet_values(_Q3_LAMBDA_KIND[li], fn, X, w, elem_ids) / C_LAMBDA[li]
    if kind == QualityKind.LAMBDA1:
        return (areas * perims).sum(axis=1)
    if kind == QualityKind.LAMBDA2:
        return (areas ** 1.5).sum(axis=1)
    if kind == QualityKind.LAMBDA5:
        return areas.sum(axis=1) ** 1.5
    raise MeshError(f"{kind.value} has no per-element tet value")


_Q3_LAMBDA_KIND = {1: QualityKind.LAMBDA1, 2: QualityKind.LAMBDA2,
                   3: QualityKind.LAMBDA3, 4: QualityKind.LAMBDA4,
                   5: QualityKind.LAMBDA5}


def _tet_grads(kind, fn, X, w, elem_ids, include_vol):
    vol, lam = _tet_geometry(X)
    if kind == QualityKind.LAMBDA3:
        gl = 2.0 * (4.0 * X - X.sum(axis=1, keepdims=True))
        return 1.5 * np.sqrt(lam)[:, None, None] * gl
    if kind == QualityKind.LAMBDA4:
        g = np.zeros_like(X)
        for a, b in _TET_PAIRS:
            d = X[:, a] - X[:, b]
            n = np.linalg.norm(d, axis=1)
            if np.any(n < _TINY):
                raise SingularityError("zero-length tet edge",
                                       element=_first_bad(elem_ids, n < _TINY))
            g[:, a] += 3.0 * n[:, None] * d
            g[:, b] -= 3.0 * n[:, None] * d
        return g
    if kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
        if np.any(np.abs(vol) < _TINY) or np.any(lam < _TINY):
            bad = (np.abs(vol) < _TINY) | (lam < _TINY)
            raise SingularityError("flat tet has no mean-ratio gradient",
                                   element=_first_bad(elem_ids, bad))
        gv = _tet_grad_vol(X)
        gl = 2.0 * (4.0 * X - X.sum(axis=1, keepdims=True))
        coef = MR_TET_COEF * 3.0 ** (2.0 / 3.0)
        mr = np.copysign(coef * np.abs(vol) ** (2.0 / 3.0) / lam, vol)
        gmr = (coef * (2.0 / 3.0) * np.abs(vol) ** (-1.0 / 3.0) / lam)[:, None, None] * gv \
            - (mr / lam)[:, None, None] * gl
        if kind == QualityKind.MEAN_RATIO:
            return gmr
        return gmr / (2.0 * np.sqrt(np.abs(mr)))[:, None, None]
    areas, perims, ga, gp = _tet_faces_geometry(X, elem_ids)
    if kind == QualityKind.LAMBDA1:
        return (perims[:, :, None, None] * ga + areas[:, :, None, None] * gp).sum(axis=1)
    if kind == QualityKind.LAMBDA2:
        return 1.5 * (np.sqrt(areas)[:, :, None, None] * ga).sum(axis=1)
    if kind == QualityKind.LAMBDA5:
        return 1.5 * np.sqrt(areas.sum(axis=1))[:, None, None] * ga.sum(axis=1)
    if kind == QualityKind.IQ3:
        at = areas.sum(axis=1)
        gat = ga.sum(axis=1)
        gv = _tet_grad_vol(X)
        scale = 1.0 / (C_IQ3_TET * at ** 1.5)
        return scale[:, None, None] * (gv - (1.5 * vol / at)[:, None, None] * gat)
    if kind == QualityKind.Q3:
        li = fn.q3_lambda
        g = -(w[:, None, None] / C_LAMBDA[li]) * _tet_grads(
            _Q3_LAMBDA_KIND[li], fn, X, w, elem_ids, include_vol)
        if include_vol:
            g = g + _tet_grad_vol(X)
        return g
    raise MeshError(f"{kind.value} has no tet gradient")


# -- mesh-level evaluation -------------------------------------------------

def element_values(mesh, fn):
    """Per-element quality values for every element, in element order.

    Q2/Q3 values include their per-element weights (the weight is part
    of the objective); ratio and energy weights only enter the
    mesh-level aggregation.
    """
    fn = _as_fn(fn)
    _check_kind(mesh, fn.kind)
    if fn.kind == QualityKind.LAMBDA_EDGES and mesh.is_tet_mesh:
        raise MeshError("the tet edge energy is not a per-element quantity")
    w = fn.weights_for(mesh)
    out = np.empty(mesh.n_elements)
    for (kind, _), (ids, verts) in mesh.batches().items():
        X = mesh.vertices[verts]
        refs = mesh.ref_normals[ids] if mesh.ref_normals is not None else None
        if kind == TET:
            out[ids] = _tet_values(fn.kind, fn, X, w[ids], ids)
        else:
            out[ids] = _poly_values(fn.kind, fn, X, mesh.dim, refs, w[ids], ids)
    return out


def _tet_edge_energy(mesh):
    idx = np.array(mesh.edges(), dtype=int)
    d = mesh.vertices[idx[:, 0]] - mesh.vertices[idx[:, 1]]
    return float((d * d).sum()), idx


def mesh_quality(mesh, fn):
    """Total mesh quality under ``fn``.

    Aggregation by kind: weighted mean for the mean-ratio measures,
    product for the experimental iq2 product, plain sum for Q2/Q3 and
    the polygon edge energy (their weights already sit inside the
    element values), weighted sum for everything else. The tetrahedral
    edge energy sums squared lengths over unique edges and ignores
    element weights (it has no per-element split).
    """
    fn = _as_fn(fn)
    _check_kind(mesh, fn.kind)
    if fn.kind == QualityKind.LAMBDA_EDGES and mesh.is_tet_mesh:
        return _tet_edge_energy(mesh)[0]
    vals = element_values(mesh, fn)
    if fn.kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
        w = fn.weights_for(mesh)
        return float((w * vals).sum() / w.sum())
    if fn.kind == QualityKind.IQ2_PRODUCT:
        return float(np.prod(vals))
    if fn.kind in (QualityKind.Q2, QualityKind.Q3, QualityKind.LAMBDA_EDGES):
        return float(vals.sum())
    w = fn.weights_for(mesh)
    return float((w * vals).sum())


def _movable_boundary(mesh, movable):
    bmask = mesh._cached("boundary_mask", mesh.classify_boundary)
    return bool(np.any(movable & bmask))


def grad_mesh_quality(mesh, fn, movable=None, normalize_elements=False):
    """Gradient of :func:`mesh_quality` with respect to vertex coordinates.

    Rows of vertices outside ``movable`` (default: the non-fixed ones)
    are zeroed. When no movable vertex lies on the boundary, the terms
    that cancel identically over interior vertices are skipped: the
    per-element signed areas of a planar Q2 (the total area is fixed by
    the boundary) and the volumes of Q3 (likewise). They are included
    automatically as soon as boundary vertices may move.

    ``normalize_elements=True`` divides each element's gradient block by
    the square root of its norm before assembly, giving the
    scale-balanced direction used by some ascent configurations.
    """
    fn = _as_fn(fn)
    _check_kind(mesh, fn.kind)
    if movable is None:
        movable = ~mesh.fixed
    G = np.zeros_like(mesh.vertices)
    if fn.kind == QualityKind.LAMBDA_EDGES and mesh.is_tet_mesh:
        if normalize_elements:
            raise ValueError("the tet edge energy has no per-element direction")
        _, idx = _tet_edge_energy(mesh)
        d = mesh.vertices[idx[:, 0]] - mesh.vertices[idx[:, 1]]
        np.add.at(G, idx[:, 0], 2.0 * d)
        np.add.at(G, idx[:, 1], -2.0 * d)
        G[~movable] = 0.0
        return G
    w = fn.weights_for(mesh)
    boundary_free = _movable_boundary(mesh, movable)
    include_const = boundary_free
    prod_vals = None
    if fn.kind == QualityKind.IQ2_PRODUCT:
        prod_vals = element_values(mesh, fn)
        if np.any(prod_vals <= 0):
            raise SingularityError(
                "iq2 product gradient needs all elements valid",
                element=int(np.argmin(prod_vals)))
    for (kind, _), (ids, verts) in mesh.batches().items():
        X = mesh.vertices[verts]
        refs = mesh.ref_normals[ids] if mesh.ref_normals is not None else None
        if kind == TET:
            blocks = _tet_grads(fn.kind, fn, X, w[ids], ids, include_const)
        else:
            include_area = include_const or mesh.dim == 3
            blocks = _poly_grads(fn.kind, fn, X, mesh.dim, refs, w[ids], ids,
                                 include_area)
        if fn.kind in (QualityKind.MEAN_RATIO, QualityKind.SQRT_MEAN_RATIO):
            blocks = blocks * (w[ids] / w.sum())[:, None, None]
        elif fn.kind == QualityKind.IQ2_PRODUCT:
            total = float(np.prod(prod_vals))
            blocks = blocks * (total / prod_vals[ids])[:, None, None]
        elif fn.kind not in (QualityKind.Q2, QualityKind.Q3,
                             QualityKind.LAMBDA_EDGES):
            blocks = blocks * w[ids][:, None, None]
        if normalize_elements:
            norms = np.sqrt((blocks * blocks).sum(axis=(1, 2)))
            scale = np.where(norms > _TINY, 1.0 / np.sqrt(norms), 0.0)
            blocks = blocks * scale[:, None, None]
        np.add.at(G, verts.ravel(), blocks.reshape(-1, mesh.dim))
    G[~movable] = 0.0
    return G


def lambda_edges_diagonal(mesh, fn=None):
    """Per-vertex diagonal of the edge-energy Hessian.

    The edge energy is quadratic, so this diagonal is constant in the
    coordinates: 2 times the (element-constant weighted) number of edge
    copies at each vertex. Dividing the gradient by it gives the
    per-vertex exact-minimization step whose full update reproduces the
    simultaneous Laplacian sweep.
    """
    fn = _as_fn(fn) if fn is not None else QualityFn(QualityKind.LAMBDA_EDGES)
    if fn.kind != QualityKind.LAMBDA_EDGES:
        raise ValueError("the diagonal is defined for the edge energy only")
    diag = np.zeros(mesh.n_vertices)
    if mesh.is_tet_mesh:
        for a, b in mesh.edges():
            diag[a] += 2.0
            diag[b] += 2.0
        return diag
    w = fn.weights_for(mesh)
    for i, e in enumerate(mesh.elements):
        diag[list(e.verts)] += 2.0 * c_elem(e.n_verts) * w[i]
    return diag


# -- reporting -------------------------------------------------------------

@dataclass
class QualityReport:
    """Summary statistics of a per-element quality measure."""

    measure: str
    per_element: np.ndarray
    average: float
    min: float
    max: float
    invalid_count: int
    counted: int = 0

    def to_dict(self):
        return {
            "measure": self.measure,
            "average": self.average,
            "min": self.min,
            "max": self.max,
            "invalid_count": self.invalid_count,
        }


def quality_report(mesh, fn):
    """Evaluate ``fn`` per element and summarize.

    ``invalid_count`` counts elements whose signed value is <= 0, which
    for the ratio measures means inverted or degenerate orientation.
    """
    fn = _as_fn(fn)
    vals = element_values(mesh, fn)
    return QualityReport(
        measure=fn.kind.value,
        per_element=vals,
        average=float(vals.mean()) if len(vals) else float("nan"),
        min=float(vals.min()) if len(vals) else float("nan"),
        max=float(vals.max()) if len(vals) else float("nan"),
        invalid_count=int((vals <= 0).sum()),
        counted=len(vals),
    )
