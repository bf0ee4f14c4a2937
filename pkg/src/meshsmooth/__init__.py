"""Mesh quality improvement: measures, smoothing, and local repair.

The package revolves around one observation: Laplacian smoothing is the
gradient descent of the squared-edge-length energy, so the same descent
machinery drives the classical sweep, its element-type weighted variant,
and ascent/descent of explicit quality measures (mean ratio,
isoperimetric quotients, area- and volume-penalized energies) on planar,
surface and tetrahedral meshes. Local connectivity edits (edge collapse,
edge swap, vertex split) and a collapse-and-smooth repair loop handle
what smoothing alone cannot.

Quick start::

    from meshsmooth import generate, perturbed, smooth, SmoothConfig, QualityFn

    mesh = perturbed(generate("square_tri", 8), sigma=0.3, seed=1)
    result = smooth(mesh, SmoothConfig(method="gradient-ascent",
                                       quality=QualityFn("q2")))
"""

from .errors import (MeshError, MeshFileError, OperationRejected,
                     SingularityError, TopologyError)
from .estimators import BadElementRemover, LaplacianSmoother, QualitySmoother
from .fileio import load_mesh, save_mesh
from .generators import (ball_tet, disk_tri, generate, perturbed,
                         square_mixed, square_tri)
from .geometry import (grad_area_boundary_node, grad_norm_pow,
                       grad_perimeter, grad_polygon_area, grad_tet_volume,
                       grad_tri_area, grad_vol_boundary_node, perimeter,
                       polygon_area, polygon_normal, tet_volume, tri_area)
from .mesh import (POLY, QUAD, TET, TRI, Element, Mesh, check_mesh)
from .quality import (QualityFn, QualityKind, QualityReport, ascent_sign,
                      c_elem, c_iq2, c_q2_lambda, element_values,
                      grad_lambda_variant, grad_mesh_quality, iq2, iq3,
                      lambda_edges, lambda_edges_diagonal, lambda_variant,
                      mean_ratio, mesh_quality,
                      q2_element, q3_element, quality_report)
from .smoothing import (FixedPoint, Geometry, ImplicitCircle, ImplicitSphere,
                        Polyline2D, SmoothConfig, SmoothResult,
                        adaptive_weights, gradient_ascent_step, laplace_step,
                        laplace_weighted_step, project_vertices,
                        scale_invariant_direction, smooth)
from .svg import render_svg
from .topology import (RemovalLog, can_collapse, edge_collapse, edge_swap,
                       remove_bad_elements, vertex_split)

__version__ = "0.1.0"

__all__ = [
    "BadElementRemover", "Element", "FixedPoint", "Geometry",
    "ImplicitCircle", "ImplicitSphere", "LaplacianSmoother", "Mesh",
    "MeshError", "MeshFileError", "OperationRejected", "POLY", "Polyline2D",
    "QUAD", "QualityFn", "QualityKind", "QualityReport", "QualitySmoother",
    "RemovalLog", "SingularityError", "SmoothConfig", "SmoothResult", "TET",
    "TRI", "TopologyError", "adaptive_weights", "ascent_sign", "ball_tet",
    "c_elem", "c_iq2", "c_q2_lambda", "can_collapse", "check_mesh",
    "disk_tri", "edge_collapse", "edge_swap", "element_values", "generate",
    "grad_area_boundary_node", "grad_lambda_variant", "grad_mesh_quality",
    "grad_norm_pow", "grad_perimeter", "grad_polygon_area", "grad_tet_volume",
    "grad_tri_area", "grad_vol_boundary_node", "gradient_ascent_step", "iq2",
    "iq3", "lambda_edges", "lambda_edges_diagonal", "lambda_variant",
    "laplace_step",
    "laplace_weighted_step", "load_mesh", "mean_ratio", "mesh_quality",
    "perimeter", "perturbed", "polygon_area", "polygon_normal",
    "project_vertices", "q2_element", "q3_element", "quality_report",
    "remove_bad_elements", "render_svg", "save_mesh",
    "scale_invariant_direction", "smooth", "square_mixed", "square_tri",
    "tet_volume", "tri_area", "vertex_split",
]
