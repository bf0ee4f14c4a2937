"""Estimator-style wrappers around the smoothing and repair drivers.

These follow the scikit-learn convention: all configuration lives in
``__init__`` keyword arguments (inspectable through ``get_params`` /
settable through ``set_params``), ``fit`` validates the input, and
``transform`` returns an improved copy of the mesh, leaving the input
untouched. Diagnostics of the last ``transform`` are exposed as
trailing-underscore attributes.

The functional interfaces (:func:`meshsmooth.smooth`,
:func:`meshsmooth.remove_bad_elements`) do the same work in place; the
wrappers exist so meshes can ride inside scikit-learn pipelines and
parameter searches.
"""

from sklearn.base import BaseEstimator, TransformerMixin

from .mesh import check_mesh
from .quality import QualityFn
from .smoothing import SmoothConfig, smooth
from .topology import remove_bad_elements


class _MeshTransformer(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing; subclasses provide ``_run``."""

    def fit(self, mesh, y=None):
        """Validate the mesh; no state is learned."""
        check_mesh(mesh)
        self.n_features_in_ = mesh.dim
        return self

    def transform(self, mesh):
        """Return an improved copy of ``mesh``."""
        check_mesh(mesh)
        out = mesh.copy()
        self._run(out)
        return out

    def fit_transform(self, mesh, y=None, **fit_params):
        return self.fit(mesh, y).transform(mesh)


class LaplacianSmoother(_MeshTransformer):
    """Laplacian smoothing as a transformer.

    Parameters mirror :class:`meshsmooth.SmoothConfig`: ``weighted``
    switches to element-type weights (planar/surface meshes only),
    ``jacobi`` to simultaneous updates, ``project`` slides tagged
    vertices along their geometry. After ``transform``: ``n_iter_``,
    ``converged_``, ``trace_`` (edge energy per sweep) and
    ``final_energy_``.
    """

    def __init__(self, weighted=False, max_iters=200, conv_tol=None,
                 jacobi=False, project=False):
        self.weighted = weighted
        self.max_iters = max_iters
        self.conv_tol = conv_tol
        self.jacobi = jacobi
        self.project = project

    def _run(self, mesh):
        cfg = SmoothConfig(
            method="laplace-weighted" if self.weighted else "laplace",
            max_iters=self.max_iters, conv_tol=self.conv_tol,
            jacobi=self.jacobi, project=self.project)
        res = smooth(mesh, cfg)
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.trace_ = res.trace
        self.final_energy_ = res.final_quality


class QualitySmoother(_MeshTransformer):
    """Gradient-flow smoothing of a mesh quality objective.

    ``objective`` is a measure name (``"q2"``, ``"q3"``, ``"mr"``,
    ``"sqrt-mr"``, ``"lambda1"`` .. ``"lambda5"``, ...) or a
    :class:`meshsmooth.QualityFn`; ratio measures are maximized, energy
    measures minimized. ``normalize`` (``None``, ``"global"`` or
    ``"per_element"``) applies scale-invariant step rescaling, and
    ``adaptive_weights`` re-derives Q2 element weights every iteration.
    After ``transform``: ``n_iter_``, ``converged_``, ``trace_``
    (objective per step), ``final_quality_``.
    """

    def __init__(self, objective="q2", max_iters=200, conv_tol=None,
                 step_rho=1.0, ls_shrink=0.5, ls_slope=1e-4, normalize=None,
                 project=False, adaptive_weights=False):
        self.objective = objective
        self.max_iters = max_iters
        self.conv_tol = conv_tol
        self.step_rho = step_rho
        self.ls_shrink = ls_shrink
        self.ls_slope = ls_slope
        self.normalize = normalize
        self.project = project
        self.adaptive_weights = adaptive_weights

    def _run(self, mesh):
        fn = (self.objective if isinstance(self.objective, QualityFn)
              else QualityFn(self.objective))
        cfg = SmoothConfig(
            method="gradient-ascent", quality=fn, max_iters=self.max_iters,
            conv_tol=self.conv_tol, step_rho=self.step_rho,
            ls_shrink=self.ls_shrink, ls_slope=self.ls_slope,
            normalize=self.normalize, project=self.project,
            adaptive=self.adaptive_weights)
        res = smooth(mesh, cfg)
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.trace_ = res.trace
        self.final_quality_ = res.final_quality


class BadElementRemover(_MeshTransformer):
    """Collapse-and-smooth repair loop as a transformer.

    Alternates quality smoothing with edge collapses until every
    triangle's isoperimetric quotient reaches ``threshold``. After
    ``transform``: ``n_passes_``, ``collapsed_``, ``success_``,
    ``log_`` (the :class:`meshsmooth.RemovalLog`).
    """

    def __init__(self, threshold=0.6, max_passes=100, smoother_iters=2000):
        self.threshold = threshold
        self.max_passes = max_passes
        self.smoother_iters = smoother_iters

    def _run(self, mesh):
        cfg = SmoothConfig(method="gradient-ascent", quality=QualityFn("q2"),
                           max_iters=self.smoother_iters)
        log = remove_bad_elements(mesh, threshold=self.threshold,
                                  smooth_cfg=cfg, max_passes=self.max_passes)
        self.n_passes_ = log.n_passes
        self.collapsed_ = log.collapsed_total
        self.success_ = log.success
        self.log_ = log
