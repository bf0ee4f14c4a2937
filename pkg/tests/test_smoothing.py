"""Smoothing sweeps, line-search ascent, projections, adaptive weights."""

import numpy as np
import pytest

import meshsmooth as ms
from meshsmooth import QualityFn, QualityKind, SmoothConfig
from meshsmooth.errors import MeshError


# ---------------------------------------------------------------------------
# projection geometries


def test_fixed_point_projection():
    g = ms.FixedPoint([1.0, 2.0])
    p = g.project([5.0, -3.0])
    assert np.array_equal(p, [1.0, 2.0])
    p[0] = 99.0  # the returned array is a copy
    assert np.array_equal(g.project([0.0, 0.0]), [1.0, 2.0])


def test_circle_projection():
    g = ms.ImplicitCircle([1.0, 1.0], 2.0)
    p = g.project([5.0, 1.0])
    assert np.allclose(p, [3.0, 1.0])
    assert np.allclose(g.project(p), p)  # idempotent
    # the center projects to angle zero
    assert np.allclose(g.project([1.0, 1.0]), [3.0, 1.0])


def test_sphere_projection():
    g = ms.ImplicitSphere([0.0, 0.0, 0.0], 1.0)
    p = g.project([0.0, 0.0, 3.0])
    assert np.allclose(p, [0.0, 0.0, 1.0])
    assert np.allclose(np.linalg.norm(g.project([0.2, -0.4, 0.1])), 1.0)


def test_polyline_projection():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    g = ms.Polyline2D(square, closed=True)
    assert np.allclose(g.project([0.5, -1.0]), [0.5, 0.0])
    assert np.allclose(g.project([2.0, 2.0]), [1.0, 1.0])  # corner clamp
    # the center is equidistant from all four sides: lowest segment wins
    assert np.allclose(g.project([0.5, 0.5]), [0.5, 0.0])
    p = g.project([0.25, 0.25])
    assert np.allclose(g.project(p), p)


def test_polyline_open_vs_closed():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    open_line = ms.Polyline2D(pts, closed=False)
    closed_line = ms.Polyline2D(pts, closed=True)
    probe = [0.2, 0.9]
    # the closing segment passes near the probe; without it the nearest
    # point lies on one of the two explicit segments
    assert not np.allclose(open_line.project(probe), closed_line.project(probe))
    with pytest.raises(ValueError):
        ms.Polyline2D(np.zeros((1, 2)))


def test_project_vertices(square8):
    m = square8
    corner = int(np.argmin(np.linalg.norm(m.vertices, axis=1)))
    m.tag_geometry(ms.FixedPoint([-1.0, -1.0]), [corner])
    worst = ms.project_vertices(m, movable=np.ones(m.n_vertices, dtype=bool))
    assert np.array_equal(m.vertices[corner], [-1.0, -1.0])
    assert worst == pytest.approx(np.sqrt(2.0))
    # vertices outside the movable mask stay put
    m.tag_geometry(ms.FixedPoint([5.0, 5.0]), [corner])
    ms.project_vertices(m, movable=np.zeros(m.n_vertices, dtype=bool))
    assert np.array_equal(m.vertices[corner], [-1.0, -1.0])


# ---------------------------------------------------------------------------
# Laplacian sweeps


def test_laplace_step_single_vertex_is_star_mean(bumpy_square):
    m = bumpy_square
    v = int(np.nonzero(~m.fixed)[0][0])
    star = m.vertex_star(v)
    expect = m.vertices[star].mean(axis=0)
    movable = np.zeros(m.n_vertices, dtype=bool)
    movable[v] = True
    disp = ms.laplace_step(m, movable=movable)
    assert np.allclose(m.vertices[v], expect, atol=1e-15)
    assert disp > 0.0


def test_laplace_jacobi_uses_old_coordinates(bumpy_square):
    gs = bumpy_square.copy()
    ja = bumpy_square.copy()
    base = bumpy_square.vertices.copy()
    ms.laplace_step(gs)
    ms.laplace_step(ja, jacobi=True)
    # jacobi: every update is the mean of the original neighbours
    for v in np.nonzero(~ja.fixed)[0]:
        star = ja.vertex_star(v)
        assert np.allclose(ja.vertices[v], base[star].mean(axis=0), atol=1e-15)
    # sequential sweeps see already-updated neighbours, so they differ
    assert not np.allclose(gs.vertices, ja.vertices)


def test_laplace_converges_to_star_means(bumpy_square):
    res = ms.smooth(bumpy_square, SmoothConfig(method="laplace", max_iters=5000,
                                               conv_tol=1e-12))
    assert res.converged
    assert res.method == "laplace"
    assert res.iterations == len(res.trace)
    for v in np.nonzero(~bumpy_square.fixed)[0]:
        star = bumpy_square.vertex_star(v)
        assert np.allclose(bumpy_square.vertices[v],
                           bumpy_square.vertices[star].mean(axis=0), atol=1e-9)
    # the recorded edge energy never increases
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))


def test_weighted_laplace_matches_plain_on_triangles(bumpy_square):
    a = bumpy_square.copy()
    b = bumpy_square.copy()
    ms.laplace_step(a)
    ms.laplace_weighted_step(b)
    assert np.array_equal(a.vertices, b.vertices)  # bitwise, not just close


def test_weighted_laplace_target(mixed_mesh):
    m = ms.perturbed(mixed_mesh, 0.2, seed=21)
    # pick a free vertex bordering both quads and triangles
    votes = {}
    for v in np.nonzero(~m.fixed)[0]:
        kinds = {m.elements[e].kind for e in m.vertex_elements(v)}
        if kinds == {ms.TRI, ms.QUAD}:
            votes[v] = kinds
    v = min(votes)
    star = m.vertex_star(v)
    em = m.edge_elements()
    w = np.array([
        sum(ms.c_elem(m.elements[e].n_verts) for e in em[tuple(sorted((v, u)))])
        for u in star
    ])
    expect = (w[:, None] * m.vertices[star]).sum(axis=0) / w.sum()
    movable = np.zeros(m.n_vertices, dtype=bool)
    movable[v] = True
    ms.laplace_weighted_step(m, movable=movable)
    assert np.allclose(m.vertices[v], expect, atol=1e-14)


def test_weighted_laplace_rejects_tets(ball5):
    with pytest.raises(MeshError):
        ms.laplace_weighted_step(ball5.copy())


# ---------------------------------------------------------------------------
# gradient ascent


def test_scale_invariant_direction():
    g = np.array([[3.0, 4.0], [0.0, 0.0]])
    d = ms.scale_invariant_direction(g)
    assert np.linalg.norm(d) == pytest.approx(np.sqrt(np.linalg.norm(g)))
    assert np.array_equal(ms.scale_invariant_direction(np.zeros((2, 2))),
                          np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ms.scale_invariant_direction(g, mode="per_vertex")


def test_q2_ascent_monotone_trace(bumpy_square):
    cfg = SmoothConfig(method="gradient-ascent",
                       quality=QualityFn(QualityKind.Q2),
                       max_iters=2000, conv_tol=1e-10)
    res = ms.smooth(bumpy_square, cfg)
    assert res.converged
    assert res.method == "q2"
    assert all(b >= a - 1e-12 for a, b in zip(res.trace, res.trace[1:]))
    assert res.final_quality == res.trace[-1]
    assert res.wall_ms > 0.0


def test_energy_descent_monotone(bumpy_square):
    cfg = SmoothConfig(method="gradient-ascent",
                       quality=QualityFn(QualityKind.LAMBDA_EDGES),
                       max_iters=500, conv_tol=1e-8)
    res = ms.smooth(bumpy_square, cfg)
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))


def test_exhausted_line_search_reports_stall(bumpy_square):
    # a sufficient-increase margin no step can reach exhausts the search
    # immediately and the driver stops without claiming convergence
    cfg = SmoothConfig(method="gradient-ascent",
                       quality=QualityFn(QualityKind.Q2),
                       max_iters=50, ls_slope=1e6)
    res = ms.smooth(bumpy_square, cfg)
    assert not res.converged
    assert res.iterations == 1


def test_unreachable_tolerance_hits_iteration_cap(bumpy_square):
    cfg = SmoothConfig(method="gradient-ascent",
                       quality=QualityFn(QualityKind.LAMBDA_EDGES),
                       max_iters=40, conv_tol=0.0)
    res = ms.smooth(bumpy_square, cfg)
    assert not res.converged
    assert res.iterations == 40
    # ties are accepted, so the energy still never increases
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))


def test_normalize_modes_improve(bumpy_square):
    for mode in ("global", "per_element"):
        m = bumpy_square.copy()
        fn = QualityFn(QualityKind.Q2)
        before = ms.mesh_quality(m, fn)
        cfg = SmoothConfig(method="gradient-ascent", quality=fn,
                           max_iters=50, normalize=mode)
        ms.smooth(m, cfg)
        assert ms.mesh_quality(m, fn) > before
    with pytest.raises(ValueError):
        ms.gradient_ascent_step(
            bumpy_square, QualityFn(QualityKind.Q2),
            SmoothConfig(method="gradient-ascent", normalize="largest"))


def test_precondition_validation(bumpy_square):
    with pytest.raises(ValueError):
        ms.gradient_ascent_step(
            bumpy_square, QualityFn(QualityKind.Q2),
            SmoothConfig(precondition=True))
    with pytest.raises(ValueError):
        ms.gradient_ascent_step(
            bumpy_square, QualityFn(QualityKind.LAMBDA_EDGES),
            SmoothConfig(precondition=True, normalize="global"))


def test_preconditioned_energy_descent_matches_jacobi_laplace(bumpy_square):
    # the diagonally preconditioned energy step is the simultaneous
    # Laplacian update, so both drivers settle on the same coordinates
    grad = bumpy_square.copy()
    lap = bumpy_square.copy()
    ms.smooth(grad, SmoothConfig(method="gradient-ascent",
                                 quality=QualityFn(QualityKind.LAMBDA_EDGES),
                                 precondition=True, max_iters=5000,
                                 conv_tol=1e-13))
    ms.smooth(lap, SmoothConfig(method="laplace", jacobi=True,
                                max_iters=20000, conv_tol=1e-13))
    assert np.abs(grad.vertices - lap.vertices).max() < 1e-8


def test_smooth_config_validation(bumpy_square):
    with pytest.raises(ValueError):
        ms.smooth(bumpy_square, SmoothConfig(method="simulated-annealing"))
    with pytest.raises(ValueError):
        ms.smooth(bumpy_square, SmoothConfig(method="gradient-ascent"))
    with pytest.raises(ValueError):  # adaptive needs a Q2 objective
        ms.smooth(bumpy_square, SmoothConfig(method="laplace", adaptive=True))
    with pytest.raises(ValueError):
        ms.smooth(bumpy_square, SmoothConfig(
            method="gradient-ascent", quality=QualityFn(QualityKind.IQ2),
            adaptive=True))


# ---------------------------------------------------------------------------
# adaptive weights


def test_adaptive_weights_mean_one(bumpy_square, rng):
    w0 = rng.uniform(0.5, 2.0, bumpy_square.n_elements)
    fn = QualityFn(QualityKind.Q2, weights=w0)
    before = bumpy_square.vertices.copy()
    w = ms.adaptive_weights(bumpy_square, fn)
    assert w.mean() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w > 0)
    # probing restores the coordinates and leaves fn untouched
    assert np.array_equal(bumpy_square.vertices, before)
    assert np.array_equal(fn.weights, w0)


def test_adaptive_weights_selective_shrink(bumpy_square):
    fn = QualityFn(QualityKind.Q2)
    # floor 0: no element counts as poor, weights stay exactly 1
    w = ms.adaptive_weights(bumpy_square, fn, quality_floor=0.0)
    assert np.array_equal(w, np.ones(bumpy_square.n_elements))
    # floor 1 and no improvement threshold: every improving element
    # shrinks, and renormalization pushes weight onto the stuck ones
    w = ms.adaptive_weights(bumpy_square, fn, quality_floor=1.0,
                            improve_tol=-np.inf)
    assert w.mean() == pytest.approx(1.0, abs=1e-12)
    values = np.unique(w)
    assert len(values) <= 2
    if len(values) == 2:
        assert values[0] / values[1] == pytest.approx(0.99, rel=1e-12)


def test_adaptive_smoothing_runs(bumpy_square):
    fn = QualityFn(QualityKind.Q2)
    before = ms.mesh_quality(bumpy_square, QualityFn(QualityKind.IQ2))
    cfg = SmoothConfig(method="gradient-ascent", quality=fn, adaptive=True,
                       max_iters=200, conv_tol=1e-8)
    res = ms.smooth(bumpy_square, cfg)
    assert res.iterations > 0
    assert fn.weights is not None
    assert fn.weights.mean() == pytest.approx(1.0, abs=1e-12)
    assert ms.mesh_quality(bumpy_square, QualityFn(QualityKind.IQ2)) > before


# ---------------------------------------------------------------------------
# smoothing with boundary projection


@pytest.mark.parametrize("jacobi", [False, True])
def test_smooth_with_circle_projection(jacobi):
    m = ms.disk_tri(3)
    boundary = np.nonzero(m.fixed)[0]
    # pull the rim off the circle, then let it slide back while smoothing
    rng = np.random.default_rng(17)
    m.vertices[boundary] *= rng.uniform(0.9, 1.1, (len(boundary), 1))
    m.tag_geometry(ms.ImplicitCircle([0.0, 0.0], 1.0))
    res = ms.smooth(m, SmoothConfig(method="laplace", jacobi=jacobi,
                                    project=True, max_iters=5000,
                                    conv_tol=1e-10))
    assert res.converged
    radii = np.linalg.norm(m.vertices[boundary], axis=1)
    assert np.abs(radii - 1.0).max() < 1e-9
    assert ms.quality_report(m, QualityKind.MEAN_RATIO).min > 0.9


def test_projected_sweep_net_displacement():
    # a vertex pulled inward and snapped back to where it started counts
    # as stationary; single triangle fan around a tagged rim vertex
    m = ms.disk_tri(2)
    m.tag_geometry(ms.ImplicitCircle([0.0, 0.0], 1.0))
    res = ms.smooth(m, SmoothConfig(method="laplace", project=True,
                                    max_iters=4000, conv_tol=1e-10))
    assert res.converged
    assert np.abs(np.linalg.norm(m.vertices[m.fixed], axis=1) - 1.0).max() < 1e-9
