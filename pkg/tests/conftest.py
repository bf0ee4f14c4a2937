"""Shared fixtures and finite-difference oracles."""

import numpy as np
import pytest

import meshsmooth as ms
from meshsmooth.quality import mesh_quality


def central_diff(f, x, h=1e-6):
    """Central-difference gradient of a scalar function of an array.

    The step is scaled per entry by ``1 + |x|`` so tiny and large
    coordinates are differentiated with comparable relative accuracy.
    """
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        step = h * (1.0 + abs(x[idx]))
        xp = x.copy()
        xp[idx] += step
        xm = x.copy()
        xm[idx] -= step
        g[idx] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def rel_err(a, b):
    """Max abs difference over the larger max-magnitude, zero-safe."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-12)
    return float(np.abs(a - b).max(initial=0.0) / denom)


def mesh_fd_grad(mesh, fn, movable=None, h=1e-6):
    """Central differences of :func:`mesh_quality` in the movable rows."""
    if movable is None:
        movable = ~mesh.fixed
    g = np.zeros_like(mesh.vertices)
    base = mesh.vertices.copy()
    try:
        for v in np.nonzero(movable)[0]:
            for k in range(mesh.dim):
                step = h * (1.0 + abs(base[v, k]))
                mesh.vertices = base.copy()
                mesh.vertices[v, k] += step
                fp = mesh_quality(mesh, fn)
                mesh.vertices = base.copy()
                mesh.vertices[v, k] -= step
                fm = mesh_quality(mesh, fn)
                g[v, k] = (fp - fm) / (2.0 * step)
    finally:
        mesh.vertices = base
    return g


def random_triangle(rng, dim=2):
    """Random nondegenerate triangle (area bounded away from zero)."""
    while True:
        x = rng.uniform(-1.0, 1.0, (3, dim))
        if abs(ms.tri_area(x)) > 0.05:
            return x


def random_tet(rng):
    while True:
        x = rng.uniform(-1.0, 1.0, (4, 3))
        if abs(ms.tet_volume(x)) > 0.02:
            return x


def random_polygon(rng, n, dim=2):
    """Random star-shaped nondegenerate n-gon around the origin."""
    while True:
        ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
        if np.min(np.diff(ang, append=ang[0] + 2.0 * np.pi)) < 0.2:
            continue
        r = rng.uniform(0.6, 1.4, n)
        x = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if dim == 3:
            x = np.column_stack([x, rng.uniform(-0.1, 0.1, n)])
        return x


def insert_centroids(mesh, element_ids):
    """Refine chosen triangles into three around their centroid.

    The resulting fans are thin near short edges, which makes this a
    convenient way to engineer low-quality interior elements.
    """
    m = mesh.copy()
    new_verts = [m.vertices]
    elements = list(m.elements)
    nv = m.n_vertices
    for ei in element_ids:
        a, b, c = elements[ei].verts
        z = nv
        nv += 1
        new_verts.append(m.vertices[[a, b, c]].mean(axis=0)[None, :])
        elements[ei] = ms.Element.tri(a, b, z)
        elements.append(ms.Element.tri(b, c, z))
        elements.append(ms.Element.tri(c, a, z))
    fixed = np.concatenate([m.fixed, np.zeros(nv - m.n_vertices, dtype=bool)])
    return ms.Mesh(np.vstack(new_verts), elements, fixed=fixed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square8():
    return ms.generate("square_tri", 8)


@pytest.fixture
def bumpy_square(rng):
    return ms.perturbed(ms.generate("square_tri", 6), 0.25, seed=3)


@pytest.fixture
def mixed_mesh():
    return ms.generate("square_mixed", 6)


@pytest.fixture(scope="session")
def ball5():
    return ms.ball_tet(5)


@pytest.fixture
def bumpy_ball(ball5):
    return ms.perturbed(ball5, 0.2, seed=5)


@pytest.fixture
def surface_cap():
    """Six triangles around a lifted apex; the rim is fixed."""
    th = np.linspace(0.0, 2.0 * np.pi, 7)[:-1]
    ring = np.column_stack([np.cos(th), np.sin(th), 0.12 * np.sin(2 * th)])
    verts = np.vstack([[[0.0, 0.0, 0.3]], ring])
    tris = [(0, 1 + i, 1 + (i + 1) % 6) for i in range(6)]
    fixed = np.zeros(7, dtype=bool)
    fixed[1:] = True
    return ms.Mesh(verts, [ms.Element.tri(*t) for t in tris], fixed=fixed)
