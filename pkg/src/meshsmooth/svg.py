"""Quality-colored SVG pictures of planar meshes.

Each element is filled on a red-to-green ramp: quality 0 (or worse)
maps to pure red, 1 to pure green. Inverted elements (non-positive
measure) additionally get a black outline so they stand out even when
tiny.
"""

import numpy as np

from .quality import QualityFn, QualityKind, element_values
from .mesh import TRI

_W = 720.0


def _color(t):
    t = min(1.0, max(0.0, t))
    return f"#{round(255 * (1.0 - t)):02x}{round(255 * t):02x}00"


def render_svg(mesh, path, fn=None):
    """Write an SVG of a planar mesh, elements colored by quality.

    ``fn`` picks the measure; the default is the mean ratio for
    all-triangle meshes and the isoperimetric quotient otherwise.
    Returns the path written.
    """
    if mesh.dim != 2:
        raise ValueError("SVG rendering expects a planar mesh")
    if fn is None:
        all_tri = all(e.kind == TRI for e in mesh.elements)
        fn = QualityFn(QualityKind.MEAN_RATIO if all_tri else QualityKind.IQ2)
    vals = element_values(mesh, fn)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    span = hi - lo
    margin = 0.04 * (span.max() if span.max() > 0 else 1.0)
    lo -= margin
    hi += margin
    span = hi - lo
    scale = _W / span[0]
    height = span[1] * scale
    stroke = 0.002 * _W

    def to_px(p):
        return ((p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {_W:.2f} {height:.2f}">'
    ]
    order = np.argsort(vals)[::-1]
    for i in order:
        coords = mesh.element_coords(int(i))
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in map(to_px, coords))
        v = float(vals[i])
        if v <= 0.0:
            edge = f'stroke="#000000" stroke-width="{3 * stroke:.2f}"'
        else:
            edge = f'stroke="{_color(v)}" stroke-width="{stroke:.2f}"'
        parts.append(f'<polygon points="{pts}" fill="{_color(v)}" {edge}/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
