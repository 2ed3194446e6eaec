"""Room floor area from mesh vertices.

Vertices are voxel-downsampled, projected onto the floor plane, and the area
of their alpha shape is summed. A Delaunay triangle belongs to the alpha
shape when its circumradius is at most ``1 / alpha``.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError

from .errors import DegenerateGeometry, Skipped

MIN_DOWNSAMPLED = 100


def voxel_downsample(points: np.ndarray, delta: float = 0.1) -> np.ndarray:
    """Centers of the occupied voxels of side ``delta``."""
    q = np.floor(np.asarray(points, dtype=float) / delta).astype(np.int64)
    return (np.unique(q, axis=0) + 0.5) * delta


def alpha_shape_area(xy: np.ndarray, alpha: float = 0.1) -> float:
    pts = np.unique(np.asarray(xy, dtype=float), axis=0)
    if len(pts) < 3:
        raise DegenerateGeometry("fewer than three distinct floor points")
    try:
        tri = Delaunay(pts)
    except QhullError as e:
        raise DegenerateGeometry("floor points are collinear") from e
    t = pts[tri.simplices]
    a = np.linalg.norm(t[:, 0] - t[:, 1], axis=1)
    b = np.linalg.norm(t[:, 1] - t[:, 2], axis=1)
    c = np.linalg.norm(t[:, 2] - t[:, 0], axis=1)
    e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        circum = a * b * c / (4.0 * area)
    keep = (area > 0) & (circum <= 1.0 / alpha)
    if not keep.any():
        return float(ConvexHull(pts).volume)
    return float(area[keep].sum())


def room_area(vertices, delta: float = 0.1, alpha: float = 0.1, a_th: float = 5.0,
              up=(0.0, 0.0, 1.0)) -> float:
    """Floor area in m^2; Skipped as ``TooSmall`` below ``a_th``."""
    v = np.asarray(getattr(vertices, "vertices", vertices), dtype=float)
    if len(v) == 0:
        raise DegenerateGeometry("empty mesh")
    pd = voxel_downsample(v, delta)
    if len(pd) < MIN_DOWNSAMPLED:
        pd = v
    up = np.asarray(up, dtype=float)
    up = up / np.linalg.norm(up)
    if np.allclose(up, [0.0, 0.0, 1.0]):
        xy = pd[:, :2]
    else:
        e1 = np.cross(up, [1.0, 0.0, 0.0] if abs(up[0]) < 0.9 else [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        xy = np.stack([pd @ e1, pd @ np.cross(up, e1)], axis=1)
    area = alpha_shape_area(xy, alpha)
    if area < a_th:
        raise Skipped("TooSmall", f"{area:.2f} m^2")
    return area
