"""CPU z-buffer rasterizer producing a pixel-to-face map.

Triangles are clipped against a near plane in camera space, projected, and
every pixel center inside a triangle's screen bounding box is tested with
edge functions. Depth is interpolated perspective-correctly (linear in 1/z),
which equals the depth of the ray/triangle hit through the pixel center.
No back-face culling. Depth ties go to the lower face index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, world_to_camera
from .scene import FrameMeta, TriangleMesh

NEAR = 1e-2
# bound on (triangle, pixel) candidate pairs held in memory at once
CHUNK_PAIRS = 1 << 22


@dataclass(frozen=True)
class RasterResult:
    pix_to_face: np.ndarray  # (H, W) int64, -1 where uncovered
    z_buffer: np.ndarray  # (H, W) float, inf where uncovered
    camera: CameraModel  # camera at raster resolution

    @property
    def visible_faces(self) -> np.ndarray:
        f = np.unique(self.pix_to_face)
        return f[f >= 0]


def _clip_near(tri: np.ndarray, near: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of one camera-space triangle to z >= near."""
    poly = []
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        a_in, b_in = a[2] >= near, b[2] >= near
        if a_in:
            poly.append(a)
        if a_in != b_in:
            s = (near - a[2]) / (b[2] - a[2])
            p = a + s * (b - a)
            p[2] = near
            poly.append(p)
    return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def camera_space_triangles(frame: FrameMeta, mesh: TriangleMesh, near: float = NEAR):
    """Camera-space triangles (T, 3, 3) and their source face ids (T,)."""
    vc = world_to_camera(frame.pose, mesh.vertices)
    tris = vc[mesh.faces]
    z = tris[:, :, 2]
    n_in = (z >= near).sum(axis=1)
    full = np.flatnonzero(n_in == 3)
    parts = [tris[full]]
    ids = [full]
    for fi in np.flatnonzero((n_in > 0) & (n_in < 3)):
        clipped = _clip_near(tris[fi].copy(), near)
        if clipped:
            parts.append(np.asarray(clipped))
            ids.append(np.full(len(clipped), fi))
    return np.concatenate(parts).reshape(-1, 3, 3), np.concatenate(ids).astype(np.int64)


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def rasterize(frame: FrameMeta, mesh: TriangleMesh, scale: float = 1.0) -> RasterResult:
    cam = frame.camera.scaled(scale)
    W, H = cam.width, cam.height
    p2f = np.full(H * W, -1, dtype=np.int64)
    zbuf = np.full(H * W, np.inf)
    if mesh.n_faces == 0:
        return RasterResult(p2f.reshape(H, W), zbuf.reshape(H, W), cam)

    tris, fids = camera_space_triangles(frame, mesh)
    if len(tris) == 0:
        return RasterResult(p2f.reshape(H, W), zbuf.reshape(H, W), cam)
    z = tris[:, :, 2]
    x = cam.fx * tris[:, :, 0] / z + cam.cx
    y = cam.fy * tris[:, :, 1] / z + cam.cy
    invz = 1.0 / z
    area = _edge(x[:, 0], y[:, 0], x[:, 1], y[:, 1], x[:, 2], y[:, 2])

    # pixel (i, j) has center (j + 0.5, i + 0.5)
    j0 = np.clip(np.ceil(x.min(axis=1) - 0.5), 0, W).astype(np.int64)
    j1 = np.clip(np.floor(x.max(axis=1) - 0.5), -1, W - 1).astype(np.int64)
    i0 = np.clip(np.ceil(y.min(axis=1) - 0.5), 0, H).astype(np.int64)
    i1 = np.clip(np.floor(y.max(axis=1) - 0.5), -1, H - 1).astype(np.int64)
    nx = np.maximum(j1 - j0 + 1, 0)
    ny = np.maximum(i1 - i0 + 1, 0)
    n = nx * ny
    keep = np.flatnonzero((n > 0) & (np.abs(area) > 1e-12))

    start = 0
    while start < len(keep):
        # grow the chunk until the pair budget is spent (always >= 1 triangle)
        csum = np.cumsum(n[keep[start:]])
        stop = start + max(1, int(np.searchsorted(csum, CHUNK_PAIRS, side="right")))
        t = keep[start:stop]
        start = stop

        counts = n[t]
        tri = np.repeat(np.arange(len(t)), counts)
        offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        tt = t[tri]
        jx = j0[tt] + offsets % nx[tt]
        iy = i0[tt] + offsets // nx[tt]
        px = jx + 0.5
        py = iy + 0.5

        xs, ys, a = x[tt], y[tt], area[tt]
        w0 = _edge(xs[:, 1], ys[:, 1], xs[:, 2], ys[:, 2], px, py) / a
        w1 = _edge(xs[:, 2], ys[:, 2], xs[:, 0], ys[:, 0], px, py) / a
        w2 = _edge(xs[:, 0], ys[:, 0], xs[:, 1], ys[:, 1], px, py) / a
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        iz = invz[tt]
        depth = 1.0 / (w0 * iz[:, 0] + w1 * iz[:, 1] + w2 * iz[:, 2])
        pix = (iy * W + jx)[inside]
        depth = depth[inside]
        face = fids[tt][inside]

        order = np.lexsort((face, depth, pix))
        pix, depth, face = pix[order], depth[order], face[order]
        first = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
        pix, depth, face = pix[first], depth[first], face[first]

        cur_z = zbuf[pix]
        better = (depth < cur_z) | ((depth == cur_z) & (face < p2f[pix]))
        zbuf[pix[better]] = depth[better]
        p2f[pix[better]] = face[better]

    return RasterResult(p2f.reshape(H, W), zbuf.reshape(H, W), cam)
