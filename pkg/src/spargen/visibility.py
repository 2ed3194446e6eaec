"""Per-frame object visibility and the cross-view record tables.

For every kept frame the mesh is rasterized once; a mesh vertex counts as
visible when at least one face incident to it owns a pixel. Each object is
then accepted into the frame's ImageRecord or rejected with a reason.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import Rejected
from .geometry import MIN_DEPTH, CameraModel, RigidTransform, project_points, world_to_camera
from .raster import RasterResult, rasterize
from .scene import FrameMeta, ObjectAnnotation, SceneBundle, TriangleMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VisibilityConfig:
    tau_v: float = 0.3
    a_min: float = 900.0
    raster_scale: float = 0.5
    max_depth: float = 20.0

    def __post_init__(self):
        if not 0 < self.tau_v <= 1:
            raise ValueError("tau_v must lie in (0, 1]")
        if not self.a_min > 0:
            raise ValueError("a_min must be positive")
        if not 0 < self.raster_scale <= 1:
            raise ValueError("raster_scale must lie in (0, 1]")
        if not self.max_depth > 0:
            raise ValueError("max_depth must be positive")


@dataclass(frozen=True)
class ObjectInView:
    object_id: int
    bbox2d: tuple[float, float, float, float]
    visible_fraction: float
    center_2d: tuple[float, float]
    center_cam: tuple[float, float, float]
    z_range: tuple[float, float]

    @property
    def bbox_center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bbox2d
        return (x0 + x1) / 2.0, (y0 + y1) / 2.0


@dataclass(frozen=True)
class ImageRecord:
    frame_index: int
    camera: CameraModel
    pose: RigidTransform
    visible_objects: tuple[ObjectInView, ...]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.camera.width, self.camera.height

    def view_of(self, object_id: int) -> ObjectInView | None:
        for v in self.visible_objects:
            if v.object_id == object_id:
                return v
        return None

    @property
    def object_ids(self) -> tuple[int, ...]:
        return tuple(v.object_id for v in self.visible_objects)


@dataclass(frozen=True)
class ObjectRecord:
    object_id: int
    label: str
    frame_indices: tuple[int, ...]


def visible_vertex_mask(mesh: TriangleMesh, raster: RasterResult) -> np.ndarray:
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[mesh.faces[raster.visible_faces].ravel()] = True
    return mask


def project_object(
    obj: ObjectAnnotation,
    frame: FrameMeta,
    mesh: TriangleMesh,
    raster: RasterResult,
    cfg: VisibilityConfig,
    vertex_mask: np.ndarray | None = None,
) -> ObjectInView:
    """Project one object into ``frame`` or raise ``Rejected``.

    Reasons: ``BadDepth`` (behind the camera or outside the depth range),
    ``LowVisibility`` (visible fraction <= tau_v), ``TooSmall`` (bbox area
    below a_min).
    """
    vids = np.asarray(obj.vertex_ids, dtype=np.int64)
    if len(vids) == 0:
        raise Rejected("LowVisibility", f"object {obj.object_id} has no mesh vertices")
    if vertex_mask is None:
        vertex_mask = visible_vertex_mask(mesh, raster)
    pc = world_to_camera(frame.pose, mesh.vertices[vids])
    if np.all(pc[:, 2] <= 0):
        raise Rejected("BadDepth", f"object {obj.object_id} is behind the camera")

    vis = vertex_mask[vids]
    f_v = float(vis.sum()) / len(vids)
    if f_v <= cfg.tau_v:
        raise Rejected("LowVisibility", f"object {obj.object_id}: f_v={f_v:.3f}")
    zv = pc[vis, 2]
    z_min, z_max = float(zv.min()), float(zv.max())
    if z_min <= 0 or z_max >= cfg.max_depth:
        raise Rejected("BadDepth", f"object {obj.object_id}: z in [{z_min:.3f}, {z_max:.3f}]")

    cam = frame.camera
    uv = project_points(cam, pc[vis])
    x0, y0 = np.clip(uv.min(axis=0), 0, [cam.width - 1, cam.height - 1])
    x1, y1 = np.clip(uv.max(axis=0), 0, [cam.width - 1, cam.height - 1])
    area = (x1 - x0) * (y1 - y0)
    if area < cfg.a_min:
        raise Rejected("TooSmall", f"object {obj.object_id}: area {area:.1f} px^2")

    c = world_to_camera(frame.pose, obj.box.center)
    if c[2] > MIN_DEPTH:
        cu, cv = project_points(cam, c[None])[0]
        center_2d = (float(np.clip(cu, x0, x1)), float(np.clip(cv, y0, y1)))
    else:
        center_2d = ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    return ObjectInView(
        object_id=obj.object_id,
        bbox2d=(float(x0), float(y0), float(x1), float(y1)),
        visible_fraction=f_v,
        center_2d=center_2d,
        center_cam=tuple(float(v) for v in c),
        z_range=(z_min, z_max),
    )


def index_frame(scene: SceneBundle, frame: FrameMeta, cfg: VisibilityConfig):
    """ImageRecord for one frame plus a Counter of rejection reasons."""
    raster = rasterize(frame, scene.mesh, cfg.raster_scale)
    mask = visible_vertex_mask(scene.mesh, raster)
    views = []
    reasons: Counter = Counter()
    for obj in scene.objects:
        try:
            views.append(project_object(obj, frame, scene.mesh, raster, cfg, mask))
        except Rejected as e:
            reasons[e.reason] += 1
    return ImageRecord(frame.frame_index, frame.camera, frame.pose, tuple(views)), reasons


def build_records(
    scene: SceneBundle,
    kept_frames: Iterable[int],
    cfg: VisibilityConfig,
    workers: int = 1,
) -> tuple[list[ImageRecord], list[ObjectRecord]]:
    frames = [scene.frame(i) for i in kept_frames]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda f: index_frame(scene, f, cfg), frames))
    else:
        results = [index_frame(scene, f, cfg) for f in frames]
    images = [r[0] for r in results]
    total: Counter = Counter()
    for _, reasons in results:
        total.update(reasons)
    if total:
        log.debug("%s: rejected object views %s", scene.scene_id, dict(sorted(total.items())))
    return images, object_records(scene, images)


def object_records(scene: SceneBundle, images: Sequence[ImageRecord]) -> list[ObjectRecord]:
    seen: dict[int, list[int]] = {o.object_id: [] for o in scene.objects}
    for rec in sorted(images, key=lambda r: r.frame_index):
        for oid in rec.object_ids:
            seen[oid].append(rec.frame_index)
    return [ObjectRecord(o.object_id, o.label, tuple(seen[o.object_id])) for o in scene.objects]


# --- records.json ----------------------------------------------------------


def records_to_json(scene_id: str, images, objects) -> dict:
    return {
        "scene_id": scene_id,
        "images": [
            {
                "frame_index": r.frame_index,
                "intrinsics": r.camera.intrinsics.ravel().tolist(),
                "resolution": list(r.resolution),
                "pose": r.pose.matrix().ravel().tolist(),
                "visible_objects": [
                    {
                        "object_id": v.object_id,
                        "bbox2d": list(v.bbox2d),
                        "visible_fraction": v.visible_fraction,
                        "center_2d": list(v.center_2d),
                        "center_cam": list(v.center_cam),
                        "z_range": list(v.z_range),
                    }
                    for v in r.visible_objects
                ],
            }
            for r in images
        ],
        "objects": [
            {"object_id": o.object_id, "label": o.label, "frame_indices": list(o.frame_indices)}
            for o in objects
        ],
    }


def records_from_json(data: dict) -> tuple[list[ImageRecord], list[ObjectRecord]]:
    images = []
    for r in data["images"]:
        w, h = r["resolution"]
        views = tuple(
            ObjectInView(
                object_id=int(v["object_id"]),
                bbox2d=tuple(v["bbox2d"]),
                visible_fraction=float(v["visible_fraction"]),
                center_2d=tuple(v["center_2d"]),
                center_cam=tuple(v["center_cam"]),
                z_range=tuple(v["z_range"]),
            )
            for v in r["visible_objects"]
        )
        images.append(
            ImageRecord(
                int(r["frame_index"]),
                CameraModel(r["intrinsics"], w, h),
                RigidTransform.from_matrix(r["pose"]),
                views,
            )
        )
    objects = [
        ObjectRecord(int(o["object_id"]), o["label"], tuple(o["frame_indices"]))
        for o in data["objects"]
    ]
    return images, objects
