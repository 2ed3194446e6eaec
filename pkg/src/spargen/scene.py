"""Scene bundle types and the on-disk scene manifest.

A scene directory holds ``scene.json`` (frame table), ``mesh.ply`` (ASCII,
per-vertex ``instance_id``) and ``objects.json`` (oriented boxes).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import CameraModel, OrientedBox, RigidTransform, as_vec3, normalize

log = logging.getLogger(__name__)

NO_INSTANCE = -1
POSE_CONVENTIONS = ("camera_to_world", "world_to_camera")


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float, world meters
    faces: np.ndarray  # (F, 3) int
    vertex_instance: np.ndarray  # (V,) int, NO_INSTANCE where unassigned

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        inst = np.asarray(self.vertex_instance, dtype=np.int64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertices")
        if inst.shape[0] != v.shape[0]:
            raise ValidationError("vertex_instance length differs from vertex count")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise ValidationError("face index out of range")
        if f.size:
            degenerate = (f[:, 0] == f[:, 1]) & (f[:, 1] == f[:, 2])
            if degenerate.any():
                raise ValidationError(f"degenerate face at index {int(np.argmax(degenerate))}")
        for a in (v, f, inst):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "vertex_instance", inst)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]


@dataclass(frozen=True)
class ObjectAnnotation:
    object_id: int
    label: str
    box: OrientedBox
    vertex_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class FrameMeta:
    frame_index: int
    image_path: str
    pose: RigidTransform
    camera: CameraModel


@dataclass(frozen=True)
class SceneBundle:
    scene_id: str
    mesh: TriangleMesh
    frames: tuple[FrameMeta, ...]
    objects: tuple[ObjectAnnotation, ...]
    up_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    root: Path | None = None

    def __post_init__(self):
        idx = [f.frame_index for f in self.frames]
        if idx != sorted(idx) or len(set(idx)) != len(idx):
            raise ValidationError("frames must be strictly ordered by frame_index")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValidationError("object ids must be unique within a scene")
        for o in self.objects:
            if not o.label:
                raise ValidationError(f"object {o.object_id} has an empty label")
        object.__setattr__(self, "up_axis", normalize(as_vec3(self.up_axis)))

    def frame(self, frame_index: int) -> FrameMeta:
        for f in self.frames:
            if f.frame_index == frame_index:
                return f
        raise KeyError(frame_index)

    def object(self, object_id: int) -> ObjectAnnotation:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)


# --- PLY -------------------------------------------------------------------


def read_ply(path) -> TriangleMesh:
    """Read an ASCII PLY with x, y, z[, instance_id] vertices and triangle faces."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing 'ply' magic")
    n_vert = n_face = None
    vprops: list[str] = []
    current = None
    i = 1
    while i < len(lines):
        tok = lines[i].split()
        i += 1
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(f"{path}: only ASCII PLY is supported")
        elif tok[0] == "element":
            current = tok[1]
            if current == "vertex":
                n_vert = int(tok[2])
            elif current == "face":
                n_face = int(tok[2])
        elif tok[0] == "property" and current == "vertex":
            vprops.append(tok[-1])
        elif tok[0] == "end_header":
            break
    else:
        raise ParseError(f"{path}: no end_header")
    if n_vert is None or n_face is None:
        raise ParseError(f"{path}: vertex and face elements are required")
    try:
        xyz = [vprops.index(k) for k in ("x", "y", "z")]
    except ValueError as e:
        raise ParseError(f"{path}: vertex x/y/z properties missing") from e
    inst_col = vprops.index("instance_id") if "instance_id" in vprops else None

    body = lines[i:]
    if len(body) < n_vert + n_face:
        raise ParseError(f"{path}: truncated body")
    try:
        vdata = np.array([body[k].split() for k in range(n_vert)], dtype=float)
        if n_vert and vdata.shape[1] != len(vprops):
            raise ValueError("vertex row width differs from header")
        faces = []
        for k in range(n_vert, n_vert + n_face):
            row = body[k].split()
            if int(row[0]) != 3 or len(row) != 4:
                raise ValueError(f"face line {k + 1} is not a triangle")
            faces.append([int(x) for x in row[1:]])
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
    vdata = vdata.reshape(n_vert, len(vprops))
    inst = (
        vdata[:, inst_col].astype(np.int64)
        if inst_col is not None
        else np.full(n_vert, NO_INSTANCE)
    )
    return TriangleMesh(vdata[:, xyz], np.array(faces, dtype=np.int64).reshape(-1, 3), inst)


def write_ply(path, mesh: TriangleMesh) -> None:
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float x",
        "property float y",
        "property float z",
        "property int instance_id",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for p, k in zip(mesh.vertices, mesh.vertex_instance):
        out.append(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {int(k)}")
    for f in mesh.faces:
        out.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(out) + "\n")


# --- manifest --------------------------------------------------------------


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ParseError(f"{path}: file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e


def _parse_frame(raw, pose_convention: str) -> FrameMeta:
    if "index" not in raw:
        raise ValidationError("frame entry without 'index'")
    idx = int(raw["index"])
    try:
        if raw.get("pose") is None:
            raise ValidationError("missing pose")
        pose = RigidTransform.from_matrix(raw["pose"])
        if pose_convention == "world_to_camera":
            pose = pose.inverse()
        if raw.get("intrinsics") is None:
            raise ValidationError("missing intrinsics")
        cam = CameraModel(raw["intrinsics"], raw["width"], raw["height"])
    except KeyError as e:
        raise ValidationError(f"frame {idx}: missing field {e.args[0]!r}") from e
    except (ValidationError, ValueError, TypeError) as e:
        raise ValidationError(f"frame {idx}: {e}") from e
    return FrameMeta(idx, str(raw.get("image", "")), pose, cam)


def _parse_object(raw, mesh: TriangleMesh) -> ObjectAnnotation:
    try:
        oid = int(raw["id"])
        box = OrientedBox(raw["center"], raw["half_extents"], raw.get("rotation", np.eye(3)))
        label = str(raw["label"]).strip()
    except KeyError as e:
        raise ValidationError(f"object entry missing field {e.args[0]!r}") from e
    except (ValidationError, ValueError, TypeError) as e:
        raise ValidationError(f"object {raw.get('id')}: {e}") from e
    vids = tuple(int(v) for v in np.flatnonzero(mesh.vertex_instance == oid))
    return ObjectAnnotation(oid, label, box, vids)


def load_scene_manifest(path, pose_convention: str = "camera_to_world") -> SceneBundle:
    """Load and validate one scene directory.

    ``pose_convention`` says how the stored 4x4 poses are to be read; they are
    converted to camera-to-world at load time.
    """
    if pose_convention not in POSE_CONVENTIONS:
        raise ValueError(f"pose_convention must be one of {POSE_CONVENTIONS}")
    root = Path(path)
    meta = _read_json(root / "scene.json")
    if not isinstance(meta, dict) or "scene_id" not in meta:
        raise ParseError(f"{root / 'scene.json'}: expected an object with scene_id")
    mesh = read_ply(root / "mesh.ply")
    raw_objects = _read_json(root / "objects.json")
    if isinstance(raw_objects, dict):
        raw_objects = raw_objects.get("objects", [])
    frames = tuple(
        sorted(
            (_parse_frame(r, pose_convention) for r in meta.get("frames", [])),
            key=lambda f: f.frame_index,
        )
    )
    objects = tuple(_parse_object(r, mesh) for r in raw_objects)
    return SceneBundle(
        scene_id=str(meta["scene_id"]),
        mesh=mesh,
        frames=frames,
        objects=objects,
        up_axis=meta.get("up_axis", [0.0, 0.0, 1.0]),
        root=root,
    )


def write_scene_manifest(root, scene: SceneBundle) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "scene_id": scene.scene_id,
        "up_axis": [float(x) for x in scene.up_axis],
        "frames": [
            {
                "index": f.frame_index,
                "image": f.image_path,
                "pose": np.round(f.pose.matrix(), 9).ravel().tolist(),
                "intrinsics": f.camera.intrinsics.ravel().tolist(),
                "width": f.camera.width,
                "height": f.camera.height,
            }
            for f in scene.frames
        ],
    }
    (root / "scene.json").write_text(json.dumps(meta, indent=1) + "\n")
    objs = [
        {
            "id": o.object_id,
            "label": o.label,
            "center": o.box.center.tolist(),
            "half_extents": o.box.half_extents.tolist(),
            "rotation": np.round(o.box.rotation, 12).ravel().tolist(),
        }
        for o in scene.objects
    ]
    (root / "objects.json").write_text(json.dumps(objs, indent=1) + "\n")
    write_ply(root / "mesh.ply", scene.mesh)
