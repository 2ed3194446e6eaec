"""Procedural indoor rooms for fixtures, demos and tests.

A room is a subdivided floor and four walls with box-shaped furniture on the
floor, observed by a camera walking a loop around the room while looking at
the middle. Images are flat-shaded renders from the rasterizer.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np

from .geometry import CameraModel, OrientedBox, RigidTransform, normalize, rotation_about
from .raster import rasterize
from .scene import (
    NO_INSTANCE,
    FrameMeta,
    ObjectAnnotation,
    SceneBundle,
    TriangleMesh,
    write_scene_manifest,
)

FURNITURE = [
    # label, (length, width, height) meters
    ("chair", (0.5, 0.5, 0.9)),
    ("chair", (0.5, 0.5, 0.9)),
    ("chair", (0.5, 0.5, 0.9)),
    ("table", (1.2, 0.8, 0.75)),
    ("bed", (2.0, 1.5, 0.6)),
    ("sofa", (1.8, 0.8, 0.8)),
    ("lamp", (0.4, 0.4, 1.5)),
    ("lamp", (0.4, 0.4, 1.5)),
    ("cabinet", (1.0, 0.5, 1.8)),
    ("trash can", (0.4, 0.4, 0.6)),
    ("plant", (0.5, 0.5, 1.1)),
    ("tv stand", (1.4, 0.45, 0.6)),
]


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-world pose at ``eye`` looking at ``target`` (x right, y down)."""
    eye = np.asarray(eye, dtype=float)
    f = normalize(np.asarray(target, dtype=float) - eye)
    r = normalize(np.cross(f, up))
    d = np.cross(f, r)
    return RigidTransform(np.column_stack([r, d, f]), eye)


def grid_patch(origin, du, dv, nu, nv):
    """Vertices and faces of a planar nu x nv quad grid."""
    origin, du, dv = (np.asarray(a, dtype=float) for a in (origin, du, dv))
    verts = np.array(
        [origin + du * (i / nu) + dv * (j / nv) for j in range(nv + 1) for i in range(nu + 1)]
    )
    faces = []
    for j in range(nv):
        for i in range(nu):
            a = j * (nu + 1) + i
            b, c, d = a + 1, a + nu + 1, a + nu + 2
            faces += [[a, b, d], [a, d, c]]
    return verts, np.array(faces)


def box_surface(box: OrientedBox, n: int = 3):
    """Subdivided surface of an oriented box with shared edge vertices."""
    index: dict[tuple[int, int, int], int] = {}
    verts = []

    def vid(key):
        if key not in index:
            index[key] = len(verts)
            local = (np.array(key) / n * 2.0 - 1.0) * box.half_extents
            verts.append(box.rotation @ local + box.center)
        return index[key]

    faces = []
    for axis in range(3):
        a1, a2 = [k for k in range(3) if k != axis]
        for side in (0, n):
            for i in range(n):
                for j in range(n):
                    quad = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        key = [0, 0, 0]
                        key[axis], key[a1], key[a2] = side, i + di, j + dj
                        quad.append(vid(tuple(key)))
                    faces += [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]]
    return np.array(verts), np.array(faces)


def _place_objects(rng: random.Random, room, n_objects):
    w, d = room[0], room[1]
    placed: list[tuple[str, OrientedBox]] = []
    pool = FURNITURE[:n_objects]
    for label, (l, wd, h) in pool:
        for _ in range(200):
            yaw = rng.choice([0.0, 0.0, 90.0, rng.uniform(-30, 30)])
            rot = rotation_about((0, 0, 1), yaw)
            r = 0.5 * np.hypot(l, wd)
            cx = rng.uniform(0.3 + r, w - 0.3 - r)
            cy = rng.uniform(0.3 + r, d - 0.3 - r)
            box = OrientedBox((cx, cy, h / 2.0), (l / 2.0, wd / 2.0, h / 2.0), rot)
            clear = all(
                np.hypot(*(box.center[:2] - o.center[:2]))
                > r + 0.5 * np.hypot(*(2 * o.half_extents[:2])) + 0.15
                for _, o in placed
            )
            if clear:
                placed.append((label, box))
                break
    return placed


def make_room(
    scene_id: str,
    seed: int = 0,
    room=(6.0, 5.0, 2.8),
    n_objects: int = 10,
    n_frames: int = 60,
    width: int = 320,
    height: int = 240,
) -> SceneBundle:
    rng = random.Random(seed)
    w, d, h = room
    parts_v, parts_f, parts_i = [], [], []

    def add(verts, faces, inst):
        base = sum(len(v) for v in parts_v)
        parts_v.append(verts)
        parts_f.append(faces + base)
        parts_i.append(np.full(len(verts), inst))

    step = 0.25
    add(*grid_patch((0, 0, 0), (w, 0, 0), (0, d, 0), round(w / step), round(d / step)), NO_INSTANCE)
    for origin, du in (((0, 0, 0), (w, 0, 0)), ((w, 0, 0), (0, d, 0)),
                       ((w, d, 0), (-w, 0, 0)), ((0, d, 0), (0, -d, 0))):
        length = np.linalg.norm(du)
        add(*grid_patch(origin, du, (0, 0, h), round(length / 0.5), round(h / 0.5)), NO_INSTANCE)

    objects = []
    for k, (label, box) in enumerate(_place_objects(rng, room, n_objects)):
        oid = k + 1
        add(*box_surface(box), oid)
        objects.append((oid, label, box))

    mesh = TriangleMesh(np.concatenate(parts_v), np.concatenate(parts_f), np.concatenate(parts_i))
    anns = tuple(
        ObjectAnnotation(oid, label, box, tuple(np.flatnonzero(mesh.vertex_instance == oid)))
        for oid, label, box in objects
    )

    fx = fy = 0.8 * width
    cam = CameraModel.from_params(fx, fy, width / 2.0, height / 2.0, width, height)
    center = np.array([w / 2.0, d / 2.0, 0.6])
    frames = []
    phase = rng.uniform(0, 2 * np.pi)
    for i in range(n_frames):
        a = phase + 2 * np.pi * i / n_frames
        eye = np.array([w / 2 + (w / 2 - 0.6) * np.cos(a), d / 2 + (d / 2 - 0.6) * np.sin(a), 1.5])
        # aim past the room middle so views sweep across the furniture
        sweep = 1.2 * np.sin(3 * a)
        target = center + np.array([-np.sin(a), np.cos(a), 0.0]) * sweep
        frames.append(FrameMeta(i, f"images/{i:06d}.png", look_at(eye, target), cam))
    return SceneBundle(scene_id, mesh, tuple(frames), anns)


def render_frame(scene: SceneBundle, frame: FrameMeta) -> np.ndarray:
    """Flat-shaded HxWx3 uint8 render; objects get distinct hues."""
    res = rasterize(frame, scene.mesh, 1.0)
    face_inst = scene.mesh.vertex_instance[scene.mesh.faces[:, 0]]
    palette = np.array(
        [[200, 200, 200]] + [[(53 * k) % 256, (97 * k + 80) % 256, (151 * k + 40) % 256]
                             for k in range(1, 64)],
        dtype=np.uint8,
    )
    img = np.full(res.pix_to_face.shape + (3,), 30, dtype=np.uint8)
    hit = res.pix_to_face >= 0
    inst = face_inst[res.pix_to_face[hit]]
    img[hit] = palette[np.where(inst < 0, 0, inst % 64)]
    shade = np.clip(1.2 - res.z_buffer[hit] / 12.0, 0.4, 1.0)
    img[hit] = (img[hit] * shade[:, None]).astype(np.uint8)
    return img


def write_room(root, scene: SceneBundle, images: bool = True) -> Path:
    from PIL import Image

    root = Path(root)
    write_scene_manifest(root, scene)
    if images:
        (root / "images").mkdir(parents=True, exist_ok=True)
        for f in scene.frames:
            Image.fromarray(render_frame(scene, f)).save(root / f.image_path, optimize=True)
    return root


def dense_trajectory(n: int = 600, seed: int = 0, radius: float = 1.5, turns: float = 1.0):
    """Slow, smooth camera path (camera-to-world 4x4 matrices)."""
    rng = np.random.default_rng(seed)
    poses = []
    for i in range(n):
        a = 2 * np.pi * turns * i / n
        eye = np.array([radius * np.cos(a), radius * np.sin(a), 1.4 + 0.05 * np.sin(5 * a)])
        target = np.array([0.0, 0.0, 0.8]) + rng.normal(0, 0.01, 3)
        poses.append(look_at(eye, target).matrix())
    return poses


def write_trajectory(path, poses) -> None:
    Path(path).write_text(json.dumps([np.round(p, 9).ravel().tolist() for p in poses]) + "\n")
