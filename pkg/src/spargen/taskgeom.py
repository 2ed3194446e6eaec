"""Ground-truth geometry for every QA task family.

Positions handed to the relation helpers are camera-frame points of the
main view (x right, y down, z forward) unless stated otherwise.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BehindCamera, Rejected, Skipped
from .geometry import (
    OrientedBox,
    RigidTransform,
    as_vec3,
    boxes_overlap,
    normalize,
    project_point,
    world_to_camera,
)


@dataclass(frozen=True)
class RelationConfig:
    indist_threshold: float = 0.1
    round_step: float = 0.1
    lookat_max_tilt: float = 60.0
    angle_step: float = 5.0

    def __post_init__(self):
        for name in ("indist_threshold", "round_step", "lookat_max_tilt", "angle_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_RELATION = RelationConfig()


def round_to(x: float, step: float) -> float:
    """Round to the nearest multiple of ``step``, halves away from zero.

    The result is re-rounded to the step's decimals so it prints cleanly.
    """
    decimals = max(0, -math.floor(math.log10(step) + 1e-12)) if step < 1 else 0
    k = math.floor(abs(x) / step + 0.5)
    v = round(math.copysign(k * step, x), decimals)
    return v + 0.0  # drop negative zero


# --- relations -------------------------------------------------------------


@dataclass(frozen=True)
class SpatialRelation:
    """Per-axis relation of one point to a reference; ``None`` = indistinguishable."""

    left_right: str | None = None
    above_below: str | None = None
    near_far: str | None = None
    front_behind: str | None = None

    def triple(self) -> tuple[str | None, str | None, str | None]:
        return self.left_right, self.above_below, self.front_behind

    def option_text(self) -> str:
        return ", ".join(v or "" for v in self.triple())

    def flipped(self) -> SpatialRelation:
        return SpatialRelation(*(_OPPOSITE.get(v) for v in (
            self.left_right, self.above_below, self.near_far, self.front_behind)))


_OPPOSITE = {
    "left": "right", "right": "left", "above": "below", "below": "above",
    "near": "far", "far": "near", "front": "behind", "behind": "front",
}


def _axis(delta: float, th: float, neg: str, pos: str) -> str | None:
    if abs(delta) < th:
        return None
    return pos if delta > 0 else neg


def spatial_relation(a, b=None, cfg: RelationConfig = DEFAULT_RELATION) -> SpatialRelation:
    """Relation of point ``a`` to ``b`` (the observer at the origin when omitted).

    ``front`` means further along the viewing direction than the reference,
    so for an observer reference it means "in front of the camera".
    """
    a = as_vec3(a)
    b = np.zeros(3) if b is None else as_vec3(b)
    d = a - b
    th = cfg.indist_threshold
    return SpatialRelation(
        left_right=_axis(d[0], th, "left", "right"),
        above_below=_axis(d[1], th, "above", "below"),
        near_far=_axis(float(np.linalg.norm(a) - np.linalg.norm(b)), th, "near", "far"),
        front_behind=_axis(d[2], th, "behind", "front"),
    )


# --- depth and distance ----------------------------------------------------


def depth_of(center_cam, cfg: RelationConfig = DEFAULT_RELATION) -> float:
    z = float(as_vec3(center_cam)[2])
    if z <= 0:
        raise BehindCamera(f"object center at depth {z:.3f} m")
    return round_to(z, cfg.round_step)


def relative_depth(d_i: float, d_j: float) -> float:
    return abs(d_i - d_j)


def distance_oo(
    c_a, c_b, box_a: OrientedBox | None = None, box_b: OrientedBox | None = None,
    cfg: RelationConfig = DEFAULT_RELATION,
) -> float:
    """Rounded center distance; skipped for interpenetrating or near-coincident objects."""
    if box_a is not None and box_b is not None and boxes_overlap(box_a, box_b):
        raise Skipped("Overlap")
    d = float(np.linalg.norm(as_vec3(c_a) - as_vec3(c_b)))
    if d < cfg.indist_threshold:
        raise Skipped("TooClose", f"{d:.3f} m")
    return round_to(d, cfg.round_step)


def distance_oc(c_cam, cfg: RelationConfig = DEFAULT_RELATION) -> float:
    return round_to(float(np.linalg.norm(as_vec3(c_cam))), cfg.round_step)


def extreme_of(anchor, candidates: Sequence, farthest: bool = False,
               cfg: RelationConfig = DEFAULT_RELATION) -> int:
    """Index of the candidate nearest to (or farthest from) ``anchor``.

    Skipped as ``Ambiguous`` when the runner-up is within the indistinguishable
    threshold of the winner.
    """
    anchor = as_vec3(anchor)
    d = np.array([np.linalg.norm(as_vec3(c) - anchor) for c in candidates])
    order = np.argsort(-d if farthest else d, kind="stable")
    if len(d) > 1 and abs(d[order[0]] - d[order[1]]) < cfg.indist_threshold:
        raise Skipped("Ambiguous")
    return int(order[0])


def nearer_of(anchor, b, c, cfg: RelationConfig = DEFAULT_RELATION) -> str:
    return "bc"[extreme_of(anchor, [b, c], cfg=cfg)]


# --- spatial imagination ---------------------------------------------------


def lookat_pose(c_a, c_b, up=(0.0, 0.0, 1.0), cfg: RelationConfig = DEFAULT_RELATION) -> RigidTransform:
    """Observer standing at ``c_a`` facing ``c_b``.

    Rotation columns are (right, down, forward) so the pose stays a proper
    rotation in the x-right / y-down / z-forward camera convention. Rejected
    for a gaze parallel to ``up`` or a tilt beyond ``lookat_max_tilt``.
    """
    c_a, c_b, up = as_vec3(c_a), as_vec3(c_b), normalize(as_vec3(up))
    gaze = c_b - c_a
    if np.linalg.norm(gaze) < 1e-12:
        raise Rejected("DegenerateGaze", "coincident centers")
    f = gaze / np.linalg.norm(gaze)
    side = np.cross(up, f)
    if np.linalg.norm(side) < 1e-6:
        raise Rejected("DegenerateGaze")
    v = side / np.linalg.norm(side)  # left
    u = np.cross(f, v)  # up
    r = -v
    tilt = math.degrees(math.acos(float(np.clip(u @ up, -1.0, 1.0))))
    if tilt > cfg.lookat_max_tilt:
        raise Rejected("ExcessiveTilt", f"{tilt:.1f} deg")
    return RigidTransform(np.column_stack([r, -u, f]), c_a)


def imagined_relation(c_a, c_b, target_c, target_d, main_pose: RigidTransform,
                      up=(0.0, 0.0, 1.0), cfg: RelationConfig = DEFAULT_RELATION):
    """(before, after) relation of ``target_c`` once the observer moves to A facing B.

    ``target_d`` is the reference object (world frame) or ``None`` for the
    observer itself.
    """
    moved = lookat_pose(c_a, c_b, up, cfg)

    def rel(pose):
        c = world_to_camera(pose, as_vec3(target_c))
        d = None if target_d is None else world_to_camera(pose, as_vec3(target_d))
        return spatial_relation(c, d, cfg)

    return rel(main_pose), rel(moved)


# --- object size -----------------------------------------------------------


def _plane_basis(up: np.ndarray):
    if np.allclose(up, [0.0, 0.0, 1.0]):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    e1 = normalize(np.cross(up, [1.0, 0.0, 0.0] if abs(up[0]) < 0.9 else [0.0, 1.0, 0.0]))
    return e1, np.cross(up, e1)


def object_dims(box: OrientedBox, up=(0.0, 0.0, 1.0)) -> tuple[float, float, float, float]:
    """(height, length, width, volume) in cm / cm^3.

    Height is the extent of the eight corners along ``up``. Length and width
    are the largest and smallest pairwise distances between the distinct
    ground-plane projections of the corners.
    """
    up = normalize(as_vec3(up))
    c = box.corners()
    hz = c @ up
    h = hz.max() - hz.min()
    e1, e2 = _plane_basis(up)
    xy = np.stack([c @ e1, c @ e2], axis=1)
    distinct: list[np.ndarray] = []
    for p in xy:
        if all(np.linalg.norm(p - q) > 1e-6 for q in distinct):
            distinct.append(p)
    pts = np.array(distinct)
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)[np.triu_indices(len(pts), 1)]
    h_cm, l_cm, w_cm = 100.0 * h, 100.0 * dist.max(), 100.0 * dist.min()
    return h_cm, l_cm, w_cm, h_cm * l_cm * w_cm


# --- multi-view ------------------------------------------------------------


def position_match_sample(obj, images_by_frame, rng):
    """Pick (reference, target) frames for an object seen at least twice."""
    frames = list(obj.frame_indices)
    if len(frames) < 2:
        raise Skipped("SingleView")
    fa, fb = rng.sample(frames, 2)
    return (
        fa, fb,
        images_by_frame[fa].view_of(obj.object_id).bbox2d,
        images_by_frame[fb].view_of(obj.object_id).bbox2d,
    )


@dataclass(frozen=True)
class MotionDescriptor:
    move_right: float = 0.0
    move_down: float = 0.0
    move_forward: float = 0.0
    rotate_down: float = 0.0
    rotate_right: float = 0.0

    FIELDS = (
        ("move_right", "move", "right", "left"),
        ("move_down", "move", "down", "up"),
        ("move_forward", "move", "forward", "back"),
        ("rotate_down", "rotate", "down", "up"),
        ("rotate_right", "rotate", "right", "left"),
    )

    def render(self) -> str:
        out = []
        for name, verb, pos, neg in self.FIELDS:
            v = getattr(self, name)
            word = neg if v < 0 else pos
            num = f"{abs(v):.1f}" if verb == "move" else f"{abs(v):.0f}"
            out.append(f"{verb} {word}: {num}")
        return ", ".join(out)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name, *_ in self.FIELDS)


def view_change(t_a: RigidTransform, t_b: RigidTransform,
                cfg: RelationConfig = DEFAULT_RELATION) -> MotionDescriptor:
    """Camera motion from view A to view B expressed in A's axes.

    Rotation is reduced to the yaw and pitch of B's forward axis seen from A;
    roll is dropped.
    """
    rel = t_a.inverse() @ t_b
    t = rel.translation
    f = rel.rotation[:, 2]
    yaw = math.degrees(math.atan2(f[0], f[2]))
    pitch = math.degrees(math.atan2(f[1], math.hypot(f[0], f[2])))
    m, a = cfg.round_step, cfg.angle_step
    return MotionDescriptor(
        move_right=round_to(t[0], m),
        move_down=round_to(t[1], m),
        move_forward=round_to(t[2], m),
        rotate_down=round_to(pitch, a),
        rotate_right=round_to(yaw, a),
    )


def camera_pose_projection(view_a, t_b: RigidTransform, min_depth: float = 0.1):
    """Where camera B's center lands in view A: (u, v) on a 0-1000 grid, depth in m.

    ``view_a`` is anything with ``pose`` and ``camera`` (a FrameMeta or an
    ImageRecord).
    """
    p = world_to_camera(view_a.pose, t_b.translation)
    if p[2] <= min_depth:
        raise Rejected("BehindCamera", f"depth {p[2]:.3f} m")
    u, v, z = project_point(view_a.camera, p)
    un = u * 1000.0 / view_a.camera.width
    vn = v * 1000.0 / view_a.camera.height
    if not (0.0 <= un <= 1000.0 and 0.0 <= vn <= 1000.0):
        raise Rejected("OutOfView", f"({un:.0f}, {vn:.0f})")
    return un, vn, float(z)


# --- scene-level -----------------------------------------------------------


def appearance_order(objects: Iterable) -> list[tuple[int, int]]:
    """(object_id, first frame) sorted by first appearance, ties by id."""
    out = []
    for o in objects:
        if not o.frame_indices:
            raise ValueError(f"object {o.object_id} never appears")
        out.append((o.object_id, min(o.frame_indices)))
    return sorted(out, key=lambda p: (p[1], p[0]))


def object_count(objects: Iterable) -> dict[str, int]:
    """Instance count per label, keeping labels with at least two instances."""
    counts = Counter(o.label for o in objects)
    return {k: n for k, n in sorted(counts.items()) if n >= 2}
