"""QA generation: sample task instances from the record tables and phrase them.

Each task has a builder that draws a random instance (objects, frames) from
the scene, computes its ground truth and returns a ``Draft``; the shared
assembly step picks a template, appends instructions and options, and
validates the finished item. Builders signal an unusable instance by raising
``Discarded``; the reason is counted and the next attempt starts.
"""

from __future__ import annotations

import itertools
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..errors import BehindCamera, DegenerateGeometry, Discarded, Skipped
from ..geometry import boxes_overlap, world_to_camera
from ..roomsize import room_area
from ..scene import SceneBundle
from ..taskgeom import (
    DEFAULT_RELATION,
    RelationConfig,
    SpatialRelation,
    appearance_order,
    camera_pose_projection,
    depth_of,
    distance_oc,
    distance_oo,
    extreme_of,
    imagined_relation,
    object_count,
    object_dims,
    position_match_sample,
    round_to,
    spatial_relation,
    view_change,
)
from ..tasks import FILL, SELECT, TASKS, TaskInfo
from ..visibility import ImageRecord, ObjectRecord
from .items import QAItem, VisualMark, fill, load_bank
from .options import (
    letters_phrase,
    lettered,
    make_choice_options,
    make_generated_options,
    make_numeric_options,
    make_relation_options,
)

log = logging.getLogger(__name__)

ATTEMPTS_PER_ITEM = 25
DEFAULT_MAX_PER_SCENE = 20
MIN_VIEWS, MAX_VIEWS = 3, 5


@dataclass(frozen=True)
class TaskConfig:
    max_per_scene: int = DEFAULT_MAX_PER_SCENE
    qa_types: tuple[str, ...] | None = None  # None = every type the task supports

    def __post_init__(self):
        if self.max_per_scene < 0:
            raise ValueError("max_per_scene must be non-negative")


@dataclass
class MarkSpec:
    frame: int
    kind: str
    pixels: tuple[float, ...]
    color: str


@dataclass
class Draft:
    frames: list[int]
    key: tuple
    bindings: dict = field(default_factory=dict)
    marks: list[MarkSpec] = field(default_factory=list)
    answer: str = ""
    options: list[str] = field(default_factory=list)
    correct: int = -1
    gt_numeric: dict | None = None
    sentence: dict = field(default_factory=dict)
    fill_kind: str = "fill_number"
    center_note: bool = False
    main_view: bool = False
    relation_note: bool = False


# --- scene context ---------------------------------------------------------


class SceneContext:
    """Read-only lookups over one scene's records used by every builder."""

    def __init__(self, scene: SceneBundle, images: Sequence[ImageRecord],
                 objects: Sequence[ObjectRecord], relation: RelationConfig):
        self.scene = scene
        self.relation = relation
        self.up = np.asarray(scene.up_axis, dtype=float)
        self.images = {r.frame_index: r for r in sorted(images, key=lambda r: r.frame_index)}
        self.frames = list(self.images)
        self.records = {o.object_id: o for o in sorted(objects, key=lambda o: o.object_id)}
        self.anns = {o.object_id: o for o in scene.objects}
        self._overlaps: dict[tuple[int, int], bool] = {}
        self.visible = {f: sorted(r.object_ids) for f, r in self.images.items()}
        self.frames_with_objects = [f for f in self.frames if self.visible[f]]
        self._area: float | Discarded | None = None

    def label(self, oid: int) -> str:
        return self.anns[oid].label

    def center(self, oid: int) -> np.ndarray:
        return self.anns[oid].box.center

    def seen_in(self, oid: int) -> tuple[int, ...]:
        return self.records[oid].frame_indices

    def cam(self, frame: int, oid: int) -> np.ndarray:
        return world_to_camera(self.images[frame].pose, self.center(oid))

    def ref(self, frame: int) -> str:
        return f"{self.scene.scene_id}/{self.scene.frame(frame).image_path}"

    def point(self, frame: int, oid: int, color: str) -> MarkSpec:
        u, v = self.images[frame].view_of(oid).center_2d
        return MarkSpec(frame, "point", (round(u, 1), round(v, 1)), color)

    def bbox(self, frame: int, oid: int, color: str) -> MarkSpec:
        b = self.images[frame].view_of(oid).bbox2d
        return MarkSpec(frame, "bbox", tuple(round(c, 1) for c in b), color)

    def norm_bbox(self, frame: int, oid: int) -> list[int]:
        cam = self.images[frame].camera
        x0, y0, x1, y1 = self.images[frame].view_of(oid).bbox2d
        return [round(x0 * 1000 / cam.width), round(y0 * 1000 / cam.height),
                round(x1 * 1000 / cam.width), round(y1 * 1000 / cam.height)]

    def room_area(self) -> float:
        if self._area is None:
            try:
                self._area = room_area(self.scene.mesh, up=self.up)
            except Discarded as e:
                self._area = e
            except DegenerateGeometry as e:
                self._area = Skipped("DegenerateGeometry", str(e))
        if isinstance(self._area, Discarded):
            raise self._area
        return self._area

    # sampling helpers; every draw goes through ``rng`` over sorted lists

    def pick_frame(self, rng: random.Random, min_objects: int = 1) -> int:
        pool = [f for f in self.frames if len(self.visible[f]) >= min_objects]
        if not pool:
            raise Skipped("TooFewObjects")
        return rng.choice(pool)

    def pick_objects(self, rng: random.Random, pool: Sequence[int], k: int,
                     exclude: Sequence[int] = ()) -> list[int]:
        """``k`` objects from ``pool`` whose labels differ from each other and from ``exclude``."""
        taken = {self.label(o) for o in exclude}
        cands = [o for o in pool if o not in exclude and self.label(o) not in taken]
        rng.shuffle(cands)
        out: list[int] = []
        for o in cands:
            if self.label(o) not in taken:
                out.append(o)
                taken.add(self.label(o))
                if len(out) == k:
                    return out
        raise Skipped("TooFewObjects")

    def other_frame(self, rng: random.Random, oid: int, main: int) -> int:
        pool = [f for f in self.seen_in(oid) if f != main]
        if not pool:
            raise Skipped("SingleView")
        return rng.choice(pool)

    def image_set(self, rng: random.Random, required: Sequence[int], objs: Sequence[int],
                  n: int | None = None, pad_any: bool = True) -> list[int]:
        """Required frames in order (main first), padded with co-visible frames to 3-5."""
        frames: list[int] = []
        for f in required:
            if f not in frames:
                frames.append(f)
        if len(frames) > MAX_VIEWS:
            raise Skipped("TooManyViews")
        target = n if n is not None else rng.randint(max(MIN_VIEWS, len(frames)), MAX_VIEWS)
        covis = [f for f in self.frames
                 if f not in frames and any(o in self.visible[f] for o in objs)]
        rng.shuffle(covis)
        frames += covis[: max(0, target - len(frames))]
        if len(frames) < target and pad_any:
            rest = [f for f in self.frames if f not in frames]
            rng.shuffle(rest)
            frames += rest[: target - len(frames)]
        if len(frames) < MIN_VIEWS:
            raise Skipped("TooFewFrames")
        return frames

    def unique_among(self, oids: Sequence[int], frames: Sequence[int]) -> bool:
        """True when each object's label names exactly one object seen in ``frames``."""
        seen = {o for f in frames for o in self.visible[f]} | set(oids)
        counts = Counter(self.label(o) for o in seen)
        return all(counts[self.label(o)] == 1 for o in oids)


# --- formatting helpers ----------------------------------------------------


def fmt(value: float, step: float) -> str:
    return f"{value:.1f}" if step < 1 else f"{value:.0f}"


def _numeric(d: Draft, qa_type: str, value: float, rng: random.Random,
             step: float = 0.1, unit: str = "m") -> None:
    v = round_to(value, step)
    if not v > 0:
        raise Skipped("NonPositive", f"{value!r}")
    text = fmt(v, step)
    d.gt_numeric = {"value": v, "unit": unit}
    d.sentence["value"] = text
    if qa_type == FILL:
        d.answer = text
        d.fill_kind = "fill_number"
    elif qa_type == SELECT:
        opts, d.correct = make_numeric_options(v, step, rng)
        d.options = [fmt(o, step) for o in opts]


def _where(rel: SpatialRelation) -> str:
    bits = []
    if rel.left_right:
        bits.append(f"to the {rel.left_right}")
    if rel.above_below:
        bits.append(rel.above_below)
    return " and ".join(bits) if bits else "level with it across the image plane"


def _depthwise(rel: SpatialRelation, ref: str) -> str:
    if rel.front_behind == "front":
        return f"in front of {ref}"
    if rel.front_behind == "behind":
        return f"behind {ref}"
    return f"at about the same depth as {ref}"


def _relation(d: Draft, qa_type: str, rel: SpatialRelation, rng: random.Random, ref: str) -> None:
    if rel.triple() == (None, None, None):
        raise Skipped("Indistinguishable")
    d.sentence.update(where=_where(rel), depthwise=_depthwise(rel, ref))
    d.relation_note = True
    if qa_type == SELECT:
        d.options, d.correct = make_relation_options(rel, rng)


def _listing(labels: Sequence[str]) -> str:
    names = [f"the {lab}" for lab in labels]
    return f"{', '.join(names[:-1])} and {names[-1]}"


def _bind_marks(d: Draft, ctx: SceneContext, pairs) -> None:
    """Bind ``label_X``/``mark_X`` placeholders and record the marks."""
    for letter, oid, mark in pairs:
        d.bindings[f"label_{letter}"] = ctx.label(oid)
        d.sentence[f"label_{letter}"] = ctx.label(oid)
        if mark is not None:
            d.marks.append(mark)
            d.bindings[f"mark_{letter}"] = f"{mark.color} {mark.kind}"


def _no_overlap(ctx: SceneContext, *oids: int) -> None:
    for a, b in itertools.combinations(sorted(oids), 2):
        hit = ctx._overlaps.get((a, b))
        if hit is None:
            hit = ctx._overlaps[(a, b)] = boxes_overlap(ctx.anns[a].box, ctx.anns[b].box)
        if hit:
            raise Skipped("Overlap")


def _bbox2d_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


# --- builders --------------------------------------------------------------


def b_depth_oc(ctx, task, qa, rng):
    f = ctx.pick_frame(rng)
    (a,) = ctx.pick_objects(rng, ctx.visible[f], 1)
    d = Draft([f], (qa, f, a))
    _bind_marks(d, ctx, [("A", a, ctx.point(f, a, "red"))])
    d.center_note = True
    _numeric(d, qa, depth_of(ctx.cam(f, a), ctx.relation), rng)
    return d


def b_depth_oc_mv(ctx, task, qa, rng):
    m = ctx.pick_frame(rng)
    (a,) = ctx.pick_objects(rng, ctx.visible[m], 1)
    multi = [o for o in ctx.records if any(f != m for f in ctx.seen_in(o))]
    (b,) = ctx.pick_objects(rng, multi, 1, exclude=[a])
    fb = ctx.other_frame(rng, b, m)
    zb = ctx.cam(m, b)[2]
    if zb <= ctx.relation.indist_threshold:
        raise Skipped("BehindCamera")
    d = Draft(ctx.image_set(rng, [m, fb], [a, b]), (qa, m, fb, a, b))
    _bind_marks(d, ctx, [("A", a, ctx.point(m, a, "red")), ("B", b, ctx.point(fb, b, "blue"))])
    d.bindings["depth_A"] = fmt(depth_of(ctx.cam(m, a), ctx.relation), 0.1)
    d.center_note = d.main_view = True
    _numeric(d, qa, zb, rng)
    return d


def _two_objects(ctx, rng, multi: bool):
    """(main frame, frame of B, a, b); B lies in another view for multi-view tasks."""
    m = ctx.pick_frame(rng, 1 if multi else 2)
    (a,) = ctx.pick_objects(rng, ctx.visible[m], 1)
    if not multi:
        (b,) = ctx.pick_objects(rng, ctx.visible[m], 1, exclude=[a])
        return m, m, a, b
    pool = [o for o in ctx.records if any(f != m for f in ctx.seen_in(o))]
    (b,) = ctx.pick_objects(rng, pool, 1, exclude=[a])
    return m, ctx.other_frame(rng, b, m), a, b


def b_depth_oo(ctx, task, qa, rng):
    m, fb, a, b = _two_objects(ctx, rng, task.multi)
    if task.multi:
        _no_overlap(ctx, a, b)
    elif _bbox2d_overlap(ctx.images[m].view_of(a).bbox2d, ctx.images[m].view_of(b).bbox2d):
        raise Skipped("Overlap")
    za, zb = ctx.cam(m, a)[2], ctx.cam(m, b)[2]
    if min(za, zb) <= 0:
        raise Skipped("BehindCamera")
    delta = abs(za - zb)
    if delta < ctx.relation.indist_threshold:
        raise Skipped("SimilarDepth")
    frames = ctx.image_set(rng, [m, fb], [a, b]) if task.multi else [m]
    d = Draft(frames, (qa, m, fb, min(a, b), max(a, b)))
    _bind_marks(d, ctx, [("A", a, ctx.point(m, a, "red")), ("B", b, ctx.point(fb, b, "blue"))])
    d.sentence["deeper"] = ctx.label(a if za > zb else b)
    d.center_note = True
    d.main_view = task.multi
    _numeric(d, qa, delta, rng)
    return d


def b_dist_oc(ctx, task, qa, rng):
    m = ctx.pick_frame(rng)
    if task.multi:
        pool = [o for o in ctx.records if any(f != m for f in ctx.seen_in(o))]
        (a,) = ctx.pick_objects(rng, pool, 1)
        fa = ctx.other_frame(rng, a, m)
        frames = ctx.image_set(rng, [m, fa], [a])
    else:
        (a,) = ctx.pick_objects(rng, ctx.visible[m], 1)
        fa, frames = m, [m]
    d = Draft(frames, (qa, m, fa, a))
    _bind_marks(d, ctx, [("A", a, ctx.point(fa, a, "red"))])
    d.center_note = True
    d.main_view = task.multi
    _numeric(d, qa, distance_oc(ctx.cam(m, a), ctx.relation), rng)
    return d


def b_dist_oo(ctx, task, qa, rng):
    m, fb, a, b = _two_objects(ctx, rng, task.multi)
    dist = distance_oo(ctx.center(a), ctx.center(b), ctx.anns[a].box, ctx.anns[b].box, ctx.relation)
    frames = ctx.image_set(rng, [m, fb], [a, b]) if task.multi else [m]
    d = Draft(frames, (qa, m, fb, min(a, b), max(a, b)))
    _bind_marks(d, ctx, [("A", a, ctx.point(m, a, "red")), ("B", b, ctx.point(fb, b, "blue"))])
    d.center_note = True
    _numeric(d, qa, dist, rng)
    return d


def _first_frame(ctx, oid: int, frames: Sequence[int]) -> int:
    for f in frames:
        if oid in ctx.visible[f]:
            return f
    raise Skipped("NotVisible")


def b_disti_oo(ctx, task, qa, rng):
    m = ctx.pick_frame(rng, 1 if task.multi else 3)
    (a,) = ctx.pick_objects(rng, ctx.visible[m], 1)
    farthest = rng.random() < 0.5
    if task.multi:
        frames = ctx.image_set(rng, [m], [a])
        pool = sorted({o for f in frames for o in ctx.visible[f]})
    else:
        frames, pool = [m], ctx.visible[m]
    if qa == SELECT:
        cands = ctx.pick_objects(rng, pool, 4, exclude=[a])
        if not ctx.unique_among(cands, frames):
            raise Skipped("AmbiguousLabel")
        _no_overlap(ctx, a, *cands)
        win = extreme_of(ctx.center(a), [ctx.center(c) for c in cands], farthest, ctx.relation)
        d = Draft(frames, (qa, tuple(frames), a, tuple(sorted(cands))))
        _bind_marks(d, ctx, [("A", a, ctx.point(m, a, "red"))])
        order = list(range(4))
        rng.shuffle(order)
        d.options = [ctx.label(cands[i]) for i in order]
        d.correct = order.index(win)
        d.bindings["candidates"] = _listing(d.options)
        d.bindings["closest_farthest"] = "farthest" if farthest else "closest"
    else:
        b, c = ctx.pick_objects(rng, pool, 2, exclude=[a])
        _no_overlap(ctx, a, b, c)
        win = extreme_of(ctx.center(a), [ctx.center(b), ctx.center(c)], farthest, ctx.relation)
        d = Draft(frames, (qa, tuple(frames), a, min(b, c), max(b, c)))
        fb, fc = _first_frame(ctx, b, frames), _first_frame(ctx, c, frames)
        _bind_marks(d, ctx, [("A", a, ctx.point(m, a, "red")), ("B", b, ctx.point(fb, b, "green")),
                             ("C", c, ctx.point(fc, c, "blue"))])
        word = "farther" if farthest else "closer"
        d.bindings["closer_farther"] = d.sentence["closer_farther"] = word
        winner = ctx.label((b, c)[win])
        d.answer = winner
        d.fill_kind = "fill_object"
        step = ctx.relation.round_step
        d.sentence.update(
            answer_label=winner,
            dist_B=fmt(round_to(np.linalg.norm(ctx.center(a) - ctx.center(b)), step), step),
            dist_C=fmt(round_to(np.linalg.norm(ctx.center(a) - ctx.center(c)), step), step),
        )
    d.center_note = True
    return d


def b_objrel_oc(ctx, task, qa, rng):
    m = ctx.pick_frame(rng)
    pool = [o for o in ctx.records if any(f != m for f in ctx.seen_in(o))]
    (a,) = ctx.pick_objects(rng, pool, 1)
    fa = ctx.other_frame(rng, a, m)
    d = Draft(ctx.image_set(rng, [m, fa], [a]), (qa, m, fa, a))
    _bind_marks(d, ctx, [("A", a, ctx.bbox(fa, a, "red"))])
    d.main_view = d.center_note = True
    _relation(d, qa, spatial_relation(ctx.cam(m, a), None, ctx.relation), rng, "the observer")
    return d


def b_objrel_oo(ctx, task, qa, rng):
    m, fb, a, b = _two_objects(ctx, rng, task.multi)
    frames = ctx.image_set(rng, [m, fb], [a, b]) if task.multi else [m]
    d = Draft(frames, (qa, m, fb, a, b))
    _bind_marks(d, ctx, [("A", a, ctx.bbox(m, a, "red")), ("B", b, ctx.bbox(fb, b, "blue"))])
    d.main_view = task.multi
    d.center_note = True
    rel = spatial_relation(ctx.cam(m, a), ctx.cam(m, b), ctx.relation)
    _relation(d, qa, rel, rng, f"the {ctx.label(b)}")
    return d


def b_spimag(ctx, task, qa, rng):
    oo = task.family == "spimag_oo"
    n_obj = 4 if oo else 3
    m = ctx.pick_frame(rng, 1 if task.multi else n_obj)
    if task.multi:
        frames = ctx.image_set(rng, [m], ctx.visible[m])
        pool = sorted({o for f in frames for o in ctx.visible[f]})
    else:
        frames, pool = [m], ctx.visible[m]
    objs = ctx.pick_objects(rng, pool, n_obj)
    a, b, c = objs[:3]
    ref = objs[3] if oo else None
    if ref is not None and not ctx.unique_among([ref], frames):
        raise Skipped("AmbiguousLabel")
    _no_overlap(ctx, *objs)
    before, after = imagined_relation(
        ctx.center(b), ctx.center(c), ctx.center(a), None if ref is None else ctx.center(ref),
        ctx.images[m].pose, ctx.up, ctx.relation)
    if after.triple() == (None, None, None):
        raise Skipped("Indistinguishable")
    d = Draft(frames, (qa, tuple(frames), *objs))
    pairs = [(k, o, ctx.bbox(_first_frame(ctx, o, frames), o, col))
             for k, o, col in (("A", a, "red"), ("B", b, "green"), ("C", c, "blue"))]
    if ref is not None:
        pairs.append(("D", ref, None))
    _bind_marks(d, ctx, pairs)
    ref_text = "the observer" if ref is None else f"the {ctx.label(ref)}"
    d.sentence.update(
        where_before=_where(before), depthwise_before=_depthwise(before, ref_text),
        where_after=_where(after), depthwise_after=_depthwise(after, ref_text),
    )
    d.main_view = task.multi
    d.center_note = True
    d.relation_note = True
    if qa == SELECT:
        d.options, d.correct = make_relation_options(after, rng)
    return d


def _random_box(rng, gt: Sequence[int]) -> str:
    w, h = gt[2] - gt[0], gt[3] - gt[1]
    dx = rng.choice((-1, 1)) * rng.uniform(0.4, 1.2) * max(w, 60)
    dy = rng.choice((-1, 1)) * rng.uniform(0.0, 0.8) * max(h, 60)
    x0 = int(np.clip(gt[0] + dx, 0, 1000 - w))
    y0 = int(np.clip(gt[1] + dy, 0, 1000 - h))
    return str([x0, y0, x0 + w, y0 + h])


def b_posmatch(ctx, task, qa, rng):
    multi = [o for o in ctx.records if len(ctx.seen_in(o)) >= 2]
    if not multi:
        raise Skipped("SingleView")
    a = rng.choice(multi)
    fa, fb, _, _ = position_match_sample(ctx.records[a], ctx.images, rng)
    d = Draft(ctx.image_set(rng, [fa, fb], [a]), (qa, fa, fb, a))
    _bind_marks(d, ctx, [("A", a, ctx.bbox(fa, a, "red"))])
    d.bindings["bbox_A"] = str(ctx.norm_bbox(fa, a))
    gt = ctx.norm_bbox(fb, a)
    if qa == FILL:
        d.answer = str(gt)
        d.fill_kind = "fill_free"
    else:
        # up to two boxes of other objects in the second image, the rest shifted copies
        others = sorted({str(ctx.norm_bbox(fb, o)) for o in ctx.visible[fb] if o != a} - {str(gt)})
        queue = rng.sample(others, min(len(others), 2))

        def draw():
            return queue.pop() if queue else _random_box(rng, gt)

        d.options, d.correct = make_generated_options(str(gt), draw, rng)
    return d


def _uv_text(u, v, z) -> str:
    return f"({u}, {v}), {z}"


def b_campose(ctx, task, qa, rng):
    if len(ctx.frames) < 2:
        raise Skipped("TooFewFrames")
    fa, fb = rng.sample(ctx.frames, 2)
    un, vn, z = camera_pose_projection(ctx.images[fa], ctx.images[fb].pose)
    u, v = int(round(un)), int(round(vn))
    zt = fmt(round_to(z, ctx.relation.round_step), 0.1)
    d = Draft(ctx.image_set(rng, [fa, fb], ctx.visible[fa] + ctx.visible[fb]), (qa, fa, fb))
    d.sentence.update(u=u, v=v, depth=zt)
    if qa == FILL:
        d.answer = _uv_text(u, v, zt)
        d.fill_kind = "fill_free"
    elif qa == SELECT:
        zval = round_to(z, 0.1)

        def draw():
            while True:
                du, dv = rng.randint(0, 1000), rng.randint(0, 1000)
                if max(abs(du - u), abs(dv - v)) >= 150:
                    break
            dz = round_to(zval * (1 + rng.choice((-1, 1)) * rng.uniform(0.1, 0.6)), 0.1)
            return _uv_text(du, dv, fmt(max(dz, 0.1), 0.1))

        opts, d.correct = make_generated_options(_uv_text(u, v, zt), draw, rng)
        d.options = opts
    return d


def b_viewchg(ctx, task, qa, rng):
    multi = [o for o in ctx.records if len(ctx.seen_in(o)) >= 2]
    if not multi:
        raise Skipped("SingleView")
    a = rng.choice(multi)
    fa, fb = rng.sample(list(ctx.seen_in(a)), 2)
    motion = view_change(ctx.images[fa].pose, ctx.images[fb].pose, ctx.relation)
    if not any(motion.values()):
        raise Skipped("NoMotion")
    d = Draft(ctx.image_set(rng, [fa, fb], [a]), (qa, fa, fb))
    d.answer = motion.render()
    d.fill_kind = "fill_free"
    for key, value, pos, neg, digits in (
        ("lr", motion.move_right, "right", "left", 1), ("ud", motion.move_down, "down", "up", 1),
        ("fb", motion.move_forward, "forward", "back", 1),
        ("pitch", motion.rotate_down, "down", "up", 0), ("yaw", motion.rotate_right, "right", "left", 0),
    ):
        d.sentence[f"{key}_value"] = f"{abs(value):.{digits}f}"
        d.sentence[f"{key}_dir"] = neg if value < 0 else pos
    return d


DIMENSIONS = (("height", 0, "centimeters", "cm"), ("length", 1, "centimeters", "cm"),
              ("width", 2, "centimeters", "cm"), ("volume", 3, "cubic centimeters", "cm^3"))


def b_spvol(ctx, task, qa, rng):
    f = ctx.pick_frame(rng)
    (a,) = ctx.pick_objects(rng, ctx.visible[f], 1)
    name, idx, unit_word, unit = rng.choice(DIMENSIONS)
    value = object_dims(ctx.anns[a].box, ctx.up)[idx]
    d = Draft([f], (qa, f, a, name))
    _bind_marks(d, ctx, [("A", a, ctx.bbox(f, a, "red"))])
    d.bindings.update(dimension=name, unit=unit_word)
    d.sentence.update(dimension=name, unit=unit_word)
    _numeric(d, qa, value, rng, step=1.0, unit=unit)
    return d


def b_objcount(ctx, task, qa, rng):
    counts = object_count(ctx.anns.values())
    labels = [lab for lab in counts
              if all(ctx.seen_in(o) for o in ctx.records if ctx.label(o) == lab)]
    if not labels:
        raise Skipped("NoRepeatedLabel")
    lab = rng.choice(labels)
    todo = {o for o in ctx.records if ctx.label(o) == lab}
    frames: list[int] = []
    while todo:
        gain = {f: len(todo & set(ctx.visible[f])) for f in ctx.frames}
        best = max(gain.values())
        f = rng.choice([f for f in ctx.frames if gain[f] == best])
        frames.append(f)
        todo -= set(ctx.visible[f])
    inst = sorted(o for o in ctx.records if ctx.label(o) == lab)
    frames = ctx.image_set(rng, frames, inst)
    d = Draft(frames, (qa, tuple(sorted(frames)), lab))
    d.bindings["label_A"] = d.sentence["label_A"] = lab
    _numeric(d, qa, counts[lab], rng, step=1.0, unit="count")
    return d


def b_roomsize(ctx, task, qa, rng):
    area = ctx.room_area()
    if len(ctx.frames) < MIN_VIEWS:
        raise Skipped("TooFewFrames")
    frames = rng.sample(ctx.frames, rng.randint(MIN_VIEWS, min(MAX_VIEWS, len(ctx.frames))))
    d = Draft(frames, (qa, tuple(sorted(frames))))
    _numeric(d, qa, area, rng, step=0.1, unit="m^2")
    return d


def b_appearorder(ctx, task, qa, rng):
    if len(ctx.frames) < MIN_VIEWS:
        raise Skipped("TooFewFrames")
    frames = sorted(rng.sample(ctx.frames, rng.randint(MIN_VIEWS, min(MAX_VIEWS, len(ctx.frames)))))
    first: dict[int, int] = {}
    for pos, f in enumerate(frames):
        for o in ctx.visible[f]:
            first.setdefault(o, pos)
    pool = [o for o in sorted(first) if ctx.unique_among([o], frames)]
    by_pos: dict[int, list[int]] = {}
    for o in pool:
        by_pos.setdefault(first[o], []).append(o)
    if len(by_pos) < 3:
        raise Skipped("TooFewObjects")
    slots = sorted(rng.sample(sorted(by_pos), 3))
    objs = [rng.choice(by_pos[p]) for p in slots]
    recs = [ObjectRecord(o, ctx.label(o), (first[o],)) for o in objs]
    order = [ctx.label(o) for o, _ in appearance_order(recs)]
    shown = order[:]
    rng.shuffle(shown)
    d = Draft(frames, (qa, tuple(frames), tuple(sorted(objs))))
    d.bindings["objects"] = _listing(shown)
    answer = ", ".join(order)
    d.sentence["order"] = answer
    if qa == FILL:
        d.answer = answer
        d.fill_kind = "fill_free"
    elif qa == SELECT:
        perms = [", ".join(p) for p in itertools.permutations(order)]
        d.options, d.correct = make_choice_options(answer, perms, rng)
    return d


def b_framelocation(ctx, task, qa, rng):
    multi = [o for o in ctx.records if len(ctx.seen_in(o)) >= 2]
    if not multi:
        raise Skipped("SingleView")
    a = rng.choice(multi)
    if not ctx.unique_among([a], ctx.seen_in(a)):
        raise Skipped("AmbiguousLabel")
    f0, f1 = rng.sample(list(ctx.seen_in(a)), 2)
    n = rng.randint(4, MAX_VIEWS)
    rest = [f for f in ctx.frames if f not in (f0, f1)]
    if len(rest) < n - 2:
        raise Skipped("TooFewFrames")
    others = [f1, *rng.sample(rest, n - 2)]
    rng.shuffle(others)
    frames = [f0, *others]
    hits = [i + 1 for i, f in enumerate(frames) if i > 0 and a in ctx.visible[f]]
    d = Draft(frames, (qa, tuple(frames), a))
    _bind_marks(d, ctx, [("A", a, ctx.bbox(f0, a, "red"))])
    answer = ", ".join(map(str, hits))
    d.sentence["frames"] = answer
    if qa == FILL:
        d.answer = answer
        d.fill_kind = "fill_free"
    elif qa == SELECT:
        positions = list(range(2, n + 1))

        def draw():
            k = rng.randint(1, len(positions))
            return ", ".join(map(str, sorted(rng.sample(positions, k))))

        d.options, d.correct = make_generated_options(answer, draw, rng)
    return d


BUILDERS = {
    "depth_oc": b_depth_oc, "depth_oc_mv": b_depth_oc_mv, "depth_oo": b_depth_oo,
    "dist_oc": b_dist_oc, "dist_oo": b_dist_oo, "disti_oo": b_disti_oo,
    "objrel_oc": b_objrel_oc, "objrel_oo": b_objrel_oo,
    "spimag_oc": b_spimag, "spimag_oo": b_spimag,
    "posmatch": b_posmatch, "campose": b_campose, "viewchg": b_viewchg,
    "spvol": b_spvol, "objcount": b_objcount, "roomsize": b_roomsize,
    "appearorder": b_appearorder, "framelocation": b_framelocation,
}


# --- assembly --------------------------------------------------------------


def assemble(ctx: SceneContext, task: TaskInfo, qa: str, d: Draft, item_id: str,
             rng: random.Random) -> QAItem:
    bank = load_bank()
    inst = bank.instructions
    template = rng.choice(bank.templates(task.family, qa))
    question = fill(template.text, d.bindings)
    parts = [question]
    if d.center_note:
        parts.append(inst["center_note"][0])
    if d.main_view:
        parts.append(rng.choice(inst["main_view"]))
    options: list[str] = []
    answer = d.answer
    if qa == FILL:
        parts.append(rng.choice(inst[d.fill_kind]))
    elif qa == SELECT:
        if d.relation_note:
            parts.append(inst["relation_options"][0])
        options = lettered(d.options)
        parts.append(rng.choice(inst["select"]))
        parts.append("; ".join(options) + ".")
        parts.append(f"Your answer can only include one of options {letters_phrase(len(options))}.")
        answer = "ABCD"[d.correct]
    else:
        answer = fill(rng.choice(bank.answer_templates(task.family)), d.sentence)
    marks = []
    for m in d.marks:
        cam = ctx.images[m.frame].camera
        vm = VisualMark(d.frames.index(m.frame), m.kind, m.pixels, m.color)
        vm.check_bounds(cam.width, cam.height)
        marks.append(vm)
    item = QAItem(
        id=item_id, scene_id=ctx.scene.scene_id, task=task.name, qa_type=qa,
        view_mode=task.view_mode, image_refs=tuple(ctx.ref(f) for f in d.frames),
        question=" ".join(parts), answer=answer, options=tuple(options),
        gt_numeric=d.gt_numeric, marks=tuple(marks),
    )
    item.validate()
    return item


def task_rng(seed: int, scene_id: str, task: str) -> random.Random:
    """Independent stream per (seed, scene, task); string seeds hash via SHA-512."""
    return random.Random(f"{seed}:{scene_id}:{task}")


class LetterDeck:
    """Answer positions dealt from reshuffled decks of ``0..n-1``.

    Every run of ``n`` consecutive select items of a task uses each letter
    exactly once, so letter frequencies stay within one item of uniform.
    """

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.decks: dict[int, list[int]] = {}

    def deal(self, n: int) -> int:
        deck = self.decks.setdefault(n, [])
        if not deck:
            deck.extend(range(n))
            self.rng.shuffle(deck)
        return deck.pop()

    def place(self, d: Draft) -> None:
        target = self.deal(len(d.options))
        opts = d.options
        opts[d.correct], opts[target] = opts[target], opts[d.correct]
        d.correct = target


def generate_task(ctx: SceneContext, task: TaskInfo, cfg: TaskConfig, seed: int,
                  skips: Counter | None = None) -> list[QAItem]:
    rng = task_rng(seed, ctx.scene.scene_id, task.name)
    deck = LetterDeck(rng)
    qa_types = [q for q in task.qa_types if cfg.qa_types is None or q in cfg.qa_types]
    builder = BUILDERS[task.family]
    items: list[QAItem] = []
    seen: set = set()
    if not ctx.frames or not qa_types:
        return items
    for _ in range(ATTEMPTS_PER_ITEM * cfg.max_per_scene):
        if len(items) >= cfg.max_per_scene:
            break
        qa = rng.choice(qa_types)
        try:
            d = builder(ctx, task, qa, rng)
        except Discarded as e:
            if skips is not None:
                skips[(task.name, e.reason)] += 1
            log.debug("%s %s skipped: %s", ctx.scene.scene_id, task.name, e)
            continue
        except BehindCamera as e:
            if skips is not None:
                skips[(task.name, "BehindCamera")] += 1
            log.debug("%s %s skipped: %s", ctx.scene.scene_id, task.name, e)
            continue
        if d.key in seen:
            if skips is not None:
                skips[(task.name, "Duplicate")] += 1
            continue
        seen.add(d.key)
        if qa == SELECT:
            deck.place(d)
        item_id = f"{ctx.scene.scene_id}-{task.name}-{len(items):05d}"
        items.append(assemble(ctx, task, qa, d, item_id, rng))
    return items


def normalize_task_configs(task_configs) -> dict[str, TaskConfig]:
    if task_configs is None:
        return {name: TaskConfig() for name in TASKS}
    out = {}
    for name, cfg in task_configs.items():
        if name not in TASKS:
            raise KeyError(f"unknown task {name!r}")
        if isinstance(cfg, int):
            cfg = TaskConfig(cfg)
        elif isinstance(cfg, Mapping):
            cfg = TaskConfig(cfg.get("max_per_scene", DEFAULT_MAX_PER_SCENE),
                             tuple(cfg["qa_types"]) if cfg.get("qa_types") else None)
        out[name] = cfg
    return out


def generate_dataset(scene: SceneBundle, records, task_configs=None, seed: int = 0,
                     relation: RelationConfig = DEFAULT_RELATION,
                     skips: Counter | None = None) -> Iterator[QAItem]:
    """Stream QA items for one scene, task by task in taxonomy order.

    ``records`` is the ``(images, objects)`` pair from ``build_records``.
    ``task_configs`` maps task names to a TaskConfig (or a bare
    ``max_per_scene`` int); tasks left out are not generated. ``skips``
    collects ``(task, reason)`` counts for discarded candidates.
    """
    images, objects = records
    ctx = SceneContext(scene, images, objects, relation)
    cfgs = normalize_task_configs(task_configs)
    for name in TASKS:
        if name in cfgs and cfgs[name].max_per_scene > 0:
            yield from generate_task(ctx, TASKS[name], cfgs[name], seed, skips)
