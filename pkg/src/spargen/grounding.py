"""3D grounding from text: decode a monocular box prediction, lift it, score it.

Prediction text format::

    frame:<k>; uv:(<u>,<v>); depth:<d>; size:(<l>,<w>,<h>)

``u, v`` are pixel coordinates scaled to 0-1000, ``depth`` is the camera-frame
z of the box center in meters and ``size`` the world-axis-aligned extents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadFrame
from .geometry import OrientedBox, camera_to_world, unproject_pixel
from .scene import FrameMeta

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PRED = re.compile(
    rf"frame\s*:\s*(\d+)\s*;\s*uv\s*:\s*\(\s*({_NUM})\s*,\s*({_NUM})\s*\)\s*;\s*"
    rf"depth\s*:\s*({_NUM})\s*;\s*size\s*:\s*\(\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*\)",
    re.I,
)
THRESHOLDS = (0.25, 0.5)


@dataclass(frozen=True)
class MonoPrediction:
    frame_index: int
    u: float
    v: float
    depth: float
    size: tuple[float, float, float]

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("depth must be positive")
        if len(self.size) != 3 or min(self.size) <= 0:
            raise ValueError("sizes must be positive")
        if not (0 <= self.u <= 1000 and 0 <= self.v <= 1000):
            raise ValueError("uv must lie in [0, 1000]")


@dataclass(frozen=True)
class Box3D:
    """World-axis-aligned box; ``size`` is the full (x, y, z) extent."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self):
        c = tuple(float(x) for x in np.asarray(self.center, dtype=float).ravel())
        s = tuple(float(x) for x in np.asarray(self.size, dtype=float).ravel())
        if len(c) != 3 or len(s) != 3 or min(s) <= 0:
            raise ValueError("Box3D needs a 3D center and three positive sizes")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * np.asarray(self.size)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * np.asarray(self.size)

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    @classmethod
    def from_obb(cls, box: OrientedBox) -> Box3D:
        lo, hi = box.axis_aligned_hull()
        return cls((lo + hi) / 2.0, hi - lo)


def decode_prediction(text: str | None) -> MonoPrediction | None:
    """Parse the prediction format; ``None`` if it is malformed or out of range."""
    if not text:
        return None
    m = _PRED.search(text)
    if not m:
        return None
    k, u, v, d, l, w, h = m.groups()
    try:
        return MonoPrediction(int(k), float(u), float(v), float(d), (float(l), float(w), float(h)))
    except ValueError:
        return None


def lift_to_world(pred: MonoPrediction, frame: FrameMeta) -> Box3D:
    if pred.frame_index != frame.frame_index:
        raise BadFrame(f"prediction names frame {pred.frame_index}, got {frame.frame_index}")
    cam = frame.camera
    px = pred.u / 1000.0 * cam.width
    py = pred.v / 1000.0 * cam.height
    center = camera_to_world(frame.pose, unproject_pixel(cam, px, py, pred.depth))
    return Box3D(center, pred.size)


def iou3d(a: Box3D, b: Box3D) -> float:
    inter = np.clip(np.minimum(a.hi, b.hi) - np.maximum(a.lo, b.lo), 0.0, None).prod()
    union = a.volume + b.volume - inter
    return float(inter / union) if union > 0 else 0.0


def refine_with_proposals(box: Box3D, proposals: Sequence[Box3D]) -> Box3D:
    """Best-overlapping proposal; nearest center on ties or when nothing overlaps."""
    if not proposals:
        return box
    ious = np.array([iou3d(box, p) for p in proposals])
    best = ious.max()
    cands = list(np.flatnonzero(ious == best)) if best > 0 else list(range(len(proposals)))
    if len(cands) == 1:
        return proposals[cands[0]]
    c = np.asarray(box.center)
    d = [np.linalg.norm(np.asarray(proposals[i].center) - c) for i in cands]
    return proposals[cands[int(np.argmin(d))]]


def grounding_accuracy(preds: Sequence[Box3D | None], gts: Sequence[Box3D],
                       thresholds: Sequence[float] = THRESHOLDS) -> dict[float, float]:
    """Percent of samples whose IoU reaches each threshold; ``None`` predictions miss."""
    if len(preds) != len(gts):
        raise ValueError("one prediction per ground-truth box")
    if not gts:
        return {t: 0.0 for t in thresholds}
    ious = np.array([0.0 if p is None else iou3d(p, g) for p, g in zip(preds, gts)])
    return {t: 100.0 * float((ious >= t).mean()) for t in thresholds}


def evaluate_grounding(preds: Sequence[Box3D | None], gts: Sequence[Box3D],
                       proposals: Sequence[Sequence[Box3D]],
                       thresholds: Sequence[float] = THRESHOLDS) -> dict:
    refined = [None if p is None else refine_with_proposals(p, props)
               for p, props in zip(preds, proposals)]
    return {
        "n": len(gts),
        "n_unparseable": sum(p is None for p in preds),
        "raw": {str(t): v for t, v in grounding_accuracy(preds, gts, thresholds).items()},
        "refined": {str(t): v for t, v in grounding_accuracy(refined, gts, thresholds).items()},
    }
