"""Bird's-eye-view coordinate probe: observer ground frame and position error."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import Rejected
from .geometry import RigidTransform, as_vec3, normalize

BIN_EDGES = (0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, math.inf)
VERTICAL_LIMIT_DEG = 5.0


@dataclass(frozen=True)
class BevFrame:
    """Ground-plane frame under the first camera: y along the gaze, x to its right."""

    origin: np.ndarray  # world point, up-component removed
    x_axis: np.ndarray
    y_axis: np.ndarray
    up: np.ndarray

    def to_bev(self, p) -> np.ndarray:
        d = np.asarray(p, dtype=float) - self.origin
        return np.stack([d @ self.x_axis, d @ self.y_axis], axis=-1)


def bev_frame(first_pose: RigidTransform, up=(0.0, 0.0, 1.0)) -> BevFrame:
    up = normalize(as_vec3(up))
    c = first_pose.translation
    f = first_pose.rotation[:, 2]
    if abs(float(f @ up)) > math.cos(math.radians(VERTICAL_LIMIT_DEG)):
        raise Rejected("VerticalGaze", "forward axis within 5 deg of vertical")
    y = normalize(f - (f @ up) * up)
    x = np.cross(y, up)
    return BevFrame(c - (c @ up) * up, x, y, up)


@dataclass(frozen=True)
class BevSample:
    first_pose: RigidTransform
    gt_world: np.ndarray  # N x 3
    pred_xy: np.ndarray  # N x 2, meters in the observer frame

    def __post_init__(self):
        g = np.asarray(self.gt_world, dtype=float).reshape(-1, 3)
        p = np.asarray(self.pred_xy, dtype=float).reshape(-1, 2)
        if len(g) != len(p):
            raise ValueError("one prediction per object is required")
        if not 3 <= len(g) <= 7:
            raise ValueError(f"a sample holds 3-7 objects, got {len(g)}")
        object.__setattr__(self, "gt_world", g)
        object.__setattr__(self, "pred_xy", p)


@dataclass(frozen=True)
class ApeReport:
    mean: float
    p50: float
    p90: float
    n: int
    bins: tuple[dict, ...]

    def to_json(self) -> dict:
        return {"mean": self.mean, "p50": self.p50, "p90": self.p90, "n": self.n,
                "bins": list(self.bins)}


def bin_label(lo: float, hi: float) -> str:
    return f"[{lo:g},{'inf' if math.isinf(hi) else f'{hi:g}'})"


def object_errors(samples: Sequence[BevSample], up=(0.0, 0.0, 1.0)):
    """Per-object (APE, gt distance from the BEV origin) over all samples."""
    errs, dists = [], []
    for s in samples:
        frame = bev_frame(s.first_pose, up)
        gt = frame.to_bev(s.gt_world)
        errs.append(np.linalg.norm(s.pred_xy - gt, axis=1))
        dists.append(np.linalg.norm(gt, axis=1))
    if not errs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(errs), np.concatenate(dists)


def bev_ape(samples: Sequence[BevSample], up=(0.0, 0.0, 1.0)) -> ApeReport:
    err, dist = object_errors(samples, up)
    if len(err) == 0:
        raise ValueError("no objects to score")
    bins = []
    for lo, hi in zip(BIN_EDGES[:-1], BIN_EDGES[1:]):
        sel = (dist >= lo) & (dist < hi)
        bins.append({"bin": bin_label(lo, hi), "lo": lo, "hi": None if math.isinf(hi) else hi,
                     "n": int(sel.sum()), "mean": float(err[sel].mean()) if sel.any() else None})
    return ApeReport(float(err.mean()), float(np.percentile(err, 50)),
                     float(np.percentile(err, 90)), int(len(err)), tuple(bins))
