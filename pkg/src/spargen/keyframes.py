"""Pose-based frame subsampling.

A frame is dropped when it sits within ``d_th`` meters of an already kept
frame *and* its orientation differs from that frame by less than
``theta_th`` degrees. Frames are visited once, in order, and each candidate
is compared against every frame kept so far.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scene import FrameMeta


@dataclass(frozen=True)
class SubsampleConfig:
    d_th: float = 0.5
    theta_th: float = 15.0

    def __post_init__(self):
        if not self.d_th >= 0:
            raise ValueError("d_th must be >= 0")
        if not 0 <= self.theta_th <= 180:
            raise ValueError("theta_th must lie in [0, 180]")


SCANNET = SubsampleConfig(0.5, 15.0)
SCANNETPP = SubsampleConfig(0.5, 45.0)


def rotation_angle_deg(r_i, r_j) -> float:
    """Angle of the relative rotation ``R_i^-1 R_j`` in degrees, in [0, 180]."""
    r_ij = np.asarray(r_i).T @ np.asarray(r_j)
    c = (np.trace(r_ij) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def subsample_frames(frames: Sequence[FrameMeta], cfg: SubsampleConfig) -> list[int]:
    """Return the ``frame_index`` of every kept frame, in order."""
    if not frames:
        return []
    kept = [frames[0].frame_index]
    kept_t = [frames[0].pose.translation]
    kept_r = [frames[0].pose.rotation]
    for f in frames[1:]:
        t = f.pose.translation
        r = f.pose.rotation
        dist = np.linalg.norm(np.asarray(kept_t) - t, axis=1)
        near = dist <= cfg.d_th
        redundant = False
        if near.any():
            rs = np.asarray(kept_r)[near]
            # trace(R_i^T R_j) == sum(R_i * R_j)
            c = np.clip((np.einsum("kij,ij->k", rs, r) - 1.0) / 2.0, -1.0, 1.0)
            angles = np.degrees(np.arccos(c))
            redundant = bool((angles < cfg.theta_th).any())
        if not redundant:
            kept.append(f.frame_index)
            kept_t.append(t)
            kept_r.append(r)
    return kept
