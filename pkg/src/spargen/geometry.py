"""Rigid transforms, the pinhole camera and oriented boxes.

Camera frame convention: x right, y down, z forward. Poses are stored
camera-to-world, so a camera-frame point ``p_cam`` maps to the world as
``R @ p_cam + t``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, ValidationError

ORTHO_TOL = 1e-6
MIN_DEPTH = 1e-6


def as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"non-finite vector {v}")
    return v


def normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def rotation_about(axis, degrees: float) -> np.ndarray:
    """Rodrigues rotation matrix for a right-handed turn about ``axis``."""
    k = normalize(np.asarray(axis, dtype=float))
    theta = np.deg2rad(degrees)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def check_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> None:
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise ValidationError("rotation must be a finite 3x3 matrix")
    if np.abs(r.T @ r - np.eye(3)).max() > tol:
        raise ValidationError("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValidationError("rotation determinant is not +1")


@dataclass(frozen=True)
class RigidTransform:
    """Camera-to-world SE(3) pose."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = as_vec3(self.translation)
        check_rotation(r)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> RigidTransform:
        m = np.asarray(m, dtype=float)
        if m.shape == (16,):
            m = m.reshape(4, 4)
        if m.shape != (4, 4):
            raise ValidationError(f"pose must be 4x4, got shape {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=ORTHO_TOL):
            raise ValidationError("pose bottom row must be [0, 0, 0, 1]")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self @ other`` as 4x4 matrices."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return self.compose(other)

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[:, 2]


def world_to_camera(pose: RigidTransform, p) -> np.ndarray:
    """Map world point(s) into the camera frame: ``R^T (p - t)``.

    Accepts a single point or an (N, 3) array.
    """
    p = np.asarray(p, dtype=float)
    return (p - pose.translation) @ pose.rotation


def camera_to_world(pose: RigidTransform, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p @ pose.rotation.T + pose.translation


@dataclass(frozen=True)
class CameraModel:
    intrinsics: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        k = np.array(self.intrinsics, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(k)):
            raise ValidationError("intrinsics must be finite")
        if k[0, 1] != 0.0 or k[1, 0] != 0.0 or not np.allclose(k[2], [0, 0, 1]):
            raise ValidationError("intrinsics must be [[fx,0,cx],[0,fy,cy],[0,0,1]]")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValidationError("image size must be positive")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= k[0, 2] < self.width and 0 <= k[1, 2] < self.height):
            raise ValidationError("principal point outside the image")
        k.setflags(write=False)
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def from_params(cls, fx, fy, cx, cy, width, height) -> CameraModel:
        return cls(np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]), width, height)

    fx = property(lambda self: self.intrinsics[0, 0])
    fy = property(lambda self: self.intrinsics[1, 1])
    cx = property(lambda self: self.intrinsics[0, 2])
    cy = property(lambda self: self.intrinsics[1, 2])

    def scaled(self, s: float) -> CameraModel:
        """Same camera at resolution scaled by ``s`` (pixel-center aligned)."""
        w = max(1, int(round(self.width * s)))
        h = max(1, int(round(self.height * s)))
        sx, sy = w / self.width, h / self.height
        return CameraModel.from_params(
            self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, w, h
        )


def project_point(camera: CameraModel, p_cam) -> tuple[float, float, float]:
    x, y, z = as_vec3(p_cam)
    if z <= MIN_DEPTH:
        raise BehindCamera(f"point depth {z:.6g} m is not in front of the camera")
    return camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy, z


def project_points(camera: CameraModel, p_cam: np.ndarray) -> np.ndarray:
    """Vectorized projection, (N, 3) -> (N, 2); no depth check."""
    p = np.asarray(p_cam, dtype=float)
    z = p[:, 2]
    u = camera.fx * p[:, 0] / z + camera.cx
    v = camera.fy * p[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1)


def unproject_pixel(camera: CameraModel, u: float, v: float, depth: float) -> np.ndarray:
    """Camera-frame point at z = ``depth`` seen at pixel (u, v)."""
    ray = np.linalg.solve(camera.intrinsics, np.array([u, v, 1.0]))
    return ray * depth / ray[2]


_UNIT_CORNERS = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        c = as_vec3(self.center)
        h = as_vec3(self.half_extents)
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        if np.any(h <= 0):
            raise ValidationError("box half extents must be positive")
        check_rotation(r)
        for a in (c, h, r):
            a.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "rotation", r)

    def corners(self) -> np.ndarray:
        """(8, 3) world-frame corners."""
        return (_UNIT_CORNERS * self.half_extents) @ self.rotation.T + self.center

    def axis_aligned_hull(self) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) of the world-axis-aligned box containing this one."""
        c = self.corners()
        return c.min(axis=0), c.max(axis=0)


def boxes_overlap(a: OrientedBox, b: OrientedBox, eps: float = 1e-9) -> bool:
    """Separating-axis test for two oriented boxes (touching counts as disjoint)."""
    axes_a = a.rotation.T
    axes_b = b.rotation.T
    cross = np.cross(axes_a[:, None, :], axes_b[None, :, :]).reshape(9, 3)
    norms = np.linalg.norm(cross, axis=1)
    keep = norms > 1e-9
    candidates = np.vstack([axes_a, axes_b, cross[keep] / norms[keep, None]])
    d = b.center - a.center
    ra = np.abs(candidates @ axes_a.T) @ a.half_extents
    rb = np.abs(candidates @ axes_b.T) @ b.half_extents
    return not bool(np.any(np.abs(candidates @ d) >= ra + rb - eps))
