import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import inverse_4x4, random_rotation, random_transform
from spargen.errors import BehindCamera, ValidationError
from spargen.geometry import (
    CameraModel,
    OrientedBox,
    RigidTransform,
    boxes_overlap,
    camera_to_world,
    project_point,
    rotation_about,
    unproject_pixel,
    world_to_camera,
)

CAM = CameraModel.from_params(100, 100, 50, 50, 100, 100)


def test_world_to_camera_identity():
    assert np.allclose(world_to_camera(RigidTransform.identity(), [1, 2, 3]), [1, 2, 3])


def test_camera_center_maps_to_origin():
    pose = RigidTransform(np.eye(3), [0, 0, 5])
    assert np.allclose(world_to_camera(pose, [0, 0, 5]), 0)


def test_yaw_and_shift_against_matrix_inverse():
    pose = RigidTransform(rotation_about([0, 0, 1], 90), [1, 0, 0])
    expected = (inverse_4x4(pose) @ np.array([1.0, 1.0, 0.0, 1.0]))[:3]
    got = world_to_camera(pose, [1, 1, 0])
    assert np.allclose(got, expected, atol=1e-12)
    assert np.allclose(got, [1, 0, 0], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inverse_and_compose(seed):
    rng = np.random.default_rng(seed)
    a, b = random_transform(rng), random_transform(rng)
    ident = a @ a.inverse()
    assert np.allclose(ident.matrix(), np.eye(4), atol=1e-9)
    assert np.allclose(a.inverse().matrix(), inverse_4x4(a), atol=1e-9)
    assert np.allclose((a @ b).matrix(), a.matrix() @ b.matrix(), atol=1e-9)
    p = rng.uniform(-5, 5, 3)
    assert np.allclose(camera_to_world(a, world_to_camera(a, p)), p, atol=1e-9)


def test_batched_points_match_single():
    rng = np.random.default_rng(1)
    pose = random_transform(rng)
    pts = rng.normal(size=(5, 3))
    batched = world_to_camera(pose, pts)
    for p, q in zip(pts, batched):
        assert np.allclose(world_to_camera(pose, p), q)


def test_rigid_transform_rejects_bad_rotation():
    with pytest.raises(ValidationError):
        RigidTransform(np.diag([1.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(ValidationError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValidationError):
        RigidTransform(np.eye(3), [0, np.nan, 0])


def test_from_matrix_checks_shape_and_bottom_row():
    m = np.eye(4)
    assert RigidTransform.from_matrix(m.ravel()).matrix().tolist() == m.tolist()
    m[3, 0] = 1
    with pytest.raises(ValidationError):
        RigidTransform.from_matrix(m)
    with pytest.raises(ValidationError):
        RigidTransform.from_matrix(np.eye(3))


def test_project_point_examples():
    assert project_point(CAM, [0, 0, 2]) == (50, 50, 2)
    assert project_point(CAM, [1, 0, 2]) == (100, 50, 2)
    with pytest.raises(BehindCamera):
        project_point(CAM, [0, 0, 0])
    with pytest.raises(BehindCamera):
        project_point(CAM, [0, 0, -1])


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 30))
def test_unproject_inverts_project(x, y, z):
    u, v, d = project_point(CAM, [x, y, z])
    assert np.allclose(unproject_pixel(CAM, u, v, d), [x, y, z], atol=1e-9)


def test_camera_validation():
    with pytest.raises(ValidationError):
        CameraModel.from_params(0, 100, 50, 50, 100, 100)
    with pytest.raises(ValidationError):
        CameraModel.from_params(100, 100, 100, 50, 100, 100)
    with pytest.raises(ValidationError):
        CameraModel(np.array([[100, 1, 50], [0, 100, 50], [0, 0, 1]]), 100, 100)


def test_scaled_camera_keeps_normalized_geometry():
    cam = CameraModel.from_params(577.9, 577.9, 319.5, 239.5, 640, 480)
    half = cam.scaled(0.5)
    assert (half.width, half.height) == (320, 240)
    p = [0.3, -0.2, 2.0]
    u, v, _ = project_point(cam, p)
    uh, vh, _ = project_point(half, p)
    assert np.isclose(uh / half.width, u / cam.width)
    assert np.isclose(vh / half.height, v / cam.height)


def test_box_corners():
    rng = np.random.default_rng(3)
    box = OrientedBox(rng.normal(size=3), [0.5, 1.0, 0.2], random_rotation(rng))
    c = box.corners()
    assert c.shape == (8, 3)
    assert np.allclose(c.mean(axis=0), box.center, atol=1e-9)
    with pytest.raises(ValidationError):
        OrientedBox([0, 0, 0], [1, 0, 1])


def test_boxes_overlap_cases():
    unit = [0.5, 0.5, 0.5]
    a = OrientedBox([0, 0, 0], unit)
    assert boxes_overlap(a, OrientedBox([0.5, 0, 0], unit))
    assert not boxes_overlap(a, OrientedBox([1.0, 0, 0], unit))  # touching faces
    assert not boxes_overlap(a, OrientedBox([3, 0, 0], unit))
    # a 45-degree cube's corner reaches 1.25 - sqrt(0.5) = 0.543 > 0.5
    tilted = OrientedBox([1.25, 0, 0], unit, rotation_about([0, 0, 1], 45))
    assert not boxes_overlap(a, tilted)
    assert boxes_overlap(a, OrientedBox([1.0, 0, 0], unit, rotation_about([0, 0, 1], 45)))


def _inside(box, pts):
    local = (pts - box.center) @ box.rotation
    return np.all(np.abs(local) <= box.half_extents, axis=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_boxes_overlap_against_sampling(seed):
    rng = np.random.default_rng(seed)
    a = OrientedBox(rng.normal(0, 0.6, 3), rng.uniform(0.1, 0.6, 3), random_rotation(rng))
    b = OrientedBox(rng.normal(0, 0.6, 3), rng.uniform(0.1, 0.6, 3), random_rotation(rng))
    local = rng.uniform(-1, 1, (4000, 3)) * a.half_extents
    pts = local @ a.rotation.T + a.center
    shared = _inside(b, pts).any()
    if shared:
        assert boxes_overlap(a, b)
    if not boxes_overlap(a, b):
        assert not shared
