import numpy as np
import pytest

from oracles import raycast
from spargen.errors import Rejected
from spargen.geometry import CameraModel, OrientedBox, RigidTransform
from spargen.raster import rasterize
from spargen.scene import FrameMeta, ObjectAnnotation, SceneBundle, TriangleMesh
from spargen.synthetic import box_surface, grid_patch
from spargen.visibility import (
    VisibilityConfig,
    build_records,
    project_object,
    records_from_json,
    records_to_json,
    visible_vertex_mask,
)

CAM = CameraModel.from_params(40, 40, 20, 20, 40, 40)
FRAME = FrameMeta(0, "", RigidTransform.identity(), CAM)
CFG = VisibilityConfig(tau_v=0.3, a_min=20, raster_scale=1.0)


def _scene(parts):
    """parts: list of (verts, faces, instance id)."""
    vs, fs, inst = [], [], []
    base = 0
    for v, f, k in parts:
        vs.append(v)
        fs.append(f + base)
        inst.append(np.full(len(v), k))
        base += len(v)
    mesh = TriangleMesh(np.concatenate(vs), np.concatenate(fs), np.concatenate(inst))
    return mesh


def _cube(center, half=0.3, n=1):
    """Cube surface; n=1 gives the plain 8-vertex, 12-triangle cube."""
    box = OrientedBox(center, [half] * 3)
    v, f = box_surface(box, n)
    return box, v, f


def _object(mesh, box, oid=1):
    return ObjectAnnotation(oid, "cube", box, tuple(np.flatnonzero(mesh.vertex_instance == oid)))


def test_front_cube_accepted_with_oracle_fraction():
    box, v, f = _cube([0, 0, 2])
    mesh = _scene([(v, f, 1)])
    obj = _object(mesh, box)
    view = project_object(obj, FRAME, mesh, rasterize(FRAME, mesh), CFG)
    # oracle: faces hit by per-pixel rays, then vertices incident to those faces
    p2f, _ = raycast(FRAME, mesh)
    hit = np.unique(p2f[p2f >= 0])
    vis = np.zeros(mesh.n_vertices, dtype=bool)
    vis[mesh.faces[hit].ravel()] = True
    assert view.visible_fraction == pytest.approx(vis[list(obj.vertex_ids)].mean())
    # only the front face wins pixels; its 4 corners are half the vertices
    assert view.visible_fraction == 0.5
    x0, y0, x1, y1 = view.bbox2d
    assert 0 <= x0 <= x1 <= CAM.width - 1 and 0 <= y0 <= y1 <= CAM.height - 1
    assert view.z_range[0] <= view.z_range[1]
    assert view.center_cam == pytest.approx((0, 0, 2))


def test_occluded_cube_is_low_visibility():
    box, v, f = _cube([0, 0, 4], n=2)
    wall_v, wall_f = grid_patch((-3, -3, 1.5), (6, 0, 0), (0, 6, 0), 4, 4)
    mesh = _scene([(v, f, 1), (wall_v, wall_f, -1)])
    with pytest.raises(Rejected) as e:
        project_object(_object(mesh, box), FRAME, mesh, rasterize(FRAME, mesh), CFG)
    assert e.value.reason == "LowVisibility"


def test_cube_behind_camera_is_bad_depth():
    box, v, f = _cube([0, 0, -2])
    mesh = _scene([(v, f, 1)])
    with pytest.raises(Rejected) as e:
        project_object(_object(mesh, box), FRAME, mesh, rasterize(FRAME, mesh), CFG)
    assert e.value.reason == "BadDepth"


def test_small_cube_is_too_small():
    box, v, f = _cube([0, 0, 2], half=0.05)
    mesh = _scene([(v, f, 1)])
    with pytest.raises(Rejected) as e:
        project_object(_object(mesh, box), FRAME, mesh, rasterize(FRAME, mesh),
                       VisibilityConfig(0.3, 900, 1.0))
    assert e.value.reason == "TooSmall"


def test_records_are_cross_consistent(scene0, records0):
    images, objects = records0
    by_obj = {o.object_id: set(o.frame_indices) for o in objects}
    for img in images:
        for oid in by_obj:
            assert (oid in img.object_ids) == (img.frame_index in by_obj[oid])
    for o in objects:
        assert list(o.frame_indices) == sorted(set(o.frame_indices))
    assert len(objects) == len(scene0.objects)


def test_unseen_object_keeps_empty_record():
    box, v, f = _cube([0, 0, 2])
    hidden, hv, hf = _cube([0, 0, -3])
    mesh = _scene([(v, f, 1), (hv, hf, 2)])
    scene = SceneBundle("s", mesh, (FRAME,), (_object(mesh, box, 1), _object(mesh, hidden, 2)))
    images, objects = build_records(scene, [0], CFG)
    assert [o.frame_indices for o in objects] == [(0,), ()]


def test_reference_pass_matches_threaded(scene0):
    cfg = VisibilityConfig()
    kept = [f.frame_index for f in scene0.frames[::6]]
    images, objects = build_records(scene0, kept, cfg, workers=4)
    # straight-line reference: one raster per frame, every object checked in turn
    for img in images:
        frame = scene0.frame(img.frame_index)
        raster = rasterize(frame, scene0.mesh, cfg.raster_scale)
        mask = visible_vertex_mask(scene0.mesh, raster)
        ids = []
        for obj in scene0.objects:
            vids = list(obj.vertex_ids)
            try:
                project_object(obj, frame, scene0.mesh, raster, cfg)
                ids.append(obj.object_id)
                assert mask[vids].mean() > cfg.tau_v
            except Rejected:
                pass
        assert tuple(ids) == img.object_ids


def test_records_json_roundtrip(records0, scene0):
    images, objects = records0
    data = records_to_json(scene0.scene_id, images, objects)
    images2, objects2 = records_from_json(data)
    assert [i.object_ids for i in images2] == [i.object_ids for i in images]
    assert objects2 == objects
    v1, v2 = images[0].visible_objects[0], images2[0].visible_objects[0]
    assert v1.bbox2d == pytest.approx(v2.bbox2d)


def test_config_validation():
    with pytest.raises(ValueError):
        VisibilityConfig(tau_v=0)
    with pytest.raises(ValueError):
        VisibilityConfig(a_min=-1)
