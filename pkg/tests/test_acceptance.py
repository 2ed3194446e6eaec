"""Acceptance suite: one check per criterion, each logging a PASS/FAIL line.

Tolerances and sizes are pinned to the acceptance contract:
pose algebra 1e-9 m under 1 s, raster agreement 99.5% under 30 s,
keyframe reduction 80%, room area 5%, letter frequency 0.25 +- 0.05,
frequency baseline 35, grounding roundtrip 1e-6 m.
"""

import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from oracles import (
    brute_force_keyframes,
    frames_from_poses,
    interior_mask,
    random_rotation,
    random_tiny_mesh,
    random_trajectory,
    random_transform,
    raycast,
    rectangle_floor,
    shoelace,
)
from spargen.bev import BIN_EDGES, BevSample, bev_ape, bev_frame
from spargen.cli import main
from spargen.composer import TaskConfig, generate_dataset
from spargen.composer.items import read_jsonl
from spargen.config import build_config
from spargen.errors import Rejected
from spargen.evaluation import (
    baseline_average,
    chance_baselines,
    evaluate,
    sample_benchmark,
    score_mra,
)
from spargen.geometry import (
    CameraModel,
    OrientedBox,
    RigidTransform,
    camera_to_world,
    project_point,
    rotation_about,
    world_to_camera,
)
from spargen.grounding import Box3D, decode_prediction, evaluate_grounding, iou3d, lift_to_world
from spargen.grounding import MonoPrediction, grounding_accuracy, refine_with_proposals
from spargen.keyframes import SCANNET, SubsampleConfig, rotation_angle_deg, subsample_frames
from spargen.pipeline import kept_frames
from spargen.raster import rasterize
from spargen.roomsize import room_area
from spargen.scene import FrameMeta, load_scene_manifest
from spargen.synthetic import make_room
from spargen.taskgeom import lookat_pose, object_dims, spatial_relation
from spargen.tasks import BENCHMARK_TASKS, LEVELS, SELECT, TASKS
from spargen.visibility import build_records


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for k in ("SEED", "WORKERS", "PROFILE", "MAX_PER_SCENE", "POSE_CONVENTION", "RENDER_IMAGES"):
        monkeypatch.delenv(f"SPARGEN_{k}", raising=False)


def test_criterion_01_pose_algebra(acceptance_log):
    rng = np.random.default_rng(2024)
    transforms = [random_transform(rng) for _ in range(1000)]
    points = rng.uniform(-10, 10, (1000, 3))
    t0 = time.perf_counter()
    worst = 0.0
    for t, p in zip(transforms, points):
        worst = max(worst, float(np.abs((t @ t.inverse()).matrix() - np.eye(4)).max()))
        worst = max(worst, float(np.linalg.norm(camera_to_world(t, world_to_camera(t, p)) - p)))
        worst = max(worst, float(np.linalg.norm(camera_to_world(t.inverse() @ t, p) - p)))
    angles = (rotation_angle_deg(np.eye(3), np.eye(3)),
              rotation_angle_deg(np.eye(3), rotation_about([0, 0, 1], 30)),
              rotation_angle_deg(np.eye(3), rotation_about([1, 0, 0], 180)))
    elapsed = time.perf_counter() - t0
    ok = (worst <= 1e-9 and angles[0] == 0.0 and abs(angles[1] - 30) <= 1e-9
          and abs(angles[2] - 180) <= 1e-9 and elapsed < 1.0)
    acceptance_log(1, ok, f"max inverse-composition error {worst:.2e} m, angles "
                          f"{angles[0]:.1f}/{angles[1]:.6f}/{angles[2]:.6f}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_rasterizer_oracle(acceptance_log):
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    agree = total = 0
    for _ in range(25):
        frame, mesh = random_tiny_mesh(rng, int(rng.integers(1, 11)), size=32)
        r = rasterize(frame, mesh)
        p2f, zbuf = raycast(frame, mesh)
        m = interior_mask(p2f)
        same = (r.pix_to_face[m] == p2f[m]) & np.isclose(r.z_buffer[m], zbuf[m], rtol=1e-6)
        agree += int(same.sum())
        total += int(m.sum())
    elapsed = time.perf_counter() - t0
    frac = agree / total
    ok = total > 0 and frac >= 0.995 and elapsed < 30
    acceptance_log(2, ok, f"{agree}/{total} interior pixels agree ({100 * frac:.2f}%), {elapsed:.1f} s")
    assert ok


def test_criterion_03_keyframe_filter(fixtures, acceptance_log):
    rng = np.random.default_rng(3)
    mismatches = 0
    mono = True
    for k in range(50):
        poses = random_trajectory(rng, 200)
        frames = frames_from_poses(poses)
        if subsample_frames(frames, SCANNET) != brute_force_keyframes(poses, SCANNET.d_th, SCANNET.theta_th):
            mismatches += 1
        if k < 10:
            by_d = [len(subsample_frames(frames, SubsampleConfig(d, 15))) for d in (0.1, 0.25, 0.5, 1, 2)]
            by_t = [len(subsample_frames(frames, SubsampleConfig(0.5, t))) for t in (2, 8, 15, 30, 90)]
            mono &= by_d == sorted(by_d, reverse=True) and by_t == sorted(by_t, reverse=True)
    dense = [RigidTransform.from_matrix(m)
             for m in json.loads((fixtures / "dense_trajectory.json").read_text())]
    reduction = 1 - len(subsample_frames(frames_from_poses(dense), SCANNET)) / len(dense)
    ok = mismatches == 0 and mono and reduction >= 0.80
    acceptance_log(3, ok, f"{50 - mismatches}/50 trajectories equal brute force, monotone={mono}, "
                          f"dense reduction {100 * reduction:.1f}%")
    assert ok


def _elevation(a, b):
    g = b - a
    return math.degrees(math.asin(min(1.0, abs(g[2]) / np.linalg.norm(g))))


def test_criterion_04_task_geometry(acceptance_log):
    rng = np.random.default_rng(4)
    pts = rng.uniform(-5, 5, (10_000, 2, 3))
    antisym = sum(spatial_relation(a, b).flipped() == spatial_relation(b, a) for a, b in pts)

    lookat_ok = 0
    for a, b in rng.uniform(-5, 5, (10_000, 2, 3)):
        tilt = _elevation(a, b)
        try:
            pose = lookat_pose(a, b)
        except Rejected:
            lookat_ok += tilt > 60
            continue
        r = pose.rotation
        f = (b - a) / np.linalg.norm(b - a)
        lookat_ok += (tilt <= 60 and np.allclose(r.T @ r, np.eye(3), atol=1e-9)
                      and abs(np.linalg.det(r) - 1) < 1e-9 and np.allclose(r[:, 2], f, atol=1e-9))

    area_err = []
    for _ in range(10):
        lx, ly = rng.uniform(2.5, 8), rng.uniform(2.5, 6)
        truth = shoelace([(0, 0), (lx, 0), (lx, ly), (0, ly)])
        area_err.append(abs(room_area(rectangle_floor(lx, ly, origin=tuple(rng.uniform(-5, 5, 2)))) - truth) / truth)

    h, l, w, _ = object_dims(OrientedBox([0, 0, 0], [0.5, 0.5, 0.5]))
    dims_ok = abs(h - 100) < 1e-9 and abs(w - 100) < 1e-9 and abs(l - 141.4) <= 0.1
    ok = antisym == 10_000 and lookat_ok == 10_000 and max(area_err) <= 0.05 and dims_ok
    acceptance_log(4, ok, f"antisymmetry {antisym}/10000, look-at {lookat_ok}/10000, "
                          f"room area max error {100 * max(area_err):.2f}%, unit cube "
                          f"({h:.1f}, {l:.1f}, {w:.1f}) cm")
    assert ok


def test_criterion_05_mra_contract(acceptance_log):
    sweep = [score_mra(2.0 * (1 + r), 2.0) for r in np.linspace(0, 1.0, 100)]
    checks = {
        "exact": score_mra(3.0, 3.0) == 1.0,
        "rho=0.22": abs(score_mra(1.22, 1.0) - 0.6) < 1e-12,
        "rho>=0.5": score_mra(1.5, 1.0) == 0.0 and score_mra(0.4, 1.0) == 0.0,
        "non-increasing": all(a >= b for a, b in zip(sweep, sweep[1:])),
        "rho=0.049": score_mra(1.049, 1.0) == 1.0,
    }
    ok = all(checks.values())
    acceptance_log(5, ok, ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in checks.items()))
    assert ok


def _select_room(seed):
    scene = make_room(f"room{seed:04d}_00", seed=seed, n_frames=40)
    cfg = build_config({"subsample": None}, env={})
    records = build_records(scene, kept_frames(scene, cfg), cfg.visibility)
    tasks = {name: TaskConfig(200 if info.family == "disti_oo" else 120, (SELECT,))
             for name, info in TASKS.items() if SELECT in info.qa_types}
    return list(generate_dataset(scene, records, tasks, seed=seed))


def test_criterion_06_composer_balance(acceptance_log):
    with ProcessPoolExecutor(2) as pool:
        items = [it for chunk in pool.map(_select_room, range(200, 220)) for it in chunk]
    by_family: dict[str, list] = {}
    for it in items:
        by_family.setdefault(TASKS[it.task].family, []).append(it.answer)
    worst, short = 0.0, []
    for family, answers in by_family.items():
        if len(answers) < 2000:
            short.append(family)
            continue
        counts = Counter(answers[:2000])
        worst = max(worst, max(abs(counts[c] / 2000 - 0.25) for c in "ABCD"))
    bench = sample_benchmark(items, 50, seed=0, qa_type=SELECT)
    baselines = chance_baselines(bench)
    freq = baseline_average(baselines)
    ok = not short and worst <= 0.05 and freq <= 35
    acceptance_log(6, ok, f"{len(by_family)} families x 2000 select items, max letter deviation "
                          f"{worst:.3f}, short families {short or 'none'}; mini-benchmark "
                          f"frequency baseline {freq:.1f} over {len(baselines)} tasks")
    assert ok


def test_criterion_07_determinism(scene_dirs, fixtures, tmp_path, acceptance_log):
    outs = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        code = main(["generate", *map(str, scene_dirs), "--out", str(out), "--seed", "7",
                     "--workers", str(workers), "--no-images"])
        assert code == 0
        outs.append((out / "qa.jsonl").read_bytes())
    golden = (fixtures / "golden" / "qa_seed7.jsonl").read_bytes()
    items = read_jsonl(fixtures / "golden" / "bench_tiny.jsonl")
    responses = {json.loads(l)["id"]: json.loads(l)["text"]
                 for l in (fixtures / "golden" / "responses.jsonl").read_text().splitlines()}
    report_same = evaluate(items, responses).to_json() == json.loads(
        (fixtures / "golden" / "report.json").read_text())
    ok = outs[0] == outs[1] and outs[0] == golden and report_same
    n = outs[0].count(b"\n")
    acceptance_log(7, ok, f"workers 1 vs 8 identical={outs[0] == outs[1]} ({n} items), "
                          f"golden qa diff empty={outs[0] == golden}, golden report equal={report_same}")
    assert ok


def test_criterion_08_grounding(fixtures, acceptance_log):
    rng = np.random.default_rng(8)
    cam = CameraModel.from_params(500, 500, 320, 240, 640, 480)
    worst = 0.0
    for _ in range(1000):
        frame = FrameMeta(0, "", random_transform(rng), cam)
        px, py, z = rng.uniform(0, 640), rng.uniform(0, 480), rng.uniform(0.5, 8)
        world = camera_to_world(frame.pose, [(px - 320) * z / 500, (py - 240) * z / 500, z])
        u, v, d = project_point(cam, world_to_camera(frame.pose, world))
        box = lift_to_world(MonoPrediction(0, u * 1000 / 640, v * 1000 / 480, d, (1, 1, 1)), frame)
        worst = max(worst, float(np.linalg.norm(np.subtract(box.center, world))))
    iou = iou3d(Box3D((0, 0, 0), (1, 1, 1)), Box3D((0.5, 0, 0), (1, 1, 1)))

    preds = {json.loads(l)["id"]: json.loads(l)["text"]
             for l in (fixtures / "grounding_pred.jsonl").read_text().splitlines()}
    gts = [json.loads(l) for l in (fixtures / "grounding_gt.jsonl").read_text().splitlines()]
    scene = load_scene_manifest(fixtures / gts[0]["scene"])
    raw, gt_boxes, props = [], [], []
    for g in gts:
        p = decode_prediction(preds[g["id"]])
        raw.append(lift_to_world(p, scene.frame(p.frame_index)))
        gt_boxes.append(Box3D(**g["box"]))
        props.append([Box3D(**b) for b in g["proposals"]])
    present = [i for i in range(len(gts)) if gt_boxes[i] in props[i]]
    before = grounding_accuracy([raw[i] for i in present], [gt_boxes[i] for i in present])[0.5]
    after = grounding_accuracy([refine_with_proposals(raw[i], props[i]) for i in present],
                               [gt_boxes[i] for i in present])[0.5]
    full = evaluate_grounding(raw, gt_boxes, props)
    ok = worst <= 1e-6 and iou == 1 / 3 and len(present) > 0 and after >= before
    acceptance_log(8, ok, f"roundtrip max {worst:.2e} m, offset-cube IoU {iou!r}, Acc@0.5 on "
                          f"{len(present)} samples with gt proposal {before:.0f} -> {after:.0f} "
                          f"(all 20: raw {full['raw']['0.5']:.0f}, refined {full['refined']['0.5']:.0f})")
    assert ok


def test_criterion_09_bev(acceptance_log):
    rng = np.random.default_rng(9)
    ortho = 0
    tried = 0
    while tried < 1000:
        pose = RigidTransform(random_rotation(rng), rng.uniform(-5, 5, 3))
        try:
            f = bev_frame(pose)
        except Rejected:
            continue
        tried += 1
        axes = np.array([f.x_axis, f.y_axis, f.up])
        ortho += np.allclose(axes @ axes.T, np.eye(3), atol=1e-12) and np.linalg.det(axes) > 0
    pose = lookat_pose([0, 0, 1.5], [0, 10, 1.5])
    frame = bev_frame(pose)
    gt = np.array([[0, 2, 0], [1, 4, 0.5], [-2, 6, 1]], dtype=float)
    perfect = bev_ape([BevSample(pose, gt, frame.to_bev(gt))])
    tri = bev_ape([BevSample(pose, gt, frame.to_bev(gt) + [3.0, 4.0])])
    edges_ok = BIN_EDGES == (0, 1, 2, 3, 5, 7, 10, math.inf) and [b["bin"] for b in perfect.bins] == [
        "[0,1)", "[1,2)", "[2,3)", "[3,5)", "[5,7)", "[7,10)", "[10,inf)"]
    ok = ortho == 1000 and perfect.mean == 0.0 and perfect.p90 == 0.0 and edges_ok and tri.mean == 5.0
    acceptance_log(9, ok, f"orthonormal right-handed axes {ortho}/1000, perfect APE {perfect.mean}, "
                          f"bins exact={edges_ok}, 3-4-5 APE {tri.mean}")
    assert ok


def test_criterion_10_benchmark_sampling(fixtures, acceptance_log):
    from spargen.composer.items import QAItem

    pool = []
    for task in BENCHMARK_TASKS:
        qa = TASKS[task].bench_qa_type
        for i in range(1000):
            if qa == SELECT:
                pool.append(QAItem(f"s-{task}-{i:05d}", "s", task, qa, "single", ("s/a",), "Q?",
                                   "ABCD"[i % 4], ("A. a", "B. b", "C. c", "D. d")))
            else:
                pool.append(QAItem(f"s-{task}-{i:05d}", "s", task, qa, "single", ("s/a",), "Q?",
                                   "1.0", gt_numeric={"value": 1.0}))
    detail, ok = [], True
    for n in (400, 50):
        a = sample_benchmark(pool, n, seed=0)
        b = sample_benchmark(list(reversed(pool)), n, seed=0)
        c = sample_benchmark(pool, n, seed=1)
        per_task = Counter(it.task for it in a)
        ids = [it.id for it in a]
        det = ids == [it.id for it in b]
        disjoint = len(set(ids)) == len(ids) and all(it.id.split("-")[1:-1] == it.task.split("-")
                                                     for it in a)
        fresh = ids != [it.id for it in c]
        sizes = set(per_task.values()) == {n} and len(per_task) == 20
        ok &= det and disjoint and fresh and sizes
        detail.append(f"n={n}: 20x{n} deterministic={det} disjoint={disjoint} reseeded-differs={fresh}")
    report = json.loads((fixtures / "golden" / "report.json").read_text())
    levels = {lvl: sorted(t for t in BENCHMARK_TASKS if TASKS[t].level == lvl) for lvl in LEVELS}
    grouped = (set(report["per_level"]) == set(LEVELS)
               and [len(levels[l]) for l in LEVELS] == [8, 3, 9]
               and set(report["per_task"]) == set(BENCHMARK_TASKS))
    ok &= grouped
    detail.append(f"levels low/medium/high = {[len(levels[l]) for l in LEVELS]} tasks")
    acceptance_log(10, ok, "; ".join(detail))
    assert ok
