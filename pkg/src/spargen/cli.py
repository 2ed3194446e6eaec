"""Command-line entry point: ``spargen <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SpargenError

log = logging.getLogger("spargen")

EXIT_MISSING = 2


class MissingInput(Exception):
    pass


def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInput(f"{p}: no such file or directory")
    return p


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(_need(path), encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise SpargenError(f"{path}:{n}: {e.msg}") from e
    return rows


def _write_json(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def _config(args, **extra):
    from .config import load_config

    return load_config(args.config, seed=args.seed, workers=args.workers, **extra)


# --- commands --------------------------------------------------------------


def cmd_subsample(args) -> int:
    from .keyframes import SubsampleConfig, subsample_frames
    from .scene import load_scene_manifest

    scene = load_scene_manifest(_need(args.scene), args.pose_convention)
    kept = subsample_frames(scene.frames, SubsampleConfig(args.d_th, args.theta_th)) if scene.frames else []
    _write_json(args.out, {"scene_id": scene.scene_id, "kept": kept})
    print(f"{scene.scene_id}: kept {len(kept)} of {len(scene.frames)} frames")
    return 0


def cmd_index(args) -> int:
    from .pipeline import kept_frames, load_scene
    from .visibility import build_records, records_to_json

    cfg = _config(args)
    scene = load_scene(_need(args.scene), cfg)
    if args.kept:
        kept = json.loads(_need(args.kept).read_text())
        kept = kept["kept"] if isinstance(kept, dict) else kept
    else:
        kept = kept_frames(scene, cfg)
    images, objects = build_records(scene, kept, cfg.visibility, workers=cfg.workers)
    _write_json(args.out, records_to_json(scene.scene_id, images, objects))
    n_vis = sum(bool(o.frame_indices) for o in objects)
    print(f"{scene.scene_id}: {len(images)} images, {n_vis}/{len(objects)} objects visible")
    return 0


def cmd_generate(args) -> int:
    from .pipeline import run_generate

    extra = {}
    if args.no_images:
        extra["render_images"] = False
    if args.profile:
        extra["profile"] = args.profile
    cfg = _config(args, **extra)
    for d in args.scenes:
        _need(d)
    manifest = run_generate(cfg, args.scenes, args.out)
    for s in manifest.scenes:
        print(f"{s.name}: {s.status}{' (' + s.reason + ')' if s.reason else ''}")
    print(f"{manifest.total} items -> {Path(args.out) / 'qa.jsonl'}")
    return 1 if manifest.all_failed else 0


def cmd_bench_sample(args) -> int:
    from .composer.items import read_jsonl, write_jsonl
    from .evaluation import sample_benchmark

    items = read_jsonl(_need(args.dataset))
    bench = sample_benchmark(items, args.n, args.seed if args.seed is not None else 0)
    write_jsonl(args.out, bench)
    print(f"{len(bench)} items over {len({it.task for it in bench})} tasks -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from .composer.items import read_jsonl
    from .evaluation import evaluate

    items = read_jsonl(_need(args.benchmark))
    responses = {}
    for row in _read_jsonl(args.responses):
        if "id" not in row or "text" not in row:
            raise SpargenError(f"{args.responses}: rows need 'id' and 'text'")
        responses[row["id"]] = row["text"]
    report = evaluate(items, responses)
    _write_json(args.report, report.to_json())
    print(report.summary())
    return 0


def _box(raw):
    from .geometry import OrientedBox
    from .grounding import Box3D

    if "size" in raw:
        return Box3D(raw["center"], raw["size"])
    return Box3D.from_obb(OrientedBox(raw["center"], raw["half_extents"],
                                      raw.get("rotation", [1, 0, 0, 0, 1, 0, 0, 0, 1])))


def cmd_ground_eval(args) -> int:
    from .grounding import decode_prediction, evaluate_grounding, lift_to_world
    from .scene import load_scene_manifest

    preds = {r["id"]: r.get("text") for r in _read_jsonl(args.predictions)}
    gts = _read_jsonl(args.gt)
    scenes = {}
    boxes, gt_boxes, proposals = [], [], []
    gt_dir = Path(args.gt).parent
    for row in gts:
        gt_boxes.append(_box(row["box"]))
        proposals.append([_box(p) for p in row.get("proposals", [])])
        pred = decode_prediction(preds.get(row["id"]))
        if pred is None:
            boxes.append(None)
            continue
        scene_path = _need(gt_dir / row["scene"])
        if scene_path not in scenes:
            scenes[scene_path] = load_scene_manifest(scene_path)
        try:
            frame = scenes[scene_path].frame(pred.frame_index)
        except KeyError:
            boxes.append(None)
            continue
        boxes.append(lift_to_world(pred, frame))
    report = evaluate_grounding(boxes, gt_boxes, proposals)
    _write_json(args.report, report)
    for kind in ("raw", "refined"):
        accs = ", ".join(f"Acc@{t}={v:.1f}" for t, v in report[kind].items())
        print(f"{kind:>8}: {accs}")
    return 0


def cmd_bev_eval(args) -> int:
    from .bev import BevSample, bev_ape
    from .geometry import RigidTransform

    samples = []
    for row in _read_jsonl(args.samples):
        samples.append(BevSample(
            RigidTransform.from_matrix(row["pose"]),
            [o["gt"] for o in row["objects"]],
            [o["pred"] for o in row["objects"]],
        ))
    report = bev_ape(samples, up=args.up)
    _write_json(args.report, report.to_json())
    print(f"APE mean={report.mean:.3f} p50={report.p50:.3f} p90={report.p90:.3f} (n={report.n})")
    for b in report.bins:
        mean = "-" if b["mean"] is None else f"{b['mean']:.3f}"
        print(f"  {b['bin']:>8}  n={b['n']:<5} mean={mean}")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON pipeline config")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="spargen", description="Spatial QA generation and evaluation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("subsample", parents=[common], help="pose-based keyframe selection")
    s.add_argument("--scene", required=True)
    s.add_argument("--d-th", type=float, default=0.5)
    s.add_argument("--theta-th", type=float, default=15.0)
    s.add_argument("--pose-convention", default="camera_to_world",
                   choices=["camera_to_world", "world_to_camera"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_subsample)

    s = sub.add_parser("index", parents=[common], help="build image/object records")
    s.add_argument("--scene", required=True)
    s.add_argument("--kept", help="kept.json from subsample (default: subsample per config)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("generate", parents=[common], help="generate QA for scene directories")
    s.add_argument("scenes", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--profile", choices=["scannet", "scannetpp", "structured3d"])
    s.add_argument("--no-images", action="store_true", help="skip annotated renders")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("bench-sample", parents=[common], help="sample a per-task benchmark")
    s.add_argument("--dataset", required=True)
    s.add_argument("--n", type=int, default=400, help="items per task (50 for the tiny split)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench_sample)

    s = sub.add_parser("evaluate", parents=[common], help="score responses on a benchmark")
    s.add_argument("--benchmark", required=True)
    s.add_argument("--responses", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ground-eval", parents=[common], help="score 3D grounding predictions")
    s.add_argument("--predictions", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_ground_eval)

    s = sub.add_parser("bev-eval", parents=[common], help="score BEV coordinate predictions")
    s.add_argument("--samples", required=True)
    s.add_argument("--up", type=float, nargs=3, default=(0.0, 0.0, 1.0))
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_bev_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except MissingInput as e:
        print(f"spargen: error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as e:
        print(f"spargen: config error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (SpargenError, KeyError, ValueError) as e:
        print(f"spargen: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
