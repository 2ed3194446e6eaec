"""Scene-level orchestration: subsample -> records -> QA, with resumable outputs.

Output layout under ``out``::

    scenes/<name>/kept.json      kept frame indices
    scenes/<name>/records.json   image and object records
    scenes/<name>/qa.jsonl       this scene's items
    scenes/<name>/skips.json     discarded-candidate counts by task and reason
    scenes/<name>/DONE           config hash of the run that completed the scene
    qa.jsonl                     all scenes, in input order
    images/                      annotated renders for items with visual marks
    manifest.json                per-scene status, per-task counts, config hash
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
import time
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .composer import generate_dataset
from .composer.items import QAItem, read_jsonl
from .composer.render import render_marks
from .config import PipelineConfig
from .keyframes import subsample_frames
from .scene import SceneBundle, load_scene_manifest
from .tasks import TASKS
from .visibility import build_records, records_to_json

log = logging.getLogger(__name__)


@dataclasses.dataclass
class SceneResult:
    name: str
    status: str  # ok | failed | cached
    reason: str = ""
    counts: dict = dataclasses.field(default_factory=dict)
    n_kept: int = 0


@dataclasses.dataclass
class RunManifest:
    config_hash: str
    scenes: list[SceneResult]
    task_counts: dict[str, int]
    total: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "scenes": [dataclasses.asdict(s) for s in self.scenes],
            "task_counts": self.task_counts,
            "total": self.total,
            "wall_time": round(self.wall_time, 3),
        }

    @property
    def all_failed(self) -> bool:
        return bool(self.scenes) and all(s.status == "failed" for s in self.scenes)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_scene(scene_dir, cfg: PipelineConfig) -> SceneBundle:
    scene = load_scene_manifest(scene_dir, cfg.pose_convention)
    if cfg.up_axis is not None:
        scene = dataclasses.replace(scene, up_axis=np.asarray(cfg.up_axis, dtype=float))
    return scene


def kept_frames(scene: SceneBundle, cfg: PipelineConfig) -> list[int]:
    if not scene.frames:
        return []
    if cfg.subsample is None:
        return [f.frame_index for f in scene.frames]
    return subsample_frames(scene.frames, cfg.subsample)


def scene_items(scene: SceneBundle, cfg: PipelineConfig, skips: Counter | None = None):
    """(kept frames, records, items) for one loaded scene."""
    kept = kept_frames(scene, cfg)
    images, objects = build_records(scene, kept, cfg.visibility)
    items = list(generate_dataset(scene, (images, objects), cfg.tasks, cfg.seed,
                                  cfg.relation, skips))
    return kept, (images, objects), items


def render_item_images(item: QAItem, scene: SceneBundle, out: Path) -> None:
    from PIL import Image

    for k, ref in enumerate(item.image_refs):
        marks = [m for m in item.marks if m.frame_ref == k]
        if not marks:
            continue
        src = Path(scene.root) / ref.split("/", 1)[1]
        if not src.exists():
            log.warning("%s: image %s missing, render skipped", item.id, src)
            continue
        img = np.asarray(Image.open(src).convert("RGB"))
        out.mkdir(parents=True, exist_ok=True)
        Image.fromarray(render_marks(img, marks)).save(out / f"{item.id}_{k}.png")


def process_scene(scene_dir: str, out: str, cfg: PipelineConfig) -> SceneResult:
    """Run one scene; never raises, failures come back as a ``failed`` result."""
    name = Path(scene_dir).name
    sdir = Path(out) / "scenes" / name
    digest = cfg.config_hash()
    done = sdir / "DONE"
    try:
        if done.exists() and done.read_text().strip() == digest and (sdir / "qa.jsonl").exists():
            items = read_jsonl(sdir / "qa.jsonl")
            return SceneResult(name, "cached", counts=dict(Counter(it.task for it in items)))
        if done.exists():
            done.unlink()
        t0 = time.perf_counter()
        scene = load_scene(scene_dir, cfg)
        skips: Counter = Counter()
        kept, (images, objects), items = scene_items(scene, cfg, skips)
        _atomic_write(sdir / "kept.json", json.dumps(kept) + "\n")
        _atomic_write(sdir / "records.json",
                      json.dumps(records_to_json(scene.scene_id, images, objects)) + "\n")
        _atomic_write(sdir / "skips.json", json.dumps(
            {f"{t}/{r}": n for (t, r), n in sorted(skips.items())}, indent=1) + "\n")
        _atomic_write(sdir / "qa.jsonl", "".join(it.dumps() + "\n" for it in items))
        if cfg.render_images:
            for it in items:
                render_item_images(it, scene, Path(out) / "images")
        _atomic_write(done, digest + "\n")
        log.info("%s: %d frames kept, %d items in %.2fs", name, len(kept), len(items),
                 time.perf_counter() - t0)
        return SceneResult(name, "ok", counts=dict(Counter(it.task for it in items)),
                           n_kept=len(kept))
    except Exception as e:  # isolate any scene failure from the rest of the run
        log.error("%s failed: %s", name, e)
        log.debug("%s", traceback.format_exc())
        return SceneResult(name, "failed", reason=f"{type(e).__name__}: {e}")


def _run_one(args):
    return process_scene(*args)


def run_generate(cfg: PipelineConfig, scene_dirs: Sequence, out) -> RunManifest:
    t0 = time.perf_counter()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names = [Path(d).name for d in scene_dirs]
    if len(set(names)) != len(names):
        raise ValueError("scene directories must have distinct names")
    jobs = [(str(d), str(out), cfg) for d in scene_dirs]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(cfg.workers, len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    # single serialization point: merge per-scene files in input order
    lines = []
    for r in results:
        if r.status in ("ok", "cached"):
            lines.append((out / "scenes" / r.name / "qa.jsonl").read_text(encoding="utf-8"))
    _atomic_write(out / "qa.jsonl", "".join(lines))
    totals: Counter = Counter()
    for r in results:
        totals.update(r.counts)
    task_counts = {t: totals[t] for t in TASKS if totals[t]}
    manifest = RunManifest(cfg.config_hash(), results, task_counts, sum(totals.values()),
                           time.perf_counter() - t0)
    _atomic_write(out / "manifest.json", json.dumps(manifest.to_json(), indent=1) + "\n")
    return manifest
