"""Pipeline configuration: dataset profiles, file loading, env overrides.

A config file (YAML or JSON) may set any of::

    profile: scannet            # scannet | scannetpp | structured3d
    subsample: {d_th: 0.5, theta_th: 15}   # or null to keep every frame
    pose_convention: camera_to_world
    up_axis: [0, 0, 1]          # or null to use each scene's own up axis
    visibility: {tau_v: 0.3, a_min: 900, raster_scale: 0.5, max_depth: 20}
    relation: {indist_threshold: 0.1, round_step: 0.1, lookat_max_tilt: 60, angle_step: 5}
    max_per_scene: 20           # default for every task
    tasks: {Depth-OC: 20, PosMatch: {max_per_scene: 10, qa_types: [select]}}
    seed: 0
    workers: 1
    render_images: true

Profile values are applied first, then the file, then ``SPARGEN_*``
environment variables, then explicit command-line flags.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from .composer.generate import DEFAULT_MAX_PER_SCENE, TaskConfig, normalize_task_configs
from .errors import ConfigError
from .keyframes import SubsampleConfig
from .scene import POSE_CONVENTIONS
from .taskgeom import RelationConfig
from .tasks import QA_TYPES, TASKS
from .visibility import VisibilityConfig

PROFILES: dict[str, dict] = {
    "scannet": {"subsample": {"d_th": 0.5, "theta_th": 15.0}, "pose_convention": "camera_to_world"},
    "scannetpp": {"subsample": {"d_th": 0.5, "theta_th": 45.0}, "pose_convention": "camera_to_world"},
    # panoramic-style renders are already sparse; frames are not filtered
    "structured3d": {"subsample": None, "pose_convention": "camera_to_world"},
}

TOP_KEYS = {"profile", "subsample", "pose_convention", "up_axis", "visibility", "relation",
            "max_per_scene", "tasks", "seed", "workers", "render_images"}
ENV_KEYS = {"PROFILE": ("profile", str), "SEED": ("seed", int), "WORKERS": ("workers", int),
            "MAX_PER_SCENE": ("max_per_scene", int), "POSE_CONVENTION": ("pose_convention", str),
            "RENDER_IMAGES": ("render_images", lambda s: s.lower() in ("1", "true", "yes"))}


@dataclass(frozen=True)
class PipelineConfig:
    profile: str = "scannet"
    subsample: SubsampleConfig | None = SubsampleConfig(0.5, 15.0)
    pose_convention: str = "camera_to_world"
    up_axis: tuple[float, float, float] | None = None
    visibility: VisibilityConfig = VisibilityConfig()
    relation: RelationConfig = RelationConfig()
    tasks: dict[str, TaskConfig] = field(
        default_factory=lambda: {name: TaskConfig() for name in TASKS})
    seed: int = 0
    workers: int = 1
    render_images: bool = True

    def output_settings(self) -> dict:
        """Everything that influences generated content (not worker count)."""
        d = {
            "profile": self.profile,
            "subsample": None if self.subsample is None else dataclasses.asdict(self.subsample),
            "pose_convention": self.pose_convention,
            "up_axis": None if self.up_axis is None else list(self.up_axis),
            "visibility": dataclasses.asdict(self.visibility),
            "relation": dataclasses.asdict(self.relation),
            "tasks": {k: {"max_per_scene": v.max_per_scene,
                          "qa_types": None if v.qa_types is None else list(v.qa_types)}
                      for k, v in self.tasks.items()},
            "seed": self.seed,
            "render_images": self.render_images,
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.output_settings(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def build_config(raw: Mapping | None = None, env: Mapping[str, str] | None = None,
                 **overrides) -> PipelineConfig:
    """Validate a raw mapping (plus env and explicit overrides) into a PipelineConfig."""
    merged = dict(raw or {})
    unknown = set(merged) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    env = os.environ if env is None else env
    for suffix, (key, conv) in ENV_KEYS.items():
        if f"SPARGEN_{suffix}" in env:
            try:
                merged[key] = conv(env[f"SPARGEN_{suffix}"])
            except ValueError as e:
                raise ConfigError(f"SPARGEN_{suffix}: {e}") from e
    merged.update({k: v for k, v in overrides.items() if v is not None})

    profile = merged.get("profile", "scannet")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    base = PROFILES[profile]
    sub_raw = merged["subsample"] if "subsample" in merged else base["subsample"]
    subsample = None if sub_raw is None else _section(SubsampleConfig, sub_raw, "subsample")
    pose_convention = merged.get("pose_convention", base["pose_convention"])
    if pose_convention not in POSE_CONVENTIONS:
        raise ConfigError(f"pose_convention must be one of {POSE_CONVENTIONS}")

    up = merged.get("up_axis")
    if up is not None:
        if len(up) != 3 or not any(float(x) for x in up):
            raise ConfigError("up_axis must be a non-zero 3-vector")
        up = tuple(float(x) for x in up)

    default_max = int(merged.get("max_per_scene", DEFAULT_MAX_PER_SCENE))
    raw_tasks = merged.get("tasks")
    if raw_tasks is None:
        tasks = {name: TaskConfig(default_max) for name in TASKS}
    else:
        if not isinstance(raw_tasks, Mapping):
            raise ConfigError("tasks: expected a mapping of task name to settings")
        for name, t in raw_tasks.items():
            if isinstance(t, Mapping):
                bad = set(t) - {"max_per_scene", "qa_types"}
                if bad:
                    raise ConfigError(f"tasks.{name}: unknown keys {sorted(bad)}")
                for q in t.get("qa_types") or ():
                    if q not in QA_TYPES:
                        raise ConfigError(f"tasks.{name}: unknown qa_type {q!r}")
        try:
            tasks = normalize_task_configs(
                {k: (v if v is not None else default_max) for k, v in raw_tasks.items()})
        except (KeyError, ValueError) as e:
            raise ConfigError(f"tasks: {e}") from e

    try:
        cfg = PipelineConfig(
            profile=profile,
            subsample=subsample,
            pose_convention=pose_convention,
            up_axis=up,
            visibility=_section(VisibilityConfig, merged.get("visibility"), "visibility"),
            relation=_section(RelationConfig, merged.get("relation"), "relation"),
            tasks=tasks,
            seed=int(merged.get("seed", 0)),
            workers=int(merged.get("workers", 1)),
            render_images=bool(merged.get("render_images", True)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    return cfg


def load_config(path=None, env: Mapping[str, str] | None = None, **overrides) -> PipelineConfig:
    raw = None
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except FileNotFoundError as e:
            raise ConfigError(f"{p}: file not found") from e
        try:
            raw = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"{p}: {e}") from e
        if raw is not None and not isinstance(raw, Mapping):
            raise ConfigError(f"{p}: top level must be a mapping")
    return build_config(raw, env, **overrides)
