"""Task taxonomy: families, view modes, answer formats and benchmark levels."""

from __future__ import annotations

from dataclasses import dataclass

FILL, SELECT, SENTENCE = "fill", "select", "sentence"
QA_TYPES = (FILL, SELECT, SENTENCE)


@dataclass(frozen=True)
class TaskInfo:
    name: str
    family: str  # template family in templates.json
    view_mode: str  # "single" | "multi"
    qa_types: tuple[str, ...]
    metric: str  # "mra" | "accuracy" | "motion"
    level: str | None = None  # benchmark level; None for tasks outside the benchmark

    @property
    def bench_qa_type(self) -> str:
        """Answer format used when the task is scored in the benchmark."""
        return SELECT if self.metric == "accuracy" else FILL

    @property
    def multi(self) -> bool:
        return self.view_mode == "multi"


_NUM = (FILL, SELECT, SENTENCE)
_REL = (SELECT, SENTENCE)

TASKS: dict[str, TaskInfo] = {t.name: t for t in [
    TaskInfo("Depth-OC", "depth_oc", "single", _NUM, "mra", "low"),
    TaskInfo("Depth-OC-MV", "depth_oc_mv", "multi", _NUM, "mra", "low"),
    TaskInfo("Depth-OO", "depth_oo", "single", _NUM, "mra", "low"),
    TaskInfo("Depth-OO-MV", "depth_oo", "multi", _NUM, "mra", "low"),
    TaskInfo("Dist-OC", "dist_oc", "single", _NUM, "mra", "low"),
    TaskInfo("Dist-OC-MV", "dist_oc", "multi", _NUM, "mra", "low"),
    TaskInfo("Dist-OO", "dist_oo", "single", _NUM, "mra", "low"),
    TaskInfo("Dist-OO-MV", "dist_oo", "multi", _NUM, "mra", "low"),
    TaskInfo("PosMatch", "posmatch", "multi", (FILL, SELECT), "accuracy", "medium"),
    TaskInfo("CamMotion", "campose", "multi", _NUM, "accuracy", "medium"),
    TaskInfo("ViewChgI", "viewchg", "multi", (FILL, SENTENCE), "motion", "medium"),
    TaskInfo("DistI-OO", "disti_oo", "single", _NUM, "accuracy", "high"),
    TaskInfo("DistI-OO-MV", "disti_oo", "multi", _NUM, "accuracy", "high"),
    TaskInfo("ObjRel-OO", "objrel_oo", "single", _REL, "accuracy", "high"),
    TaskInfo("ObjRel-OC-MV", "objrel_oc", "multi", _REL, "accuracy", "high"),
    TaskInfo("ObjRel-OO-MV", "objrel_oo", "multi", _REL, "accuracy", "high"),
    TaskInfo("SpImag-OC", "spimag_oc", "single", _REL, "accuracy", "high"),
    TaskInfo("SpImag-OO", "spimag_oo", "single", _REL, "accuracy", "high"),
    TaskInfo("SpImag-OC-MV", "spimag_oc", "multi", _REL, "accuracy", "high"),
    TaskInfo("SpImag-OO-MV", "spimag_oo", "multi", _REL, "accuracy", "high"),
    # generated for training data only, not part of the benchmark
    TaskInfo("SpVol", "spvol", "single", _NUM, "mra"),
    TaskInfo("ObjCount", "objcount", "multi", _NUM, "mra"),
    TaskInfo("RoomSize", "roomsize", "multi", _NUM, "mra"),
    TaskInfo("AppearOrder", "appearorder", "multi", _NUM, "accuracy"),
    TaskInfo("ObjFrameLoc", "framelocation", "multi", _NUM, "accuracy"),
]}

LEVELS = ("low", "medium", "high")
BENCHMARK_TASKS = tuple(name for name, t in TASKS.items() if t.level is not None)


def task_level(name: str) -> str:
    lvl = TASKS[name].level
    if lvl is None:
        raise KeyError(f"{name} is not a benchmark task")
    return lvl
