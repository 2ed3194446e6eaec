"""Benchmark assembly and scoring.

Numeric answers are scored with MRA, the mean over relative-error
thresholds 0.05, 0.10, ..., 0.50 of ``1{|pred - gt| / gt < theta}``.
Multiple-choice answers are scored by accuracy. Unparseable responses
score 0 and are counted separately.
"""

from __future__ import annotations

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .composer.items import LETTERS, QAItem
from .tasks import BENCHMARK_TASKS, FILL, LEVELS, SELECT, TASKS

MRA_THRESHOLDS = tuple(k / 20 for k in range(1, 11))
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_UPPER = re.compile(r"(?<![A-Za-z])([A-D])(?![A-Za-z])")
_LOWER = re.compile(r"(?<![A-Za-z])([a-d])(?![A-Za-z])")


# --- parsing ---------------------------------------------------------------


def parse_choice(text: str | None) -> str | None:
    """First standalone option letter; ``None`` when there is none.

    Uppercase letters win over lowercase ones so that an article such as
    "a" in running prose does not shadow an explicit "B".
    """
    if not text:
        return None
    m = _UPPER.search(text) or _LOWER.search(text)
    return m.group(1).upper() if m else None


def parse_number(text: str | None) -> float | None:
    if not text:
        return None
    m = _NUMBER.search(text)
    return float(m.group(0)) if m else None


_MOTION = [
    (re.compile(r"move\s*(right|left)\s*:\s*(" + _NUMBER.pattern + ")", re.I), "left"),
    (re.compile(r"move\s*(down|up)\s*:\s*(" + _NUMBER.pattern + ")", re.I), "up"),
    (re.compile(r"move\s*(forward|back)\s*:\s*(" + _NUMBER.pattern + ")", re.I), "back"),
    (re.compile(r"rotate\s*(down|up)\s*:\s*(" + _NUMBER.pattern + ")", re.I), "up"),
    (re.compile(r"rotate\s*(right|left)\s*:\s*(" + _NUMBER.pattern + ")", re.I), "left"),
]


def parse_motion(text: str | None) -> list[tuple[str, float]] | None:
    """The five ``(direction word, signed value)`` fields of a motion answer.

    The value is negative when the word is the negative direction (left,
    up, back); ``None`` if any field is missing.
    """
    if not text:
        return None
    out = []
    for rx, neg in _MOTION:
        m = rx.search(text)
        if not m:
            return None
        word = m.group(1).lower()
        v = abs(float(m.group(2)))
        out.append((word, -v if word == neg else v))
    return out


# --- scoring ---------------------------------------------------------------


def score_mra(pred: float, gt: float) -> float:
    if not gt > 0:
        raise ValueError("MRA needs a positive ground truth")
    rho = abs(pred - gt) / gt
    return sum(rho < t for t in MRA_THRESHOLDS) / len(MRA_THRESHOLDS)


def _relative_hits(pred: float, gt: float, floor: float) -> float:
    rho = abs(pred - gt) / max(abs(gt), floor)
    return sum(rho < t for t in MRA_THRESHOLDS) / len(MRA_THRESHOLDS)


def score_motion(pred_text: str, gt_text: str, floor: float = 0.1) -> float | None:
    """Half translation MRA (3 fields), half direction agreement (5 fields).

    Relative errors on translations use ``max(|gt|, floor)`` as denominator
    so that a zero ground-truth component stays scorable.
    """
    pred, gt = parse_motion(pred_text), parse_motion(gt_text)
    if gt is None:
        raise ValueError(f"ground-truth motion {gt_text!r} does not parse")
    if pred is None:
        return None
    mra = np.mean([_relative_hits(p[1], g[1], floor) for p, g in zip(pred[:3], gt[:3])])
    direction = np.mean([p[0] == g[0] for p, g in zip(pred, gt)])
    return float(0.5 * mra + 0.5 * direction)


def _normalized(s: str) -> str:
    return re.sub(r"\s+", "", s).lower().rstrip(".")


def score_item(item: QAItem, response: str | None) -> float | None:
    """Score in [0, 1]; ``None`` means the response could not be parsed."""
    if item.qa_type == SELECT:
        letter = parse_choice(response)
        if letter is None:
            return None
        return float(letter == item.answer)
    if item.qa_type != FILL:
        raise ValueError(f"{item.id}: {item.qa_type} items are not scored")
    if TASKS[item.task].metric == "motion":
        return score_motion(response or "", item.answer)
    if item.gt_numeric is not None:
        pred = parse_number(response)
        return None if pred is None else score_mra(pred, float(item.gt_numeric["value"]))
    if not response or not response.strip():
        return None
    return float(_normalized(response) == _normalized(item.answer))


def score_task(items: Sequence[QAItem], responses: Mapping[str, str]) -> float:
    """100 x mean item score; missing or unparseable responses count as 0."""
    if not items:
        raise ValueError("no items")
    scores = [score_item(it, responses.get(it.id)) or 0.0 for it in items]
    return 100.0 * float(np.mean(scores))


@dataclass
class EvalReport:
    per_task: dict[str, float]
    per_level: dict[str, float]
    overall: float
    n_evaluated: dict[str, int]
    n_unparseable: dict[str, int]
    baselines: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        def r(x):
            return None if x is None else round(x, 4)

        return {
            "per_task": {k: r(v) for k, v in self.per_task.items()},
            "per_level": {k: r(v) for k, v in self.per_level.items()},
            "overall": r(self.overall),
            "n_evaluated": dict(self.n_evaluated),
            "n_unparseable": dict(self.n_unparseable),
            "baselines": {k: {b: r(v) for b, v in d.items()} for k, d in self.baselines.items()},
        }

    def summary(self) -> str:
        """Per-level table in the Avg / Low / Medium / High layout."""
        head = f"{'Avg.':>8}" + "".join(f"{lvl.capitalize():>8}" for lvl in LEVELS)
        row = f"{self.overall:8.2f}" + "".join(
            f"{self.per_level[lvl]:8.2f}" if lvl in self.per_level else f"{'-':>8}" for lvl in LEVELS)
        lines = [head, row, ""]
        for task, s in self.per_task.items():
            lines.append(f"{task:<14}{s:8.2f}  (n={self.n_evaluated[task]}, "
                         f"unparseable={self.n_unparseable[task]})")
        return "\n".join(lines)


def level_means(per_task: Mapping[str, float]) -> dict[str, float]:
    groups: dict[str, list[float]] = defaultdict(list)
    for task, s in per_task.items():
        lvl = TASKS[task].level
        if lvl is not None:
            groups[lvl].append(s)
    return {lvl: float(np.mean(groups[lvl])) for lvl in LEVELS if groups[lvl]}


def evaluate(items: Sequence[QAItem], responses: Mapping[str, str]) -> EvalReport:
    by_task: dict[str, list[QAItem]] = defaultdict(list)
    for it in items:
        by_task[it.task].append(it)
    order = [t for t in TASKS if t in by_task]
    per_task, n_eval, n_bad = {}, {}, {}
    for t in order:
        scores = [score_item(it, responses.get(it.id)) for it in by_task[t]]
        n_eval[t] = len(scores)
        n_bad[t] = sum(s is None for s in scores)
        per_task[t] = 100.0 * float(np.mean([s or 0.0 for s in scores]))
    per_level = level_means(per_task)
    overall = float(np.mean(list(per_task.values()))) if per_task else 0.0
    return EvalReport(per_task, per_level, overall, n_eval, n_bad, chance_baselines(items))


# --- baselines -------------------------------------------------------------


def _mode(values: Sequence, rng: random.Random | None):
    counts = Counter(values)
    top = max(counts.values())
    ties = sorted((v for v, c in counts.items() if c == top), key=str)
    return rng.choice(ties) if rng is not None and len(ties) > 1 else ties[0]


def chance_baselines(items: Sequence[QAItem], rng: random.Random | None = None) -> dict[str, dict]:
    """Per task: ``random`` (uniform guess, select items only) and ``frequency``.

    The frequency baseline always answers the task's most common answer
    (letter for select items, value or string for fill items) and is scored
    with the task's own metric. Ties between equally common answers are
    broken by ``rng`` when given, else by sort order.
    """
    by_task: dict[str, list[QAItem]] = defaultdict(list)
    for it in items:
        by_task[it.task].append(it)
    out = {}
    for task in [t for t in TASKS if t in by_task]:
        group = by_task[task]
        select = [it for it in group if it.qa_type == SELECT]
        rand = 100.0 * float(np.mean([1.0 / len(it.options) for it in select])) if select else None
        if all(it.qa_type == SELECT for it in group):
            guess = _mode([it.answer for it in group], rng)
            freq = 100.0 * float(np.mean([it.answer == guess for it in group]))
        else:
            fills = [it for it in group if it.qa_type == FILL]
            if fills and all(it.gt_numeric is not None for it in fills):
                guess = _mode([float(it.gt_numeric["value"]) for it in fills], rng)
                responses = {it.id: repr(guess) for it in fills}
            else:
                guess = _mode([it.answer for it in fills], rng)
                responses = {it.id: guess for it in fills}
            freq = score_task(fills, responses) if fills else None
        out[task] = {"random": rand, "frequency": freq}
    return out


def baseline_average(baselines: Mapping[str, dict], kind: str = "frequency") -> float:
    vals = [d[kind] for d in baselines.values() if d.get(kind) is not None]
    return float(np.mean(vals)) if vals else float("nan")


# --- benchmark sampling ----------------------------------------------------


def sample_benchmark(dataset: Iterable[QAItem], n_per_task: int, seed: int,
                     tasks: Sequence[str] = BENCHMARK_TASKS,
                     qa_type: str | None = None) -> list[QAItem]:
    """Up to ``n_per_task`` items per benchmark task, without replacement.

    Only items in the task's scored answer format are eligible (fill for
    numeric and motion tasks, select otherwise) unless ``qa_type`` names one
    format to use for every task. Each task draws from its own
    seeded stream over the id-sorted pool, so the result does not depend on
    input order.
    """
    pools: dict[str, list[QAItem]] = defaultdict(list)
    for it in dataset:
        want = qa_type or TASKS[it.task].bench_qa_type if it.task in TASKS else None
        if it.task in tasks and it.qa_type == want:
            pools[it.task].append(it)
    out: list[QAItem] = []
    for task in tasks:
        pool = sorted(pools.get(task, []), key=lambda it: it.id)
        ids = {it.id for it in pool}
        if len(ids) != len(pool):
            raise ValueError(f"{task}: duplicate item ids")
        rng = random.Random(f"bench:{seed}:{task}")
        picked = rng.sample(pool, min(n_per_task, len(pool)))
        out.extend(sorted(picked, key=lambda it: it.id))
    return out


def letter_frequencies(items: Iterable[QAItem]) -> dict[str, float]:
    answers = [it.answer for it in items if it.qa_type == SELECT]
    n = len(answers)
    return {c: (answers.count(c) / n if n else 0.0) for c in LETTERS}
