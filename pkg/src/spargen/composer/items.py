"""QA item types, the template bank and placeholder instantiation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from ..errors import MissingBinding, OutOfBounds, ValidationError
from ..tasks import FILL, QA_TYPES, SELECT, TASKS

LETTERS = "ABCD"
COLORS = {"red": (255, 0, 0), "green": (0, 255, 0), "blue": (0, 0, 255)}
PLACEHOLDER = re.compile(r"\[([A-Za-z_][A-Za-z0-9_]*)\]")


@dataclass(frozen=True)
class VisualMark:
    """A colored point or box drawn on one of the item's images.

    ``frame_ref`` is the position of the image in the item's ``image_refs``.
    ``pixels`` is ``(u, v)`` for a point and ``(x0, y0, x1, y1)`` for a box.
    """

    frame_ref: int
    kind: str
    pixels: tuple[float, ...]
    color: str

    def __post_init__(self):
        if self.kind not in ("point", "bbox"):
            raise ValueError(f"unknown mark kind {self.kind!r}")
        if self.color not in COLORS:
            raise ValueError(f"unknown mark color {self.color!r}")
        if len(self.pixels) != (2 if self.kind == "point" else 4):
            raise ValueError(f"{self.kind} mark needs {2 if self.kind == 'point' else 4} coordinates")

    def check_bounds(self, width: int, height: int) -> None:
        xs, ys = self.pixels[0::2], self.pixels[1::2]
        if min(xs) < 0 or min(ys) < 0 or max(xs) > width - 1 or max(ys) > height - 1:
            raise OutOfBounds(f"{self.kind} {self.pixels} outside {width}x{height} image")

    @property
    def phrase(self) -> str:
        return f"{self.color} {'point' if self.kind == 'point' else 'bbox'}"

    def to_json(self) -> dict:
        return {"frame_ref": self.frame_ref, "kind": self.kind,
                "pixels": list(self.pixels), "color": self.color}

    @classmethod
    def from_json(cls, d: Mapping) -> VisualMark:
        return cls(int(d["frame_ref"]), d["kind"], tuple(d["pixels"]), d["color"])


@dataclass(frozen=True)
class QAItem:
    id: str
    scene_id: str
    task: str
    qa_type: str
    view_mode: str
    image_refs: tuple[str, ...]
    question: str
    answer: str
    options: tuple[str, ...] = ()
    gt_numeric: dict | None = None
    marks: tuple[VisualMark, ...] = field(default=())

    FIELDS = ("id", "scene_id", "task", "qa_type", "view_mode", "image_refs", "question",
              "options", "answer", "gt_numeric", "marks")

    def validate(self) -> None:
        """Raise ValidationError when an item invariant is broken."""
        if self.task not in TASKS:
            raise ValidationError(f"{self.id}: unknown task {self.task}")
        if self.qa_type not in QA_TYPES:
            raise ValidationError(f"{self.id}: unknown qa_type {self.qa_type}")
        n = len(self.image_refs)
        if self.view_mode == "single" and n != 1:
            raise ValidationError(f"{self.id}: single-view item with {n} images")
        if self.view_mode == "multi" and not 3 <= n <= 5:
            raise ValidationError(f"{self.id}: multi-view item with {n} images")
        if PLACEHOLDER.search(self.question):
            raise ValidationError(f"{self.id}: unresolved placeholder in question")
        if self.qa_type == SELECT:
            if not 2 <= len(self.options) <= 4:
                raise ValidationError(f"{self.id}: {len(self.options)} options")
            if self.answer not in LETTERS[: len(self.options)]:
                raise ValidationError(f"{self.id}: answer {self.answer!r} is not an option letter")
            for letter, opt in zip(LETTERS, self.options):
                if not opt.startswith(f"{letter}. "):
                    raise ValidationError(f"{self.id}: option {opt!r} lacks letter {letter}")
            texts = [o[3:] for o in self.options]
            if len(set(texts)) != len(texts):
                raise ValidationError(f"{self.id}: duplicate options")
        elif self.options:
            raise ValidationError(f"{self.id}: options on a {self.qa_type} item")
        if self.qa_type == FILL and self.gt_numeric is not None:
            if float(self.answer) != float(self.gt_numeric["value"]):
                raise ValidationError(f"{self.id}: answer does not parse back to gt_numeric")
        for m in self.marks:
            if not 0 <= m.frame_ref < n:
                raise ValidationError(f"{self.id}: mark on missing image {m.frame_ref}")

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in self.FIELDS}
        d["image_refs"] = list(self.image_refs)
        d["options"] = list(self.options)
        d["marks"] = [m.to_json() for m in self.marks]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False)

    @classmethod
    def from_json(cls, d: Mapping) -> QAItem:
        return cls(
            id=d["id"], scene_id=d["scene_id"], task=d["task"], qa_type=d["qa_type"],
            view_mode=d["view_mode"], image_refs=tuple(d["image_refs"]),
            question=d["question"], answer=d["answer"], options=tuple(d.get("options", ())),
            gt_numeric=d.get("gt_numeric"),
            marks=tuple(VisualMark.from_json(m) for m in d.get("marks", ())),
        )

    @property
    def option_count(self) -> int:
        return len(self.options)


def read_jsonl(path) -> list[QAItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    items.append(QAItem.from_json(json.loads(line)))
                except (KeyError, ValueError) as e:
                    raise ValidationError(f"{path}:{n}: {e}") from e
    return items


def write_jsonl(path, items: Sequence[QAItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(it.dumps() + "\n")


# --- templates -------------------------------------------------------------


@dataclass(frozen=True)
class Template:
    family: str
    qa_type: str
    text: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(PLACEHOLDER.findall(self.text)))


@dataclass(frozen=True)
class TemplateBank:
    questions: dict
    answers: dict
    instructions: dict

    def templates(self, family: str, qa_type: str) -> list[Template]:
        return [Template(family, qa_type, t) for t in self.questions[family][qa_type]]

    def answer_templates(self, family: str) -> list[str]:
        return list(self.answers[family])


@lru_cache(maxsize=1)
def load_bank() -> TemplateBank:
    raw = json.loads(resources.files("spargen.composer").joinpath("templates.json").read_text("utf-8"))
    return TemplateBank(raw["questions"], raw["answers"], raw["instructions"])


def fill(text: str, bindings: Mapping[str, object]) -> str:
    """Replace every ``[name]`` placeholder; MissingBinding names the first gap."""

    def sub(m):
        key = m.group(1)
        if key not in bindings:
            raise MissingBinding(key)
        return str(bindings[key])

    return PLACEHOLDER.sub(sub, text)


def instantiate(template: Template, bindings: Mapping[str, object], marks=(), *,
                item_id: str = "", scene_id: str = "", task: str | None = None,
                image_refs: Sequence[str] = (), answer: str = "", options: Sequence[str] = (),
                gt_numeric: dict | None = None, suffix: str = "") -> QAItem:
    """Build a QAItem from a template; ``suffix`` (instructions, options) is appended verbatim."""
    question = fill(template.text, bindings)
    if suffix:
        question = f"{question} {suffix}"
    if task is None:
        task = next(n for n, t in TASKS.items() if t.family == template.family)
    return QAItem(
        id=item_id, scene_id=scene_id, task=task, qa_type=template.qa_type,
        view_mode=TASKS[task].view_mode, image_refs=tuple(image_refs), question=question,
        answer=answer, options=tuple(options), gt_numeric=gt_numeric, marks=tuple(marks),
    )
