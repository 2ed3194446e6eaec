"""Turning geometric ground truth into QA items."""

from .generate import TaskConfig, generate_dataset
from .items import QAItem, Template, VisualMark, instantiate, load_bank, read_jsonl, write_jsonl
from .options import make_numeric_options, make_relation_options
from .render import render_marks

__all__ = [
    "QAItem", "Template", "TaskConfig", "VisualMark", "generate_dataset", "instantiate",
    "load_bank", "make_numeric_options", "make_relation_options", "read_jsonl", "render_marks",
    "write_jsonl",
]
