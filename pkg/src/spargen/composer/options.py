"""Distractor synthesis for multiple-choice items.

Every builder returns the option texts in display order plus the index of
the correct one; the order comes from a shuffle driven by the caller's
seeded ``random.Random`` so answer letters stay uniformly distributed.
"""

from __future__ import annotations

import itertools
import random
from typing import Callable, Sequence

from ..taskgeom import SpatialRelation, round_to
from .items import LETTERS

MAX_TRIES = 100


def _place(correct, distractors: Sequence, rng: random.Random):
    opts = [correct, *distractors]
    order = list(range(len(opts)))
    rng.shuffle(order)
    return [opts[i] for i in order], order.index(0)


def make_numeric_options(gt: float, step: float, rng: random.Random, n: int = 4):
    """``n`` distinct positive values on the ``step`` grid, one of them ``gt``.

    Distractors are ``gt * (1 +/- U(0.1, 0.6))`` snapped to the grid. After
    ``MAX_TRIES`` draws without enough distinct values, the remaining slots
    are filled from grid neighbours ``gt +/- k*step`` in random order.
    """
    if not gt > 0:
        raise ValueError("gt must be positive")
    gt = round_to(gt, step)
    chosen: list[float] = []
    tries = 0
    while len(chosen) < n - 1 and tries < MAX_TRIES:
        tries += 1
        sign = rng.choice((-1.0, 1.0))
        v = round_to(gt * (1.0 + sign * rng.uniform(0.1, 0.6)), step)
        if v > 0 and v != gt and v not in chosen:
            chosen.append(v)
    k = 1
    while len(chosen) < n - 1:
        near = [round_to(gt + s * k * step, step) for s in (-1.0, 1.0)]
        rng.shuffle(near)
        for v in near:
            if v > 0 and v != gt and v not in chosen and len(chosen) < n - 1:
                chosen.append(v)
        k += 1
    return _place(gt, chosen, rng)


_AXES = (("left", "right", None), ("above", "below", None), ("front", "behind", None))
ALL_TRIPLES = list(itertools.product(*_AXES))


def relation_text(triple) -> str:
    return ", ".join(v or "" for v in triple)


def make_relation_options(gt: SpatialRelation, rng: random.Random):
    """The ground-truth triple plus three of the other 26 combinations."""
    truth = gt.triple()
    others = [t for t in ALL_TRIPLES if t != truth]
    picks = rng.sample(others, 3)
    opts, idx = _place(truth, picks, rng)
    return [relation_text(t) for t in opts], idx


def make_choice_options(correct: str, pool: Sequence[str], rng: random.Random, n: int = 4):
    """``correct`` plus ``n - 1`` distinct distractors sampled from ``pool``."""
    pool = sorted({p for p in pool if p != correct})
    if len(pool) < n - 1:
        raise ValueError(f"need {n - 1} distractors, have {len(pool)}")
    return _place(correct, rng.sample(pool, n - 1), rng)


def make_generated_options(correct: str, draw: Callable[[], str], rng: random.Random,
                           n: int = 4, tries: int = 200):
    """Distractors from repeated calls to ``draw`` until ``n - 1`` distinct ones appear."""
    seen: list[str] = []
    for _ in range(tries):
        d = draw()
        if d != correct and d not in seen:
            seen.append(d)
            if len(seen) == n - 1:
                return _place(correct, seen, rng)
    raise ValueError("could not draw enough distinct distractors")


def lettered(options: Sequence[str]) -> list[str]:
    return [f"{LETTERS[i]}. {o}" for i, o in enumerate(options)]


def letters_phrase(n: int) -> str:
    """"A or B", "A, B or C", "A, B, C or D"."""
    ls = list(LETTERS[:n])
    return f"{', '.join(ls[:-1])} or {ls[-1]}"
