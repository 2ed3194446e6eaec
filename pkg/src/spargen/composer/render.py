"""Drawing visual prompts (colored points and boxes) onto images."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .items import COLORS, VisualMark

POINT_RADIUS = 6
BOX_WIDTH = 3
DRAW_ORDER = ("red", "green", "blue")


def _disk(img: np.ndarray, u: float, v: float, color) -> None:
    h, w = img.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    img[(xx - u) ** 2 + (yy - v) ** 2 <= POINT_RADIUS**2] = color


def _outline(img: np.ndarray, box, color) -> None:
    x0, y0, x1, y1 = (int(round(c)) for c in box)
    for k in range(BOX_WIDTH):
        # rings grow inward so the outline never leaves the image
        a0, b0 = min(x0 + k, x1), min(y0 + k, y1)
        a1, b1 = max(x1 - k, a0), max(y1 - k, b0)
        img[b0, a0:a1 + 1] = color
        img[b1, a0:a1 + 1] = color
        img[b0:b1 + 1, a0] = color
        img[b0:b1 + 1, a1] = color


def render_marks(image: np.ndarray, marks: Sequence[VisualMark]) -> np.ndarray:
    """Copy of ``image`` (HxWx3 uint8) with ``marks`` drawn red, then green, then blue.

    Raises OutOfBounds for a mark outside the image. Marks whose ``frame_ref``
    refers to another image must be filtered out by the caller.
    """
    img = np.array(image, dtype=np.uint8, copy=True)
    h, w = img.shape[:2]
    for m in marks:
        m.check_bounds(w, h)
    for color in DRAW_ORDER:
        for m in marks:
            if m.color != color:
                continue
            if m.kind == "point":
                _disk(img, m.pixels[0], m.pixels[1], COLORS[color])
            else:
                _outline(img, m.pixels, COLORS[color])
    return img
