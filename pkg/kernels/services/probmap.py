"""
Probability maps and binarization.

A ProbMap is a grid of per-pixel text-kernel probabilities. Cell (r, c)
covers the pixel [x0+c, x0+c+1) × [y0+r, y0+r+1) of the canvas, so
per-instance windows and full-canvas maps share one coordinate frame.
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True, eq=False)
class ProbMap:
    values: np.ndarray
    x0: int = 0
    y0: int = 0

    def __post_init__(self):
        arr = np.asarray(self.values)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        if arr.ndim != 2:
            raise ValueError(f"Probability map must be 2-D, got shape {arr.shape}")
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("Probability map values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def blank(cls, width: int, height: int) -> "ProbMap":
        return cls(np.zeros((height, width)))

    def __eq__(self, other):
        return (
            isinstance(other, ProbMap)
            and (self.x0, self.y0) == (other.x0, other.y0)
            and self.values.dtype == other.values.dtype
            and np.array_equal(self.values, other.values)
        )


def compose(windows: Iterable[ProbMap], width: int, height: int) -> ProbMap:
    """Paste per-instance windows onto a blank canvas, keeping the cell-wise maximum."""
    canvas = np.zeros((height, width))
    for w in windows:
        r0, c0 = max(w.y0, 0), max(w.x0, 0)
        r1, c1 = min(w.y0 + w.height, height), min(w.x0 + w.width, width)
        if r1 <= r0 or c1 <= c0:
            continue
        patch = w.values[r0 - w.y0:r1 - w.y0, c0 - w.x0:c1 - w.x0]
        np.maximum(canvas[r0:r1, c0:c1], patch, out=canvas[r0:r1, c0:c1])
    return ProbMap(canvas)


def binarize(pred, threshold: float = 0.5) -> np.ndarray:
    """Foreground where probability >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"Binarization threshold must lie in (0, 1), got {threshold}")
    values = pred.values if isinstance(pred, ProbMap) else np.asarray(pred)
    return values >= threshold
