"""
Kernel contour extraction from binary masks.

Components are labelled with 8-connectivity. Each component's outer border
is followed along pixel edges, so a lone pixel at (r, c) yields the unit
square [c, c+1] × [r, r+1], and the traced polygon's area equals the number
of pixels in the (hole-filled) component.
"""

import logging
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from geometry.services.polygons import Polygon

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
DEFAULT_MIN_AREA = 4.0


def _repair_pinches(m: np.ndarray) -> np.ndarray:
    """Fill one cell of every diagonal-only contact so the border is a single loop."""
    m = m.copy()
    while True:
        a, b = m[:-1, :-1], m[:-1, 1:]
        c, d = m[1:, :-1], m[1:, 1:]
        falling = a & d & ~b & ~c
        rising = b & c & ~a & ~d
        if not (falling.any() or rising.any()):
            return m
        rows, cols = np.nonzero(falling)
        m[rows, cols + 1] = True
        rows, cols = np.nonzero(rising)
        m[rows, cols] = True


def _boundary_edges(m: np.ndarray) -> dict:
    """Directed pixel edges with the component on their right (screen-clockwise)."""
    pad = np.pad(m, 1)
    up = pad[:-2, 1:-1]
    down = pad[2:, 1:-1]
    left = pad[1:-1, :-2]
    right = pad[1:-1, 2:]

    edges = {}
    for r, c in zip(*np.nonzero(m & ~up)):
        edges[(c, r)] = (c + 1, r)
    for r, c in zip(*np.nonzero(m & ~right)):
        edges[(c + 1, r)] = (c + 1, r + 1)
    for r, c in zip(*np.nonzero(m & ~down)):
        edges[(c + 1, r + 1)] = (c, r + 1)
    for r, c in zip(*np.nonzero(m & ~left)):
        edges[(c, r + 1)] = (c, r)
    return edges


def trace_border(m: np.ndarray) -> List[Tuple[int, int]]:
    """
    Outer border of a single 4-connected, hole-free component.

    Returns:
        corner vertices (x, y) in mask pixel units, clockwise on screen,
        starting at the top-left corner of the first row-major pixel, with
        collinear runs merged
    """
    edges = _boundary_edges(m)
    rows, cols = np.nonzero(m)
    start = (int(cols[0]), int(rows[0]))
    loop = [start]
    cur = edges[start]
    while cur != start:
        loop.append(cur)
        cur = edges[cur]

    pts = np.array(loop, dtype=np.int64)
    prev_dir = pts - np.roll(pts, 1, axis=0)
    next_dir = np.roll(pts, -1, axis=0) - pts
    corner = np.any(prev_dir != next_dir, axis=1)
    return [(int(x), int(y)) for x, y in pts[corner]]


def extract_kernels(mask, min_area: float = DEFAULT_MIN_AREA, origin: Tuple[int, int] = (0, 0)) -> List[Polygon]:
    """
    Polygons of the 8-connected foreground components of a binary mask.

    Args:
        mask: H×W booleans
        min_area: components whose traced polygon is smaller are dropped (px²)
        origin: canvas position (x0, y0) of mask cell (0, 0)

    Returns:
        one simple polygon per surviving component, in row-major order of
        each component's first pixel
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    kernels = []
    for k, window in enumerate(ndimage.find_objects(labels), start=1):
        if window is None:
            continue
        comp = labels[window] == k
        comp = ndimage.binary_fill_holes(comp)
        comp = ndimage.binary_fill_holes(_repair_pinches(comp))
        pixel_count = int(np.count_nonzero(comp))
        if pixel_count < min_area:
            continue
        corners = np.array(trace_border(comp), dtype=np.float64)
        corners += [window[1].start + origin[0], window[0].start + origin[1]]
        kernels.append(Polygon(corners))
    logger.debug("extract_kernels: %d components, %d kept", count, len(kernels))
    return kernels
