"""
Polygon offsetting: shrink boundaries into text kernels and expand kernels back.

Each edge is translated along its outward normal by the margin and
neighbouring translated edges are joined at their intersection (miter join).
Loops created by the translation are split off and the largest loop that
keeps the source orientation is returned.
"""

import logging
from typing import List

import numpy as np

from geometry.exceptions import CollapseError
from geometry.services.polygons import (
    Polygon,
    area,
    cross_sum,
    crossing_pairs,
    drop_coincident,
)

logger = logging.getLogger(__name__)

_MIN_LOOP_AREA = 1e-9


def offset(p: Polygon, margin: float) -> Polygon:
    """
    Offset a polygon by a signed margin.

    Args:
        p: source polygon (either orientation)
        margin: pixels; negative shrinks toward a kernel, positive expands

    Returns:
        The offset polygon, oriented like the screen-clockwise copy of p

    Raises:
        CollapseError: the inward offset consumes the polygon
    """
    if margin == 0:
        return p
    ring = p.points
    if cross_sum(ring) < 0:
        ring = ring[::-1]

    moved = _miter_offset(ring, float(margin))
    loops = _split_loops(moved)
    kept = [loop for loop in loops if cross_sum(loop) > 2 * _MIN_LOOP_AREA]
    if not kept:
        raise CollapseError(f"Offset by {margin:.3f} px collapses a polygon of area {area(p):.3f}")
    if len(loops) > 1:
        logger.debug("offset(%.3f) produced %d loops, keeping the largest", margin, len(loops))
    best = max(kept, key=cross_sum)
    return Polygon(best)


def _miter_offset(ring: np.ndarray, margin: float) -> np.ndarray:
    """Translate every edge by margin along its outward normal and intersect neighbours."""
    start = ring
    direction = np.roll(ring, -1, axis=0) - ring
    length = np.hypot(direction[:, 0], direction[:, 1])
    # outward normal of a screen-clockwise ring
    normal = np.stack([direction[:, 1], -direction[:, 0]], axis=1) / length[:, None]
    shifted = start + margin * normal

    prev_dir = np.roll(direction, 1, axis=0)
    prev_shifted = np.roll(shifted, 1, axis=0)
    denom = prev_dir[:, 0] * direction[:, 1] - prev_dir[:, 1] * direction[:, 0]
    parallel = np.abs(denom) <= 1e-12 * np.roll(length, 1) * length

    delta = shifted - prev_shifted
    safe = np.where(parallel, 1.0, denom)
    t = (delta[:, 0] * direction[:, 1] - delta[:, 1] * direction[:, 0]) / safe
    joined = prev_shifted + t[:, None] * prev_dir
    out = np.where(parallel[:, None], ring + margin * normal, joined)
    return out


def _segment_intersection(a1, b1, a2, b2) -> np.ndarray:
    d1 = b1 - a1
    d2 = b2 - a2
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) <= 1e-15:
        # collinear overlap: any shared point splits the loop consistently
        for candidate in (a2, b2, a1, b1):
            if _on_segment(candidate, a1, b1) and _on_segment(candidate, a2, b2):
                return candidate.copy()
        return 0.5 * (b1 + a2)
    t = ((a2[0] - a1[0]) * d2[1] - (a2[1] - a1[1]) * d2[0]) / denom
    return a1 + t * d1


def _on_segment(q, a, b) -> bool:
    lo = np.minimum(a, b) - 1e-12
    hi = np.maximum(a, b) + 1e-12
    return bool(np.all(q >= lo) and np.all(q <= hi))


def _split_loops(ring: np.ndarray) -> List[np.ndarray]:
    """Split a self-intersecting ring into simple loops at its crossings."""
    done = []
    stack = [ring]
    while stack:
        current = drop_coincident(stack.pop())
        if len(current) < 3:
            continue
        pairs = crossing_pairs(current)
        if len(pairs) == 0:
            done.append(current)
            continue
        i, j = (int(v) for v in pairs[0])
        n = len(current)
        if j == i + 1 or (i == 0 and j == n - 1):
            # adjacent edges folding back onto each other: drop the shared vertex
            stack.append(np.delete(current, j if j == i + 1 else 0, axis=0))
            continue
        x = _segment_intersection(current[i], current[(i + 1) % n], current[j], current[(j + 1) % n])
        inner = np.vstack([x[None, :], current[i + 1:j + 1]])
        outer = np.vstack([current[:i + 1], x[None, :], current[j + 1:]])
        stack.append(outer)
        stack.append(inner)
    return done
