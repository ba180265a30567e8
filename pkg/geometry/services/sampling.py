"""
Uniform contour sampling and canonical vertex ordering.

A contour is N points at equal arc-length spacing along a polygon boundary,
ordered clockwise on screen and starting at the boundary point nearest the
upper-left corner of the axis-aligned bounding box.
"""

from dataclasses import dataclass

import numpy as np

from geometry.exceptions import GeometryError
from geometry.services.polygons import (
    BoundingBox,
    Polygon,
    as_ring,
    cross_sum,
    drop_coincident,
)

MIN_VERTICES = 4
DEFAULT_VERTICES = 128


@dataclass(frozen=True, eq=False)
class Contour:
    """Fixed-length, canonically ordered vertex sequence (N×2 pixels)."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) < MIN_VERTICES:
            raise GeometryError(f"Contour needs at least {MIN_VERTICES} points, got {len(pts)}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    def __len__(self):
        return self.n

    def as_polygon(self, check_simple: bool = True) -> Polygon:
        return Polygon(drop_coincident(self.points), check_simple=check_simple)

    def bbox(self) -> BoundingBox:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return BoundingBox(float(lo[0]), float(lo[1]), max(float(hi[0] - lo[0]), 1e-9), max(float(hi[1] - lo[1]), 1e-9))

    def to_flat(self):
        return [float(v) for v in self.points.reshape(-1)]


def clockwise_ring(ring) -> np.ndarray:
    """Orient a ring clockwise on screen and start it at its top-most, left-most vertex."""
    ring = drop_coincident(as_ring(ring))
    if len(ring) < 3:
        raise GeometryError("Ring needs at least 3 distinct vertices")
    if cross_sum(ring) < 0:
        ring = ring[::-1]
    first = int(np.lexsort((ring[:, 0], ring[:, 1]))[0])
    return np.roll(ring, -first, axis=0)


def _arc_table(ring: np.ndarray):
    closed = np.vstack([ring, ring[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    return closed, seg, seg_len, cum


def _phase_point(ring: np.ndarray):
    """(edge index, arc position, point) of the boundary point nearest the bounding-box corner; first hit on ties."""
    closed, seg, seg_len, cum = _arc_table(ring)
    corner = ring.min(axis=0)
    rel = corner - closed[:-1]
    t = np.clip(np.sum(rel * seg, axis=1) / seg_len ** 2, 0.0, 1.0)
    nearest = closed[:-1] + t[:, None] * seg
    dist = np.hypot(*(nearest - corner).T)
    edge = int(np.flatnonzero(dist <= dist.min() + 1e-9)[0])
    return edge, cum[edge] + t[edge] * seg_len[edge], nearest[edge]


def canonical_resample(ring, n: int) -> np.ndarray:
    """
    Resample any closed ring into n canonically ordered points.

    Unlike sample_and_sort this does not require a simple polygon, so it is
    used to re-canonicalize predicted contours between expansion iterations.
    """
    if n < MIN_VERTICES:
        raise GeometryError(f"Need n >= {MIN_VERTICES} samples, got {n}")
    ring = clockwise_ring(ring)
    closed, _, _, cum = _arc_table(ring)
    total = cum[-1]
    _, start, _ = _phase_point(ring)

    arc = np.mod(start + total * np.arange(n) / n, total)
    xs = np.interp(arc, cum, closed[:, 0])
    ys = np.interp(arc, cum, closed[:, 1])
    return np.stack([xs, ys], axis=1)


def _rephase_vertices(ring) -> np.ndarray:
    """Canonical order of an n-vertex ring: its own vertices, starting at the one nearest the phase point."""
    ring = clockwise_ring(ring)
    _, _, point = _phase_point(ring)
    dist = np.hypot(*(ring - point).T)
    first = int(np.flatnonzero(dist <= dist.min() + 1e-9)[0])
    return np.roll(ring, -first, axis=0)


def sample_and_sort(p: Polygon, n: int = DEFAULT_VERTICES) -> Contour:
    """
    Sample n equally spaced boundary points and order them canonically.

    A polygon that already has exactly n vertices (a contour turned back into
    a polygon, for instance) keeps its vertices and is only re-oriented and
    re-phased, so sampling a contour's own polygon returns the contour.

    Args:
        p: source polygon, either orientation
        n: number of vertices (>= 4)

    Returns:
        Contour whose vertex 0 is the boundary point nearest the upper-left
        bounding-box corner, continuing clockwise on screen
    """
    if n >= MIN_VERTICES and len(p.points) == n:
        return Contour(_rephase_vertices(p.points))
    return Contour(canonical_resample(p.points, n))
