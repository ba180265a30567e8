"""
Polygon primitives for text boundaries and text kernels.

Coordinates are pixels in image space (x to the right, y downwards).
Polygons are implicitly closed: the last vertex connects back to the first.
"""

from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from geometry.exceptions import GeometryError

# Consecutive vertices closer than this are treated as coincident
COINCIDENT_EPS = 1e-9


def as_ring(vertices) -> np.ndarray:
    """Coerce vertices (N×2 array-like or flat [x1, y1, ...]) into an N×2 float array."""
    ring = np.asarray(vertices, dtype=np.float64)
    if ring.ndim == 1:
        if ring.size % 2:
            raise GeometryError(f"Flat coordinate array has odd length {ring.size}")
        ring = ring.reshape(-1, 2)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError(f"Expected N×2 vertices, got shape {ring.shape}")
    return ring


def cross_sum(ring: np.ndarray) -> float:
    """Twice the shoelace area in the x-right/y-up convention (positive = screen-clockwise)."""
    x, y = ring[:, 0], ring[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def signed_area(ring) -> float:
    """
    Shoelace area in the y-down convention.

    Positive for rings that run counter-clockwise on screen, negative for
    clockwise rings (the canonical contour orientation).
    """
    return -0.5 * cross_sum(as_ring(ring))


def drop_coincident(ring: np.ndarray, eps: float = COINCIDENT_EPS) -> np.ndarray:
    """Remove vertices that coincide with their predecessor (closing edge included)."""
    if len(ring) == 0:
        return ring
    keep = [0]
    for i in range(1, len(ring)):
        if np.hypot(*(ring[i] - ring[keep[-1]])) > eps:
            keep.append(i)
    out = ring[keep]
    while len(out) > 1 and np.hypot(*(out[-1] - out[0])) <= eps:
        out = out[:-1]
    return out


def _orient(a, b, c):
    """Orientation of c relative to the directed line a→b (vectorized)."""
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def crossing_pairs(ring: np.ndarray) -> np.ndarray:
    """
    Index pairs (i, j), i < j, of ring edges that touch or cross.

    Edge k runs from vertex k to vertex k+1 (mod n). Adjacent edges are only
    reported when they fold back onto each other.

    Returns:
        K×2 integer array ordered by (i, j)
    """
    n = len(ring)
    a = ring
    b = np.roll(ring, -1, axis=0)
    i_idx, j_idx = np.triu_indices(n, k=2)
    # edges 0 and n-1 share vertex 0
    keep = ~((i_idx == 0) & (j_idx == n - 1))
    i_idx, j_idx = i_idx[keep], j_idx[keep]

    a1, b1, a2, b2 = a[i_idx], b[i_idx], a[j_idx], b[j_idx]
    o1 = _orient(a1, b1, a2)
    o2 = _orient(a1, b1, b2)
    o3 = _orient(a2, b2, a1)
    o4 = _orient(a2, b2, b1)
    box = (
        (np.minimum(a1[:, 0], b1[:, 0]) <= np.maximum(a2[:, 0], b2[:, 0]))
        & (np.minimum(a2[:, 0], b2[:, 0]) <= np.maximum(a1[:, 0], b1[:, 0]))
        & (np.minimum(a1[:, 1], b1[:, 1]) <= np.maximum(a2[:, 1], b2[:, 1]))
        & (np.minimum(a2[:, 1], b2[:, 1]) <= np.maximum(a1[:, 1], b1[:, 1]))
    )
    hits = box & (o1 * o2 <= 0) & (o3 * o4 <= 0)
    pairs = np.stack([i_idx[hits], j_idx[hits]], axis=1)

    # Folds: edge k and k+1 collinear and pointing in opposite directions
    d = b - a
    d_next = np.roll(d, -1, axis=0)
    turn = d[:, 0] * d_next[:, 1] - d[:, 1] * d_next[:, 0]
    dot = np.sum(d * d_next, axis=1)
    scale = np.hypot(d[:, 0], d[:, 1]) * np.hypot(d_next[:, 0], d_next[:, 1])
    folds = np.flatnonzero((np.abs(turn) <= 1e-12 * scale) & (dot < 0))
    if len(folds):
        fold_pairs = np.stack([folds, (folds + 1) % n], axis=1)
        fold_pairs = np.sort(fold_pairs, axis=1)
        pairs = np.concatenate([pairs, fold_pairs])
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
    return pairs


def rings_cross(ring_a, ring_b) -> bool:
    """True when any edge of ring_a touches or crosses any edge of ring_b."""
    a1 = as_ring(ring_a)[:, None, :]
    b1 = np.roll(as_ring(ring_a), -1, axis=0)[:, None, :]
    a2 = as_ring(ring_b)[None, :, :]
    b2 = np.roll(as_ring(ring_b), -1, axis=0)[None, :, :]
    o1 = _orient(a1, b1, a2)
    o2 = _orient(a1, b1, b2)
    o3 = _orient(a2, b2, a1)
    o4 = _orient(a2, b2, b1)
    return bool(np.any((o1 * o2 <= 0) & (o3 * o4 <= 0)
                       & (np.minimum(a1[..., 0], b1[..., 0]) <= np.maximum(a2[..., 0], b2[..., 0]))
                       & (np.minimum(a2[..., 0], b2[..., 0]) <= np.maximum(a1[..., 0], b1[..., 0]))
                       & (np.minimum(a1[..., 1], b1[..., 1]) <= np.maximum(a2[..., 1], b2[..., 1]))
                       & (np.minimum(a2[..., 1], b2[..., 1]) <= np.maximum(a1[..., 1], b1[..., 1]))))


def boundary_distance(ring_a, ring_b) -> float:
    """Smallest vertex-to-edge distance between two rings (either direction)."""
    def one_way(pts, ring):
        a = ring[None, :, :]
        d = (np.roll(ring, -1, axis=0) - ring)[None, :, :]
        rel = pts[:, None, :] - a
        t = np.clip(np.sum(rel * d, axis=2) / np.maximum(np.sum(d * d, axis=2), 1e-18), 0.0, 1.0)
        gap = rel - t[..., None] * d
        return float(np.sqrt(np.min(np.sum(gap * gap, axis=2))))

    ra, rb = as_ring(ring_a), as_ring(ring_b)
    return min(one_way(ra, rb), one_way(rb, ra))


def is_simple(ring) -> bool:
    ring = as_ring(ring)
    return len(ring) >= 3 and len(crossing_pairs(ring)) == 0


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned bounding box; (x0, y0) is the upper-left corner."""
    x0: float
    y0: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise GeometryError(f"Bounding box must have positive extent, got {self.width}×{self.height}")

    @property
    def corner(self) -> Tuple[float, float]:
        return (self.x0, self.y0)

    def contains(self, points) -> bool:
        pts = as_ring(points)
        return bool(
            np.all(pts[:, 0] >= self.x0) and np.all(pts[:, 0] <= self.x0 + self.width)
            and np.all(pts[:, 1] >= self.y0) and np.all(pts[:, 1] <= self.y0 + self.height)
        )


class Polygon:
    """
    Simple closed polygon in pixel coordinates.

    Invariants checked on construction:
    - at least 3 vertices, all finite
    - no two consecutive vertices coincide
    - non-zero area
    - no self-intersection (pairwise segment test), unless check_simple=False

    check_simple=False is reserved for predicted contours, which may fold
    before the regressor is trained; every other invariant still holds.
    """

    __slots__ = ("_points", "_simple_checked")

    def __init__(self, vertices, check_simple: bool = True):
        ring = as_ring(vertices).copy()
        if len(ring) < 3:
            raise GeometryError(f"Polygon needs at least 3 vertices, got {len(ring)}")
        if not np.all(np.isfinite(ring)):
            raise GeometryError("Polygon vertices must be finite")
        gaps = np.hypot(*(np.roll(ring, -1, axis=0) - ring).T)
        if np.any(gaps <= COINCIDENT_EPS):
            raise GeometryError("Consecutive polygon vertices coincide")
        if abs(cross_sum(ring)) <= 1e-12:
            raise GeometryError("Polygon has zero area")
        if check_simple and not is_simple(ring):
            raise GeometryError("Polygon is self-intersecting")
        ring.setflags(write=False)
        self._points = ring
        self._simple_checked = check_simple

    @classmethod
    def from_flat(cls, coords: Iterable[float], check_simple: bool = True) -> "Polygon":
        return cls(np.asarray(list(coords), dtype=np.float64), check_simple=check_simple)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self):
        return len(self._points)

    def to_flat(self) -> List[float]:
        return [float(v) for v in self._points.reshape(-1)]

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self._points + np.array([dx, dy]), check_simple=self._simple_checked)

    def __eq__(self, other):
        return isinstance(other, Polygon) and np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash(self._points.tobytes())

    def __repr__(self):
        return f"Polygon({len(self)} vertices, area={area(self):.2f})"


def area(p: Polygon) -> float:
    """Absolute shoelace area in square pixels."""
    return abs(0.5 * cross_sum(p.points))


def perimeter(p: Polygon) -> float:
    ring = p.points
    return float(np.sum(np.hypot(*(np.roll(ring, -1, axis=0) - ring).T)))


def bbox(p: Polygon) -> BoundingBox:
    """Tight axis-aligned bounding box."""
    lo = p.points.min(axis=0)
    hi = p.points.max(axis=0)
    return BoundingBox(float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))


@dataclass(frozen=True)
class ShrinkParams:
    """Shrink ratio r and the margin m it induces for one polygon."""
    ratio: float
    margin: float

    @classmethod
    def for_polygon(cls, p: Polygon, ratio: float) -> "ShrinkParams":
        return cls(ratio=ratio, margin=shrink_margin(p, ratio))


def shrink_margin(p: Polygon, ratio: float) -> float:
    """
    Offset distance between a boundary and its kernel: m = A·(1 − r²)/L.

    Args:
        p: the annotated boundary
        ratio: shrink ratio r in (0, 1]

    Returns:
        margin in pixels (0 when r = 1)
    """
    if not 0.0 < ratio <= 1.0:
        raise GeometryError(f"Shrink ratio must lie in (0, 1], got {ratio}")
    length = perimeter(p)
    if length <= 1e-12:
        raise GeometryError("Cannot derive a shrink margin from a degenerate perimeter")
    # (1 - r)(1 + r) keeps the textbook cases exact in floating point
    return area(p) * (1.0 - ratio) * (1.0 + ratio) / length
