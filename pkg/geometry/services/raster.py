"""
Point-in-polygon rasterization and rasterized polygon IoU.

Pixel (row r, column c) covers [c, c+1) × [r, r+1); a pixel belongs to a
polygon when its centre does (even-odd rule).
"""

import numpy as np

from geometry.services.polygons import Polygon, as_ring

DEFAULT_SUPERSAMPLE = 4


def inside_mask(ring, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    Even-odd membership of the grid points (xs[c], ys[r]).

    Scanline evaluation: for each row, count edge crossings strictly to the
    left of each sample.

    Returns:
        len(ys) × len(xs) boolean array
    """
    ring = as_ring(ring)
    a = ring
    b = np.roll(ring, -1, axis=0)
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)

    ya, yb = a[:, 1][None, :], b[:, 1][None, :]
    yy = ys[:, None]
    spans = (ya > yy) != (yb > yy)
    dy = np.where(yb == ya, 1.0, yb - ya)
    x_cross = a[:, 0][None, :] + (yy - ya) * (b[:, 0] - a[:, 0])[None, :] / dy
    x_cross = np.where(spans, x_cross, np.inf)
    x_cross.sort(axis=1)

    mask = np.empty((len(ys), len(xs)), dtype=bool)
    for r in range(len(ys)):
        left = np.searchsorted(x_cross[r], xs, side="left")
        mask[r] = (left % 2) == 1
    return mask


def points_inside(ring, points) -> np.ndarray:
    """Even-odd membership of arbitrary query points (M×2) in a ring."""
    ring = as_ring(ring)
    pts = as_ring(points)
    a = ring[None, :, :]
    b = np.roll(ring, -1, axis=0)[None, :, :]
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    spans = (a[..., 1] > py) != (b[..., 1] > py)
    dy = np.where(spans, b[..., 1] - a[..., 1], 1.0)
    x_cross = a[..., 0] + (py - a[..., 1]) * (b[..., 0] - a[..., 0]) / dy
    hits = spans & (x_cross < px)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def rasterize(p: Polygon, width: int, height: int, x0: int = 0, y0: int = 0) -> np.ndarray:
    """Binary raster of p over the window [x0, x0+width) × [y0, y0+height)."""
    xs = x0 + np.arange(width) + 0.5
    ys = y0 + np.arange(height) + 0.5
    return inside_mask(p.points, xs, ys)


def polygon_iou(a: Polygon, b: Polygon, supersample: int = DEFAULT_SUPERSAMPLE) -> float:
    """
    Intersection over union by point sampling over the union bounding box.

    Args:
        a, b: polygons (simplicity is not required)
        supersample: samples per pixel edge

    Returns:
        IoU in [0, 1]
    """
    lo_a, hi_a = a.points.min(axis=0), a.points.max(axis=0)
    lo_b, hi_b = b.points.min(axis=0), b.points.max(axis=0)
    if np.any(hi_a < lo_b) or np.any(hi_b < lo_a):
        return 0.0

    lo = np.minimum(lo_a, lo_b)
    hi = np.maximum(hi_a, hi_b)
    step = 1.0 / supersample
    nx = max(int(np.ceil((hi[0] - lo[0]) * supersample)), 1)
    ny = max(int(np.ceil((hi[1] - lo[1]) * supersample)), 1)
    xs = lo[0] + (np.arange(nx) + 0.5) * step
    ys = lo[1] + (np.arange(ny) + 0.5) * step

    in_a = inside_mask(a.points, xs, ys)
    in_b = inside_mask(b.points, xs, ys)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union
