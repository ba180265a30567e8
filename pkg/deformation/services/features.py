"""
Per-vertex features for the expansion regressor.

The surrogate feature field is a probability window placed on the canvas.
Each contour vertex is described by eight channels:

    0      probability at the vertex (bilinear)
    1..4   probability 2 px to the right, below, left and above
    5, 6   vertex position relative to the bounding box, in [0, 1]
    7      k / N, the normalized position along the contour
"""

from dataclasses import dataclass

import numpy as np

from geometry.services.polygons import BoundingBox
from geometry.services.sampling import Contour
from kernels.services.probmap import ProbMap

N_CHANNELS = 8
RING_RADIUS = 2.0
RING_OFFSETS = np.array([(RING_RADIUS, 0.0), (0.0, RING_RADIUS), (-RING_RADIUS, 0.0), (0.0, -RING_RADIUS)])


@dataclass(frozen=True, eq=False)
class SurrogateFeatureField:
    """Probability grid whose cell (r, c) is centred on canvas point (x0+c+0.5, y0+r+0.5)."""
    prob: np.ndarray
    x0: int = 0
    y0: int = 0

    def __post_init__(self):
        prob = np.asarray(self.prob, dtype=np.float64)
        if prob.ndim != 2 or prob.size == 0:
            raise ValueError(f"Feature field must be a non-empty 2-D grid, got shape {prob.shape}")
        if prob.min() < 0.0 or prob.max() > 1.0:
            raise ValueError("Feature field probabilities must lie in [0, 1]")
        object.__setattr__(self, "prob", prob)

    @classmethod
    def from_prob_map(cls, pm: ProbMap) -> "SurrogateFeatureField":
        return cls(pm.values, x0=pm.x0, y0=pm.y0)

    @property
    def height(self) -> int:
        return self.prob.shape[0]

    @property
    def width(self) -> int:
        return self.prob.shape[1]

    def sample(self, xy: np.ndarray) -> np.ndarray:
        """Bilinear probability at canvas points (…×2); out-of-window points clamp to the border."""
        xy = np.asarray(xy, dtype=np.float64)
        fx = np.clip(xy[..., 0] - self.x0 - 0.5, 0.0, self.width - 1)
        fy = np.clip(xy[..., 1] - self.y0 - 0.5, 0.0, self.height - 1)
        c0 = np.floor(fx).astype(np.int64)
        r0 = np.floor(fy).astype(np.int64)
        c1 = np.minimum(c0 + 1, self.width - 1)
        r1 = np.minimum(r0 + 1, self.height - 1)
        tx = fx - c0
        ty = fy - r0
        p = self.prob
        top = p[r0, c0] * (1 - tx) + p[r0, c1] * tx
        bottom = p[r1, c0] * (1 - tx) + p[r1, c1] * tx
        return top * (1 - ty) + bottom * ty


def featurize(c, f: SurrogateFeatureField, box: BoundingBox) -> np.ndarray:
    """
    N×8 vertex feature matrix.

    Args:
        c: Contour (or N×2 points)
        f: feature field sampled at and around each vertex
        box: bounding box whose upper-left corner is the coordinate origin

    Returns:
        float64 array of shape (N, N_CHANNELS)
    """
    pts = c.points if isinstance(c, Contour) else np.asarray(c, dtype=np.float64)
    n = len(pts)
    u = np.empty((n, N_CHANNELS))
    u[:, 0] = f.sample(pts)
    u[:, 1:5] = f.sample(pts[:, None, :] + RING_OFFSETS[None, :, :])
    u[:, 5] = np.clip((pts[:, 0] - box.x0) / box.width, 0.0, 1.0)
    u[:, 6] = np.clip((pts[:, 1] - box.y0) / box.height, 0.0, 1.0)
    u[:, 7] = np.arange(n) / n
    return u
