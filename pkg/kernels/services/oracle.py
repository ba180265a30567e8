"""
Surrogate segmentation output.

Stands in for a trained segmentation head: the annotated boundary is shrunk
to its kernel, the kernel's control points are jittered with seeded Gaussian
noise, and the raster is blurred into soft probabilities.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, ShrinkParams
from geometry.services.raster import inside_mask
from kernels.services.probmap import ProbMap

# blur sigma as a fraction of the jitter std
BLUR_PER_NOISE = 0.5


def noisy_kernel_oracle(
    gt_boundary: Polygon,
    shrink: ShrinkParams,
    noise: float = 0.0,
    seed: int = 0,
    window: Optional[Tuple[int, int, int, int]] = None,
    canvas: Tuple[int, int] = (256, 256),
) -> ProbMap:
    """
    Probability map of the text kernel of gt_boundary.

    Args:
        gt_boundary: annotated text boundary
        shrink: shrink parameters derived for gt_boundary
        noise: std of the control-point jitter in pixels (0 gives the exact raster)
        seed: jitter seed
        window: (x0, y0, width, height) raster window; defaults to the full canvas
        canvas: (width, height) used when window is omitted

    Returns:
        float32 ProbMap located at the window origin

    Raises:
        CollapseError: the kernel vanishes under the shrink margin
    """
    kernel = offset(gt_boundary, -shrink.margin)
    x0, y0, width, height = window if window is not None else (0, 0, canvas[0], canvas[1])

    ring = kernel.points
    if noise > 0:
        rng = np.random.default_rng(seed)
        ring = ring + rng.normal(scale=noise, size=ring.shape)

    xs = x0 + np.arange(width) + 0.5
    ys = y0 + np.arange(height) + 0.5
    values = inside_mask(ring, xs, ys).astype(np.float64)
    if noise > 0:
        values = np.clip(gaussian_filter(values, sigma=BLUR_PER_NOISE * noise, mode="constant"), 0.0, 1.0)
    return ProbMap(values.astype(np.float32), x0=int(x0), y0=int(y0))
