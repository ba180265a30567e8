"""
Learning-free expansion baseline.

Kernels are grown back by a plain polygon offset. At inference the margin of
each extracted kernel follows the unclip convention A·ratio/L, since the
boundary it came from is unknown.
"""

import logging
from typing import List

from deformation.services.inference import InferConfig
from geometry.exceptions import GeometryError
from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, area, perimeter
from kernels.services.contours import extract_kernels
from kernels.services.probmap import ProbMap, binarize

logger = logging.getLogger(__name__)

DEFAULT_UNCLIP_RATIO = 1.5


def fixed_expand_baseline(kernel: Polygon, margin: float) -> Polygon:
    """offset(kernel, +margin); margin 0 returns the kernel."""
    if margin < 0:
        raise ValueError(f"Baseline expansion needs margin >= 0, got {margin}")
    return offset(kernel, margin)


def unclip_margin(kernel: Polygon, ratio: float = DEFAULT_UNCLIP_RATIO) -> float:
    return area(kernel) * ratio / perimeter(kernel)


def baseline_detect(prob_map: ProbMap, cfg: InferConfig, unclip_ratio: float = DEFAULT_UNCLIP_RATIO,
                    segmenter=None) -> List[Polygon]:
    """Binarize, extract kernels and expand each by its unclip margin."""
    if segmenter is not None:
        prob_map = segmenter.apply(prob_map)
    kernels = extract_kernels(
        binarize(prob_map, cfg.binarize_threshold),
        min_area=cfg.min_kernel_area,
        origin=(prob_map.x0, prob_map.y0),
    )
    polygons = []
    for kernel in kernels:
        try:
            polygons.append(fixed_expand_baseline(kernel, unclip_margin(kernel, unclip_ratio)))
        except GeometryError as e:
            logger.warning("Dropping baseline expansion of %r: %s", kernel, e)
    return polygons
