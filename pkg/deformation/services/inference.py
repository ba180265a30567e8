"""
Inference: probability map -> kernels -> expanded text boundaries.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from deformation.services.features import SurrogateFeatureField, featurize
from deformation.services.network import DeformNet
from geometry.exceptions import GeometryError
from geometry.services.polygons import Polygon, drop_coincident
from geometry.services.sampling import Contour, canonical_resample, sample_and_sort
from kernels.services.contours import DEFAULT_MIN_AREA, extract_kernels
from kernels.services.probmap import ProbMap, binarize

logger = logging.getLogger(__name__)

STAGES = ('kernel_extraction', 'featurize', 'forward', 'expand')


@dataclass(frozen=True)
class InferConfig:
    n_vertices: int = 128
    dce_iterations: int = 1
    binarize_threshold: float = 0.5
    min_kernel_area: float = DEFAULT_MIN_AREA

    def __post_init__(self):
        if self.dce_iterations < 1:
            raise ValueError(f"dce_iterations must be >= 1, got {self.dce_iterations}")

    @classmethod
    def from_train_config(cls, cfg, **overrides) -> "InferConfig":
        values = {'n_vertices': cfg.n_vertices, 'dce_iterations': cfg.dce_iterations}
        values.update(overrides)
        return cls(**values)


@contextmanager
def _timed(timings: Optional[Dict[str, float]], stage: str):
    if timings is None:
        yield
        return
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)


def expand(c: Contour, offsets) -> Contour:
    """Vertex-wise P + ΔG; vertex order is preserved."""
    offsets = np.asarray(offsets, dtype=np.float64)
    if offsets.shape != c.points.shape:
        raise ValueError(f"Offsets of shape {offsets.shape} do not match a {c.n}-vertex contour")
    return Contour(c.points + offsets)


def expand_contour(net, contour: Contour, field: SurrogateFeatureField, iterations: int = 1,
                   timings: Optional[Dict[str, float]] = None) -> Contour:
    """
    Apply the regressor `iterations` times, re-canonicalizing between passes.

    `net` is a DeformNet or any object with predict(contour, field, box)
    returning N×2 offsets.
    """
    current = contour
    for it in range(iterations):
        if it:
            with _timed(timings, 'expand'):
                current = Contour(canonical_resample(current.points, current.n))
        box = current.bbox()
        if isinstance(net, DeformNet):
            with _timed(timings, 'featurize'):
                u = featurize(current, field, box)
            with _timed(timings, 'forward'):
                offsets = net.forward(u)
        else:
            with _timed(timings, 'forward'):
                offsets = net.predict(current, field, box)
        with _timed(timings, 'expand'):
            current = expand(current, offsets)
    return current


def infer(net, prob_map: ProbMap, cfg: InferConfig, segmenter=None,
          timings: Optional[Dict[str, float]] = None) -> List[Polygon]:
    """
    Detect text boundaries in a probability map.

    Args:
        net: trained regressor (see expand_contour)
        prob_map: full-canvas kernel probability map
        cfg: inference configuration
        segmenter: optional surrogate segmenter applied before binarization
        timings: when given, accumulates seconds per stage (see STAGES)

    Returns:
        one N-vertex polygon per detected kernel, in kernel order
    """
    with _timed(timings, 'kernel_extraction'):
        if segmenter is not None:
            prob_map = segmenter.apply(prob_map)
        kernels = extract_kernels(
            binarize(prob_map, cfg.binarize_threshold),
            min_area=cfg.min_kernel_area,
            origin=(prob_map.x0, prob_map.y0),
        )
    if not kernels:
        return []

    field = SurrogateFeatureField.from_prob_map(prob_map)
    polygons = []
    for kernel in kernels:
        try:
            contour = sample_and_sort(kernel, cfg.n_vertices)
            expanded = expand_contour(net, contour, field, cfg.dce_iterations, timings)
            polygons.append(Polygon(drop_coincident(expanded.points), check_simple=False))
        except GeometryError as e:
            logger.warning("Dropping degenerate prediction for kernel %r: %s", kernel, e)
    return polygons
