"""
Seeded synthetic scenes.

Instances are placed by rejection sampling: a candidate is kept when it lies
inside the canvas, stays at least CLEARANCE px from every placed instance and
its kernel survives the shrink. Each scene owns its own generator, so scenes
can be produced independently (and in any order) from their seeds.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from geometry.exceptions import CollapseError, GeometryError
from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, ShrinkParams, boundary_distance, rings_cross
from geometry.services.raster import points_inside
from kernels.services.oracle import noisy_kernel_oracle
from kernels.services.probmap import ProbMap, compose
from synthgen.exceptions import PlacementError
from synthgen.services.shapes import DEFAULT_SHRINK_RATIO, make_shape, random_spec

logger = logging.getLogger(__name__)

CLEARANCE = 2.0
MAX_ATTEMPTS = 1000
WINDOW_PAD = 4
DEFAULT_CANVAS = 256


@dataclass(frozen=True, eq=False)
class SynthInstance:
    boundary: Polygon
    kernel: Polygon
    prob: ProbMap


@dataclass(frozen=True, eq=False)
class SynthScene:
    width: int
    height: int
    seed: int
    instances: List[SynthInstance] = field(default_factory=list)
    shrink_ratio: float = DEFAULT_SHRINK_RATIO

    def prob_map(self) -> ProbMap:
        """Full-canvas kernel probability map."""
        return compose((inst.prob for inst in self.instances), self.width, self.height)

    @property
    def boundaries(self) -> List[Polygon]:
        return [inst.boundary for inst in self.instances]


def _inside_canvas(p: Polygon, canvas: int) -> bool:
    lo = p.points.min(axis=0)
    hi = p.points.max(axis=0)
    return bool(np.all(lo >= 1.0) and np.all(hi <= canvas - 1.0))


def _clear_of(p: Polygon, others: Sequence[Polygon], clearance: float) -> bool:
    lo, hi = p.points.min(axis=0), p.points.max(axis=0)
    for q in others:
        q_lo, q_hi = q.points.min(axis=0), q.points.max(axis=0)
        if np.any(hi + clearance < q_lo) or np.any(q_hi + clearance < lo):
            continue
        if rings_cross(p.points, q.points):
            return False
        if points_inside(q.points, p.points[:1])[0] or points_inside(p.points, q.points[:1])[0]:
            return False
        if boundary_distance(p.points, q.points) < clearance:
            return False
    return True


def _window(p: Polygon, canvas: int):
    lo = np.floor(p.points.min(axis=0)).astype(int) - WINDOW_PAD
    hi = np.ceil(p.points.max(axis=0)).astype(int) + WINDOW_PAD
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, canvas)
    return int(lo[0]), int(lo[1]), int(hi[0] - lo[0]), int(hi[1] - lo[1])


def make_scene(
    count: int,
    canvas: int = DEFAULT_CANVAS,
    seed: int = 0,
    shrink_ratio: float = DEFAULT_SHRINK_RATIO,
    noise: float = 0.0,
    max_attempts: int = MAX_ATTEMPTS,
) -> SynthScene:
    """
    Generate one scene of `count` non-overlapping instances.

    Args:
        count: number of instances (>= 1)
        canvas: square canvas side in pixels
        seed: scene seed; equal seeds give identical scenes
        shrink_ratio: kernel shrink ratio
        noise: control-point jitter (px) of the surrogate probability maps
        max_attempts: candidates tried per instance before giving up

    Raises:
        ValueError: count < 1
        PlacementError: an instance could not be placed
    """
    if count < 1:
        raise ValueError(f"A scene needs at least one instance, got {count}")
    rng = np.random.default_rng(seed)
    instances: List[SynthInstance] = []

    for index in range(count):
        for _ in range(max_attempts):
            try:
                spec = random_spec(rng, canvas, shrink_ratio)
            except GeometryError:
                continue
            noise_seed = int(rng.integers(2 ** 31))
            try:
                boundary = make_shape(spec)
            except GeometryError:
                continue
            if not _inside_canvas(boundary, canvas):
                continue
            if not _clear_of(boundary, [inst.boundary for inst in instances], CLEARANCE):
                continue
            shrink = ShrinkParams.for_polygon(boundary, shrink_ratio)
            try:
                kernel = offset(boundary, -shrink.margin)
                prob = noisy_kernel_oracle(boundary, shrink, noise=noise, seed=noise_seed, window=_window(boundary, canvas))
            except CollapseError:
                continue
            instances.append(SynthInstance(boundary=boundary, kernel=kernel, prob=prob))
            break
        else:
            raise PlacementError(
                f"Could not place instance {index + 1} of {count} on a {canvas}px canvas "
                f"after {max_attempts} attempts (seed {seed})"
            )

    logger.debug("make_scene(seed=%s): %d instances", seed, len(instances))
    return SynthScene(width=canvas, height=canvas, seed=seed, instances=instances, shrink_ratio=shrink_ratio)


def scene_seeds(seed: int, scenes: int) -> List[int]:
    """Independent per-scene seeds derived from one run seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(scenes)]


def make_dataset(
    scenes: int,
    instances: int = 3,
    canvas: int = DEFAULT_CANVAS,
    seed: int = 0,
    shrink_ratio: float = DEFAULT_SHRINK_RATIO,
    noise: float = 0.0,
) -> List[SynthScene]:
    if scenes < 1:
        raise ValueError(f"A dataset needs at least one scene, got {scenes}")
    return [
        make_scene(instances, canvas=canvas, seed=s, shrink_ratio=shrink_ratio, noise=noise)
        for s in scene_seeds(seed, scenes)
    ]
