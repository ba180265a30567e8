"""
Wall-clock benchmark of the inference pipeline.

Scenes are processed one at a time (batch size 1) in the calling thread.
After one warm-up pass, every repetition times the whole dataset; the
report holds the median of the repetitions.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from deformation.services.inference import STAGES, InferConfig, infer

logger = logging.getLogger(__name__)

MIN_REPETITIONS = 3


@dataclass(frozen=True)
class TimingReport:
    scenes_per_second: float
    ms_per_scene: float
    stage_ms: Dict[str, float] = field(default_factory=dict)
    repetitions: int = MIN_REPETITIONS
    scenes: int = 0

    @property
    def stage_total_ms(self) -> float:
        return float(sum(self.stage_ms.values()))

    def to_dict(self) -> dict:
        return {
            'scenes_per_second': self.scenes_per_second,
            'ms_per_scene': self.ms_per_scene,
            'stage_ms': dict(self.stage_ms),
            'repetitions': self.repetitions,
            'scenes': self.scenes,
        }


def benchmark(net, scenes: Sequence, repetitions: int = MIN_REPETITIONS, cfg: InferConfig = None,
              segmenter=None) -> TimingReport:
    """
    Time infer over the scenes' probability maps.

    Stage figures are per-scene medians in milliseconds; they are nested inside
    the total, so their sum never exceeds ms_per_scene by more than timer noise.

    Raises:
        ValueError: empty dataset or fewer than MIN_REPETITIONS repetitions
    """
    if not scenes:
        raise ValueError("Benchmark needs a non-empty dataset")
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"Benchmark needs at least {MIN_REPETITIONS} repetitions, got {repetitions}")
    cfg = cfg or InferConfig()
    maps = [scene.prob_map() for scene in scenes]

    for pm in maps:
        infer(net, pm, cfg, segmenter=segmenter)

    totals, stages = [], {stage: [] for stage in STAGES}
    for _ in range(repetitions):
        timings = {}
        start = time.perf_counter()
        for pm in maps:
            infer(net, pm, cfg, segmenter=segmenter, timings=timings)
        totals.append(time.perf_counter() - start)
        for stage in STAGES:
            stages[stage].append(timings.get(stage, 0.0))

    n = len(maps)
    total = float(np.median(totals))
    report = TimingReport(
        scenes_per_second=n / total if total > 0 else float('inf'),
        ms_per_scene=1000.0 * total / n,
        stage_ms={stage: 1000.0 * float(np.median(v)) / n for stage, v in stages.items()},
        repetitions=repetitions,
        scenes=n,
    )
    logger.info("Benchmark: %.1f scenes/s over %d scenes (%d repetitions)", report.scenes_per_second, n, repetitions)
    return report
