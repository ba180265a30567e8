"""
Detection metrics.

Predictions and ground-truth polygons are paired greedily in descending IoU
order, one-to-one; a pair counts as a match when its IoU reaches the
threshold. Precision, recall and F-measure are reported in percent.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from geometry.services.polygons import Polygon
from geometry.services.raster import polygon_iou

DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class SceneCounts:
    matched: int
    missed: int
    spurious: int


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    per_scene: List[SceneCounts] = field(default_factory=list)
    mean_iou_of_matches: float = 0.0

    @classmethod
    def from_counts(cls, matched: int, missed: int, spurious: int,
                    per_scene: Optional[List[SceneCounts]] = None,
                    match_ious: Sequence[float] = ()) -> "EvalReport":
        if min(matched, missed, spurious) < 0:
            raise ValueError("Match counts must be non-negative")
        p = 100.0 * matched / (matched + spurious) if matched + spurious else 0.0
        r = 100.0 * matched / (matched + missed) if matched + missed else 0.0
        return cls(
            precision=p,
            recall=r,
            f_measure=f_measure(p, r),
            per_scene=list(per_scene) if per_scene is not None else [SceneCounts(matched, missed, spurious)],
            mean_iou_of_matches=float(np.mean(match_ious)) if len(match_ious) else 0.0,
        )

    @property
    def matched(self) -> int:
        return sum(s.matched for s in self.per_scene)

    @property
    def missed(self) -> int:
        return sum(s.missed for s in self.per_scene)

    @property
    def spurious(self) -> int:
        return sum(s.spurious for s in self.per_scene)

    def to_dict(self) -> dict:
        return {
            'precision': self.precision,
            'recall': self.recall,
            'f_measure': self.f_measure,
            'mean_iou_of_matches': self.mean_iou_of_matches,
            'matched': self.matched,
            'missed': self.missed,
            'spurious': self.spurious,
            'per_scene': [asdict(s) for s in self.per_scene],
        }


def _boxes_overlap(a: Polygon, b: Polygon) -> bool:
    lo_a, hi_a = a.points.min(axis=0), a.points.max(axis=0)
    lo_b, hi_b = b.points.min(axis=0), b.points.max(axis=0)
    return bool(np.all(lo_a < hi_b) and np.all(lo_b < hi_a))


def iou_matrix(preds: Sequence[Polygon], gts: Sequence[Polygon]) -> np.ndarray:
    m = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            if _boxes_overlap(p, g):
                m[i, j] = polygon_iou(p, g)
    return m


def match_polygons(preds: Sequence[Polygon], gts: Sequence[Polygon],
                   iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> List[Tuple[int, int, float]]:
    """Greedy one-to-one (pred, gt, iou) matches, highest IoU first."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    ious = iou_matrix(preds, gts)
    rows, cols = np.nonzero(ious >= iou_threshold)
    order = sorted(zip(rows, cols), key=lambda rc: (-ious[rc], rc[0], rc[1]))
    used_p, used_g, matches = set(), set(), []
    for i, j in order:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((int(i), int(j), float(ious[i, j])))
    return matches


def evaluate(preds: Sequence[Polygon], gts: Sequence[Polygon],
             iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> EvalReport:
    """
    Score one scene's predictions against its ground truth.

    Args:
        preds: predicted polygons
        gts: ground-truth polygons
        iou_threshold: minimum IoU for a pair to count as a match

    Returns:
        EvalReport with a single per_scene entry
    """
    matches = match_polygons(preds, gts, iou_threshold)
    n = len(matches)
    return EvalReport.from_counts(n, len(gts) - n, len(preds) - n, match_ious=[m[2] for m in matches])


def evaluate_scenes(pred_lists: Sequence[Sequence[Polygon]], gt_lists: Sequence[Sequence[Polygon]],
                    iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> EvalReport:
    """Dataset-level report: counts are summed over scenes before the ratios are taken."""
    if len(pred_lists) != len(gt_lists):
        raise ValueError(f"{len(pred_lists)} prediction lists for {len(gt_lists)} scenes")
    per_scene, ious = [], []
    for preds, gts in zip(pred_lists, gt_lists):
        matches = match_polygons(preds, gts, iou_threshold)
        n = len(matches)
        per_scene.append(SceneCounts(n, len(gts) - n, len(preds) - n))
        ious.extend(m[2] for m in matches)
    return EvalReport.from_counts(
        sum(s.matched for s in per_scene),
        sum(s.missed for s in per_scene),
        sum(s.spurious for s in per_scene),
        per_scene=per_scene,
        match_ious=ious,
    )
