"""
Binary cross-entropy with online hard negative mining.

All positive pixels are kept, together with the 3·|positives| negatives that
currently have the highest loss. The selected per-pixel losses are summed,
not averaged.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from kernels.services.probmap import ProbMap

NEGATIVE_RATIO = 3
PROB_CLAMP = 1e-7


@dataclass(frozen=True, eq=False)
class MiningMask:
    selected: np.ndarray
    positives: int
    negatives: int


@dataclass(frozen=True, eq=False)
class SegmentationLoss:
    """Summed BCE over the mined pixels, with d loss / d pred."""
    value: float
    grad: np.ndarray
    mask: MiningMask


def _values(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, ProbMap) else m, dtype=np.float64)


def pixel_bce(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p))


def mine_negatives(per_pixel: np.ndarray, gt: np.ndarray, ratio: int = NEGATIVE_RATIO) -> MiningMask:
    """Select every positive and the hardest ratio·|positives| negatives (row-major ties)."""
    positive = gt > 0.5
    n_pos = int(np.count_nonzero(positive))
    neg_idx = np.flatnonzero(~positive.reshape(-1))
    n_neg = min(ratio * n_pos, len(neg_idx))

    selected = positive.reshape(-1).copy()
    if n_neg:
        order = np.argsort(-per_pixel.reshape(-1)[neg_idx], kind="stable")
        selected[neg_idx[order[:n_neg]]] = True
    return MiningMask(selected.reshape(gt.shape), n_pos, n_neg)


def bce_ohem_loss(pred, gt, mask: Optional[MiningMask] = None) -> SegmentationLoss:
    """
    Hard-negative-mined binary cross-entropy.

    Args:
        pred: predicted probabilities (ProbMap or array)
        gt: binary ground truth of the same shape
        mask: reuse a previous mining result instead of mining again

    Returns:
        SegmentationLoss with the summed loss and its gradient w.r.t. pred

    Raises:
        ValueError: shape mismatch
    """
    p = _values(pred)
    y = _values(gt)
    if p.shape != y.shape:
        raise ValueError(f"Prediction shape {p.shape} does not match ground truth {y.shape}")

    per_pixel = pixel_bce(p, y)
    if mask is None:
        mask = mine_negatives(per_pixel, y)
    sel = mask.selected

    value = float(np.sum(per_pixel[sel]))
    clamped = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    grad = np.where(sel & inside, -y / clamped + (1.0 - y) / (1.0 - clamped), 0.0)
    return SegmentationLoss(value=value, grad=grad, mask=mask)
