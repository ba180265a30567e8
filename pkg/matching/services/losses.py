"""
Contour deformation losses.

All three losses share the same per-pair term: smooth-L1 (β = 1) applied to
each coordinate of (predicted − target), summed over x and y, averaged over
the N predicted vertices. They differ only in how predicted vertex i picks
its target:

- dml:   target i (index alignment)
- nnml:  nearest target vertex, many-to-one allowed
- obgml: Hungarian-optimal one-to-one pairing

Gradients are taken with the pairing held constant.
"""

from dataclasses import dataclass

import numpy as np

from matching.services.hungarian import as_points, cost_matrix, hungarian

LOSS_KIND_CHOICES = [
    ('dml', 'Direct Matching Loss'),
    ('nnml', 'Nearest Neighbor Matching Loss'),
    ('obgml', 'Optimal Bipartite Graph Matching Loss'),
]
LOSS_KINDS = tuple(kind for kind, _ in LOSS_KIND_CHOICES)

SMOOTH_L1_BETA = 1.0


@dataclass(frozen=True, eq=False)
class LossValue:
    """Scalar loss with its gradient w.r.t. the predicted vertices (N×2)."""
    value: float
    grad: np.ndarray
    cols: np.ndarray
    kind: str = ''

    @property
    def pairs(self):
        return tuple((i, int(j)) for i, j in enumerate(self.cols))


def smooth_l1(d):
    """0.5·d² for |d| < 1, |d| − 0.5 otherwise (element-wise)."""
    d = np.asarray(d, dtype=np.float64)
    ad = np.abs(d)
    out = np.where(ad < SMOOTH_L1_BETA, 0.5 * d * d / SMOOTH_L1_BETA, ad - 0.5 * SMOOTH_L1_BETA)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    return np.where(np.abs(d) < SMOOTH_L1_BETA, d / SMOOTH_L1_BETA, np.sign(d))


def _paired_loss(pred: np.ndarray, target: np.ndarray, cols: np.ndarray, kind: str) -> LossValue:
    diff = pred - target[cols]
    n = len(pred)
    value = float(np.sum(smooth_l1(diff)) / n)
    grad = smooth_l1_grad(diff) / n
    return LossValue(value=value, grad=grad, cols=np.asarray(cols, dtype=np.int64), kind=kind)


def _check_lengths(pred: np.ndarray, target: np.ndarray):
    if len(pred) != len(target):
        raise ValueError(f"Contour lengths differ: {len(pred)} predicted vs {len(target)} target vertices")


def dml_loss(pred, target) -> LossValue:
    p, t = as_points(pred), as_points(target)
    _check_lengths(p, t)
    return _paired_loss(p, t, np.arange(len(p)), 'dml')


def nnml_loss(pred, target) -> LossValue:
    p, t = as_points(pred), as_points(target)
    m = cost_matrix(p, t)
    # argmin returns the lowest index on ties
    return _paired_loss(p, t, np.argmin(m.values, axis=1), 'nnml')


def obgml_loss(pred, target) -> LossValue:
    p, t = as_points(pred), as_points(target)
    assignment = hungarian(cost_matrix(p, t))
    return _paired_loss(p, t, assignment.cols, 'obgml')


_LOSSES = {
    'dml': dml_loss,
    'nnml': nnml_loss,
    'obgml': obgml_loss,
}


def contour_loss(kind: str, pred, target) -> LossValue:
    """Dispatch on loss kind ('dml', 'nnml' or 'obgml')."""
    try:
        fn = _LOSSES[kind]
    except KeyError:
        raise ValueError(f"Unknown loss kind {kind!r}; choose from {', '.join(LOSS_KINDS)}")
    return fn(pred, target)
