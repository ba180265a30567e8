"""
Trainable surrogate segmenter: a 3×3 correlation plus bias and sigmoid.

It refines a (noisy) oracle map into kernel probabilities and is trained
with the hard-negative-mined BCE, which lets the joint segmentation +
regression objective be optimized end to end at desk scale.
"""

from typing import Dict, Optional

import numpy as np

from kernels.services.probmap import ProbMap

TAPS = 3


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class SurrogateSegmenter:
    """y = sigmoid(w ⋆ x + b) with edge-replicated borders."""

    def __init__(self, params: Optional[Dict[str, np.ndarray]] = None):
        if params is None:
            # identity-like start: centre tap maps p to roughly sigmoid(4p - 2)
            weight = np.zeros((TAPS, TAPS))
            weight[TAPS // 2, TAPS // 2] = 4.0
            params = {'seg.weight': weight, 'seg.bias': np.array([-2.0])}
        self.params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def _shifted(self, x: np.ndarray):
        pad = np.pad(x, TAPS // 2, mode="edge")
        h, w = x.shape
        for a in range(TAPS):
            for b in range(TAPS):
                yield a, b, pad[a:a + h, b:b + w]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        w = self.params['seg.weight']
        z = np.full(x.shape, self.params['seg.bias'][0])
        for a, b, s in self._shifted(x):
            z += w[a, b] * s
        return _sigmoid(z)

    def backward(self, x: np.ndarray, y: np.ndarray, upstream: np.ndarray) -> Dict[str, np.ndarray]:
        """Parameter gradients given the forward output y and d loss / d y."""
        x = np.asarray(x, dtype=np.float64)
        dz = upstream * y * (1.0 - y)
        dw = np.zeros((TAPS, TAPS))
        for a, b, s in self._shifted(x):
            dw[a, b] = np.sum(dz * s)
        return {'seg.weight': dw, 'seg.bias': np.array([np.sum(dz)])}

    def apply(self, prob: ProbMap) -> ProbMap:
        return ProbMap(self.forward(prob.values), x0=prob.x0, y0=prob.y0)
