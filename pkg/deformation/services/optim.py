"""
Adam with bias correction and the poly learning-rate schedule.
"""

import copy
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "AdamState":
        return cls(
            t=0,
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def poly_lr(step: int, max_steps: int, cfg=None, lr0: float = 2e-4, power: float = 0.9) -> float:
    """lr0 · (1 − step / max_steps) ^ power; cfg (if given) supplies lr0 and power."""
    if cfg is not None:
        lr0, power = cfg.lr0, cfg.poly_power
    if max_steps <= 0:
        raise ValueError("poly_lr needs max_steps > 0")
    if not 0 <= step <= max_steps:
        raise ValueError(f"Step {step} outside [0, {max_steps}]")
    return lr0 * (1.0 - step / max_steps) ** power


def adam_step(net, grads: Dict[str, np.ndarray], state: AdamState, lr: float):
    """
    One Adam update.

    Args:
        net: any model exposing a `params` dict (DeformNet, SurrogateSegmenter)
        grads: gradients keyed like net.params
        state: moments from the previous step (AdamState.zeros_like for the first)
        lr: learning rate

    Returns:
        (updated copy of net, new AdamState); the inputs are left untouched

    Raises:
        ValueError: non-finite gradients or mismatched state
    """
    if set(grads) != set(net.params) or set(state.m) != set(net.params):
        raise ValueError("Gradient, state and parameter names do not match")
    for name, g in grads.items():
        if g.shape != net.params[name].shape or state.m[name].shape != g.shape:
            raise ValueError(f"{name}: gradient/state shape mismatch")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"{name}: non-finite gradient")

    t = state.t + 1
    m, v, params = {}, {}, {}
    for name, p in net.params.items():
        g = grads[name]
        m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        m_hat = m[name] / (1.0 - ADAM_BETA1 ** t)
        v_hat = v[name] / (1.0 - ADAM_BETA2 ** t)
        params[name] = p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    updated = copy.copy(net)
    updated.params = params
    return updated, AdamState(t=t, m=m, v=v)
