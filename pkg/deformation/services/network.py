"""
Circular-convolution offset regressor.

A stack of circular 1-D convolutions runs along the closed contour (vertex
indices wrap modulo N), each followed by ReLU; every layer after the first
adds its input back (residual). A per-vertex linear head maps the last hidden
state to a 2-D pixel offset. Forward and backward passes are written out by
hand in numpy and work on a single N×C matrix or a B×N×C batch.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from deformation.services.features import N_CHANNELS, featurize

logger = logging.getLogger(__name__)

KERNEL_SIZE = 9
HIDDEN_WIDTH = 64
DEPTH = 4
OUT_DIM = 2


def circular_indices(n: int, kernel_size: int) -> np.ndarray:
    """idx[i, k] = (i + k - kernel_size // 2) mod n."""
    return (np.arange(n)[:, None] + np.arange(kernel_size)[None, :] - kernel_size // 2) % n


class DeformNet:
    """
    Offset regressor D: (N, C) vertex features -> (N, 2) pixel offsets.

    Parameters live in `params`, an ordered dict of named arrays:
    conv{l}.weight (K, C_in, C_out), conv{l}.bias (C_out,), head.weight
    (width, 2) and head.bias (2,).
    """

    def __init__(
        self,
        in_channels: int = N_CHANNELS,
        width: int = HIDDEN_WIDTH,
        depth: int = DEPTH,
        kernel_size: int = KERNEL_SIZE,
        seed: int = 0,
        params: Optional[Dict[str, np.ndarray]] = None,
    ):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"Kernel size must be a positive odd number, got {kernel_size}")
        if depth < 1 or width < 1 or in_channels < 1:
            raise ValueError("Depth, width and input channels must be positive")
        self.in_channels = in_channels
        self.width = width
        self.depth = depth
        self.kernel_size = kernel_size
        self.seed = seed
        if params is None:
            params = self._init_params(np.random.default_rng(seed))
        self.params = self._checked(params)

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        c_in = self.in_channels
        for layer in range(self.depth):
            shapes[f'conv{layer}.weight'] = (self.kernel_size, c_in, self.width)
            shapes[f'conv{layer}.bias'] = (self.width,)
            c_in = self.width
        shapes['head.weight'] = (self.width, OUT_DIM)
        shapes['head.bias'] = (OUT_DIM,)
        return shapes

    def _init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        params = {}
        for name, shape in self.param_shapes().items():
            layer = name.split('.')[0]
            weight_shape = self.param_shapes()[f'{layer}.weight']
            fan_in = int(np.prod(weight_shape[:-1]))
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
        return params

    def _checked(self, params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        expected = self.param_shapes()
        if set(params) != set(expected):
            raise ValueError(f"Parameter names {sorted(params)} do not match {sorted(expected)}")
        out = {}
        for name, shape in expected.items():
            value = np.array(params[name], dtype=np.float64)
            if value.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {value.shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name}: parameters must be finite")
            out[name] = value
        return out

    @classmethod
    def zeros_like(cls, net: "DeformNet") -> "DeformNet":
        params = {name: np.zeros(shape) for name, shape in net.param_shapes().items()}
        return cls(net.in_channels, net.width, net.depth, net.kernel_size, net.seed, params)

    def with_params(self, params: Dict[str, np.ndarray]) -> "DeformNet":
        return DeformNet(self.in_channels, self.width, self.depth, self.kernel_size, self.seed, params)

    @property
    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def forward(self, u: np.ndarray) -> np.ndarray:
        return self.forward_with_cache(u)[0]

    def forward_with_cache(self, u: np.ndarray):
        """
        Offsets for one feature matrix (N, C) or a batch (B, N, C).

        Returns:
            (offsets shaped like u with 2 channels, cache for backward)

        Raises:
            ValueError: channel count does not match the network
        """
        u = np.asarray(u, dtype=np.float64)
        if u.ndim not in (2, 3) or u.shape[-1] != self.in_channels:
            raise ValueError(f"Expected (N, {self.in_channels}) or (B, N, {self.in_channels}) features, got {u.shape}")
        single = u.ndim == 2
        h = u[None] if single else u
        n = h.shape[1]
        idx = circular_indices(n, self.kernel_size)

        layers: List[tuple] = []
        for layer in range(self.depth):
            cols = h[:, idx, :].reshape(h.shape[0], n, -1)
            weight = self.params[f'conv{layer}.weight']
            z = cols @ weight.reshape(-1, self.width) + self.params[f'conv{layer}.bias']
            a = np.maximum(z, 0.0)
            if layer > 0:
                a = a + h
            layers.append((cols, z))
            h = a
        out = h @ self.params['head.weight'] + self.params['head.bias']
        cache = {'layers': layers, 'hidden': h, 'single': single, 'n': n}
        return (out[0] if single else out), cache

    def backward(self, cache: dict, upstream: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        """
        Exact gradients of sum(upstream * offsets).

        Returns:
            (parameter gradients keyed like params, gradient w.r.t. the input features)
        """
        g = np.asarray(upstream, dtype=np.float64)
        if cache['single']:
            g = g[None]
        h = cache['hidden']
        if g.shape != h.shape[:2] + (OUT_DIM,):
            raise ValueError(f"Upstream gradient shape {g.shape} does not match offsets {h.shape[:2] + (OUT_DIM,)}")

        grads = {
            'head.weight': h.reshape(-1, h.shape[-1]).T @ g.reshape(-1, OUT_DIM),
            'head.bias': g.sum(axis=(0, 1)),
        }
        dh = g @ self.params['head.weight'].T
        half = self.kernel_size // 2
        for layer in reversed(range(self.depth)):
            cols, z = cache['layers'][layer]
            dz = dh * (z > 0)
            weight = self.params[f'conv{layer}.weight']
            flat_w = weight.reshape(-1, self.width)
            flat_dz = dz.reshape(-1, self.width)
            grads[f'conv{layer}.weight'] = (cols.reshape(-1, cols.shape[-1]).T @ flat_dz).reshape(weight.shape)
            grads[f'conv{layer}.bias'] = dz.sum(axis=(0, 1))
            dcols = (flat_dz @ flat_w.T).reshape(dz.shape[:2] + weight.shape[:2])
            dx = np.zeros(dcols.shape[:2] + dcols.shape[3:])
            for k in range(self.kernel_size):
                dx += np.roll(dcols[:, :, k, :], k - half, axis=1)
            if layer > 0:
                dx = dx + dh
            dh = dx
        return grads, (dh[0] if cache['single'] else dh)

    def predict(self, contour, field, box=None) -> np.ndarray:
        """Offsets for a contour sampled against a feature field."""
        box = box if box is not None else contour.bbox()
        return self.forward(featurize(contour, field, box))
