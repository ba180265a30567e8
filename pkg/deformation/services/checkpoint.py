"""
Checkpoint persistence.

A checkpoint is one JSON document holding the format version, the training
config echo, the step counter, every parameter array (shape + flat values),
the Adam moments, the training RNG state and, when present, the surrogate
segmenter. Floats are written at repr precision so load -> save reproduces
the file byte for byte.
"""

import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from deformation.exceptions import CheckpointError
from deformation.services.network import DeformNet
from deformation.services.optim import AdamState
from deformation.services.training import TrainConfig, TrainingState
from kernels.services.segmenter import SurrogateSegmenter

FORMAT_VERSION = 1


def _dump_arrays(arrays: Dict[str, np.ndarray]) -> dict:
    return {
        name: {"shape": list(value.shape), "data": [float(x) for x in value.reshape(-1)]}
        for name, value in arrays.items()
    }


def _load_arrays(record: dict) -> Dict[str, np.ndarray]:
    return {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in record.items()
    }


def _dump_adam(state: AdamState) -> dict:
    return {"t": state.t, "m": _dump_arrays(state.m), "v": _dump_arrays(state.v)}


def _load_adam(record: dict) -> AdamState:
    return AdamState(t=int(record["t"]), m=_load_arrays(record["m"]), v=_load_arrays(record["v"]))


def checkpoint_payload(state: TrainingState, cfg: TrainConfig) -> dict:
    payload = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "step": state.step,
        "params": _dump_arrays(state.net.params),
        "adam": _dump_adam(state.adam),
        "rng_state": state.rng.bit_generator.state,
        "segmenter": None,
    }
    if state.segmenter is not None:
        payload["segmenter"] = {
            "params": _dump_arrays(state.segmenter.params),
            "adam": _dump_adam(state.seg_adam),
        }
    return payload


def dumps_checkpoint(state: TrainingState, cfg: TrainConfig) -> str:
    return json.dumps(checkpoint_payload(state, cfg), sort_keys=True)


def save_checkpoint(path, state: TrainingState, cfg: TrainConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_checkpoint(state, cfg) + "\n", encoding="utf-8")
    return path


def loads_checkpoint(text: str) -> Tuple[TrainingState, TrainConfig]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Checkpoint is not valid JSON: {e.msg}") from e
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format_version {version!r} (expected {FORMAT_VERSION})")

    try:
        cfg = TrainConfig(**payload["config"])
        net = DeformNet(width=cfg.width, depth=cfg.depth, kernel_size=cfg.kernel_size, seed=cfg.seed,
                        params=_load_arrays(payload["params"]))
        rng = np.random.default_rng()
        rng.bit_generator.state = payload["rng_state"]
        state = TrainingState(net=net, adam=_load_adam(payload["adam"]), rng=rng, step=int(payload["step"]))
        if payload.get("segmenter"):
            state.segmenter = SurrogateSegmenter(_load_arrays(payload["segmenter"]["params"]))
            state.seg_adam = _load_adam(payload["segmenter"]["adam"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Malformed checkpoint: {e}") from e
    return state, cfg


def load_checkpoint(path) -> Tuple[TrainingState, TrainConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    return loads_checkpoint(text)
