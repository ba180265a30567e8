"""
Artifact helpers shared by the pipeline commands.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

from cli.services.run_config import RunConfig
from deformation.services.checkpoint import load_checkpoint
from deformation.services.network import DeformNet
from synthgen.services.dataset import read_dataset
from synthgen.services.scenes import make_dataset

logger = logging.getLogger(__name__)


def load_scenes(cfg: RunConfig) -> list:
    """Scenes from cfg.dataset, or a fresh seeded dataset when no file is given."""
    if cfg.dataset:
        scenes = read_dataset(cfg.dataset)
        logger.info("Loaded %d scenes from %s", len(scenes), cfg.dataset)
        return scenes
    logger.info("Generating %d scenes (seed %d)", cfg.scenes, cfg.seed)
    return make_dataset(
        cfg.scenes,
        instances=cfg.instances,
        canvas=cfg.canvas,
        seed=cfg.seed,
        shrink_ratio=cfg.shrink_ratio,
        noise=cfg.kernel_noise,
    )


def load_regressor(path) -> Tuple[DeformNet, object]:
    """(net, segmenter or None) from a checkpoint file."""
    state, _ = load_checkpoint(path)
    return state.net, state.segmenter


def write_jsonl(path, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write('\n')
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + '\n', encoding='utf-8')
    return path


def loss_curve_records(history: Sequence[float], start_step: int = 0) -> List[dict]:
    return [{'step': start_step + i + 1, 'loss': loss} for i, loss in enumerate(history)]
