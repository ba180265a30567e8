"""
Run configuration.

A RunConfig is resolved in three layers: the DKE defaults in settings, an
optional JSON config file, then command-line flags. The resolved config is
echoed into the output directory as config.json so the run can be repeated
with --config; wall-clock metadata goes to run_meta.json instead.
"""

import json
import logging
import os
import platform
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Optional

from django.conf import settings
from django.utils import timezone

from cli.exceptions import ConfigError
from deformation.services.inference import InferConfig
from deformation.services.training import TrainConfig
from matching.services.losses import LOSS_KINDS

logger = logging.getLogger(__name__)

CONFIG_FILE = 'config.json'
META_FILE = 'run_meta.json'
EVAL_METHODS = ('dce', 'baseline', 'gt')


@dataclass(frozen=True)
class RunConfig:
    seed: int
    n_vertices: int
    shrink_ratio: float
    loss: str
    iterations: int
    iou_threshold: float
    out_dir: str
    lr: float
    poly_power: float
    lambda_reg: float
    batch_size: int
    steps: int
    log_every: int
    checkpoint_every: int
    train_segmenter: bool
    binarize_threshold: float
    min_kernel_area: float
    kernel_noise: float
    unclip_ratio: float
    scenes: int
    instances: int
    canvas: int
    repetitions: int
    seeds: int = 1
    dataset: Optional[str] = None
    checkpoint: Optional[str] = None
    method: str = 'dce'
    min_f: Optional[float] = None

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss must be one of {', '.join(LOSS_KINDS)}, got {self.loss!r}")
        if self.n_vertices < 4:
            raise ConfigError(f"n_vertices must be >= 4, got {self.n_vertices}")
        if not 0.0 < self.shrink_ratio < 1.0:
            raise ConfigError(f"shrink_ratio must lie in (0, 1), got {self.shrink_ratio}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")
        if self.scenes < 1 or self.instances < 1:
            raise ConfigError("scenes and instances must be >= 1")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be >= 1, got {self.seeds}")
        if self.method not in EVAL_METHODS:
            raise ConfigError(f"method must be one of {', '.join(EVAL_METHODS)}, got {self.method!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr0=self.lr,
            poly_power=self.poly_power,
            lambda_reg=self.lambda_reg,
            batch_size=self.batch_size,
            max_steps=self.steps,
            shrink_ratio=self.shrink_ratio,
            n_vertices=self.n_vertices,
            dce_iterations=self.iterations,
            loss_kind=self.loss,
            seed=self.seed,
            train_segmenter=self.train_segmenter,
            log_every=self.log_every,
            checkpoint_every=self.checkpoint_every,
        )

    def infer_config(self) -> InferConfig:
        return InferConfig(
            n_vertices=self.n_vertices,
            dce_iterations=self.iterations,
            binarize_threshold=self.binarize_threshold,
            min_kernel_area=self.min_kernel_area,
        )


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    """Check a config-file value against the field's type (ints are accepted for floats)."""
    if value is None:
        if name in ('dataset', 'checkpoint', 'min_f'):
            return None
        raise ConfigError(f"{name} may not be null")
    kind = FIELD_TYPES[name]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float or name == 'min_f':
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is bool:
        ok = isinstance(value, bool)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"{name}: unexpected value {value!r}")
    return value


def settings_defaults() -> dict:
    """RunConfig fields taken from settings.DKE."""
    values = {}
    for key, value in settings.DKE.items():
        name = key.lower()
        if name in FIELD_TYPES:
            values[name] = value
    return values


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(FIELD_TYPES))
    if unknown:
        raise ConfigError(f"Unknown config key(s) in {path}: {', '.join(unknown)}")
    return {name: _coerce(name, value) for name, value in data.items()}


def resolve_run_config(config_path=None, overrides: Optional[Mapping] = None) -> RunConfig:
    """
    Merge settings defaults, the config file and flag overrides.

    Flag overrides whose value is None are treated as not given.

    Raises:
        ConfigError: unreadable file, unknown key, bad type or out-of-range value
    """
    values = settings_defaults()
    if config_path:
        values.update(load_config_file(config_path))
    for name, value in (overrides or {}).items():
        if name not in FIELD_TYPES:
            raise ConfigError(f"Unknown option {name!r}")
        if value is not None:
            values[name] = value
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def write_config_echo(cfg: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CONFIG_FILE
    path.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding='utf-8')
    return path


def write_run_meta(out_dir, command: str) -> Path:
    """Timestamps and host details; the only artifact that differs between repeated runs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / META_FILE
    meta = {
        'command': command,
        'started_at': timezone.now().isoformat(),
        'host': platform.node(),
        'python': platform.python_version(),
        'environment': getattr(settings, 'ENV', 'development'),
        'blas_threads': blas_threads(),
    }
    path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding='utf-8')
    return path


def blas_threads() -> dict:
    """Thread-count variables the BLAS/OpenMP pools were started with."""
    return {var: os.environ.get(var) for var in getattr(settings, 'BLAS_THREAD_VARS', ())}
