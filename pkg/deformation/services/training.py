"""
Regressor training.

Every annotated instance becomes one training example: the boundary is
shrunk into its kernel, kernel and boundary are sampled into canonical
N-vertex contours P and G, and P is featurized against the instance's
probability window. A step samples a batch, expands P by the predicted
offsets, scores the result against G with the configured contour loss and
applies Adam under the poly schedule. With the surrogate segmenter enabled,
the objective is L_s + λ·L_r.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from deformation.exceptions import TrainingDiverged
from deformation.services.features import SurrogateFeatureField, featurize
from deformation.services.network import DEPTH, HIDDEN_WIDTH, KERNEL_SIZE, DeformNet
from deformation.services.optim import AdamState, adam_step, poly_lr
from geometry.exceptions import GeometryError
from geometry.services.offsetting import offset
from geometry.services.polygons import shrink_margin
from geometry.services.raster import rasterize
from geometry.services.sampling import Contour, sample_and_sort
from kernels.services.ohem import bce_ohem_loss
from kernels.services.segmenter import SurrogateSegmenter
from matching.services.hungarian import cost_matrix, hungarian
from matching.services.losses import LOSS_KINDS, contour_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 2e-4
    poly_power: float = 0.9
    lambda_reg: float = 0.25
    batch_size: int = 8
    max_steps: int = 2000
    shrink_ratio: float = 0.4
    n_vertices: int = 128
    dce_iterations: int = 1
    loss_kind: str = 'obgml'
    seed: int = 0
    train_segmenter: bool = False
    log_every: int = 100
    checkpoint_every: int = 0
    width: int = HIDDEN_WIDTH
    depth: int = DEPTH
    kernel_size: int = KERNEL_SIZE

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.lambda_reg < 0:
            raise ValueError(f"lambda_reg must be >= 0, got {self.lambda_reg}")
        if self.dce_iterations < 1:
            raise ValueError(f"dce_iterations must be >= 1, got {self.dce_iterations}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"Unknown loss kind {self.loss_kind!r}; choose from {', '.join(LOSS_KINDS)}")
        if self.batch_size < 1 or self.max_steps < 0 or self.n_vertices < 4:
            raise ValueError("batch_size >= 1, max_steps >= 0 and n_vertices >= 4 are required")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TrainingExample:
    kernel_contour: Contour
    target_contour: Contour
    features: np.ndarray
    seg_input: np.ndarray
    seg_target: np.ndarray


@dataclass
class TrainReport:
    history: List[float] = field(default_factory=list)
    seg_history: List[float] = field(default_factory=list)
    start_step: int = 0
    steps: int = 0
    diverged: bool = False

    @property
    def final_loss(self) -> Optional[float]:
        return self.history[-1] if self.history else None

    def smoothed(self, window: int = 50) -> np.ndarray:
        """Trailing moving average of the loss history."""
        h = np.asarray(self.history, dtype=np.float64)
        if len(h) == 0:
            return h
        c = np.concatenate([[0.0], np.cumsum(h)])
        idx = np.arange(1, len(h) + 1)
        lo = np.maximum(idx - window, 0)
        return (c[idx] - c[lo]) / (idx - lo)


@dataclass
class TrainingState:
    net: DeformNet
    adam: AdamState
    rng: np.random.Generator
    step: int = 0
    segmenter: Optional[SurrogateSegmenter] = None
    seg_adam: Optional[AdamState] = None


def build_examples(scenes: Sequence, cfg: TrainConfig) -> List[TrainingExample]:
    """Precompute P, G and the feature matrix of every instance in the dataset."""
    examples = []
    for scene in scenes:
        for inst in scene.instances:
            try:
                kernel = offset(inst.boundary, -shrink_margin(inst.boundary, cfg.shrink_ratio))
                p = sample_and_sort(kernel, cfg.n_vertices)
                g = sample_and_sort(inst.boundary, cfg.n_vertices)
            except GeometryError as e:
                logger.warning("Skipping instance of scene %s: %s", scene.seed, e)
                continue
            pm = inst.prob
            field_ = SurrogateFeatureField.from_prob_map(pm)
            seg_target = rasterize(kernel, pm.width, pm.height, pm.x0, pm.y0).astype(np.float64)
            examples.append(TrainingExample(
                kernel_contour=p,
                target_contour=g,
                features=featurize(p, field_, p.bbox()),
                seg_input=np.asarray(pm.values, dtype=np.float64),
                seg_target=seg_target,
            ))
    return examples


def initial_state(cfg: TrainConfig) -> TrainingState:
    net = DeformNet(width=cfg.width, depth=cfg.depth, kernel_size=cfg.kernel_size, seed=cfg.seed)
    state = TrainingState(net=net, adam=AdamState.zeros_like(net.params), rng=np.random.default_rng(cfg.seed))
    if cfg.train_segmenter:
        state.segmenter = SurrogateSegmenter()
        state.seg_adam = AdamState.zeros_like(state.segmenter.params)
    return state


def train(
    scenes: Sequence,
    cfg: TrainConfig,
    state: Optional[TrainingState] = None,
    on_checkpoint: Optional[Callable[[TrainingState, TrainReport], None]] = None,
):
    """
    Train the expansion regressor (and optionally the surrogate segmenter).

    Args:
        scenes: synthetic scenes with boundaries and probability windows
        cfg: training configuration
        state: resume from this state (e.g. a loaded checkpoint); fresh when None
        on_checkpoint: called every cfg.checkpoint_every steps

    Returns:
        (final TrainingState, TrainReport)

    Raises:
        ValueError: the dataset yields no training examples
        TrainingDiverged: the loss became non-finite
    """
    examples = build_examples(scenes, cfg)
    if not examples:
        raise ValueError("Training needs a non-empty dataset")
    state = state or initial_state(cfg)
    report = TrainReport(start_step=state.step)

    P = np.stack([ex.kernel_contour.points for ex in examples])
    G = np.stack([ex.target_contour.points for ex in examples])
    U = np.stack([ex.features for ex in examples])
    logger.info(
        "Training %s on %d instances for %d steps (batch %d, lr0 %g)",
        cfg.loss_kind, len(examples), cfg.max_steps - state.step, cfg.batch_size, cfg.lr0,
    )

    while state.step < cfg.max_steps:
        step = state.step
        lr = poly_lr(step, cfg.max_steps, cfg)
        batch = state.rng.integers(0, len(examples), size=cfg.batch_size)

        offsets, cache = state.net.forward_with_cache(U[batch])
        pred = P[batch] + offsets
        upstream = np.zeros_like(pred)
        reg_loss = 0.0
        for b, i in enumerate(batch):
            loss = contour_loss(cfg.loss_kind, pred[b], G[i])
            reg_loss += loss.value
            upstream[b] = loss.grad
        reg_loss /= cfg.batch_size
        upstream /= cfg.batch_size

        seg_loss, seg_grads = 0.0, None
        if state.segmenter is not None:
            seg_loss, seg_grads = _segmenter_pass(state.segmenter, [examples[i] for i in batch])
            total = seg_loss + cfg.lambda_reg * reg_loss
            upstream *= cfg.lambda_reg
        else:
            total = reg_loss

        if not np.isfinite(total):
            report.diverged = True
            report.steps = len(report.history)
            logger.error("Training diverged at step %d (loss %r)", step, total)
            raise TrainingDiverged(f"Loss became non-finite at step {step}", report=report)

        grads, _ = state.net.backward(cache, upstream)
        state.net, state.adam = adam_step(state.net, grads, state.adam, lr)
        if seg_grads is not None:
            state.segmenter, state.seg_adam = adam_step(state.segmenter, seg_grads, state.seg_adam, lr)
            report.seg_history.append(float(seg_loss))

        report.history.append(float(total))
        state.step = step + 1
        if cfg.log_every and state.step % cfg.log_every == 0:
            logger.info("step %d/%d loss %.5f lr %.3g", state.step, cfg.max_steps, report.smoothed(cfg.log_every)[-1], lr)
        if on_checkpoint and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            on_checkpoint(state, report)

    report.steps = len(report.history)
    return state, report


def _segmenter_pass(segmenter: SurrogateSegmenter, batch: List[TrainingExample]):
    """Mean mined-BCE over the batch windows and the segmenter gradients."""
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in segmenter.params.items()}
    for ex in batch:
        y = segmenter.forward(ex.seg_input)
        loss = bce_ohem_loss(y, ex.seg_target)
        total += loss.value
        for k, g in segmenter.backward(ex.seg_input, y, loss.grad).items():
            grads[k] += g
    n = len(batch)
    return total / n, {k: g / n for k, g in grads.items()}


def mean_vertex_error(net: DeformNet, examples: Sequence[TrainingExample]) -> float:
    """Mean distance (px) between expanded kernel vertices and their optimally matched target vertices."""
    if not examples:
        raise ValueError("No examples to score")
    errors = []
    for ex in examples:
        pred = ex.kernel_contour.points + net.forward(ex.features)
        target = ex.target_contour.points
        cols = hungarian(cost_matrix(pred, target)).cols
        errors.append(np.mean(np.hypot(*(pred - target[cols]).T)))
    return float(np.mean(errors))
