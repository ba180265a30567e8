"""
Expansion ablation: the fixed-offset baseline against the learned regressor
trained with each contour loss, at one and two expansion iterations.
"""

import json
import logging
from dataclasses import replace
from typing import Dict, Sequence

import pandas as pd

from deformation.services.inference import InferConfig, infer
from evaluation.exceptions import MissingNetError
from evaluation.services.baseline import DEFAULT_UNCLIP_RATIO, baseline_detect
from evaluation.services.metrics import DEFAULT_IOU_THRESHOLD, evaluate_scenes

logger = logging.getLogger(__name__)

BASELINE = 'baseline'
METHODS = (
    (BASELINE, None),
    ('DCE+DML', 'dml'),
    ('DCE+NNML', 'nnml'),
    ('DCE+OBGML', 'obgml'),
)
ITERATIONS = (1, 2)
COLUMNS = ['method', 'loss', 'iterations', 'precision', 'recall', 'f_measure',
           'mean_iou', 'matched', 'missed', 'spurious']


def run_ablation(
    scenes: Sequence,
    nets: Dict[str, object],
    cfg: InferConfig,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    unclip_ratio: float = DEFAULT_UNCLIP_RATIO,
    segmenter=None,
    methods=METHODS,
    iterations=ITERATIONS,
) -> pd.DataFrame:
    """
    Evaluate every (method, iterations) row on the scenes.

    Args:
        scenes: synthetic scenes; each is scored on its composed probability map
        nets: trained regressors keyed by loss kind ('dml', 'nnml', 'obgml')
        cfg: inference settings; dce_iterations is overridden per row
        iou_threshold: match threshold for evaluate
        unclip_ratio: margin ratio of the baseline rows
        segmenter: optional surrogate segmenter shared by all rows

    Returns:
        one row per (method, iterations), in METHODS × ITERATIONS order;
        baseline rows do not depend on the iteration count

    Raises:
        MissingNetError: a learned row has no regressor in `nets`
    """
    missing = sorted({kind for _, kind in methods if kind is not None and kind not in nets})
    if missing:
        raise MissingNetError(f"No trained regressor for loss kind(s): {', '.join(missing)}")

    gts = [scene.boundaries for scene in scenes]
    maps = [scene.prob_map() for scene in scenes]
    baseline_preds = None
    rows = []
    for method, kind in methods:
        for k in iterations:
            if kind is None:
                if baseline_preds is None:
                    baseline_preds = [baseline_detect(pm, cfg, unclip_ratio, segmenter) for pm in maps]
                preds = baseline_preds
            else:
                row_cfg = replace(cfg, dce_iterations=k)
                preds = [infer(nets[kind], pm, row_cfg, segmenter=segmenter) for pm in maps]
            report = evaluate_scenes(preds, gts, iou_threshold)
            logger.info("%s x%d: P %.1f R %.1f F %.1f", method, k, report.precision, report.recall, report.f_measure)
            rows.append({
                'method': method,
                'loss': kind or '',
                'iterations': k,
                'precision': report.precision,
                'recall': report.recall,
                'f_measure': report.f_measure,
                'mean_iou': report.mean_iou_of_matches,
                'matched': report.matched,
                'missed': report.missed,
                'spurious': report.spurious,
            })
    return pd.DataFrame(rows, columns=COLUMNS)


def format_table(table: pd.DataFrame) -> str:
    """Aligned text rendering with one decimal for percentages."""
    return table.to_string(index=False, float_format=lambda v: f"{v:.1f}")


def table_records(table: pd.DataFrame) -> str:
    """JSON Lines rendering of the table."""
    return ''.join(json.dumps(rec, sort_keys=True) + '\n' for rec in table.to_dict(orient='records'))


def trend_warnings(table: pd.DataFrame) -> list:
    """
    Soft checks on the expected ordering of the rows:
    OBGML >= DML >= baseline at one iteration, and OBGML at one iteration >= two.
    """
    f = {(r.method, r.iterations): r.f_measure for r in table.itertuples()}
    warnings = []

    def expect(a, b):
        if a in f and b in f and f[a] < f[b]:
            warnings.append(f"F of {a[0]} x{a[1]} ({f[a]:.1f}) is below {b[0]} x{b[1]} ({f[b]:.1f})")

    expect(('DCE+OBGML', 1), ('DCE+DML', 1))
    expect(('DCE+DML', 1), (BASELINE, 1))
    expect(('DCE+OBGML', 1), ('DCE+OBGML', 2))
    return warnings


def run_ablation_seeds(scene_sets: Dict[int, Sequence], nets: Dict[str, object], cfg: InferConfig,
                       **kwargs) -> pd.DataFrame:
    """
    run_ablation once per evaluation split, keyed by the seed that generated it.

    Returns:
        the per-seed tables stacked, with a leading 'seed' column
    """
    if not scene_sets:
        raise ValueError("Seed sweep needs at least one evaluation split")
    tables = []
    for seed, scenes in scene_sets.items():
        logger.info("Ablation on split seed %d (%d scenes)", seed, len(scenes))
        table = run_ablation(scenes, nets, cfg, **kwargs)
        table.insert(0, 'seed', seed)
        tables.append(table)
    return pd.concat(tables, ignore_index=True)


def median_table(sweep: pd.DataFrame) -> pd.DataFrame:
    """Per-row medians over the seeds of a sweep, in the original row order."""
    metrics = ['precision', 'recall', 'f_measure', 'mean_iou', 'matched', 'missed', 'spurious']
    grouped = sweep.groupby(['method', 'loss', 'iterations'], sort=False)
    table = grouped[metrics].median().reset_index()
    table['seeds'] = grouped['seed'].nunique().to_numpy()
    return table[COLUMNS + ['seeds']]
