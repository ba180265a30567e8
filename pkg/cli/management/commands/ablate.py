"""
Ablation table: fixed-offset baseline vs. the regressor trained with each loss.

--checkpoint points at a directory holding one training run per loss kind,
i.e. <dir>/dml/checkpoint.json, <dir>/nnml/checkpoint.json and
<dir>/obgml/checkpoint.json.

With --seeds S the rows are evaluated on S generated splits; ablation.jsonl
holds every per-seed row and ablation.txt the medians.

Run with: python manage.py ablate --checkpoint runs --dataset runs/test/dataset.jsonl
"""

from dataclasses import replace
from pathlib import Path

from django.core.management.base import CommandError

from evaluation.services.ablation import (
    format_table,
    median_table,
    run_ablation,
    run_ablation_seeds,
    table_records,
    trend_warnings,
)
from matching.services.losses import LOSS_KINDS

from cli.services.artifacts import load_regressor, load_scenes

from ._base import DkeCommand

TABLE_FILE = 'ablation.txt'
RECORDS_FILE = 'ablation.jsonl'
MEDIAN_RECORDS_FILE = 'ablation_median.jsonl'


class Command(DkeCommand):
    help = 'Evaluate baseline and DCE+{DML,NNML,OBGML} at 1 and 2 iterations'
    command_name = 'ablate'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', type=str, help='Directory with <loss>/checkpoint.json runs')
        parser.add_argument('--unclip-ratio', type=float, help='Baseline expansion ratio')
        parser.add_argument('--min-f', type=float, help='Fail when the DCE row of --loss / --iterations scores below this F')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')
        parser.add_argument('--seeds', type=int, help='Evaluation splits (seed, seed+1, ...); the table holds per-row medians')

    def run(self, cfg, out_dir, **options):
        if not cfg.checkpoint:
            raise CommandError('ablate needs --checkpoint (directory of per-loss runs)')
        if cfg.seeds > 1 and cfg.dataset:
            raise CommandError('--seeds draws fresh evaluation splits; drop --dataset')
        root = Path(cfg.checkpoint)
        nets, segmenter = {}, None
        for kind in LOSS_KINDS:
            path = root / kind / 'checkpoint.json'
            if path.exists():
                nets[kind], seg = load_regressor(path)
                segmenter = segmenter or seg

        kwargs = dict(iou_threshold=cfg.iou_threshold, unclip_ratio=cfg.unclip_ratio, segmenter=segmenter)
        if cfg.seeds > 1:
            splits = {cfg.seed + k: load_scenes(replace(cfg, seed=cfg.seed + k)) for k in range(cfg.seeds)}
            sweep = run_ablation_seeds(splits, nets, cfg.infer_config(), **kwargs)
            (out_dir / RECORDS_FILE).write_text(table_records(sweep), encoding='utf-8')
            table = median_table(sweep)
            (out_dir / MEDIAN_RECORDS_FILE).write_text(table_records(table), encoding='utf-8')
        else:
            table = run_ablation(load_scenes(cfg), nets, cfg.infer_config(), **kwargs)
            (out_dir / RECORDS_FILE).write_text(table_records(table), encoding='utf-8')
        text = format_table(table)
        (out_dir / TABLE_FILE).write_text(text + '\n', encoding='utf-8')
        self.stdout.write(text)
        warnings = trend_warnings(table)
        for warning in warnings:
            self.stdout.write(self.style.WARNING(f'trend: warn: {warning}'))
        if not warnings:
            self.stdout.write(self.style.SUCCESS('trend: pass'))

        row = table[(table['loss'] == cfg.loss) & (table['iterations'] == cfg.iterations)]
        if len(row):
            self.check_min_f(cfg, float(row['f_measure'].iloc[0]), f'DCE+{cfg.loss.upper()} x{cfg.iterations}')
