"""
Evaluate detections on a dataset.

Run with: python manage.py eval --checkpoint runs/obgml/checkpoint.json --dataset runs/test/dataset.jsonl
--method baseline scores the fixed-offset expansion; --method gt scores the
ground truth against itself.
"""

from django.core.management.base import CommandError

from deformation.services.inference import infer
from evaluation.services.baseline import baseline_detect
from evaluation.services.metrics import evaluate_scenes

from cli.services.artifacts import load_regressor, load_scenes, write_json
from cli.services.run_config import EVAL_METHODS

from ._base import DkeCommand

REPORT_FILE = 'eval_report.json'
TEXT_FILE = 'eval_report.txt'


class Command(DkeCommand):
    help = 'Score predicted boundaries against ground truth (precision / recall / F-measure)'
    command_name = 'eval'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', type=str, help='Trained regressor (required for --method dce)')
        parser.add_argument('--method', choices=EVAL_METHODS, help='What produces the predictions')
        parser.add_argument('--unclip-ratio', type=float, help='Baseline expansion ratio')
        parser.add_argument('--binarize-threshold', type=float, help='Kernel map threshold')
        parser.add_argument('--min-f', type=float, help='Fail when F falls below this value')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')

    def run(self, cfg, out_dir, **options):
        scenes = load_scenes(cfg)
        gts = [scene.boundaries for scene in scenes]
        infer_cfg = cfg.infer_config()

        if cfg.method == 'gt':
            preds = gts
        elif cfg.method == 'baseline':
            preds = [baseline_detect(s.prob_map(), infer_cfg, cfg.unclip_ratio) for s in scenes]
        else:
            if not cfg.checkpoint:
                raise CommandError('eval --method dce needs --checkpoint')
            net, segmenter = load_regressor(cfg.checkpoint)
            preds = [infer(net, s.prob_map(), infer_cfg, segmenter=segmenter) for s in scenes]

        report = evaluate_scenes(preds, gts, cfg.iou_threshold)
        summary = (
            f'{cfg.method}: P {report.precision:.1f}  R {report.recall:.1f}  F {report.f_measure:.1f}  '
            f'(matched {report.matched}, missed {report.missed}, spurious {report.spurious}, '
            f'mean IoU {report.mean_iou_of_matches:.3f})'
        )
        write_json(out_dir / REPORT_FILE, {'method': cfg.method, **report.to_dict()})
        (out_dir / TEXT_FILE).write_text(summary + '\n', encoding='utf-8')
        self.stdout.write(self.style.SUCCESS(summary))
        self.check_min_f(cfg, report.f_measure, cfg.method)
