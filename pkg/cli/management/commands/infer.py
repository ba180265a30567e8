"""
Run detection on every scene of a dataset.

Run with: python manage.py infer --checkpoint runs/obgml/checkpoint.json --dataset runs/test/dataset.jsonl
"""

from django.core.management.base import CommandError

from deformation.services.inference import infer

from cli.services.artifacts import load_regressor, load_scenes, write_jsonl

from ._base import DkeCommand

PREDICTIONS_FILE = 'predictions.jsonl'


class Command(DkeCommand):
    help = 'Predict text boundaries for every scene; writes predictions.jsonl'
    command_name = 'infer'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', type=str, help='Trained regressor')
        parser.add_argument('--binarize-threshold', type=float, help='Kernel map threshold')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')

    def run(self, cfg, out_dir, **options):
        if not cfg.checkpoint:
            raise CommandError('infer needs --checkpoint')
        net, segmenter = load_regressor(cfg.checkpoint)
        infer_cfg = cfg.infer_config()
        records = []
        for idx, scene in enumerate(load_scenes(cfg)):
            polygons = infer(net, scene.prob_map(), infer_cfg, segmenter=segmenter)
            records.append({
                'scene': idx,
                'seed': scene.seed,
                'polygons': [p.to_flat() for p in polygons],
            })
        write_jsonl(out_dir / PREDICTIONS_FILE, records)
        total = sum(len(r['polygons']) for r in records)
        self.stdout.write(self.style.SUCCESS(f'{total} boundaries in {len(records)} scenes -> {out_dir / PREDICTIONS_FILE}'))
