"""
Generate a seeded synthetic dataset.

Run with: python manage.py gen --scenes 200 --seed 7 --out-dir runs/data
"""

from synthgen.services.dataset import write_dataset
from synthgen.services.scenes import make_dataset

from ._base import DkeCommand

DATASET_FILE = 'dataset.jsonl'


class Command(DkeCommand):
    help = 'Write a seeded synthetic scene dataset (JSON Lines) into --out-dir'
    command_name = 'gen'

    def add_command_arguments(self, parser):
        parser.add_argument('--scenes', type=int, help='Number of scenes')
        parser.add_argument('--instances', type=int, help='Text instances per scene')
        parser.add_argument('--canvas', type=int, help='Square canvas side in pixels')
        parser.add_argument('--kernel-noise', type=float, help='Vertex jitter (px) of the oracle kernel maps')

    def run(self, cfg, out_dir, **options):
        scenes = make_dataset(
            cfg.scenes,
            instances=cfg.instances,
            canvas=cfg.canvas,
            seed=cfg.seed,
            shrink_ratio=cfg.shrink_ratio,
            noise=cfg.kernel_noise,
        )
        count = write_dataset(out_dir / DATASET_FILE, scenes)
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {count} scenes ({cfg.canvas}×{cfg.canvas}, seed {cfg.seed}) to {out_dir / DATASET_FILE}'
        ))
