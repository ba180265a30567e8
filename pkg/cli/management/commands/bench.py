"""
Throughput benchmark (single thread, batch size 1).

Run with: python manage.py bench --checkpoint runs/obgml/checkpoint.json --repetitions 5
"""

from deformation.services.network import DeformNet
from evaluation.services.timing import benchmark

from cli.services.artifacts import load_regressor, load_scenes, write_json
from cli.services.run_config import blas_threads

from ._base import DkeCommand

REPORT_FILE = 'bench.json'


class Command(DkeCommand):
    help = 'Time inference; prints scenes/second and the per-stage breakdown'
    command_name = 'bench'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', type=str, help='Trained regressor (a freshly initialized one when omitted)')
        parser.add_argument('--repetitions', type=int, help='Timed passes after the warm-up (>= 3)')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')

    def run(self, cfg, out_dir, **options):
        if cfg.checkpoint:
            net, segmenter = load_regressor(cfg.checkpoint)
        else:
            net, segmenter = DeformNet(seed=cfg.seed), None
        report = benchmark(net, load_scenes(cfg), cfg.repetitions, cfg.infer_config(), segmenter=segmenter)
        threads = blas_threads()
        write_json(out_dir / REPORT_FILE, {**report.to_dict(), 'blas_threads': threads})
        if any(value != '1' for value in threads.values()):
            self.stdout.write(self.style.WARNING(f'BLAS is not pinned to one thread: {threads}'))

        self.stdout.write(self.style.SUCCESS(
            f'{report.scenes_per_second:.1f} scenes/s ({report.ms_per_scene:.2f} ms per scene, '
            f'median of {report.repetitions})'
        ))
        for stage, ms in report.stage_ms.items():
            self.stdout.write(f'  {stage:<18} {ms:8.3f} ms')
