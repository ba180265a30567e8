"""
Render deformation paths as SVG.

Run with: python manage.py viz --checkpoint runs/obgml/checkpoint.json --loss nnml --scenes 4
Without --checkpoint the regressor predicts zero offsets, so the arrows run
from the kernel vertices to their paired boundary vertices.
"""

from deformation.services.network import DeformNet

from cli.services.artifacts import load_regressor, load_scenes
from cli.services.visualize import deformation_paths, render_scene_svg

from ._base import DkeCommand

VIZ_DIR = 'viz'


class Command(DkeCommand):
    help = 'Write one SVG per scene with boundary, kernel, prediction and matching arrows'
    command_name = 'viz'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', type=str, help='Trained regressor (zero offsets when omitted)')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')

    def run(self, cfg, out_dir, **options):
        if cfg.checkpoint:
            net, _ = load_regressor(cfg.checkpoint)
        else:
            net = DeformNet.zeros_like(DeformNet(seed=cfg.seed))
        target = out_dir / VIZ_DIR
        target.mkdir(parents=True, exist_ok=True)
        scenes = load_scenes(cfg)
        for idx, scene in enumerate(scenes):
            paths = deformation_paths(net, scene, cfg.n_vertices, cfg.loss, cfg.iterations)
            (target / f'scene_{idx:03d}.svg').write_text(render_scene_svg(scene, paths) + '\n', encoding='utf-8')
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(scenes)} SVG files ({cfg.loss} pairing) to {target}'))
