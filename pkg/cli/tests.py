"""
CLI App Tests

Tests for run configuration resolution, the management commands and the
SVG deformation-path renderer.
"""
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from cli.exceptions import ConfigError
from cli.services.run_config import resolve_run_config
from cli.services.visualize import deformation_paths, render_scene_svg
from deformation.services.network import DeformNet
from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, ShrinkParams
from geometry.services.raster import points_inside
from geometry.services.sampling import sample_and_sort
from kernels.services.oracle import noisy_kernel_oracle
from synthgen.services.scenes import SynthInstance, SynthScene

SMALL = dict(scenes=2, n_vertices=16, seed=3)


def rect_scene(rects, canvas=256, ratio=0.4):
    instances = []
    for x, y, w, h in rects:
        boundary = Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])
        shrink = ShrinkParams.for_polygon(boundary, ratio)
        window = (int(x) - 4, int(y) - 4, int(w) + 9, int(h) + 9)
        instances.append(SynthInstance(
            boundary=boundary,
            kernel=offset(boundary, -shrink.margin),
            prob=noisy_kernel_oracle(boundary, shrink, window=window),
        ))
    return SynthScene(width=canvas, height=canvas, seed=0, instances=instances, shrink_ratio=ratio)


class PerfectOffsets:
    def __init__(self, boundaries):
        self.boundaries = boundaries

    def predict(self, contour, field, box):
        centre = contour.points.mean(axis=0)
        for b in self.boundaries:
            if points_inside(b.points, centre[None, :])[0]:
                return sample_and_sort(b, contour.n).points - contour.points
        return np.zeros_like(contour.points)


def run(command, **options):
    out = StringIO()
    call_command(command, stdout=out, **options)
    return out.getvalue()


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class RunConfigTests(CommandTestCase):
    """Tests for resolve_run_config."""

    def test_settings_defaults(self):
        cfg = resolve_run_config()
        self.assertEqual(cfg.n_vertices, 128)
        self.assertEqual(cfg.shrink_ratio, 0.4)
        self.assertEqual(cfg.loss, 'obgml')
        self.assertEqual(cfg.iterations, 1)
        self.assertEqual(cfg.iou_threshold, 0.5)
        self.assertEqual(cfg.canvas, 256)
        self.assertEqual(cfg.method, 'dce')
        self.assertIsNone(cfg.min_f)

    def test_file_then_flags(self):
        path = self.tmp / 'cfg.json'
        path.write_text(json.dumps({'seed': 11, 'loss': 'nnml', 'lr': 1}))
        cfg = resolve_run_config(path, {'seed': 12, 'n_vertices': None})
        self.assertEqual(cfg.seed, 12)
        self.assertEqual(cfg.loss, 'nnml')
        self.assertEqual(cfg.lr, 1.0)
        self.assertEqual(cfg.n_vertices, 128)

    @override_settings(DKE={'SEED': 5, 'N_VERTICES': 32, 'SHRINK_RATIO': 0.4, 'LOSS': 'dml', 'ITERATIONS': 2,
                            'IOU_THRESHOLD': 0.5, 'OUT_DIR': 'runs', 'LR': 2e-4, 'POLY_POWER': 0.9,
                            'LAMBDA_REG': 0.25, 'BATCH_SIZE': 8, 'STEPS': 10, 'LOG_EVERY': 100,
                            'CHECKPOINT_EVERY': 0, 'TRAIN_SEGMENTER': False, 'BINARIZE_THRESHOLD': 0.5,
                            'MIN_KERNEL_AREA': 4.0, 'KERNEL_NOISE': 0.0, 'UNCLIP_RATIO': 1.5, 'SCENES': 3,
                            'INSTANCES': 2, 'CANVAS': 128, 'REPETITIONS': 3})
    def test_defaults_follow_settings(self):
        cfg = resolve_run_config()
        self.assertEqual((cfg.seed, cfg.n_vertices, cfg.loss, cfg.iterations, cfg.canvas), (5, 32, 'dml', 2, 128))

    def test_seeds_validated(self):
        self.assertEqual(resolve_run_config().seeds, 1)
        with self.assertRaises(ConfigError):
            resolve_run_config(overrides={'seeds': 0})

    def test_unknown_key_rejected(self):
        path = self.tmp / 'cfg.json'
        path.write_text(json.dumps({'sed': 1}))
        with self.assertRaises(ConfigError):
            resolve_run_config(path)

    def test_bad_type_rejected(self):
        path = self.tmp / 'cfg.json'
        path.write_text(json.dumps({'n_vertices': '128'}))
        with self.assertRaises(ConfigError):
            resolve_run_config(path)

    def test_out_of_range_rejected(self):
        with self.assertRaises(ConfigError):
            resolve_run_config(overrides={'loss': 'l2'})
        with self.assertRaises(ConfigError):
            resolve_run_config(overrides={'scenes': 0})


class GenCommandTests(CommandTestCase):
    """Tests for the gen command."""

    def test_repeated_runs_are_byte_identical(self):
        a, b = self.tmp / 'a', self.tmp / 'b'
        run('gen', scenes=3, seed=7, out_dir=str(a))
        run('gen', scenes=3, seed=7, out_dir=str(b))
        self.assertEqual((a / 'dataset.jsonl').read_bytes(), (b / 'dataset.jsonl').read_bytes())
        self.assertEqual(len((a / 'dataset.jsonl').read_text().splitlines()), 3)
        self.assertTrue((a / 'run_meta.json').exists())

    def test_zero_scenes_fails(self):
        with self.assertRaises(CommandError):
            run('gen', scenes=0, out_dir=str(self.tmp))

    def test_run_meta_records_blas_threads(self):
        run('gen', scenes=1, out_dir=str(self.tmp))
        meta = json.loads((self.tmp / 'run_meta.json').read_text())
        self.assertEqual(sorted(meta['blas_threads']), ['MKL_NUM_THREADS', 'OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS'])
        for value in meta['blas_threads'].values():
            self.assertIsNotNone(value)

    def test_config_echo(self):
        run('gen', scenes=1, out_dir=str(self.tmp))
        echo = json.loads((self.tmp / 'config.json').read_text())
        self.assertEqual(echo['canvas'], 256)
        self.assertEqual(echo['scenes'], 1)

    def test_config_echo_reproduces_run(self):
        first = self.tmp / 'first'
        run('gen', scenes=2, seed=9, instances=2, out_dir=str(first))
        second = self.tmp / 'second'
        run('gen', config=str(first / 'config.json'), out_dir=str(second))
        self.assertEqual((first / 'dataset.jsonl').read_bytes(), (second / 'dataset.jsonl').read_bytes())

    def test_unknown_config_key_fails(self):
        path = self.tmp / 'cfg.json'
        path.write_text(json.dumps({'scenez': 3}))
        with self.assertRaises(CommandError):
            run('gen', config=str(path), out_dir=str(self.tmp / 'out'))


class TrainCommandTests(CommandTestCase):
    """Tests for train and the commands consuming its checkpoint."""

    def test_zero_steps_writes_initial_checkpoint(self):
        run('train', steps=0, out_dir=str(self.tmp), **SMALL)
        payload = json.loads((self.tmp / 'checkpoint.json').read_text())
        self.assertEqual(payload['step'], 0)
        self.assertEqual((self.tmp / 'loss_curve.jsonl').read_text(), '')
        report = json.loads((self.tmp / 'train_report.json').read_text())
        self.assertIsNone(report['final_loss'])

    def test_resume_reproduces_continued_curve(self):
        full = self.tmp / 'full'
        run('train', steps=10, checkpoint_every=5, batch_size=2, out_dir=str(full), **SMALL)
        resumed = self.tmp / 'resumed'
        run('train', steps=10, checkpoint_every=5, batch_size=2, out_dir=str(resumed),
            checkpoint=str(full / 'checkpoints' / 'step_000005.json'), **SMALL)
        full_curve = (full / 'loss_curve.jsonl').read_text().splitlines()
        self.assertEqual(len(full_curve), 10)
        self.assertEqual((resumed / 'loss_curve.jsonl').read_text().splitlines(), full_curve[5:])
        self.assertEqual((full / 'checkpoint.json').read_bytes(), (resumed / 'checkpoint.json').read_bytes())

    def test_infer_writes_one_record_per_scene(self):
        run('train', steps=2, batch_size=2, out_dir=str(self.tmp / 'train'), **SMALL)
        run('infer', checkpoint=str(self.tmp / 'train' / 'checkpoint.json'), out_dir=str(self.tmp / 'infer'), **SMALL)
        records = [json.loads(line) for line in (self.tmp / 'infer' / 'predictions.jsonl').read_text().splitlines()]
        self.assertEqual(len(records), 2)
        self.assertEqual([r['scene'] for r in records], [0, 1])

    def test_infer_without_checkpoint_fails(self):
        with self.assertRaises(CommandError):
            run('infer', out_dir=str(self.tmp), **SMALL)

    def test_ablate_emits_eight_rows(self):
        for kind in ('dml', 'nnml', 'obgml'):
            run('train', steps=0, loss=kind, out_dir=str(self.tmp / 'runs' / kind), **SMALL)
        out = run('ablate', checkpoint=str(self.tmp / 'runs'), out_dir=str(self.tmp / 'ablate'), **SMALL)
        records = (self.tmp / 'ablate' / 'ablation.jsonl').read_text().splitlines()
        self.assertEqual(len(records), 8)
        self.assertIn('DCE+NNML', out)

    def test_ablate_seed_sweep_writes_medians(self):
        for kind in ('dml', 'nnml', 'obgml'):
            run('train', steps=0, loss=kind, out_dir=str(self.tmp / 'runs' / kind), **SMALL)
        out = run('ablate', checkpoint=str(self.tmp / 'runs'), seeds=2, out_dir=str(self.tmp / 'ablate'), **SMALL)
        records = [json.loads(line) for line in (self.tmp / 'ablate' / 'ablation.jsonl').read_text().splitlines()]
        self.assertEqual(len(records), 16)
        self.assertEqual(sorted({r['seed'] for r in records}), [3, 4])
        medians = (self.tmp / 'ablate' / 'ablation_median.jsonl').read_text().splitlines()
        self.assertEqual(len(medians), 8)
        self.assertIn('trend:', out)

    def test_ablate_seed_sweep_rejects_dataset(self):
        run('gen', scenes=1, out_dir=str(self.tmp / 'data'))
        run('train', steps=0, loss='obgml', out_dir=str(self.tmp / 'runs' / 'obgml'), **SMALL)
        with self.assertRaises(CommandError):
            run('ablate', checkpoint=str(self.tmp / 'runs'), seeds=2,
                dataset=str(self.tmp / 'data' / 'dataset.jsonl'), out_dir=str(self.tmp / 'ablate'))

    def test_ablate_with_missing_run_fails(self):
        run('train', steps=0, loss='obgml', out_dir=str(self.tmp / 'runs' / 'obgml'), **SMALL)
        with self.assertRaises(CommandError):
            run('ablate', checkpoint=str(self.tmp / 'runs'), out_dir=str(self.tmp / 'ablate'), **SMALL)


class EvalCommandTests(CommandTestCase):
    """Tests for eval and bench."""

    def test_ground_truth_scores_full_marks(self):
        out = run('eval', method='gt', out_dir=str(self.tmp), **SMALL)
        report = json.loads((self.tmp / 'eval_report.json').read_text())
        self.assertEqual(report['f_measure'], 100.0)
        self.assertIn('F 100.0', out)

    def test_min_f_gate(self):
        run('eval', method='gt', min_f=99.0, out_dir=str(self.tmp), **SMALL)
        with self.assertRaises(CommandError):
            run('eval', method='baseline', min_f=100.1, out_dir=str(self.tmp), **SMALL)

    def test_dce_needs_checkpoint(self):
        with self.assertRaises(CommandError):
            run('eval', method='dce', out_dir=str(self.tmp), **SMALL)

    def test_bench_prints_stage_breakdown(self):
        out = run('bench', repetitions=3, out_dir=str(self.tmp), **SMALL)
        for stage in ('kernel_extraction', 'featurize', 'forward', 'expand'):
            self.assertIn(stage, out)
        report = json.loads((self.tmp / 'bench.json').read_text())
        self.assertEqual(report['scenes'], 2)
        self.assertIn('OMP_NUM_THREADS', report['blas_threads'])

    def test_bench_rejects_two_repetitions(self):
        with self.assertRaises(CommandError):
            run('bench', repetitions=2, out_dir=str(self.tmp), **SMALL)


class VisualizeTests(CommandTestCase):
    """Tests for the deformation-path renderer and the viz command."""

    def setUp(self):
        super().setUp()
        self.scene = rect_scene([(40, 60, 100, 40)])

    def test_zero_net_arrows_start_at_kernel(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        path = deformation_paths(zero, self.scene, 64, 'obgml')[0]
        np.testing.assert_array_equal(path.arrows[:, 0], path.kernel.points)
        np.testing.assert_array_equal(path.arrows[:, 1], path.target.points[path.cols])

    def test_perfect_net_gives_zero_length_arrows(self):
        path = deformation_paths(PerfectOffsets(self.scene.boundaries), self.scene, 64, 'obgml')[0]
        lengths = np.hypot(*(path.arrows[:, 1] - path.arrows[:, 0]).T)
        self.assertLess(lengths.max(), 1e-9)

    def test_pairing_structure_per_loss(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        nnml = deformation_paths(zero, self.scene, 64, 'nnml')[0]
        obgml = deformation_paths(zero, self.scene, 64, 'obgml')[0]
        dml = deformation_paths(zero, self.scene, 64, 'dml')[0]
        self.assertLess(len(set(nnml.cols.tolist())), 64)
        self.assertEqual(sorted(obgml.cols.tolist()), list(range(64)))
        self.assertEqual(dml.cols.tolist(), list(range(64)))

    def test_svg_layers(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        svg = render_scene_svg(self.scene, deformation_paths(zero, self.scene, 16, 'obgml'))
        self.assertTrue(svg.startswith('<svg'))
        self.assertEqual(svg.count('<polygon'), 3)
        self.assertEqual(svg.count('<line'), 16)

    def test_viz_command_is_deterministic(self):
        run('viz', loss='nnml', out_dir=str(self.tmp / 'a'), **SMALL)
        run('viz', loss='nnml', out_dir=str(self.tmp / 'b'), **SMALL)
        files = sorted(p.name for p in (self.tmp / 'a' / 'viz').iterdir())
        self.assertEqual(files, ['scene_000.svg', 'scene_001.svg'])
        for name in files:
            self.assertEqual((self.tmp / 'a' / 'viz' / name).read_bytes(), (self.tmp / 'b' / 'viz' / name).read_bytes())
