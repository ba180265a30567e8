"""
Evaluation App Tests

Tests for IoU matching metrics, the fixed-expansion baseline, the ablation
table and the benchmark.
"""
import json

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag

from deformation.services.inference import InferConfig
from deformation.services.network import DeformNet
from deformation.services.training import TrainConfig, train
from evaluation.exceptions import MissingNetError
from evaluation.services.ablation import (
    format_table,
    median_table,
    run_ablation,
    run_ablation_seeds,
    table_records,
    trend_warnings,
)
from evaluation.services.baseline import baseline_detect, fixed_expand_baseline, unclip_margin
from evaluation.services.metrics import EvalReport, evaluate, evaluate_scenes, f_measure
from evaluation.services.timing import benchmark
from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, ShrinkParams, area
from geometry.services.raster import points_inside, polygon_iou
from geometry.services.sampling import sample_and_sort
from kernels.services.oracle import noisy_kernel_oracle
from synthgen.services.scenes import SynthInstance, SynthScene, make_dataset
from synthgen.services.shapes import ShapeSpec, make_ribbon

# (P, R, F) rows of published ablation tables whose F is the harmonic mean of the printed P and R
PUBLISHED_ROWS = [
    (89.3, 79.5, 84.1),
    (90.8, 85.1, 87.9),
    (84.0, 83.0, 83.5),
    (87.4, 82.6, 84.9),
    (86.6, 85.2, 85.9),
    (90.2, 84.6, 87.3),
    (86.4, 84.1, 85.2),
]


def rect(x, y, w, h):
    return Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])


def rect_scene(rects, canvas=256, ratio=0.4):
    instances = []
    for x, y, w, h in rects:
        boundary = rect(x, y, w, h)
        shrink = ShrinkParams.for_polygon(boundary, ratio)
        window = (int(x) - 4, int(y) - 4, int(w) + 9, int(h) + 9)
        instances.append(SynthInstance(
            boundary=boundary,
            kernel=offset(boundary, -shrink.margin),
            prob=noisy_kernel_oracle(boundary, shrink, window=window),
        ))
    return SynthScene(width=canvas, height=canvas, seed=0, instances=instances, shrink_ratio=ratio)


def counts_for(precision, recall):
    """Integer (matched, missed, spurious) reproducing P and R exactly (percent, one decimal)."""
    p, r = round(precision * 10), round(recall * 10)
    matched = p * r
    return matched, 1000 * p - matched, 1000 * r - matched


class PerfectOffsets:
    def __init__(self, boundaries):
        self.boundaries = boundaries

    def predict(self, contour, field, box):
        centre = contour.points.mean(axis=0)
        for b in self.boundaries:
            if points_inside(b.points, centre[None, :])[0]:
                return sample_and_sort(b, contour.n).points - contour.points
        return np.zeros_like(contour.points)


class EvaluateTests(SimpleTestCase):
    """Tests for evaluate and EvalReport."""

    def setUp(self):
        self.gts = [rect(10, 10, 100, 40), rect(10, 80, 60, 30), rect(120, 120, 80, 50)]

    def test_perfect_detection(self):
        report = evaluate(self.gts, self.gts)
        self.assertEqual((report.precision, report.recall, report.f_measure), (100.0, 100.0, 100.0))
        self.assertAlmostEqual(report.mean_iou_of_matches, 1.0)

    def test_published_rows_are_harmonic_means(self):
        for p, r, f in PUBLISHED_ROWS:
            with self.subTest(p=p, r=r):
                report = EvalReport.from_counts(*counts_for(p, r))
                self.assertAlmostEqual(report.precision, p, places=9)
                self.assertAlmostEqual(report.recall, r, places=9)
                self.assertAlmostEqual(report.f_measure, f, delta=0.05)

    def test_f_measure_values(self):
        self.assertAlmostEqual(f_measure(89.3, 79.5), 84.1, delta=0.05)
        self.assertAlmostEqual(f_measure(90.8, 85.1), 87.9, delta=0.05)
        self.assertEqual(f_measure(0.0, 0.0), 0.0)

    def test_kernel_below_threshold(self):
        # 76×16 kernel centred in a 100×40 box: IoU 1216 / 4000
        gt = rect(20, 30, 100, 40)
        kernel = rect(32, 42, 76, 16)
        self.assertAlmostEqual(polygon_iou(kernel, gt), 0.304, places=3)
        report = evaluate([kernel], [gt])
        self.assertEqual(report.f_measure, 0.0)
        self.assertEqual(report.per_scene[0].missed, 1)
        self.assertEqual(report.per_scene[0].spurious, 1)

    def test_empty_denominators(self):
        self.assertEqual(evaluate([], []).f_measure, 0.0)
        report = evaluate([], self.gts)
        self.assertEqual((report.precision, report.recall), (0.0, 0.0))

    def test_symmetric_under_permutation(self):
        preds = [g.translated(3, 2) for g in self.gts] + [rect(200, 10, 30, 30)]
        base = evaluate(preds, self.gts)
        rng = np.random.default_rng(0)
        for _ in range(5):
            pi, gi = rng.permutation(len(preds)), rng.permutation(len(self.gts))
            shuffled = evaluate([preds[i] for i in pi], [self.gts[i] for i in gi])
            self.assertEqual((shuffled.matched, shuffled.missed, shuffled.spurious),
                             (base.matched, base.missed, base.spurious))
            self.assertAlmostEqual(shuffled.f_measure, base.f_measure)

    def test_spurious_prediction_lowers_precision(self):
        preds = self.gts[:2]
        before = evaluate(preds, self.gts)
        after = evaluate(preds + [rect(200, 10, 30, 30)], self.gts)
        self.assertLess(after.precision, before.precision)
        self.assertEqual(after.recall, before.recall)

    def test_one_to_one_matching(self):
        # two predictions on one ground truth: one match, one spurious
        gt = rect(10, 10, 100, 40)
        report = evaluate([gt, gt.translated(1, 0)], [gt])
        self.assertEqual((report.matched, report.missed, report.spurious), (1, 0, 1))

    def test_scene_aggregation(self):
        report = evaluate_scenes([self.gts, []], [self.gts, self.gts[:1]])
        self.assertEqual(len(report.per_scene), 2)
        self.assertEqual((report.matched, report.missed, report.spurious), (3, 1, 0))
        self.assertAlmostEqual(report.recall, 75.0)

    def test_rejects_bad_threshold(self):
        with self.assertRaises(ValueError):
            evaluate(self.gts, self.gts, iou_threshold=0.0)


class BaselineTests(SimpleTestCase):
    """Tests for the fixed-expansion baseline."""

    def test_shrink_then_expand_recovers_rectangle(self):
        gt = rect(20, 30, 100, 40)
        m = ShrinkParams.for_polygon(gt, 0.4).margin
        grown = fixed_expand_baseline(offset(gt, -m), m)
        np.testing.assert_allclose(np.sort(grown.points, axis=0), np.sort(gt.points, axis=0), atol=1e-6)

    def test_zero_margin_is_identity(self):
        kernel = rect(0, 0, 10, 5)
        self.assertEqual(fixed_expand_baseline(kernel, 0.0), kernel)

    def test_negative_margin_raises(self):
        with self.assertRaises(ValueError):
            fixed_expand_baseline(rect(0, 0, 10, 5), -1.0)

    def test_concave_kernel_expands_to_simple_polygon(self):
        ribbon = make_ribbon(ShapeSpec(kind='ribbon', center=(128.0, 128.0), length=160.0,
                                       half_width=12.0, amplitude=10.0, wavelength=120.0))
        m = ShrinkParams.for_polygon(ribbon, 0.4).margin
        grown = fixed_expand_baseline(offset(ribbon, -m), m)
        self.assertGreater(polygon_iou(grown, ribbon), 0.9)

    def test_unclip_margin(self):
        self.assertAlmostEqual(unclip_margin(rect(0, 0, 76, 16)), 1216 * 1.5 / 184)

    def test_baseline_detects_rectangles(self):
        scene = rect_scene([(40, 60, 100, 40), (60, 160, 120, 50)])
        preds = baseline_detect(scene.prob_map(), InferConfig())
        self.assertEqual(len(preds), 2)
        self.assertEqual(evaluate(preds, scene.boundaries).f_measure, 100.0)
        for p in preds:
            self.assertGreater(area(p), 3000)


class AblationTests(SimpleTestCase):
    """Tests for run_ablation and its renderings."""

    def setUp(self):
        self.scenes = [rect_scene([(40, 60, 100, 40), (60, 160, 120, 50)])]
        self.cfg = InferConfig(n_vertices=64)

    def test_zero_nets_score_kernels(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        table = run_ablation(self.scenes, {'dml': zero, 'nnml': zero, 'obgml': zero}, self.cfg)
        self.assertEqual(len(table), 8)
        self.assertEqual(list(table['iterations']), [1, 2] * 4)
        learned = table[table['method'] != 'baseline']
        self.assertTrue((learned['f_measure'] == 0.0).all())
        baseline = table[table['method'] == 'baseline']
        self.assertTrue((baseline['f_measure'] == 100.0).all())

    def test_duplicated_nets_give_identical_rows(self):
        net = DeformNet(seed=3)
        table = run_ablation(self.scenes, {'dml': net, 'nnml': net, 'obgml': net}, self.cfg)
        cols = ['precision', 'recall', 'f_measure', 'mean_iou']
        rows = table[table['method'] != 'baseline'].set_index(['method', 'iterations'])[cols]
        np.testing.assert_array_equal(rows.loc['DCE+DML'].values, rows.loc['DCE+OBGML'].values)
        np.testing.assert_array_equal(rows.loc['DCE+DML'].values, rows.loc['DCE+NNML'].values)

    def test_perfect_offsets_score_full_marks(self):
        oracle = PerfectOffsets(self.scenes[0].boundaries)
        table = run_ablation(self.scenes, {'dml': oracle, 'nnml': oracle, 'obgml': oracle}, self.cfg)
        self.assertTrue((table['f_measure'] == 100.0).all())

    def test_missing_net_raises(self):
        with self.assertRaises(MissingNetError):
            run_ablation(self.scenes, {'obgml': DeformNet(seed=0)}, self.cfg)

    def test_renderings(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        table = run_ablation(self.scenes, {'dml': zero, 'nnml': zero, 'obgml': zero}, self.cfg)
        text = format_table(table)
        self.assertIn('DCE+OBGML', text)
        self.assertEqual(len(text.splitlines()), 9)
        records = [json.loads(line) for line in table_records(table).splitlines()]
        self.assertEqual(len(records), 8)
        self.assertEqual(records[0]['method'], 'baseline')

    def test_seed_sweep_stacks_splits(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        splits = {4: self.scenes, 5: [rect_scene([(30, 30, 80, 60)])]}
        sweep = run_ablation_seeds(splits, {'dml': zero, 'nnml': zero, 'obgml': zero}, self.cfg)
        self.assertEqual(len(sweep), 16)
        self.assertEqual(list(sweep.columns[:2]), ['seed', 'method'])
        self.assertEqual(sorted(set(sweep['seed'])), [4, 5])
        medians = median_table(sweep)
        self.assertEqual(len(medians), 8)
        self.assertEqual(list(medians['method'][:2]), ['baseline', 'baseline'])
        self.assertTrue((medians['seeds'] == 2).all())

    def test_seed_sweep_needs_a_split(self):
        with self.assertRaises(ValueError):
            run_ablation_seeds({}, {}, self.cfg)

    def test_median_table_takes_row_medians(self):
        rows = []
        for seed, f in zip((0, 1, 2), (60.0, 90.0, 70.0)):
            rows.append({'seed': seed, 'method': 'DCE+OBGML', 'loss': 'obgml', 'iterations': 1, 'precision': f,
                         'recall': f, 'f_measure': f, 'mean_iou': 0.8, 'matched': 3, 'missed': 0, 'spurious': 0})
        medians = median_table(pd.DataFrame(rows))
        self.assertEqual(len(medians), 1)
        self.assertEqual(medians['f_measure'].iloc[0], 70.0)
        self.assertEqual(medians['seeds'].iloc[0], 3)

    def test_trend_warnings(self):
        table = pd.DataFrame([
            {'method': 'baseline', 'iterations': 1, 'f_measure': 70.0},
            {'method': 'DCE+DML', 'iterations': 1, 'f_measure': 80.0},
            {'method': 'DCE+OBGML', 'iterations': 1, 'f_measure': 85.0},
            {'method': 'DCE+OBGML', 'iterations': 2, 'f_measure': 84.0},
        ])
        self.assertEqual(trend_warnings(table), [])
        table.loc[2, 'f_measure'] = 75.0
        self.assertEqual(len(trend_warnings(table)), 2)


class BenchmarkTests(SimpleTestCase):
    """Tests for benchmark."""

    def setUp(self):
        self.scenes = [rect_scene([(40, 60, 100, 40)]), rect_scene([(30, 30, 80, 60)])]

    def test_stage_breakdown(self):
        report = benchmark(DeformNet(seed=0), self.scenes, repetitions=3, cfg=InferConfig(n_vertices=64))
        self.assertEqual(set(report.stage_ms), {'kernel_extraction', 'featurize', 'forward', 'expand'})
        self.assertGreater(report.scenes_per_second, 0)
        self.assertLessEqual(report.stage_total_ms, report.ms_per_scene * 1.05)
        self.assertEqual(report.scenes, 2)

    def test_empty_dataset_raises(self):
        with self.assertRaises(ValueError):
            benchmark(DeformNet(seed=0), [], repetitions=3)

    def test_too_few_repetitions(self):
        with self.assertRaises(ValueError):
            benchmark(DeformNet(seed=0), self.scenes, repetitions=2)


@tag('slow')
class AblationSeedSweepTests(SimpleTestCase):
    """Three learned regressors evaluated on three generated splits."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        train_scenes = make_dataset(20, seed=0)
        cls.nets = {}
        for kind in ('dml', 'nnml', 'obgml'):
            state, _ = train(train_scenes, TrainConfig(loss_kind=kind, max_steps=300, seed=0, log_every=0))
            cls.nets[kind] = state.net
        splits = {seed: make_dataset(10, seed=seed) for seed in (101, 102, 103)}
        cls.sweep = run_ablation_seeds(splits, cls.nets, InferConfig())
        cls.medians = median_table(cls.sweep)

    def test_one_row_per_seed_and_method(self):
        self.assertEqual(len(self.sweep), 24)
        self.assertEqual(len(self.medians), 8)
        self.assertTrue((self.medians['seeds'] == 3).all())

    def test_trend_checks_run_on_medians(self):
        warnings = trend_warnings(self.medians)
        self.assertIsInstance(warnings, list)
        for warning in warnings:
            self.assertIn('is below', warning)

    def test_trained_regressor_detects_text(self):
        f = self.medians.set_index(['method', 'iterations'])['f_measure']
        self.assertGreater(f[('DCE+OBGML', 1)], 30.0)


@tag('slow')
class BenchmarkStabilityTests(SimpleTestCase):
    """The median over repetitions settles quickly."""

    def test_three_and_ten_repetitions_agree(self):
        scenes = make_dataset(5, seed=0)
        net = DeformNet(seed=0)
        short = benchmark(net, scenes, repetitions=3)
        long = benchmark(net, scenes, repetitions=10)
        self.assertLess(abs(short.ms_per_scene - long.ms_per_scene) / long.ms_per_scene, 0.2)
