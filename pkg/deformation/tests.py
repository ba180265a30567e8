"""
Deformation App Tests

Unit tests for vertex features, the circular-convolution regressor and its
gradients, the optimizer, training, checkpoints and inference.
"""
import json
import time
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag

from deformation.exceptions import CheckpointError, TrainingDiverged
from deformation.services.checkpoint import dumps_checkpoint, loads_checkpoint
from deformation.services.features import SurrogateFeatureField, featurize
from deformation.services.inference import InferConfig, expand, infer
from deformation.services.network import DeformNet
from deformation.services.optim import AdamState, adam_step, poly_lr
from deformation.services.training import (
    TrainConfig,
    build_examples,
    mean_vertex_error,
    train,
)
from geometry.services.offsetting import offset
from geometry.services.polygons import BoundingBox, Polygon, ShrinkParams
from geometry.services.raster import points_inside, polygon_iou
from geometry.services.sampling import Contour, sample_and_sort
from kernels.services.oracle import noisy_kernel_oracle
from kernels.services.probmap import ProbMap
from matching.services.losses import LOSS_KINDS, LossValue, obgml_loss
from synthgen.services.scenes import SynthInstance, SynthScene, make_dataset

CALIBRATION_FILE = Path(__file__).resolve().parent / 'fixtures' / 'toy_calibration.json'


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


def small_config(**overrides):
    values = dict(lr0=5e-3, batch_size=4, max_steps=20, n_vertices=16, width=16, depth=2,
                  kernel_size=5, seed=0, log_every=0)
    values.update(overrides)
    return TrainConfig(**values)


class PerfectOffsets:
    """Regressor stand-in that moves every kernel contour onto its enclosing boundary."""

    def __init__(self, boundaries):
        self.boundaries = boundaries

    def predict(self, contour, field, box):
        centre = contour.points.mean(axis=0)
        for b in self.boundaries:
            if points_inside(b.points, centre[None, :])[0]:
                return sample_and_sort(b, contour.n).points - contour.points
        return np.zeros_like(contour.points)


class FeatureTests(SimpleTestCase):
    """Tests for the surrogate feature field and featurize."""

    def setUp(self):
        self.square = Contour([(0, 0), (10, 0), (10, 10), (0, 10)])
        self.box = BoundingBox(0, 0, 10, 10)

    def test_constant_field(self):
        field = SurrogateFeatureField(np.ones((20, 20)))
        u = featurize(self.square, field, self.box)
        self.assertEqual(u.shape, (4, 8))
        np.testing.assert_array_equal(u[:, :5], np.ones((4, 5)))

    def test_relative_coordinates(self):
        u = featurize(self.square, SurrogateFeatureField(np.zeros((4, 4))), self.box)
        np.testing.assert_array_equal(u[0, 5:7], [0.0, 0.0])
        np.testing.assert_array_equal(u[2, 5:7], [1.0, 1.0])
        np.testing.assert_array_equal(u[:, 7], [0.0, 0.25, 0.5, 0.75])

    def test_bilinear_sampling_and_clamping(self):
        field = SurrogateFeatureField(np.array([[0.0, 1.0], [0.5, 0.5]]))
        np.testing.assert_allclose(field.sample(np.array([[0.5, 0.5], [1.0, 0.5], [-10.0, -10.0], [100.0, 0.5]])),
                                   [0.0, 0.5, 0.0, 1.0])

    def test_field_origin(self):
        field = SurrogateFeatureField(np.array([[0.25]]), x0=30, y0=40)
        self.assertEqual(field.sample(np.array([30.5, 40.5])), 0.25)

    def test_field_rejects_out_of_range(self):
        with self.assertRaises(ValueError):
            SurrogateFeatureField(np.full((2, 2), 2.0))


class NetworkTests(SimpleTestCase):
    """Tests for DeformNet forward and backward passes."""

    def test_default_shape_contract(self):
        net = DeformNet(seed=1)
        u = np.random.default_rng(0).random((128, 8))
        self.assertEqual(net.forward(u).shape, (128, 2))
        self.assertEqual(net.params['conv0.weight'].shape, (9, 8, 64))
        self.assertEqual(len([k for k in net.params if k.endswith('.weight')]), 5)

    def test_zero_network_gives_zero_offsets(self):
        net = DeformNet.zeros_like(DeformNet(seed=1))
        np.testing.assert_array_equal(net.forward(np.ones((32, 8))), np.zeros((32, 2)))

    def test_circular_shift_equivariance(self):
        net = DeformNet(width=12, depth=3, seed=4)
        u = np.random.default_rng(1).random((20, 8))
        out = net.forward(u)
        for k in (1, 5, 19):
            np.testing.assert_array_equal(net.forward(np.roll(u, k, axis=0)), np.roll(out, k, axis=0))

    def test_batch_matches_single(self):
        net = DeformNet(width=8, depth=2, kernel_size=3, seed=2)
        u = np.random.default_rng(2).random((3, 10, 8))
        batched = net.forward(u)
        for b in range(3):
            np.testing.assert_allclose(batched[b], net.forward(u[b]), rtol=0, atol=1e-12)

    def test_channel_mismatch_raises(self):
        with self.assertRaises(ValueError):
            DeformNet(seed=0).forward(np.zeros((16, 5)))

    def test_same_seed_same_parameters(self):
        a, b = DeformNet(seed=9), DeformNet(seed=9)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_gradients_match_finite_differences(self):
        """Test every parameter and input gradient against central differences."""
        rng = np.random.default_rng(6)
        net = DeformNet(in_channels=3, width=4, depth=3, kernel_size=3, seed=6)
        for _ in range(20):
            u = rng.normal(size=(2, 6, 3))
            upstream = rng.normal(size=(2, 6, 2))
            _, cache = net.forward_with_cache(u)
            grads, du = net.backward(cache, upstream)

            def objective():
                return float(np.sum(upstream * net.forward(u)))

            h = 1e-6
            for name, value in net.params.items():
                numeric = np.zeros_like(value)
                for idx in np.ndindex(value.shape):
                    saved = value[idx]
                    value[idx] = saved + h
                    up = objective()
                    value[idx] = saved - h
                    down = objective()
                    value[idx] = saved
                    numeric[idx] = (up - down) / (2 * h)
                np.testing.assert_allclose(grads[name], numeric, rtol=1e-3, atol=1e-6, err_msg=name)

            numeric = np.zeros_like(u)
            for idx in np.ndindex(u.shape):
                saved = u[idx]
                u[idx] = saved + h
                up = objective()
                u[idx] = saved - h
                down = objective()
                u[idx] = saved
                numeric[idx] = (up - down) / (2 * h)
            np.testing.assert_allclose(du, numeric, rtol=1e-3, atol=1e-6)

    def test_zero_upstream_gives_zero_gradients(self):
        net = DeformNet(width=8, depth=2, kernel_size=3, seed=1)
        _, cache = net.forward_with_cache(np.random.default_rng(0).random((12, 8)))
        grads, du = net.backward(cache, np.zeros((12, 2)))
        for g in grads.values():
            np.testing.assert_array_equal(g, np.zeros_like(g))
        np.testing.assert_array_equal(du, np.zeros_like(du))


class ExpandTests(SimpleTestCase):

    def setUp(self):
        self.boundary = rect(20, 30, 100, 40)
        self.kernel = offset(self.boundary, -ShrinkParams.for_polygon(self.boundary, 0.4).margin)
        self.p = sample_and_sort(self.kernel, 128)
        self.g = sample_and_sort(self.boundary, 128)

    def test_zero_offsets(self):
        np.testing.assert_array_equal(expand(self.p, np.zeros((128, 2))).points, self.p.points)

    def test_uniform_offset_translates(self):
        np.testing.assert_array_equal(expand(self.p, np.tile([2.0, 3.0], (128, 1))).points, self.p.points + [2.0, 3.0])

    def test_exact_offsets_reach_target(self):
        grown = expand(self.p, self.g.points - self.p.points)
        np.testing.assert_allclose(grown.points, self.g.points, atol=1e-9)
        self.assertAlmostEqual(obgml_loss(grown, self.g).value, 0.0, places=12)

    def test_length_mismatch_raises(self):
        with self.assertRaises(ValueError):
            expand(self.p, np.zeros((64, 2)))


class OptimizerTests(SimpleTestCase):
    """Tests for poly_lr and adam_step."""

    def test_poly_schedule(self):
        cfg = TrainConfig()
        self.assertEqual(poly_lr(0, 2000, cfg), 2e-4)
        self.assertEqual(poly_lr(2000, 2000, cfg), 0.0)
        self.assertAlmostEqual(poly_lr(1000, 2000, cfg), 1.0718e-4, delta=1e-8)

    def test_poly_rejects_zero_max_steps(self):
        with self.assertRaises(ValueError):
            poly_lr(0, 0, TrainConfig())

    def test_zero_gradient_leaves_parameters(self):
        net = DeformNet(width=4, depth=1, kernel_size=3, seed=0)
        state = AdamState.zeros_like(net.params)
        state.m = {k: np.ones_like(v) for k, v in state.m.items()}
        zero = {k: np.zeros_like(v) for k, v in net.params.items()}
        updated, new_state = adam_step(net, zero, state, 0.0)
        for name in net.params:
            np.testing.assert_array_equal(updated.params[name], net.params[name])
            np.testing.assert_allclose(new_state.m[name], 0.9 * np.ones_like(net.params[name]))
        self.assertEqual(new_state.t, 1)

    def test_first_step_moves_by_lr_against_gradient(self):
        net = DeformNet(width=4, depth=1, kernel_size=3, seed=0)
        rng = np.random.default_rng(0)
        grads = {k: rng.uniform(0.5, 2.0, size=v.shape) * rng.choice([-1.0, 1.0], size=v.shape)
                 for k, v in net.params.items()}
        updated, _ = adam_step(net, grads, AdamState.zeros_like(net.params), 1e-3)
        for name in net.params:
            np.testing.assert_allclose(updated.params[name] - net.params[name], -1e-3 * np.sign(grads[name]), atol=1e-8)

    def test_deterministic(self):
        net = DeformNet(width=4, depth=1, kernel_size=3, seed=0)
        grads = {k: np.full_like(v, 0.3) for k, v in net.params.items()}
        a, _ = adam_step(net, grads, AdamState.zeros_like(net.params), 1e-3)
        b, _ = adam_step(net, grads, AdamState.zeros_like(net.params), 1e-3)
        for name in net.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_rejects_non_finite_gradients(self):
        net = DeformNet(width=4, depth=1, kernel_size=3, seed=0)
        grads = {k: np.zeros_like(v) for k, v in net.params.items()}
        grads['head.bias'][0] = np.nan
        with self.assertRaises(ValueError):
            adam_step(net, grads, AdamState.zeros_like(net.params), 1e-3)


class TrainingTests(SimpleTestCase):
    """Tests for train, resume and checkpoints."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scenes = make_dataset(4, instances=2, seed=1)

    def test_zero_steps_returns_initial_net(self):
        state, report = train(self.scenes, small_config(max_steps=0))
        fresh = DeformNet(width=16, depth=2, kernel_size=5, seed=0)
        self.assertEqual(report.history, [])
        for name in fresh.params:
            np.testing.assert_array_equal(state.net.params[name], fresh.params[name])

    def test_equal_seeds_give_equal_histories(self):
        _, a = train(self.scenes, small_config())
        _, b = train(self.scenes, small_config())
        self.assertEqual(a.history, b.history)
        self.assertEqual(len(a.history), 20)

    def test_empty_dataset_raises(self):
        with self.assertRaises(ValueError):
            train([], small_config())

    def test_loss_trend_for_every_kind(self):
        for kind in LOSS_KINDS:
            with self.subTest(kind=kind):
                _, report = train(self.scenes, small_config(loss_kind=kind, max_steps=200))
                smoothed = report.smoothed(20)
                self.assertLess(smoothed[-1], smoothed[19])

    def test_divergence_reports_history(self):
        def broken(kind, pred, target):
            return LossValue(value=float('nan'), grad=np.zeros_like(pred), cols=np.arange(len(pred)))

        with mock.patch('deformation.services.training.contour_loss', side_effect=broken):
            with self.assertRaises(TrainingDiverged) as ctx:
                train(self.scenes, small_config())
        self.assertTrue(ctx.exception.report.diverged)
        self.assertEqual(ctx.exception.report.history, [])

    def test_joint_objective_trains_segmenter(self):
        state, report = train(self.scenes, small_config(train_segmenter=True, max_steps=5))
        self.assertIsNotNone(state.segmenter)
        self.assertEqual(len(report.seg_history), 5)
        self.assertTrue(np.all(np.isfinite(report.history)))

    def test_resume_reproduces_continued_curve(self):
        saved = {}

        def on_checkpoint(state, report):
            saved[state.step] = dumps_checkpoint(state, cfg)

        cfg = small_config(checkpoint_every=10)
        _, full = train(self.scenes, cfg, on_checkpoint=on_checkpoint)
        state, loaded_cfg = loads_checkpoint(saved[10])
        self.assertEqual(loaded_cfg, cfg)
        _, resumed = train(self.scenes, loaded_cfg, state=state)
        self.assertEqual(resumed.history, full.history[10:])

    def test_checkpoint_text_round_trips(self):
        cfg = small_config(train_segmenter=True, max_steps=3)
        state, _ = train(self.scenes, cfg)
        text = dumps_checkpoint(state, cfg)
        again, again_cfg = loads_checkpoint(text)
        self.assertEqual(dumps_checkpoint(again, again_cfg), text)

    def test_bad_checkpoint_version(self):
        with self.assertRaises(CheckpointError):
            loads_checkpoint('{"format_version": 7}')
        with self.assertRaises(CheckpointError):
            loads_checkpoint('not json')

    def test_mean_vertex_error_of_zero_net(self):
        cfg = small_config()
        examples = build_examples(self.scenes, cfg)
        zero = DeformNet.zeros_like(DeformNet(width=16, depth=2, kernel_size=5))
        self.assertGreater(mean_vertex_error(zero, examples), 1.0)

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            TrainConfig(loss_kind='l2')
        with self.assertRaises(ValueError):
            TrainConfig(dce_iterations=0)
        with self.assertRaises(ValueError):
            TrainConfig(lr0=0.0)


class InferenceTests(SimpleTestCase):
    """Tests for infer."""

    def setUp(self):
        self.scene = rect_scene([(40, 60, 100, 40), (60, 160, 120, 50)])
        self.cfg = InferConfig(n_vertices=64)

    def test_blank_map_gives_no_polygons(self):
        self.assertEqual(infer(DeformNet(seed=0), ProbMap.blank(64, 64), self.cfg), [])

    def test_perfect_offsets_recover_boundaries(self):
        net = PerfectOffsets(self.scene.boundaries)
        polygons = infer(net, self.scene.prob_map(), self.cfg)
        self.assertEqual(len(polygons), 2)
        for pred, gt in zip(polygons, self.scene.boundaries):
            self.assertEqual(len(pred), 64)
            self.assertGreaterEqual(polygon_iou(pred, gt), 0.8)

    def test_zero_net_returns_kernels(self):
        zero = DeformNet.zeros_like(DeformNet(seed=0))
        polygons = infer(zero, self.scene.prob_map(), InferConfig(n_vertices=64, dce_iterations=2))
        self.assertEqual(len(polygons), 2)
        for pred, inst in zip(polygons, self.scene.instances):
            self.assertGreaterEqual(polygon_iou(pred, inst.kernel), 0.8)

    def test_stage_timings_recorded(self):
        timings = {}
        infer(DeformNet(seed=0), self.scene.prob_map(), self.cfg, timings=timings)
        self.assertEqual(set(timings), {'kernel_extraction', 'featurize', 'forward', 'expand'})


@tag('slow')
class ToyTrainingRunTests(SimpleTestCase):
    """Seeded OBGML run at the default configuration, checked against the committed calibration."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.calibration = json.loads(CALIBRATION_FILE.read_text(encoding='utf-8'))
        scenes = make_dataset(cls.calibration['train_scenes'], seed=cls.calibration['train_seed'])
        cls.cfg = TrainConfig(loss_kind=cls.calibration['loss_kind'], max_steps=cls.calibration['max_steps'],
                              seed=cls.calibration['train_seed'], log_every=0)
        start = time.perf_counter()
        cls.state, cls.report = train(scenes, cls.cfg)
        cls.elapsed = time.perf_counter() - start

    def test_finishes_within_budget(self):
        self.assertLess(self.elapsed, self.calibration['max_train_seconds'])

    def test_smoothed_loss_decreases(self):
        smoothed = self.report.smoothed(100)
        self.assertEqual(len(smoothed), self.calibration['max_steps'])
        self.assertLess(smoothed[-1], smoothed[99])

    def test_held_out_vertex_error_below_calibration(self):
        held_out = make_dataset(self.calibration['eval_scenes'], seed=self.calibration['eval_seed'])
        error = mean_vertex_error(self.state.net, build_examples(held_out, self.cfg))
        zero = mean_vertex_error(DeformNet.zeros_like(self.state.net), build_examples(held_out, self.cfg))
        self.assertLess(error, self.calibration['max_mean_vertex_error_px'])
        self.assertLess(error, zero)

    def test_trained_net_expands_rectangle_kernel(self):
        scene = rect_scene([(70, 100, 110, 40)])
        polygons = infer(self.state.net, scene.prob_map(), InferConfig())
        self.assertEqual(len(polygons), 1)
        self.assertGreaterEqual(polygon_iou(polygons[0], scene.boundaries[0]), self.calibration['min_rectangle_iou'])
