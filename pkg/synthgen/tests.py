"""
Synthgen App Tests

Unit tests for shape construction, seeded scene generation and dataset files.
"""
import json
import tempfile
from itertools import combinations
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from geometry.exceptions import GeometryError
from geometry.services.offsetting import offset
from geometry.services.polygons import area, bbox, is_simple, shrink_margin
from geometry.services.raster import polygon_iou
from geometry.services.sampling import sample_and_sort
from synthgen.exceptions import DatasetFormatError, PlacementError
from synthgen.services.dataset import dumps_scene, read_dataset, scene_to_record, write_dataset
from synthgen.services.scenes import make_dataset, make_scene
from synthgen.services.shapes import MIN_KERNEL_HALF_WIDTH, ShapeSpec, make_quad, make_ribbon, make_shape, random_spec


class ShapeTests(SimpleTestCase):
    """Tests for ribbons and quads."""

    def test_flat_ribbon_is_rectangle(self):
        p = make_ribbon(ShapeSpec(kind='ribbon', length=100, half_width=10, amplitude=0.0, wavelength=50))
        box = bbox(p)
        self.assertAlmostEqual(box.x0, -50)
        self.assertAlmostEqual(box.y0, -10)
        self.assertAlmostEqual(box.width, 100)
        self.assertAlmostEqual(box.height, 20)
        self.assertAlmostEqual(area(p), 2000.0)

    def test_ribbon_is_point_symmetric_about_midpoint(self):
        p = make_ribbon(ShapeSpec(kind='ribbon', length=120, half_width=6, amplitude=8, wavelength=80))
        pts = p.points
        mirrored = -pts
        d = np.hypot(*(mirrored[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        self.assertLess(d.min(axis=1).max(), 1e-6)

    def test_ribbon_is_simple_with_enough_vertices(self):
        p = make_ribbon(ShapeSpec(kind='ribbon', center=(128, 128), rotation=0.3, length=90,
                                  half_width=9, amplitude=10, wavelength=120))
        self.assertGreaterEqual(len(p), 24)
        self.assertTrue(is_simple(p.points))

    def test_folding_ribbon_rejected(self):
        with self.assertRaises(GeometryError):
            make_ribbon(ShapeSpec(kind='ribbon', length=120, half_width=10, amplitude=30, wavelength=60))

    def test_quad_placement(self):
        p = make_quad(ShapeSpec(kind='quad', center=(50, 50), size=(40, 20)))
        box = bbox(p)
        self.assertEqual((box.x0, box.y0, box.width, box.height), (30.0, 40.0, 40.0, 20.0))

    def test_unknown_kind_rejected(self):
        with self.assertRaises(GeometryError):
            ShapeSpec(kind='circle')

    def test_thin_ribbon_rejected_before_construction(self):
        """Test that a ribbon whose kernel would be thinner than a pixel never reaches make_ribbon."""
        with self.assertRaises(GeometryError):
            ShapeSpec(kind='ribbon', length=100, half_width=1.5, wavelength=50)
        with self.assertRaises(GeometryError):
            ShapeSpec(kind='quad', size=(80, 3))

    def test_shrink_ratio_range(self):
        for ratio in (-0.1, 0.0, 1.0):
            with self.subTest(ratio=ratio):
                with self.assertRaises(GeometryError):
                    ShapeSpec(kind='quad', size=(40, 20), shrink_ratio=ratio)

    def test_kernel_margin_matches_polygon(self):
        spec = ShapeSpec(kind='ribbon', length=100, half_width=10, amplitude=0.0, wavelength=50)
        self.assertAlmostEqual(spec.kernel_margin(), shrink_margin(make_ribbon(spec), 0.4))
        quad = ShapeSpec(kind='quad', center=(50, 50), rotation=0.4, size=(40, 20))
        self.assertAlmostEqual(quad.kernel_margin(), shrink_margin(make_quad(quad), 0.4))

    def test_drawn_specs_keep_a_kernel(self):
        rng = np.random.default_rng(9)
        built = 0
        for _ in range(60):
            try:
                spec = random_spec(rng, 256)
                boundary = make_shape(spec)
            except GeometryError:
                continue
            self.assertGreaterEqual(spec.half_extent - spec.kernel_margin(), MIN_KERNEL_HALF_WIDTH)
            kernel = offset(boundary, -shrink_margin(boundary, spec.shrink_ratio))
            self.assertGreater(area(kernel), 0.0)
            built += 1
        self.assertGreater(built, 30)


class SceneTests(SimpleTestCase):
    """Tests for make_scene and make_dataset."""

    def test_same_seed_same_scene(self):
        self.assertEqual(dumps_scene(make_scene(3, seed=7)), dumps_scene(make_scene(3, seed=7)))

    def test_different_seeds_differ(self):
        self.assertNotEqual(dumps_scene(make_scene(3, seed=7)), dumps_scene(make_scene(3, seed=8)))

    def test_single_instance(self):
        scene = make_scene(1, seed=2)
        self.assertEqual(len(scene.instances), 1)
        self.assertEqual((scene.width, scene.height), (256, 256))

    def test_rejects_empty_scene(self):
        with self.assertRaises(ValueError):
            make_scene(0)

    def test_placement_failure(self):
        with self.assertRaises(PlacementError):
            make_scene(40, seed=1, max_attempts=5)

    def test_kernels_are_shrunken_boundaries(self):
        scene = make_scene(3, seed=11)
        for inst in scene.instances:
            expected = offset(inst.boundary, -shrink_margin(inst.boundary, 0.4))
            self.assertEqual(inst.kernel, expected)
            self.assertEqual(sample_and_sort(inst.kernel, 128).n, 128)
            self.assertLess(area(inst.kernel), area(inst.boundary))

    def test_prob_window_covers_kernel(self):
        scene = make_scene(2, seed=5)
        canvas = scene.prob_map()
        self.assertEqual(canvas.values.shape, (256, 256))
        for inst in scene.instances:
            lo = inst.kernel.points.min(axis=0)
            hi = inst.kernel.points.max(axis=0)
            self.assertLessEqual(inst.prob.x0, lo[0])
            self.assertLessEqual(inst.prob.y0, lo[1])
            self.assertGreaterEqual(inst.prob.x0 + inst.prob.width, hi[0])
            self.assertGreaterEqual(inst.prob.y0 + inst.prob.height, hi[1])
            self.assertGreater(inst.prob.values.sum(), 0)

    def test_dataset_seeds_are_deterministic(self):
        a = make_dataset(4, instances=2, seed=3)
        b = make_dataset(4, instances=2, seed=3)
        self.assertEqual([dumps_scene(s) for s in a], [dumps_scene(s) for s in b])
        self.assertEqual(len({s.seed for s in a}), 4)

    @tag('slow')
    def test_instances_never_overlap(self):
        for scene in make_dataset(100, instances=3, seed=0):
            for p in scene.boundaries:
                self.assertTrue(np.all(p.points >= 0) and np.all(p.points <= 256))
            for a, b in combinations(scene.boundaries, 2):
                self.assertEqual(polygon_iou(a, b), 0.0)


class DatasetFileTests(SimpleTestCase):
    """Tests for the JSON Lines dataset format."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        scenes = make_dataset(3, instances=2, seed=4, noise=1.5)
        first = self.dir / "a.jsonl"
        second = self.dir / "b.jsonl"
        self.assertEqual(write_dataset(first, scenes), 3)
        loaded = read_dataset(first)
        write_dataset(second, loaded)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        for original, again in zip(scenes, loaded):
            for a, b in zip(original.instances, again.instances):
                self.assertEqual(a.boundary, b.boundary)
                self.assertEqual(a.kernel, b.kernel)
                self.assertEqual(a.prob, b.prob)

    def test_record_fields(self):
        record = scene_to_record(make_scene(1, seed=1))
        self.assertEqual(record["format_version"], 1)
        self.assertEqual(record["canvas"], [256, 256])
        self.assertEqual(set(record["instances"][0]), {"boundary", "kernel", "prob"})
        self.assertEqual(record["instances"][0]["prob"]["dtype"], "float32")

    def test_unsupported_version(self):
        record = scene_to_record(make_scene(1, seed=1))
        record["format_version"] = 99
        path = self.dir / "bad.jsonl"
        path.write_text(json.dumps(record) + "\n")
        with self.assertRaises(DatasetFormatError):
            read_dataset(path)

    def test_invalid_json(self):
        path = self.dir / "broken.jsonl"
        path.write_text("{not json\n")
        with self.assertRaises(DatasetFormatError):
            read_dataset(path)
