"""
Kernels App Tests

Unit tests for the mined segmentation loss, binarization, kernel contour
extraction, the surrogate oracle and the surrogate segmenter.
"""
import numpy as np
from django.test import SimpleTestCase

from geometry.exceptions import CollapseError
from geometry.services.offsetting import offset
from geometry.services.polygons import Polygon, ShrinkParams, area
from geometry.services.raster import polygon_iou, rasterize
from kernels.services.contours import extract_kernels
from kernels.services.ohem import bce_ohem_loss
from kernels.services.oracle import noisy_kernel_oracle
from kernels.services.probmap import ProbMap, binarize, compose
from kernels.services.segmenter import SurrogateSegmenter


def rect(x, y, w, h):
    return Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])


class BceOhemTests(SimpleTestCase):
    """Tests for bce_ohem_loss."""

    def test_hand_evaluated_row(self):
        result = bce_ohem_loss(np.array([[0.8, 0.6, 0.1, 0.2]]), np.array([[1, 0, 0, 0]]))
        expected = -(np.log(0.8) + np.log(0.4) + np.log(0.9) + np.log(0.8))
        self.assertAlmostEqual(result.value, expected, places=12)
        self.assertAlmostEqual(result.value, 1.468, places=3)
        self.assertEqual(result.mask.negatives, 3)
        self.assertTrue(result.mask.selected.all())

    def test_perfect_prediction_is_near_zero(self):
        gt = np.zeros((6, 6))
        gt[2:4, 2:4] = 1
        result = bce_ohem_loss(gt.copy(), gt)
        self.assertLess(result.value, 4e-6 * np.count_nonzero(result.mask.selected))

    def test_keeps_three_hardest_negatives(self):
        gt = np.zeros((1, 11))
        gt[0, 0] = 1
        pred = np.array([[0.9, 0.1, 0.7, 0.2, 0.6, 0.05, 0.3, 0.8, 0.15, 0.25, 0.35]])
        result = bce_ohem_loss(pred, gt)
        self.assertEqual(result.mask.positives, 1)
        self.assertEqual(result.mask.negatives, 3)
        np.testing.assert_array_equal(np.flatnonzero(result.mask.selected), [0, 2, 4, 7])

    def test_negative_count_capped_by_availability(self):
        gt = np.ones((3, 3))
        gt[1, 1] = 0
        result = bce_ohem_loss(np.full((3, 3), 0.5), gt)
        self.assertEqual(result.mask.positives, 8)
        self.assertEqual(result.mask.negatives, 1)

    def test_ties_resolve_in_row_major_order(self):
        gt = np.zeros((2, 4))
        gt[0, 0] = 1
        result = bce_ohem_loss(np.full((2, 4), 0.5), gt)
        np.testing.assert_array_equal(np.flatnonzero(result.mask.selected), [0, 1, 2, 3])

    def test_shape_mismatch_raises(self):
        with self.assertRaises(ValueError):
            bce_ohem_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_gradient_matches_finite_differences(self):
        """Test the analytic gradient with the mining mask held fixed."""
        rng = np.random.default_rng(4)
        for _ in range(20):
            gt = (rng.random((5, 6)) < 0.3).astype(float)
            pred = rng.uniform(0.05, 0.95, size=(5, 6))
            base = bce_ohem_loss(pred, gt)
            numeric = np.zeros_like(pred)
            h = 1e-6
            for idx in np.ndindex(pred.shape):
                up, down = pred.copy(), pred.copy()
                up[idx] += h
                down[idx] -= h
                numeric[idx] = (bce_ohem_loss(up, gt, base.mask).value - bce_ohem_loss(down, gt, base.mask).value) / (2 * h)
            np.testing.assert_allclose(base.grad, numeric, rtol=1e-4, atol=1e-6)


class BinarizeTests(SimpleTestCase):

    def test_constant_map(self):
        pm = ProbMap(np.full((4, 4), 0.7))
        self.assertTrue(binarize(pm, 0.5).all())
        self.assertFalse(binarize(pm, 0.8).any())

    def test_checkerboard(self):
        board = (np.indices((6, 6)).sum(axis=0) % 2).astype(float)
        np.testing.assert_array_equal(binarize(board, 0.5), board.astype(bool))

    def test_rejects_threshold_outside_unit_interval(self):
        with self.assertRaises(ValueError):
            binarize(np.zeros((2, 2)), 1.0)

    def test_rejects_out_of_range_probabilities(self):
        with self.assertRaises(ValueError):
            ProbMap(np.full((2, 2), 1.5))

    def test_compose_keeps_maximum(self):
        a = ProbMap(np.full((2, 2), 0.4), x0=1, y0=1)
        b = ProbMap(np.full((2, 2), 0.9), x0=2, y0=2)
        canvas = compose([a, b], 5, 5)
        self.assertEqual(canvas.values[1, 1], 0.4)
        self.assertEqual(canvas.values[2, 2], 0.9)
        self.assertEqual(canvas.values[0, 0], 0.0)


class ExtractKernelsTests(SimpleTestCase):
    """Tests for extract_kernels."""

    def test_single_pixel_gives_unit_square(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[5, 5] = True
        kernels = extract_kernels(mask, min_area=0.5)
        self.assertEqual(len(kernels), 1)
        np.testing.assert_array_equal(kernels[0].points, [(5, 5), (6, 5), (6, 6), (5, 6)])

    def test_two_blobs(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[2:6, 2:8] = True
        mask[12:18, 10:15] = True
        kernels = extract_kernels(mask)
        self.assertEqual(len(kernels), 2)
        self.assertEqual([area(k) for k in kernels], [24.0, 30.0])

    def test_empty_mask(self):
        self.assertEqual(extract_kernels(np.zeros((8, 8), dtype=bool)), [])

    def test_small_components_dropped(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[1, 1] = True
        mask[4:7, 4:7] = True
        self.assertEqual(len(extract_kernels(mask, min_area=4)), 1)

    def test_diagonal_contact_is_one_simple_polygon(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[1:3, 1:3] = True
        mask[3:5, 3:5] = True
        kernels = extract_kernels(mask, min_area=1)
        self.assertEqual(len(kernels), 1)
        self.assertEqual(area(kernels[0]), 9.0)

    def test_holes_are_filled(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[1:6, 1:6] = True
        mask[3, 3] = False
        kernels = extract_kernels(mask)
        self.assertEqual(area(kernels[0]), 25.0)
        self.assertEqual(len(kernels[0]), 4)

    def test_origin_offsets_coordinates(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1:3, 1:3] = True
        kernel = extract_kernels(mask, origin=(10, 20))[0]
        np.testing.assert_array_equal(kernel.points[0], [11, 21])

    def test_rasterized_convex_polygon_round_trip(self):
        """Test that extract_kernels inverts rasterize closely at 64×64."""
        hexagon = Polygon([(12.3, 20.1), (30.7, 8.4), (50.2, 15.5), (52.6, 40.8), (33.1, 55.0), (14.9, 44.2)])
        kernels = extract_kernels(rasterize(hexagon, 64, 64))
        self.assertEqual(len(kernels), 1)
        self.assertGreaterEqual(polygon_iou(kernels[0], hexagon), 0.95)


class OracleTests(SimpleTestCase):
    """Tests for noisy_kernel_oracle."""

    def setUp(self):
        self.boundary = rect(20, 30, 100, 40)
        self.shrink = ShrinkParams.for_polygon(self.boundary, 0.4)

    def test_noise_free_map_is_exact_kernel_raster(self):
        pm = noisy_kernel_oracle(self.boundary, self.shrink, noise=0.0, canvas=(160, 100))
        kernel = offset(self.boundary, -self.shrink.margin)
        np.testing.assert_array_equal(pm.values, rasterize(kernel, 160, 100).astype(np.float32))

    def test_same_seed_same_map(self):
        a = noisy_kernel_oracle(self.boundary, self.shrink, noise=2.0, seed=3, canvas=(160, 100))
        b = noisy_kernel_oracle(self.boundary, self.shrink, noise=2.0, seed=3, canvas=(160, 100))
        self.assertEqual(a, b)

    def test_window_origin(self):
        pm = noisy_kernel_oracle(self.boundary, self.shrink, window=(16, 26, 108, 48))
        self.assertEqual((pm.x0, pm.y0, pm.width, pm.height), (16, 26, 108, 48))

    def test_collapse_propagates(self):
        with self.assertRaises(CollapseError):
            noisy_kernel_oracle(self.boundary, ShrinkParams(ratio=0.4, margin=30.0))

    def test_noisy_kernels_stay_close(self):
        """Test kernel IoU >= 0.7 under 2 px jitter on seeded rectangles."""
        rng = np.random.default_rng(9)
        for seed in range(100):
            w, h = rng.uniform(100, 160), rng.uniform(70, 110)
            boundary = rect(30.0, 30.0, w, h)
            shrink = ShrinkParams.for_polygon(boundary, 0.4)
            window = (20, 20, int(w) + 22, int(h) + 22)
            pm = noisy_kernel_oracle(boundary, shrink, noise=2.0, seed=seed, window=window)
            found = extract_kernels(binarize(pm, 0.5), origin=(pm.x0, pm.y0))
            self.assertTrue(found, msg=f"seed {seed}")
            best = max(polygon_iou(k, offset(boundary, -shrink.margin)) for k in found)
            self.assertGreaterEqual(best, 0.7, msg=f"seed {seed}")


class SegmenterTests(SimpleTestCase):

    def test_default_preserves_binarized_mask(self):
        x = np.zeros((6, 6))
        x[2:4, 1:5] = 1.0
        y = SurrogateSegmenter().forward(x)
        np.testing.assert_array_equal(y >= 0.5, x >= 0.5)

    def test_parameter_gradients_match_finite_differences(self):
        rng = np.random.default_rng(2)
        x = rng.random((6, 7))
        gt = (x > 0.6).astype(float)
        seg = SurrogateSegmenter({'seg.weight': rng.normal(size=(3, 3)), 'seg.bias': np.array([0.1])})
        y = seg.forward(x)
        loss = bce_ohem_loss(y, gt)
        grads = seg.backward(x, y, loss.grad)
        h = 1e-6
        for name, value in seg.params.items():
            for idx in np.ndindex(value.shape):
                saved = value[idx]
                value[idx] = saved + h
                up = bce_ohem_loss(seg.forward(x), gt, loss.mask).value
                value[idx] = saved - h
                down = bce_ohem_loss(seg.forward(x), gt, loss.mask).value
                value[idx] = saved
                self.assertAlmostEqual(grads[name][idx], (up - down) / (2 * h), delta=1e-4 * max(1.0, abs(grads[name][idx])))
