"""
Matching App Tests

Unit tests for the cost matrix, the Hungarian solver and the three contour
deformation losses.
"""
from functools import lru_cache
from itertools import permutations

import numpy as np
from django.test import SimpleTestCase, tag
from scipy.optimize import linear_sum_assignment

from matching.services.hungarian import cost_matrix, hungarian
from matching.services.losses import (
    LOSS_KINDS,
    contour_loss,
    dml_loss,
    nnml_loss,
    obgml_loss,
    smooth_l1,
)

SQUARE = np.array([(0, 0), (10, 0), (10, 10), (0, 10)], dtype=float)


@lru_cache(maxsize=None)
def all_permutations(n):
    return np.array(list(permutations(range(n))))


def brute_force(a):
    """Lexicographically first optimal permutation and its cost."""
    n = len(a)
    perms = all_permutations(n)
    costs = a[np.arange(n), perms].sum(axis=1)
    best = int(np.argmin(costs))
    return perms[best], costs[best]


def numeric_grad(fn, pred, h=1e-4):
    grad = np.zeros_like(pred)
    for idx in np.ndindex(pred.shape):
        up = pred.copy()
        down = pred.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (fn(up) - fn(down)) / (2 * h)
    return grad


class CostMatrixTests(SimpleTestCase):
    """Tests for cost_matrix."""

    def test_hand_computed_distances(self):
        m = cost_matrix([(0, 0), (1, 0)], [(0, 0), (0, 1)])
        np.testing.assert_array_equal(m.values, [[0, 1], [1, 2]])
        self.assertEqual(m.n, 2)

    def test_zero_diagonal_for_identical_contours(self):
        m = cost_matrix(SQUARE, SQUARE)
        np.testing.assert_array_equal(np.diag(m.values), np.zeros(4))
        self.assertTrue(np.all(m.values >= 0))

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0, 50, size=(12, 2))
        b = rng.uniform(0, 50, size=(12, 2))
        shift = np.array([7.25, 7.25])
        np.testing.assert_allclose(cost_matrix(a, b).values, cost_matrix(a + shift, b + shift).values, atol=1e-9)

    def test_length_mismatch_raises(self):
        with self.assertRaises(ValueError):
            cost_matrix(SQUARE, SQUARE[:3])


class HungarianTests(SimpleTestCase):
    """Tests for the Hungarian solver."""

    def test_textbook_matrix(self):
        result = hungarian([[4, 1, 3], [2, 0, 5], [3, 2, 2]])
        self.assertEqual(result.pairs, ((0, 1), (1, 0), (2, 2)))
        self.assertEqual(result.total_cost, 5.0)

    def test_zero_diagonal_gives_identity(self):
        a = np.ones((6, 6)) - np.eye(6)
        result = hungarian(a)
        np.testing.assert_array_equal(result.cols, np.arange(6))
        self.assertEqual(result.total_cost, 0.0)

    def test_constant_matrix_breaks_ties_to_identity(self):
        result = hungarian(np.full((5, 5), 3.0))
        np.testing.assert_array_equal(result.cols, np.arange(5))

    def test_matches_brute_force_on_random_matrices(self):
        """Test optimal cost against factorial enumeration for n <= 8."""
        rng = np.random.default_rng(0)
        for trial in range(1000):
            n = int(rng.integers(1, 9))
            a = rng.uniform(0, 100, size=(n, n))
            _, best = brute_force(a)
            result = hungarian(a)
            self.assertAlmostEqual(result.total_cost, best, places=9, msg=f"trial {trial}")
            self.assertEqual(sorted(result.cols.tolist()), list(range(n)))

    def test_lexicographic_choice_among_ties(self):
        """Test that integer matrices with many ties pick the first optimal permutation."""
        rng = np.random.default_rng(1)
        for trial in range(300):
            n = int(rng.integers(2, 7))
            a = rng.integers(0, 3, size=(n, n)).astype(float)
            perm, best = brute_force(a)
            result = hungarian(a)
            self.assertEqual(result.total_cost, best)
            np.testing.assert_array_equal(result.cols, perm, err_msg=f"trial {trial}")

    def test_agrees_with_scipy_on_larger_matrices(self):
        rng = np.random.default_rng(13)
        for n in (16, 32, 64, 128):
            pred, target = rng.normal(scale=20.0, size=(2, n, 2))
            m = cost_matrix(pred, target).values
            rows, cols = linear_sum_assignment(m)
            self.assertAlmostEqual(hungarian(m).total_cost, float(m[rows, cols].sum()), delta=1e-9 * n * m.max())

    def test_rejects_nan(self):
        with self.assertRaises(ValueError):
            hungarian([[0.0, np.nan], [1.0, 0.0]])

    def test_rejects_non_square(self):
        with self.assertRaises(ValueError):
            hungarian(np.zeros((2, 3)))

    def test_empty_matrix(self):
        result = hungarian(np.zeros((0, 0)))
        self.assertEqual(result.pairs, ())
        self.assertEqual(result.total_cost, 0.0)


class SmoothL1Tests(SimpleTestCase):

    def test_values_from_definition(self):
        self.assertEqual(smooth_l1(0.5), 0.125)
        self.assertEqual(smooth_l1(0.0), 0.0)
        self.assertEqual(smooth_l1(2.0), 1.5)
        self.assertEqual(smooth_l1(-2.0), 1.5)


class LossTests(SimpleTestCase):
    """Tests for DML, NNML and OBGML."""

    def test_identical_contours_have_zero_loss(self):
        for kind in LOSS_KINDS:
            with self.subTest(kind=kind):
                result = contour_loss(kind, SQUARE, SQUARE)
                self.assertEqual(result.value, 0.0)
                np.testing.assert_array_equal(result.grad, np.zeros_like(SQUARE))
                np.testing.assert_array_equal(result.cols, np.arange(4))

    def test_dml_uniform_half_pixel_shift(self):
        result = dml_loss(SQUARE + [0.5, 0.0], SQUARE)
        self.assertAlmostEqual(result.value, 0.125)
        np.testing.assert_allclose(result.grad[:, 0], np.full(4, 0.5 / 4))
        np.testing.assert_allclose(result.grad[:, 1], np.zeros(4))

    def test_dml_cyclic_shift_is_positive(self):
        self.assertGreater(dml_loss(np.roll(SQUARE, 1, axis=0), SQUARE).value, 0.0)

    def test_nnml_allows_many_to_one(self):
        pred = np.array([(1, 0), (-1, 0), (10, 10), (0, 10)], dtype=float)
        result = nnml_loss(pred, SQUARE)
        np.testing.assert_array_equal(result.cols, [0, 0, 2, 3])
        self.assertNotIn(1, result.cols)
        self.assertAlmostEqual(result.value, 0.25)

    def test_obgml_uses_optimal_pairing(self):
        target = np.array([(0, 0), (10, 0), (10, 10)], dtype=float)
        pred = np.array([(9, 0), (1, 0), (10, 9)], dtype=float)
        result = obgml_loss(pred, target)
        self.assertEqual(result.pairs, ((0, 1), (1, 0), (2, 2)))
        self.assertAlmostEqual(result.value, 0.5)

    def test_obgml_pairing_is_a_bijection(self):
        rng = np.random.default_rng(5)
        target = rng.uniform(0, 40, size=(32, 2))
        pred = target.mean(axis=0) + rng.normal(scale=2.0, size=(32, 2))
        self.assertEqual(sorted(obgml_loss(pred, target).cols.tolist()), list(range(32)))
        self.assertLess(len(set(nnml_loss(pred, target).cols.tolist())), 32)

    def test_length_mismatch_raises(self):
        for kind in LOSS_KINDS:
            with self.subTest(kind=kind):
                with self.assertRaises(ValueError):
                    contour_loss(kind, SQUARE, SQUARE[:3])

    def test_unknown_kind_raises(self):
        with self.assertRaises(ValueError):
            contour_loss('chamfer', SQUARE, SQUARE)

    def test_ordering_chain(self):
        """Test row minima <= Hungarian cost <= identity cost on random contours."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            target = rng.uniform(0, 100, size=(32, 2))
            pred = target + rng.normal(scale=6.0, size=(32, 2))
            m = cost_matrix(pred, target).values
            optimal = hungarian(m).total_cost
            self.assertLessEqual(m.min(axis=1).sum(), optimal + 1e-9)
            self.assertLessEqual(optimal, np.trace(m) + 1e-9)

    @tag('slow')
    def test_ordering_chain_full_size(self):
        """Test the ordering chain on 1000 contour pairs at N = 128."""
        rng = np.random.default_rng(12)
        for _ in range(1000):
            target = rng.uniform(0, 200, size=(128, 2))
            pred = target + rng.normal(scale=8.0, size=(128, 2))
            m = cost_matrix(pred, target).values
            optimal = hungarian(m).total_cost
            self.assertLessEqual(m.min(axis=1).sum(), optimal + 1e-6)
            self.assertLessEqual(optimal, np.trace(m) + 1e-6)

    def test_gradients_match_finite_differences(self):
        """Test analytic gradients away from matching switches and the |d| = 1 kink."""
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(100):
            target = rng.uniform(0, 30, size=(6, 2))
            pred = target + rng.normal(scale=1.2, size=(6, 2))
            for kind in LOSS_KINDS:
                base = contour_loss(kind, pred, target)
                diff = pred - target[base.cols]
                if np.any(np.abs(np.abs(diff) - 1.0) < 1e-3):
                    continue
                stable = all(
                    np.array_equal(contour_loss(kind, pred + step, target).cols, base.cols)
                    for step in (np.full_like(pred, 1e-3), np.full_like(pred, -1e-3))
                )
                if not stable:
                    continue
                numeric = numeric_grad(lambda p: contour_loss(kind, p, target).value, pred)
                np.testing.assert_allclose(base.grad, numeric, rtol=1e-3, atol=1e-8)
                checked += 1
        self.assertGreaterEqual(checked, 100)

    def test_translation_covariance(self):
        rng = np.random.default_rng(8)
        target = rng.uniform(0, 60, size=(16, 2))
        pred = target + rng.normal(scale=3.0, size=(16, 2))
        eps = 1e-6
        for kind in LOSS_KINDS:
            with self.subTest(kind=kind):
                base = contour_loss(kind, pred, target)
                moved = contour_loss(kind, pred + 5.0, target + 5.0)
                self.assertAlmostEqual(base.value, moved.value, places=9)
                nudged = contour_loss(kind, pred + [eps, 0.0], target)
                predicted = base.value + eps * base.grad[:, 0].sum()
                self.assertAlmostEqual(nudged.value, predicted, places=10)
