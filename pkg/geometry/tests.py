"""
Geometry App Tests

Unit tests for polygon primitives, offsetting, canonical sampling and IoU.
"""
import numpy as np
from django.test import SimpleTestCase

from geometry.exceptions import CollapseError, GeometryError
from geometry.services.offsetting import offset
from geometry.services.polygons import (
    BoundingBox,
    Polygon,
    ShrinkParams,
    area,
    bbox,
    perimeter,
    shrink_margin,
    signed_area,
)
from geometry.services.raster import polygon_iou, rasterize
from geometry.services.sampling import Contour, canonical_resample, sample_and_sort
from synthgen.services.shapes import ShapeSpec, make_quad, make_ribbon


def rect(x, y, w, h):
    return Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])


def hausdorff(a, b):
    d = np.hypot(*(a[:, None, :] - b[None, :, :]).transpose(2, 0, 1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class PolygonConstructionTests(SimpleTestCase):
    """Tests for the Polygon invariants."""

    def test_accepts_flat_coordinates(self):
        """Test that flat [x1, y1, ...] arrays build the same polygon."""
        p = Polygon.from_flat([0, 0, 4, 0, 0, 3])
        self.assertEqual(len(p), 3)
        self.assertEqual(p.to_flat(), [0.0, 0.0, 4.0, 0.0, 0.0, 3.0])

    def test_rejects_too_few_vertices(self):
        with self.assertRaises(GeometryError):
            Polygon([(0, 0), (1, 1)])

    def test_rejects_coincident_consecutive_vertices(self):
        with self.assertRaises(GeometryError):
            Polygon([(0, 0), (1, 0), (1, 0), (0, 1)])

    def test_rejects_self_intersection(self):
        """Test that a bow-tie is rejected by the pairwise segment test."""
        with self.assertRaises(GeometryError):
            Polygon([(0, 0), (10, 10), (10, 0), (0, 10)])

    def test_rejects_collinear_spread(self):
        with self.assertRaises(GeometryError):
            Polygon([(0, 0), (1, 0), (2, 0)])

    def test_relaxed_polygon_skips_simplicity(self):
        """Test that predicted contours may fold when check_simple is off."""
        p = Polygon([(0, 0), (10, 10), (10, 0), (0, 10)], check_simple=False)
        self.assertEqual(len(p), 4)


class MeasureTests(SimpleTestCase):
    """Tests for area, perimeter, bounding box and shrink margin."""

    def test_unit_square_area(self):
        self.assertEqual(area(rect(0, 0, 1, 1)), 1.0)

    def test_triangle_area(self):
        self.assertEqual(area(Polygon([(0, 0), (4, 0), (0, 3)])), 6.0)

    def test_area_is_orientation_free(self):
        cw = Polygon([(0, 0), (5, 0), (5, 2), (0, 2)])
        ccw = Polygon([(0, 0), (0, 2), (5, 2), (5, 0)])
        self.assertEqual(area(cw), area(ccw))
        self.assertEqual(signed_area(cw.points), -signed_area(ccw.points))

    def test_perimeter(self):
        self.assertEqual(perimeter(rect(0, 0, 100, 40)), 280.0)

    def test_bbox_of_triangle(self):
        self.assertEqual(bbox(Polygon([(0, 0), (4, 0), (0, 3)])), BoundingBox(0.0, 0.0, 4.0, 3.0))

    def test_bbox_translates_with_polygon(self):
        p = Polygon([(0, 0), (4, 0), (0, 3)])
        moved = bbox(p.translated(7, -2))
        self.assertEqual((moved.x0, moved.y0, moved.width, moved.height), (7.0, -2.0, 4.0, 3.0))
        self.assertTrue(moved.contains(p.translated(7, -2).points))

    def test_bbox_rejects_flat_extent(self):
        with self.assertRaises(GeometryError):
            BoundingBox(0, 0, 0, 3)

    def test_shrink_margin_square_is_exact(self):
        """Test the 100×100 square, ratio 0.4 case: 10000·0.84/400 = 21."""
        self.assertEqual(shrink_margin(rect(0, 0, 100, 100), 0.4), 21.0)

    def test_shrink_margin_rectangle(self):
        self.assertAlmostEqual(shrink_margin(rect(0, 0, 100, 40), 0.4), 12.0, places=9)

    def test_shrink_margin_vanishes_at_ratio_one(self):
        self.assertEqual(shrink_margin(rect(0, 0, 100, 40), 1.0), 0.0)

    def test_shrink_margin_rejects_bad_ratio(self):
        with self.assertRaises(GeometryError):
            shrink_margin(rect(0, 0, 10, 10), 0.0)

    def test_shrink_params_record_margin(self):
        params = ShrinkParams.for_polygon(rect(0, 0, 100, 100), 0.4)
        self.assertEqual(params.margin, 21.0)
        self.assertEqual(params.ratio, 0.4)


class OffsetTests(SimpleTestCase):
    """Tests for inward/outward miter offsetting."""

    def test_inward_offset_of_rectangle(self):
        out = offset(rect(0, 0, 100, 40), -10)
        self.assertLess(hausdorff(out.points, rect(10, 10, 80, 20).points), 1e-9)

    def test_outward_offset_of_rectangle(self):
        out = offset(rect(10, 10, 80, 20), 10)
        self.assertLess(hausdorff(out.points, rect(0, 0, 100, 40).points), 1e-9)

    def test_zero_margin_is_identity(self):
        p = Polygon([(0, 0), (4, 0), (0, 3)])
        self.assertIs(offset(p, 0), p)

    def test_shrink_then_expand_recovers_rectangles(self):
        """Test the closure property for several rectangles and margins."""
        rng = np.random.default_rng(3)
        for _ in range(25):
            w, h = rng.uniform(10, 200, size=2)
            p = rect(*rng.uniform(0, 50, size=2), w, h)
            m = rng.uniform(0.1, 0.49) * min(w, h)
            back = offset(offset(p, -m), m)
            self.assertLess(hausdorff(back.points, p.points), 1e-6)

    def test_shrink_then_expand_with_ratio_margin(self):
        p = rect(20, 30, 100, 40)
        m = shrink_margin(p, 0.4)
        kernel = offset(p, -m)
        self.assertLess(hausdorff(offset(kernel, m).points, p.points), 1e-6)

    def test_inward_offset_reduces_area(self):
        p = Polygon([(0, 0), (60, 0), (80, 30), (40, 50), (0, 30)])
        for m in (1.0, 5.0, 10.0):
            self.assertLess(area(offset(p, -m)), area(p))

    def test_convex_edges_stay_parallel_at_margin(self):
        """Test that each offset edge sits at |margin| from its source edge line."""
        p = Polygon([(0, 0), (60, 0), (80, 30), (40, 50), (0, 30)])
        out = offset(p, -4.0).points
        src = p.points
        for k in range(len(src)):
            a, b = src[k], src[(k + 1) % len(src)]
            d = (b - a) / np.hypot(*(b - a))
            dist = [abs(d[0] * (q[1] - a[1]) - d[1] * (q[0] - a[0])) for q in out]
            self.assertAlmostEqual(sorted(dist)[0], 4.0, places=6)

    def test_excessive_inward_margin_collapses(self):
        with self.assertRaises(CollapseError):
            offset(rect(0, 0, 100, 40), -25)

    def test_concave_outward_offset_is_simple(self):
        """Test that loops at reflex vertices are removed."""
        u_shape = Polygon([(0, 0), (30, 0), (30, 30), (20, 30), (20, 8), (10, 8), (10, 30), (0, 30)])
        out = offset(u_shape, 6.0)
        self.assertGreater(area(out), area(u_shape))


class SamplingTests(SimpleTestCase):
    """Tests for uniform sampling and canonical ordering."""

    square = [(0, 0), (10, 0), (10, 10), (0, 10)]

    def test_square_corners_with_four_samples(self):
        c = sample_and_sort(Polygon(self.square), 4)
        np.testing.assert_allclose(c.points, self.square, atol=1e-12)

    def test_square_with_eight_samples_has_equal_gaps(self):
        c = sample_and_sort(Polygon(self.square), 8)
        expected = [(0, 0), (5, 0), (10, 0), (10, 5), (10, 10), (5, 10), (0, 10), (0, 5)]
        np.testing.assert_allclose(c.points, expected, atol=1e-12)
        gaps = np.hypot(*(np.roll(c.points, -1, axis=0) - c.points).T)
        np.testing.assert_allclose(gaps, 5.0)

    def test_orientation_invariance(self):
        ccw = Polygon(self.square[::-1])
        np.testing.assert_array_equal(sample_and_sort(ccw, 8).points, sample_and_sort(Polygon(self.square), 8).points)

    def test_output_is_clockwise(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=9))
            radii = rng.uniform(20, 40, size=9)
            p = Polygon(np.stack([50 + radii * np.cos(angles), 50 + radii * np.sin(angles)], axis=1))
            self.assertLessEqual(signed_area(sample_and_sort(p, 64).points), 0.0)

    def test_first_vertex_is_nearest_to_box_corner(self):
        tri = Polygon([(5, 0), (10, 10), (0, 10)])
        c = sample_and_sort(tri, 32)
        box = bbox(tri)
        d0 = np.hypot(*(c.points[0] - [box.x0, box.y0]))
        d_all = np.hypot(*(c.points - [box.x0, box.y0]).T)
        self.assertAlmostEqual(d0, d_all.min(), places=9)

    def test_uniform_arc_spacing(self):
        p = rect(3, 7, 100, 40)
        c = sample_and_sort(p, 28)
        gaps = np.hypot(*(np.roll(c.points, -1, axis=0) - c.points).T)
        np.testing.assert_allclose(gaps, 10.0, rtol=1e-6)

    def test_resampling_own_output_is_idempotent(self):
        """Test that sampling a contour's own polygon returns the contour, corners and curves included."""
        rotated = make_quad(ShapeSpec(kind='quad', center=(50, 50), rotation=0.3, size=(60, 20)))
        ribbon = make_ribbon(ShapeSpec(kind='ribbon', center=(100, 60), length=120, half_width=15,
                                       amplitude=10, wavelength=240))
        cases = {
            'square': (Polygon(self.square), 8),
            'rectangle': (rect(0, 0, 100, 40), 28),
            'triangle': (Polygon([(5, 0), (10, 10), (0, 10)]), 32),
            'rotated quad': (rotated, 128),
            'ribbon': (ribbon, 128),
        }
        for name, (p, n) in cases.items():
            with self.subTest(shape=name):
                first = sample_and_sort(p, n)
                again = sample_and_sort(first.as_polygon(), n)
                np.testing.assert_allclose(again.points, first.points, atol=1e-6)

    def test_n_vertex_polygon_keeps_its_vertices(self):
        pentagon = [(20, 0), (40, 12), (32, 35), (8, 35), (0, 12)]
        c = sample_and_sort(Polygon(pentagon[::-1]), 5)
        np.testing.assert_array_equal(c.points, np.roll(np.array(pentagon, dtype=float), -4, axis=0))

    def test_rejects_small_n(self):
        with self.assertRaises(GeometryError):
            sample_and_sort(Polygon(self.square), 3)

    def test_resample_accepts_folded_rings(self):
        pts = canonical_resample([(0, 0), (10, 10), (10, 0), (0, 10)], 16)
        self.assertEqual(pts.shape, (16, 2))

    def test_contour_length(self):
        self.assertEqual(Contour(np.zeros((128, 2))).n, 128)


class RasterIouTests(SimpleTestCase):
    """Tests for rasterization and IoU."""

    def test_self_iou(self):
        p = Polygon([(0, 0), (60, 0), (80, 30), (40, 50), (0, 30)])
        self.assertEqual(polygon_iou(p, p), 1.0)

    def test_disjoint_iou(self):
        self.assertEqual(polygon_iou(rect(0, 0, 10, 10), rect(20, 0, 10, 10)), 0.0)

    def test_half_overlap_iou(self):
        self.assertAlmostEqual(polygon_iou(rect(0, 0, 10, 10), rect(0, 5, 10, 10)), 1 / 3, delta=0.01)

    def test_iou_is_symmetric_and_close_to_analytic(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            ax, ay, bx, by = rng.uniform(0, 20, size=4)
            aw, ah, bw, bh = rng.uniform(5, 30, size=4)
            a, b = rect(ax, ay, aw, ah), rect(bx, by, bw, bh)
            ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
            iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
            inter = ix * iy
            exact = inter / (aw * ah + bw * bh - inter)
            self.assertEqual(polygon_iou(a, b), polygon_iou(b, a))
            self.assertLessEqual(abs(polygon_iou(a, b) - exact), 2 / 4)

    def test_rasterize_counts_pixel_centres(self):
        mask = rasterize(rect(2, 3, 4, 2), 10, 10)
        self.assertEqual(mask.sum(), 8)
        self.assertTrue(mask[3, 2] and mask[4, 5])
        self.assertFalse(mask[5, 2])
