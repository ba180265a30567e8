"""
Synthetic text-instance shapes: curved ribbons and oriented quads.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from geometry.exceptions import GeometryError
from geometry.services.polygons import Polygon

SHAPE_KIND_CHOICES = [
    ('ribbon', 'Curved ribbon'),
    ('quad', 'Oriented quadrilateral'),
]

MIN_RIBBON_SIDE = 12
RIBBON_STEP = 6.0
DEFAULT_SHRINK_RATIO = 0.4
# thinnest kernel (half-thickness, px) that still survives binarization
MIN_KERNEL_HALF_WIDTH = 1.0
CENTERLINE_SAMPLES = 512


@dataclass(frozen=True)
class ShapeSpec:
    """
    Parameters of one synthetic instance.

    ribbon: sinusoidal centerline y = amplitude·sin(2πx/wavelength) over
    x in [-length/2, length/2], thickened by half_width on both sides.
    quad: size[0] × size[1] rectangle.
    Both are rotated by `rotation` radians and moved to `center`.
    The shape must stay at least MIN_KERNEL_HALF_WIDTH thicker than the
    margin that shrinking it by `shrink_ratio` removes.
    """
    kind: str
    center: Tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    length: float = 0.0
    half_width: float = 0.0
    amplitude: float = 0.0
    wavelength: float = 1.0
    size: Tuple[float, float] = (0.0, 0.0)
    shrink_ratio: float = DEFAULT_SHRINK_RATIO

    def __post_init__(self):
        if self.kind not in dict(SHAPE_KIND_CHOICES):
            raise GeometryError(f"Unknown shape kind {self.kind!r}")
        if self.kind == 'ribbon':
            if self.length <= 0 or self.half_width <= 0 or self.wavelength <= 0:
                raise GeometryError("Ribbon length, half-width and wavelength must be positive")
        elif min(self.size) <= 0:
            raise GeometryError(f"Quad size must be positive, got {self.size}")
        if not 0.0 < self.shrink_ratio < 1.0:
            raise GeometryError(f"Shrink ratio must lie in (0, 1), got {self.shrink_ratio}")
        margin = self.kernel_margin()
        if self.half_extent - margin < MIN_KERNEL_HALF_WIDTH:
            raise GeometryError(
                f"Kernel degenerates: half-width {self.half_extent:.2f} leaves less than "
                f"{MIN_KERNEL_HALF_WIDTH} px after the {margin:.2f} px shrink margin"
            )

    @property
    def half_extent(self) -> float:
        """Half the shape's thickness: the ribbon half-width or half the quad's short side."""
        return self.half_width if self.kind == 'ribbon' else min(self.size) / 2

    def centerline_length(self) -> float:
        x = np.linspace(-self.length / 2, self.length / 2, CENTERLINE_SAMPLES)
        y = self.amplitude * np.sin(2.0 * np.pi * x / self.wavelength)
        return float(np.sum(np.hypot(np.diff(x), np.diff(y))))

    def kernel_margin(self) -> float:
        """Shrink margin A·(1 − r²)/L of the ideal shape."""
        if self.kind == 'ribbon':
            arc = self.centerline_length()
            a, perimeter = 2.0 * self.half_width * arc, 2.0 * arc + 4.0 * self.half_width
        else:
            w, h = self.size
            a, perimeter = w * h, 2.0 * (w + h)
        return a * (1.0 - self.shrink_ratio ** 2) / perimeter


def _place(points: np.ndarray, spec: ShapeSpec) -> np.ndarray:
    c, s = np.cos(spec.rotation), np.sin(spec.rotation)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T + np.asarray(spec.center, dtype=np.float64)


def make_ribbon(spec: ShapeSpec) -> Polygon:
    """
    Closed ribbon polygon: top side left to right, bottom side right to left.

    Raises:
        GeometryError: the half-width exceeds the centerline's tightest radius
            of curvature, so the sides would fold
    """
    k = 2.0 * np.pi / spec.wavelength
    if spec.half_width * abs(spec.amplitude) * k * k >= 1.0:
        raise GeometryError(
            f"Ribbon folds: half-width {spec.half_width:.2f} exceeds the centerline curvature radius"
        )
    m = max(MIN_RIBBON_SIDE, int(np.ceil(spec.length / RIBBON_STEP)) + 1)
    x = np.linspace(-spec.length / 2, spec.length / 2, m)
    y = spec.amplitude * np.sin(k * x)
    slope = spec.amplitude * k * np.cos(k * x)
    normal = np.stack([-slope, np.ones_like(slope)], axis=1) / np.hypot(slope, 1.0)[:, None]
    centre = np.stack([x, y], axis=1)
    top = centre - spec.half_width * normal
    bottom = centre + spec.half_width * normal
    ring = np.vstack([top, bottom[::-1]])
    return Polygon(_place(ring, spec))


def make_quad(spec: ShapeSpec) -> Polygon:
    w, h = spec.size
    corners = np.array([(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)])
    return Polygon(_place(corners, spec))


def make_shape(spec: ShapeSpec) -> Polygon:
    return make_ribbon(spec) if spec.kind == 'ribbon' else make_quad(spec)


def random_spec(rng: np.random.Generator, canvas: int, shrink_ratio: float = DEFAULT_SHRINK_RATIO) -> ShapeSpec:
    """
    Draw one ribbon or quad spec scaled to the canvas.

    Raises:
        GeometryError: the drawn shape is too thin to keep a kernel
    """
    center = (float(rng.uniform(0.15, 0.85) * canvas), float(rng.uniform(0.15, 0.85) * canvas))
    if rng.random() < 0.5:
        return ShapeSpec(
            kind='ribbon',
            center=center,
            rotation=float(rng.uniform(-0.5, 0.5)),
            length=float(rng.uniform(0.25, 0.55) * canvas),
            half_width=float(rng.uniform(0.03, 0.06) * canvas),
            amplitude=float(rng.uniform(0.0, 0.06) * canvas),
            wavelength=float(rng.uniform(0.35, 0.8) * canvas),
            shrink_ratio=shrink_ratio,
        )
    return ShapeSpec(
        kind='quad',
        center=center,
        rotation=float(rng.uniform(-0.6, 0.6)),
        size=(float(rng.uniform(0.2, 0.45) * canvas), float(rng.uniform(0.07, 0.16) * canvas)),
        shrink_ratio=shrink_ratio,
    )
