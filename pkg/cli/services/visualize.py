"""
SVG rendering of deformation paths.

Each instance is drawn as its labeled boundary (yellow), kernel contour
(dashed blue) and predicted contour (green), plus one arrow per predicted
vertex pointing at the target vertex the selected loss pairs it with.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import svgwrite

from deformation.services.features import SurrogateFeatureField
from deformation.services.inference import expand_contour
from geometry.services.sampling import Contour, sample_and_sort
from matching.services.losses import contour_loss

LABELED_COLOR = '#f2c500'
KERNEL_COLOR = '#1f77b4'
PREDICTED_COLOR = '#2ca02c'
ARROW_COLOR = '#d62728'
PRECISION = 3


@dataclass(frozen=True, eq=False)
class DeformationPath:
    kernel: Contour
    predicted: Contour
    target: Contour
    cols: np.ndarray
    kind: str

    @property
    def arrows(self) -> np.ndarray:
        """(N, 2, 2): start at each predicted vertex, end at its paired target vertex."""
        return np.stack([self.predicted.points, self.target.points[self.cols]], axis=1)


def deformation_paths(net, scene, n_vertices: int, kind: str, iterations: int = 1) -> List[DeformationPath]:
    paths = []
    for inst in scene.instances:
        kernel = sample_and_sort(inst.kernel, n_vertices)
        target = sample_and_sort(inst.boundary, n_vertices)
        field = SurrogateFeatureField.from_prob_map(inst.prob)
        predicted = expand_contour(net, kernel, field, iterations)
        pairing = contour_loss(kind, predicted, target)
        paths.append(DeformationPath(kernel, predicted, target, np.asarray(pairing.cols), kind))
    return paths


def _pts(points) -> list:
    return [(round(float(x), PRECISION), round(float(y), PRECISION)) for x, y in points]


def render_scene_svg(scene, paths: Sequence[DeformationPath]) -> str:
    dwg = svgwrite.Drawing(size=(scene.width, scene.height), profile='full')
    dwg.viewbox(0, 0, scene.width, scene.height)
    dwg.add(dwg.rect(insert=(0, 0), size=(scene.width, scene.height), fill='white'))
    for idx, (inst, path) in enumerate(zip(scene.instances, paths)):
        g = dwg.g(id=f'instance-{idx}', class_=f'loss-{path.kind}')
        g.add(dwg.polygon(_pts(inst.boundary.points), fill='none', stroke=LABELED_COLOR, stroke_width=1.5))
        g.add(dwg.polygon(_pts(path.kernel.points), fill='none', stroke=KERNEL_COLOR,
                          stroke_width=1, stroke_dasharray='3,2'))
        g.add(dwg.polygon(_pts(path.predicted.points), fill='none', stroke=PREDICTED_COLOR, stroke_width=1))
        for start, end in path.arrows:
            s, e = _pts([start, end])
            g.add(dwg.line(start=s, end=e, stroke=ARROW_COLOR, stroke_width=0.5))
            g.add(dwg.circle(center=e, r=0.8, fill=ARROW_COLOR))
        dwg.add(g)
    return dwg.tostring()
