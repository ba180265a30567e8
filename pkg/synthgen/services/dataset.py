"""
Dataset persistence: JSON Lines, one scene per line.

Polygons are flat [x1, y1, ...] arrays written at full float precision.
Probability windows are row-major little-endian float32, base64 encoded,
with their canvas origin and size.
"""

import base64
import json
from pathlib import Path
from typing import Iterable, List

import numpy as np

from geometry.exceptions import GeometryError
from geometry.services.polygons import Polygon
from kernels.services.probmap import ProbMap
from synthgen.exceptions import DatasetFormatError
from synthgen.services.scenes import SynthInstance, SynthScene

FORMAT_VERSION = 1


def encode_prob(pm: ProbMap) -> dict:
    payload = np.ascontiguousarray(pm.values, dtype="<f4").tobytes()
    return {
        "x0": pm.x0,
        "y0": pm.y0,
        "width": pm.width,
        "height": pm.height,
        "dtype": "float32",
        "data": base64.b64encode(payload).decode("ascii"),
    }


def decode_prob(record: dict) -> ProbMap:
    if record.get("dtype") != "float32":
        raise DatasetFormatError(f"Unsupported probability dtype {record.get('dtype')!r}")
    raw = base64.b64decode(record["data"])
    width, height = int(record["width"]), int(record["height"])
    values = np.frombuffer(raw, dtype="<f4")
    if values.size != width * height:
        raise DatasetFormatError(f"Probability payload holds {values.size} cells, expected {width}×{height}")
    return ProbMap(values.reshape(height, width).astype(np.float32), x0=int(record["x0"]), y0=int(record["y0"]))


def scene_to_record(scene: SynthScene) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": scene.seed,
        "canvas": [scene.width, scene.height],
        "shrink_ratio": scene.shrink_ratio,
        "instances": [
            {
                "boundary": inst.boundary.to_flat(),
                "kernel": inst.kernel.to_flat(),
                "prob": encode_prob(inst.prob),
            }
            for inst in scene.instances
        ],
    }


def scene_from_record(record: dict) -> SynthScene:
    version = record.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"Unsupported dataset format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        width, height = (int(v) for v in record["canvas"])
        instances = [
            SynthInstance(
                boundary=Polygon.from_flat(inst["boundary"]),
                kernel=Polygon.from_flat(inst["kernel"]),
                prob=decode_prob(inst["prob"]),
            )
            for inst in record["instances"]
        ]
        return SynthScene(
            width=width,
            height=height,
            seed=int(record["seed"]),
            instances=instances,
            shrink_ratio=float(record["shrink_ratio"]),
        )
    except (KeyError, TypeError, GeometryError) as e:
        raise DatasetFormatError(f"Malformed scene record: {e}") from e


def dumps_scene(scene: SynthScene) -> str:
    return json.dumps(scene_to_record(scene), sort_keys=True)


def write_dataset(path, scenes: Iterable[SynthScene]) -> int:
    """Write scenes as JSON Lines; returns the number of records written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for scene in scenes:
            fh.write(dumps_scene(scene))
            fh.write("\n")
            count += 1
    return count


def read_dataset(path) -> List[SynthScene]:
    scenes = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"Line {lineno}: invalid JSON ({e.msg})") from e
            scenes.append(scene_from_record(record))
    return scenes
