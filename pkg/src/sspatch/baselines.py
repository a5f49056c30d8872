"""Random placement baselines.

Two arms share the swarm attack's genome format, compositor and metrics and
differ only in how genomes come to be:

* ``random`` (R): every patch position drawn iid uniform in [0, 1]^2.
* ``manual_random`` (MR): positions re-drawn until all m grids are pairwise
  disjoint at render scale, mimicking a careful human placer.

Shapes are drawn cell-wise Bernoulli(0.5), re-drawn when all nine cells come
up empty.  Baseline genomes are re-sampled per scene (they are not universal),
with rng streams derived from (seed, scene index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AnnotatedScene
from .errors import InfeasibleError
from .geometry import BoundingBox
from .grid import CELL_COUNT, GRID_DIM, Genome, ShapeMatrix

KIND_RANDOM = "random"
KIND_MANUAL_RANDOM = "manual_random"
MAX_PLACEMENT_TRIES = 10_000


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    m: int
    l: float
    pixel_value: float

    def __post_init__(self) -> None:
        if self.kind not in (KIND_RANDOM, KIND_MANUAL_RANDOM):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("baseline needs m >= 1")


def sample_shape(rng: np.random.Generator) -> ShapeMatrix:
    """Bernoulli(0.5) cells, re-drawn until at least one is active."""
    while True:
        cells = tuple(int(b) for b in rng.integers(0, 2, size=CELL_COUNT))
        if any(cells):
            return ShapeMatrix(cells)


def _grids_disjoint(person: BoundingBox, positions, l: float) -> bool:
    """Pairwise axis-aligned disjointness of the rendered grids on one box."""
    side = min(l * person.h, float(person.w))
    span = int(side // GRID_DIM) * GRID_DIM
    anchors = [
        (int(round(x * (person.w - side))), int(round(y * (person.h - side))))
        for x, y in positions
    ]
    for i in range(len(anchors)):
        for j in range(i + 1, len(anchors)):
            if (
                abs(anchors[i][0] - anchors[j][0]) < span
                and abs(anchors[i][1] - anchors[j][1]) < span
            ):
                return False
    return True


def _draw_positions(rng: np.random.Generator, m: int) -> tuple[tuple[float, float], ...]:
    flat = rng.uniform(0.0, 1.0, size=2 * m)
    return tuple((float(flat[2 * j]), float(flat[2 * j + 1])) for j in range(m))


def sample_baseline(
    spec: BaselineSpec,
    persons: BoundingBox | list[BoundingBox],
    rng: np.random.Generator,
) -> Genome:
    """Draw one baseline genome; MR placement must be disjoint on every box."""
    boxes = [persons] if isinstance(persons, BoundingBox) else list(persons)
    shape = sample_shape(rng)
    if spec.kind == KIND_RANDOM:
        return Genome(shape, _draw_positions(rng, spec.m), spec.l, spec.pixel_value)
    for _ in range(MAX_PLACEMENT_TRIES):
        positions = _draw_positions(rng, spec.m)
        if all(_grids_disjoint(b, positions, spec.l) for b in boxes):
            return Genome(shape, positions, spec.l, spec.pixel_value)
    raise InfeasibleError(
        f"could not place {spec.m} disjoint grids at l={spec.l} within "
        f"{MAX_PLACEMENT_TRIES} tries (boxes: {[b.to_dict() for b in boxes]})"
    )


def baseline_genomes(spec: BaselineSpec, scenes: list[AnnotatedScene], seed: int) -> list[Genome]:
    """One genome per scene, each from its own (seed, scene index) stream."""
    return [
        sample_baseline(spec, scene.persons, np.random.default_rng([seed, idx]))
        for idx, scene in enumerate(scenes)
    ]
