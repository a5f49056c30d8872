"""Attack objective: batch detection score plus an area-growth penalty.

The quantity being minimized for a genome ``g`` against a scene batch is

    loss(g) = mean_scene( mean_person( V_obj ) ) + lam * max(0, area(g) - area(ref))

where ``V_obj`` is the best detector score overlapping the person at the
working IoU threshold, and ``ref`` is the genome the candidate is being
compared against (the penalty is zero when area does not grow, or when no
reference is given).  Degenerate all-zero genomes render nothing, so they
score the unattacked batch.

Scene scores are always reduced in batch order with numpy's pairwise mean,
so a result never depends on evaluation parallelism.

For the built-in detector there is an exact fast path: 8-bit quantization
then band thresholding sends every patch cell to a constant in/out-of-band
bit, so candidates can be evaluated by editing each scene's precomputed
band mask instead of re-compositing float images.  ``test_objective``
pins the equivalence of both paths.
"""

from __future__ import annotations

import multiprocessing
import os
import queue as queue_mod
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool

import numpy as np

from .compositor import cell_geometry, patch_anchor, place_on_scene
from .dataset import AnnotatedScene
from .detector import (
    DetectorConfig,
    ToyDetectorParams,
    object_score,
    person_band,
    toy_detect_band,
)
from .geometry import BoundingBox
from .grid import GRID_DIM, Genome, ShapeMatrix, area_measure
from .image import quantize

DEFAULT_LAMBDA = 3.0


@dataclass(frozen=True)
class LossConfig:
    """Weights and thresholds entering the attack loss."""

    lam: float = DEFAULT_LAMBDA
    iou_threshold: float = 0.5


def growth_penalty(candidate: Genome, reference: Genome | None, lam: float) -> float:
    """lam * max(0, area(candidate) - area(reference)); 0 without a reference."""
    if reference is None or lam == 0.0:
        return 0.0
    return lam * max(0.0, area_measure(candidate) - area_measure(reference))


def object_probability(
    scene: AnnotatedScene,
    genome: Genome | None,
    detector,
    iou_threshold: float = 0.5,
) -> float:
    """Mean per-person detection score for one scene (attacked or clean)."""
    img = scene.image
    if genome is not None and not genome.is_degenerate:
        img = place_on_scene(img, scene.persons, genome)
    dets = detector.detect(quantize(img))
    if not scene.persons:
        return 0.0
    scores = [object_score(dets, p, iou_threshold) for p in scene.persons]
    return float(np.mean(scores))


def loss(
    scenes: list[AnnotatedScene],
    genome: Genome,
    reference: Genome | None,
    cfg: LossConfig,
    detector,
) -> float:
    """Reference implementation of the full loss (exact render path)."""
    if not scenes:
        raise ValueError("loss needs a non-empty scene batch")
    vals = [object_probability(s, genome, detector, cfg.iou_threshold) for s in scenes]
    return float(np.mean(vals)) + growth_penalty(genome, reference, cfg.lam)


# --- band fast path -----------------------------------------------------------


def _quantized_value(v: float) -> float:
    return round(v * 255.0) / 255.0


def _shape_runs(shape: ShapeMatrix) -> list[tuple[int, int, int]]:
    """Active cells of each grid row merged into (row, col0, col1) spans."""
    runs = []
    for r in range(GRID_DIM):
        c = 0
        while c < GRID_DIM:
            if shape.cells[r * GRID_DIM + c]:
                c2 = c + 1
                while c2 < GRID_DIM and shape.cells[r * GRID_DIM + c2]:
                    c2 += 1
                runs.append((r, c, c2))
                c = c2
            else:
                c += 1
    return runs


def _crop_scene(image, persons, params: ToyDetectorParams):
    """Clean band cropped to the window any patched pixel can occupy.

    Patches only touch person boxes, and clean in-band pixels only live
    inside the clean band, so labeling within the union window is exact.
    Person boxes are shifted into window coordinates so detections need no
    translation back.
    """
    band = person_band(image, params)
    h, w = band.shape
    r0, c0, r1, c1 = h, w, 0, 0
    rows = np.flatnonzero(band.any(axis=1))
    if rows.size:
        cols = np.flatnonzero(band.any(axis=0))
        r0, r1 = int(rows[0]), int(rows[-1]) + 1
        c0, c1 = int(cols[0]), int(cols[-1]) + 1
    for p in persons:
        r0 = min(r0, max(int(p.y), 0))
        r1 = max(r1, min(int(np.ceil(p.y2)), h))
        c0 = min(c0, max(int(p.x), 0))
        c1 = max(c1, min(int(np.ceil(p.x2)), w))
    if r0 >= r1 or c0 >= c1:
        return band[0:0, 0:0], []
    crop = np.ascontiguousarray(band[r0:r1, c0:c1])
    local = [BoundingBox(p.x - c0, p.y - r0, p.w, p.h) for p in persons]
    return crop, local


def _scene_band_vobj(
    band: np.ndarray,
    persons,
    genome: Genome,
    runs,
    in_band: bool,
    params: ToyDetectorParams,
    iou_threshold: float,
) -> float:
    """Mean V_obj for one scene via band-mask editing (toy detector only)."""
    if genome.is_degenerate:
        work = band
    else:
        work = band.copy()
        h, w = work.shape
        for person in persons:
            side, cell = cell_geometry(person, genome.l)
            for pos in genome.positions:
                ax, ay = patch_anchor(person, side, pos)
                for (r, cs, ce) in runs:
                    y0, y1 = max(ay + r * cell, 0), min(ay + (r + 1) * cell, h)
                    x0, x1 = max(ax + cs * cell, 0), min(ax + ce * cell, w)
                    if y0 < y1 and x0 < x1:
                        work[y0:y1, x0:x1] = in_band
    dets = toy_detect_band(work, params)
    scores = [object_score(dets, p, iou_threshold) for p in persons]
    return float(np.mean(scores)) if scores else 0.0


def _eval_genome(bands, persons, genome: Genome, params: ToyDetectorParams, iou_threshold: float) -> float:
    runs = _shape_runs(genome.shape)
    pv = _quantized_value(genome.pixel_value)
    in_band = bool(params.warm_threshold <= pv < params.hot_cutoff)
    vals = [
        _scene_band_vobj(b, p, genome, runs, in_band, params, iou_threshold)
        for b, p in zip(bands, persons)
    ]
    return float(np.mean(vals))


# module globals for forked pool workers
_W_BANDS: list[np.ndarray] = []
_W_PERSONS: list[list] = []
_W_PARAMS: ToyDetectorParams | None = None
_W_IOU: float = 0.5


def _pool_init(bands, persons, params, iou_threshold):
    global _W_BANDS, _W_PERSONS, _W_PARAMS, _W_IOU
    _W_BANDS, _W_PERSONS, _W_PARAMS, _W_IOU = bands, persons, params, iou_threshold


def _pool_eval(genome: Genome) -> float:
    return _eval_genome(_W_BANDS, _W_PERSONS, genome, _W_PARAMS, _W_IOU)


class BatchEvaluator:
    """Memoized mean-V_obj evaluation of genomes over a fixed scene batch.

    One instance backs a whole optimization run; `jobs` > 1 fans candidate
    genomes out to worker processes (built-in detector) or to a pool of
    external child processes, always collecting results in submission order.
    """

    def __init__(self, scenes: list[AnnotatedScene], detector: DetectorConfig, jobs: int = 1):
        if not scenes:
            raise ValueError("evaluator needs a non-empty scene batch")
        self.scenes = scenes
        self.detector = detector
        self.jobs = max(1, int(jobs))
        self.evals = 0  # cache misses, i.e. real evaluations performed
        self.detector_name = "toy"
        self._cache: dict[Genome, float] = {}
        self._pool = None
        self._clients: "queue_mod.Queue | None" = None
        if detector.kind == "toy":
            self._bands, self._persons = [], []
            for s in scenes:
                crop, local = _crop_scene(s.image, s.persons, detector.toy_params)
                self._bands.append(crop)
                self._persons.append(local)
            if self.jobs > 1:
                ctx = multiprocessing.get_context("fork")
                self._pool = ctx.Pool(
                    self.jobs,
                    initializer=_pool_init,
                    initargs=(self._bands, self._persons, detector.toy_params, detector.iou_threshold),
                )
        elif detector.kind == "external":
            self._clients = queue_mod.Queue()
            for _ in range(self.jobs):
                client = detector.create()
                self.detector_name = client.name
                self._clients.put(client)
            if self.jobs > 1:
                self._pool = ThreadPool(self.jobs)
        else:
            raise ValueError(f"unknown detector kind {detector.kind!r}")

    # -- single-genome paths

    def _eval_toy(self, genome: Genome) -> float:
        return _eval_genome(
            self._bands, self._persons, genome,
            self.detector.toy_params, self.detector.iou_threshold,
        )

    def _eval_external(self, genome: Genome) -> float:
        client = self._clients.get()
        try:
            vals = [
                object_probability(s, genome, client, self.detector.iou_threshold)
                for s in self.scenes
            ]
            return float(np.mean(vals))
        finally:
            self._clients.put(client)

    # -- public API

    def mean_scores(self, genomes: list[Genome]) -> list[float]:
        """Mean V_obj per genome, cache-aware, order-preserving."""
        misses = [g for g in genomes if g not in self._cache]
        # dedupe while keeping order so each distinct genome runs once
        misses = list(dict.fromkeys(misses))
        if misses:
            self.evals += len(misses)
            if self.detector.kind == "toy":
                if self._pool is not None:
                    chunk = max(1, len(misses) // (self.jobs * 4))
                    results = self._pool.map(_pool_eval, misses, chunksize=chunk)
                else:
                    results = [self._eval_toy(g) for g in misses]
            else:
                if self._pool is not None:
                    results = self._pool.map(self._eval_external, misses)
                else:
                    results = [self._eval_external(g) for g in misses]
            self._cache.update(zip(misses, results))
        return [self._cache[g] for g in genomes]

    def mean_score(self, genome: Genome) -> float:
        return self.mean_scores([genome])[0]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None
        if self._clients is not None:
            while not self._clients.empty():
                self._clients.get().close()
            self._clients = None

    def __enter__(self) -> "BatchEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def default_jobs() -> int:
    return os.cpu_count() or 1
