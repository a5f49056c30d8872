"""Detector contract plus the built-in threshold-and-components detector.

Every detector maps a grayscale image to a list of :class:`Detection`
sorted by descending score (ties broken by box x, then y).  Scores are
unthresholded; callers apply ``score_threshold`` where it matters.

The built-in "toy" detector stands in for a trained infrared person
detector while keeping the evaluation loop fast and fully deterministic:

1. binarize to a person-intensity band  ``t_warm <= v < t_hot``
2. 4-connected components on the band mask
3. gate components on pixel area and box aspect (h/w)
4. score by how solidly the component fills its bounding box

The fill response is sharpened, ``score = ((fill - floor) / (1 - floor))^gamma``
clamped to [0, 1], so near-solid bodies score high while modest carve-outs
pull a component below a working confidence threshold.  Both colder- and
hotter-than-body patches leave the band and carve the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import BoundingBox, iou

PERSON_CLASS = "person"
DEFAULT_SCORE_THRESHOLD = 0.25
DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    class_name: str
    score: float

    def to_dict(self) -> dict:
        return {**self.box.to_dict(), "class": self.class_name, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(box=BoundingBox.from_dict(d), class_name=d["class"], score=float(d["score"]))


def sort_detections(dets: list[Detection]) -> list[Detection]:
    """Canonical output order: descending score, ties by box x then y."""
    return sorted(dets, key=lambda d: (-d.score, d.box.x, d.box.y, d.box.w, d.box.h))


# --- toy detector ------------------------------------------------------------


@dataclass(frozen=True)
class ToyDetectorParams:
    """Gates of the threshold-and-components person detector.

    ``warm_threshold``/``hot_cutoff`` bound the person-intensity band
    (warm bodies sit inside; both cold and overheated pixels fall out).
    ``fill_floor`` is the fill ratio at which the score reaches zero and
    ``fill_sharpness`` is the exponent steepening the response near 1.
    """

    warm_threshold: float = 0.5
    hot_cutoff: float = 0.9
    min_area: int = 400
    aspect_range: tuple[float, float] = (1.2, 4.0)
    fill_floor: float = 0.55
    fill_sharpness: float = 9.0


def person_band(image: np.ndarray, params: ToyDetectorParams) -> np.ndarray:
    """Boolean mask of pixels inside the person-intensity band."""
    return (image >= params.warm_threshold) & (image < params.hot_cutoff)


def fill_score(fill: float, params: ToyDetectorParams) -> float:
    base = (fill - params.fill_floor) / (1.0 - params.fill_floor)
    base = min(max(base, 0.0), 1.0)
    return base ** params.fill_sharpness


def toy_detect_band(band: np.ndarray, params: ToyDetectorParams) -> list[Detection]:
    """Run the component analysis directly on a band mask.

    This is the exact core of :func:`toy_detect`; the separate entry point
    lets the optimizer edit masks instead of re-thresholding whole images.
    """
    if not band.any():
        return []
    # Label only the occupied window; components cannot cross empty space.
    rows = np.flatnonzero(band.any(axis=1))
    cols = np.flatnonzero(band.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    crop = band[r0:r1, c0:c1]
    labels, count = ndimage.label(crop)  # default structure = 4-connectivity
    if count == 0:
        return []
    areas = np.bincount(labels.ravel())
    dets: list[Detection] = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        area = int(areas[idx])
        if area < params.min_area:
            continue
        bh = sl[0].stop - sl[0].start
        bw = sl[1].stop - sl[1].start
        aspect = bh / bw
        lo, hi = params.aspect_range
        if not (lo <= aspect <= hi):
            continue
        fill = area / (bw * bh)
        box = BoundingBox(x=c0 + sl[1].start, y=r0 + sl[0].start, w=bw, h=bh)
        dets.append(Detection(box, PERSON_CLASS, fill_score(fill, params)))
    return sort_detections(dets)


def toy_detect(image: np.ndarray, params: ToyDetectorParams | None = None) -> list[Detection]:
    """Detect person-like warm components in a grayscale image."""
    params = params or ToyDetectorParams()
    return toy_detect_band(person_band(image, params), params)


# --- per-person score --------------------------------------------------------


def object_score(
    detections: list[Detection],
    gt_box: BoundingBox,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> float:
    """Best person-class score overlapping a ground-truth box (0 when none)."""
    best = 0.0
    for det in detections:
        if det.class_name != PERSON_CLASS:
            continue
        if iou(det.box, gt_box) >= iou_threshold and det.score > best:
            best = det.score
    return best


# --- configuration / factory --------------------------------------------------


class ToyDetector:
    """In-process detector instance satisfying the uniform detect contract."""

    def __init__(self, params: ToyDetectorParams | None = None):
        self.params = params or ToyDetectorParams()
        self.name = "toy"

    def detect(self, image: np.ndarray) -> list[Detection]:
        return toy_detect(image, self.params)

    def close(self) -> None:  # symmetry with the external client
        pass


@dataclass
class DetectorConfig:
    """Which detector to evaluate against and the thresholds applied to it."""

    kind: str = "toy"  # "toy" | "external"
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    toy_params: ToyDetectorParams = field(default_factory=ToyDetectorParams)
    command: str | None = None  # external child command line

    def create(self):
        """Instantiate a detector; external children are spawned here."""
        if self.kind == "toy":
            return ToyDetector(self.toy_params)
        if self.kind == "external":
            from .external import ExternalDetector

            if not self.command:
                raise ValueError("external detector requires a command line")
            return ExternalDetector(self.command)
        raise ValueError(f"unknown detector kind {self.kind!r}")
