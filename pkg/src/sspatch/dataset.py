"""Scene datasets: manifests, the synthetic generator, and augmentation.

A dataset on disk is a directory with a ``manifest.jsonl`` (one scene per
line: id, image path relative to the manifest, person boxes) plus the image
files.  In memory a scene is an 8-bit-quantized float image with its
eligible person boxes; boxes at or under the height filter are kept around
for context but excluded from attack and evaluation.

The synthetic generator draws warm, upright, person-proportioned rectangles
(optionally with rounded corners) on a cool noisy background.  Its parameter
ranges are co-designed with the built-in detector's gates so that every
generated person is cleanly detected with a high score.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .compositor import place_on_scene
from .errors import DataError, InfeasibleError
from .geometry import BoundingBox
from .grid import Genome
from .image import quantize, read_gray, write_gray

DEFAULT_MIN_PERSON_HEIGHT = 120
MANIFEST_NAME = "manifest.jsonl"


@dataclass
class AnnotatedScene:
    """One image with its eligible person boxes (plus any filtered-out ones)."""

    id: str
    image: np.ndarray
    persons: list[BoundingBox]
    extra_persons: list[BoundingBox] = field(default_factory=list)

    @property
    def all_persons(self) -> list[BoundingBox]:
        return self.persons + self.extra_persons


@dataclass(frozen=True)
class SplitStats:
    scenes_kept: int
    scenes_dropped: int
    persons_kept: int
    persons_dropped: int


# --- manifests ----------------------------------------------------------------


def write_dataset(out_dir: str | os.PathLike, scenes: list[AnnotatedScene], fmt: str = "png") -> str:
    """Write images plus manifest.jsonl under ``out_dir``; returns manifest path."""
    out_dir = os.fspath(out_dir)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="utf-8") as fh:
        for scene in scenes:
            rel = f"images/{scene.id}.{fmt}"
            write_gray(os.path.join(out_dir, rel), scene.image)
            rec = {
                "id": scene.id,
                "image": rel,
                "persons": [b.to_dict() for b in scene.all_persons],
            }
            fh.write(json.dumps(rec) + "\n")
    return manifest


def _read_manifest(path: str | os.PathLike) -> list[dict]:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rec["id"], rec["image"], rec["persons"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed manifest record: {exc}") from exc
            records.append(rec)
    return records


def load_split(
    manifest_path: str | os.PathLike,
    min_person_height: int = DEFAULT_MIN_PERSON_HEIGHT,
) -> tuple[list[AnnotatedScene], SplitStats]:
    """Load scenes keeping those with at least one person taller than the filter.

    Boxes at or under ``min_person_height`` never make a scene eligible; they
    are retained on the scene as context but dropped from the working list.
    Scene order follows the manifest (stable across runs).
    """
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    scenes: list[AnnotatedScene] = []
    scenes_dropped = persons_kept = persons_dropped = 0
    for rec in _read_manifest(manifest_path):
        try:
            boxes = [BoundingBox.from_dict(b) for b in rec["persons"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"scene {rec.get('id')!r}: bad person box: {exc}") from exc
        eligible = [b for b in boxes if b.h > min_person_height]
        ignored = [b for b in boxes if b.h <= min_person_height]
        if not eligible:
            scenes_dropped += 1
            continue
        img_path = os.path.join(base, rec["image"])
        if not os.path.exists(img_path):
            raise DataError(f"scene {rec['id']!r}: image missing: {img_path}")
        persons_kept += len(eligible)
        persons_dropped += len(ignored)
        scenes.append(
            AnnotatedScene(
                id=str(rec["id"]),
                image=read_gray(img_path),
                persons=eligible,
                extra_persons=ignored,
            )
        )
    return scenes, SplitStats(len(scenes), scenes_dropped, persons_kept, persons_dropped)


# --- synthetic generation -------------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    """Ranges for the synthetic infrared-like scene generator."""

    width: int = 320
    height: int = 240
    max_persons: int = 3
    person_height: tuple[int, int] = (130, 200)
    aspect: tuple[float, float] = (1.5, 3.5)  # person box h/w
    body_intensity: tuple[float, float] = (0.70, 0.90)
    background: tuple[float, float] = (0.05, 0.20)
    noise_sigma: float = 0.02
    margin: int = 8
    rounded_prob: float = 0.5
    corner_frac: tuple[float, float] = (0.02, 0.06)
    place_tries: int = 200


def _overlaps(box: BoundingBox, placed: list[BoundingBox], margin: int) -> bool:
    for other in placed:
        if (
            box.x - margin < other.x2
            and other.x - margin < box.x2
            and box.y - margin < other.y2
            and other.y - margin < box.y2
        ):
            return True
    return False


def _draw_body(img: np.ndarray, box: BoundingBox, value: float, radius: int, bg: np.ndarray) -> None:
    x, y, w, h = int(box.x), int(box.y), int(box.w), int(box.h)
    img[y : y + h, x : x + w] = value
    if radius <= 0:
        return
    # carve rounded corners back to the background
    yy, xx = np.mgrid[0:radius, 0:radius]
    outside = (yy - radius + 0.5) ** 2 + (xx - radius + 0.5) ** 2 > radius * radius
    corners = (
        (slice(y, y + radius), slice(x, x + radius), outside),
        (slice(y, y + radius), slice(x + w - radius, x + w), outside[:, ::-1]),
        (slice(y + h - radius, y + h), slice(x, x + radius), outside[::-1, :]),
        (slice(y + h - radius, y + h), slice(x + w - radius, x + w), outside[::-1, ::-1]),
    )
    for sy, sx, mask in corners:
        region = img[sy, sx]
        region[mask] = bg[sy, sx][mask]


def generate_synthetic(count: int, seed: int, params: SynthParams | None = None) -> list[AnnotatedScene]:
    """Generate ``count`` deterministic scenes with 1..max_persons warm bodies."""
    params = params or SynthParams()
    if count < 1:
        raise ValueError("count must be >= 1")
    scenes = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        w, h = params.width, params.height
        bg = float(rng.uniform(*params.background))
        img = np.clip(bg + rng.normal(0.0, params.noise_sigma, size=(h, w)), 0.0, 1.0)
        wanted = int(rng.integers(1, params.max_persons + 1))
        placed: list[BoundingBox] = []
        for _ in range(wanted):
            box = None
            for _try in range(params.place_tries):
                ph = int(rng.integers(params.person_height[0], params.person_height[1] + 1))
                aspect = float(rng.uniform(*params.aspect))
                pw = max(1, int(round(ph / aspect)))
                if ph + 2 * params.margin >= h or pw + 2 * params.margin >= w:
                    continue
                px = int(rng.integers(params.margin, w - pw - params.margin))
                py = int(rng.integers(params.margin, h - ph - params.margin))
                cand = BoundingBox(px, py, pw, ph)
                if not _overlaps(cand, placed, params.margin):
                    box = cand
                    break
            if box is None:
                break  # canvas is crowded; keep what fits
            value = float(rng.uniform(*params.body_intensity))
            radius = 0
            if rng.uniform() < params.rounded_prob:
                radius = int(round(rng.uniform(*params.corner_frac) * min(box.w, box.h)))
            _draw_body(img, box, value, radius, np.full_like(img, bg))
            placed.append(box)
        if not placed:
            raise InfeasibleError(
                f"could not place any person in scene {index} "
                f"({params.width}x{params.height}, margin {params.margin})"
            )
        scenes.append(
            AnnotatedScene(id=f"synth-{seed}-{index:04d}", image=quantize(img), persons=placed)
        )
    return scenes


# --- augmentation ----------------------------------------------------------------


def emit_augmented(
    scenes: list[AnnotatedScene],
    genome: Genome,
    out_dir: str | os.PathLike,
    fmt: str = "png",
) -> str:
    """Write original plus attacked copies with unchanged labels.

    Attacked entries carry a ``source`` field naming the original scene id so
    retraining pipelines can pair them.  Returns the manifest path.
    """
    out_dir = os.fspath(out_dir)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="utf-8") as fh:
        for scene in scenes:
            persons = [b.to_dict() for b in scene.all_persons]
            rel = f"images/{scene.id}.{fmt}"
            write_gray(os.path.join(out_dir, rel), scene.image)
            fh.write(json.dumps({"id": scene.id, "image": rel, "persons": persons}) + "\n")
            attacked = quantize(place_on_scene(scene.image, scene.persons, genome))
            adv_id = f"{scene.id}-adv"
            adv_rel = f"images/{adv_id}.{fmt}"
            write_gray(os.path.join(out_dir, adv_rel), attacked)
            fh.write(
                json.dumps(
                    {"id": adv_id, "image": adv_rel, "persons": persons, "source": scene.id}
                )
                + "\n"
            )
    return manifest


# --- YOLO-layout ingestion ----------------------------------------------------------


def convert_yolo_labels(
    images_dir: str | os.PathLike,
    labels_dir: str | os.PathLike,
    out_manifest: str | os.PathLike,
    person_class: int = 0,
) -> int:
    """Convert YOLO txt labels (class cx cy w h, normalized) to a manifest.

    Image paths are stored relative to the manifest location.  Returns the
    number of scenes written.
    """
    images_dir, labels_dir = os.fspath(images_dir), os.fspath(labels_dir)
    out_manifest = os.fspath(out_manifest)
    base = os.path.dirname(os.path.abspath(out_manifest)) or "."
    names = sorted(
        f for f in os.listdir(images_dir) if f.lower().endswith((".png", ".pgm", ".jpg", ".jpeg"))
    )
    if not names:
        raise DataError(f"no images found under {images_dir}")
    count = 0
    with open(out_manifest, "w", encoding="utf-8") as fh:
        for name in names:
            stem = os.path.splitext(name)[0]
            label_path = os.path.join(labels_dir, stem + ".txt")
            img_path = os.path.join(images_dir, name)
            ih, iw = read_gray(img_path).shape
            persons = []
            if os.path.exists(label_path):
                with open(label_path, "r", encoding="utf-8") as lf:
                    for lineno, line in enumerate(lf, start=1):
                        parts = line.split()
                        if not parts:
                            continue
                        try:
                            cls, cx, cy, bw, bh = int(parts[0]), *map(float, parts[1:5])
                        except (ValueError, IndexError) as exc:
                            raise DataError(
                                f"{label_path}:{lineno}: bad YOLO record"
                            ) from exc
                        if cls != person_class:
                            continue
                        w = max(1, int(round(bw * iw)))
                        h = max(1, int(round(bh * ih)))
                        x = int(round(cx * iw - w / 2))
                        y = int(round(cy * ih - h / 2))
                        persons.append({"x": x, "y": y, "w": w, "h": h})
            rec = {
                "id": stem,
                "image": os.path.relpath(img_path, base),
                "persons": persons,
            }
            fh.write(json.dumps(rec) + "\n")
            count += 1
    return count


def scenes_like(scenes: list[AnnotatedScene], images: list[np.ndarray]) -> list[AnnotatedScene]:
    """Pair replacement images with existing scene annotations."""
    if len(scenes) != len(images):
        raise ValueError("scene/image count mismatch")
    return [replace(s, image=img) for s, img in zip(scenes, images)]
