"""Detection backends: canned stub, self-contained reference, real-model wrapper.

Every backend exposes ``detect(gray: uint8 HxW) -> list[dict]`` returning
protocol detection objects, plus a ``name`` used in the handshake.  Backend
construction performs all loading, so the server can defer its handshake
until the backend is actually able to answer.
"""

from __future__ import annotations

import os

import numpy as np

from . import toydet


class ModelError(Exception):
    """Model could not be loaded or crashed during inference (fatal, exit 4)."""


class StubBackend:
    """Fixed detection for any non-blank image; no ML runtime needed.

    Lets protocol integration tests (and the attack suite's own transport
    tests) exercise handshake/framing without shipping model weights.
    """

    name = "bridge-stub"
    DETECTION = {"x": 16, "y": 24, "w": 32, "h": 64, "class": "person", "score": 0.9}

    def detect(self, gray: np.ndarray) -> list[dict]:
        if not gray.any():
            return []
        return [dict(self.DETECTION)]


class ToyParityBackend:
    """Independent reimplementation of the attack suite's built-in detector."""

    name = "bridge-toy"

    def detect(self, gray: np.ndarray) -> list[dict]:
        return toydet.detect(gray)


class ModelBackend:
    """Wraps user-supplied object-detection weights (ultralytics interface).

    Grayscale payloads are replicated to three channels before inference;
    only detections whose class name maps to "person" and whose confidence
    clears ``score_floor`` are reported.
    """

    def __init__(
        self,
        model_path: str,
        device: str = "cpu",
        score_floor: float = 0.0,
        person_classes: tuple[str, ...] = ("person",),
    ):
        self.name = os.path.basename(model_path)
        self._device = device
        self._floor = float(score_floor)
        self._person = set(person_classes)
        try:
            from ultralytics import YOLO  # heavyweight import, model mode only
        except ImportError as exc:
            raise ModelError(f"model runtime unavailable: {exc}") from exc
        try:
            self._model = YOLO(model_path)
        except Exception as exc:  # loader errors are library-specific
            raise ModelError(f"could not load {model_path!r}: {exc}") from exc

    def detect(self, gray: np.ndarray) -> list[dict]:
        rgb = np.repeat(gray[:, :, None], 3, axis=2)
        try:
            result = self._model.predict(rgb, device=self._device, verbose=False)[0]
        except Exception as exc:
            raise ModelError(f"inference failed: {exc}") from exc
        dets = []
        for box in result.boxes:
            cls_name = str(result.names.get(int(box.cls), int(box.cls)))
            score = float(box.conf)
            if cls_name not in self._person or score < self._floor:
                continue
            x0, y0, x1, y1 = (float(v) for v in box.xyxy[0])
            dets.append(
                {"x": x0, "y": y0, "w": x1 - x0, "h": y1 - y0,
                 "class": "person", "score": score}
            )
        dets.sort(key=lambda d: (-d["score"], d["x"], d["y"], d["w"], d["h"]))
        return dets


def make_backend(args) -> StubBackend | ToyParityBackend | ModelBackend:
    if args.stub:
        return StubBackend()
    if args.toy_parity:
        return ToyParityBackend()
    classes = tuple(c for c in args.person_classes.split(",") if c)
    return ModelBackend(args.model, args.device, args.score_floor, classes)
