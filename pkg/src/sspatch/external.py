"""Client for out-of-process detectors speaking the line-JSON protocol (v1).

The child is any executable that:

1. prints a handshake line ``{"protocol": 1, "name": "<id>"}`` on stdout
   once it is ready to serve,
2. answers each request line ``{"id": k, "width": W, "height": H,
   "pixels_b64": <base64 row-major 8-bit grayscale>}`` with exactly one
   response line ``{"id": k, "detections": [{"x","y","w","h","class","score"}]}``
   in request order,
3. logs only to stderr.

The client quantizes images to 8 bits on the way out (matching the in-process
evaluation path), verifies response ids, and raises
:class:`DetectorTransportError` on handshake, framing or child-death issues.
"""

from __future__ import annotations

import base64
import json
import shlex
import subprocess

import numpy as np

from .detector import Detection, sort_detections
from .errors import DetectorTransportError
from .geometry import BoundingBox

PROTOCOL_VERSION = 1


class ExternalDetector:
    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise ValueError("empty external detector command")
        self._argv = argv
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,  # child logs pass through
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise DetectorTransportError(f"could not start detector {argv!r}: {exc}") from exc
        self._next_id = 0
        self.name = self._handshake()

    def _read_line(self, what: str) -> str:
        line = self._proc.stdout.readline()
        if line == "":
            code = self._proc.poll()
            raise DetectorTransportError(
                f"detector {self._argv[0]!r} closed its stdout while we waited for "
                f"{what} (exit code {code})"
            )
        return line

    def _handshake(self) -> str:
        line = self._read_line("the handshake")
        try:
            msg = json.loads(line)
            protocol, name = msg["protocol"], msg["name"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DetectorTransportError(f"bad handshake line {line!r}: {exc}") from exc
        if protocol != PROTOCOL_VERSION:
            raise DetectorTransportError(
                f"detector speaks protocol {protocol!r}, need {PROTOCOL_VERSION}"
            )
        return str(name)

    def detect(self, image: np.ndarray) -> list[Detection]:
        if image.ndim != 2:
            raise ValueError(f"expected 2-d grayscale image, got shape {image.shape}")
        data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
        h, w = data.shape
        req_id = self._next_id
        self._next_id += 1
        request = {
            "id": req_id,
            "width": w,
            "height": h,
            "pixels_b64": base64.b64encode(data.tobytes()).decode("ascii"),
        }
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise DetectorTransportError(f"detector pipe broke: {exc}") from exc
        line = self._read_line(f"response {req_id}")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DetectorTransportError(f"unparsable detector response {line!r}") from exc
        if msg.get("id") != req_id:
            raise DetectorTransportError(
                f"response id {msg.get('id')!r} does not match request id {req_id}"
            )
        if "error" in msg:
            raise DetectorTransportError(f"detector reported: {msg['error']}")
        try:
            dets = [
                Detection(
                    box=BoundingBox(d["x"], d["y"], d["w"], d["h"]),
                    class_name=str(d["class"]),
                    score=float(d["score"]),
                )
                for d in msg["detections"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectorTransportError(f"malformed detections in {line!r}: {exc}") from exc
        return sort_detections(dets)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalDetector":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
