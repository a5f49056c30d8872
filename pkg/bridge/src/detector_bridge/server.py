"""Protocol v1 server loop.

Message flow on stdout (stderr carries logs only, stdout never carries
anything but protocol lines):

1. handshake ``{"protocol": 1, "name": "<backend>"}`` -- emitted only after
   the backend has finished loading,
2. one response line per request line, in order:
   ``{"id": k, "detections": [...]}`` on success,
   ``{"id": k, "error": "..."}`` for a malformed request (the loop continues),
3. a model failure answers the current request with an error line and then
   exits with code 4.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import json
import logging
import sys

import numpy as np

from . import PROTOCOL_VERSION, __version__
from .backends import ModelError, make_backend

log = logging.getLogger("detector_bridge")

EXIT_MODEL_FAILURE = 4


class ProtocolError(Exception):
    """Bad request line; reported to the client, never fatal."""


def decode_image(req: object) -> np.ndarray:
    """Pull the 8-bit grayscale payload out of a request object."""
    if not isinstance(req, dict):
        raise ProtocolError("request must be a JSON object")
    try:
        width, height, payload = req["width"], req["height"], req["pixels_b64"]
    except KeyError as exc:
        raise ProtocolError(f"missing request field {exc}") from exc
    if not isinstance(width, int) or not isinstance(height, int) or width <= 0 or height <= 0:
        raise ProtocolError("width/height must be positive integers")
    if not isinstance(payload, str):
        raise ProtocolError("pixels_b64 must be a base64 string")
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ProtocolError(f"undecodable pixel payload: {exc}") from exc
    if len(raw) != width * height:
        raise ProtocolError(f"payload holds {len(raw)} bytes, expected {width}x{height}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width)


def serve(backend, name: str, stdin=None, stdout=None) -> int:
    """Answer request lines until stdin closes; returns the process exit code."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    emit({"protocol": PROTOCOL_VERSION, "name": name})
    log.info("ready as %r", name)
    served = 0
    for line in stdin:
        if not line.strip():
            continue
        rid = None
        try:
            try:
                req = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"unparsable request line: {exc}") from exc
            if isinstance(req, dict):
                rid = req.get("id")
            detections = backend.detect(decode_image(req))
        except ProtocolError as exc:
            log.warning("rejected request: %s", exc)
            emit({"id": rid, "error": str(exc)})
            continue
        except ModelError as exc:
            log.error("%s", exc)
            emit({"id": rid, "error": str(exc)})
            return EXIT_MODEL_FAILURE
        emit({"id": rid, "detections": detections})
        served += 1
    log.info("stdin closed after %d requests", served)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="detector-bridge",
        description="stdin/stdout line-JSON inference server for person detectors",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--model", help="path to detector weights to serve")
    mode.add_argument("--stub", action="store_true",
                      help="canned detection backend (no ML runtime)")
    mode.add_argument("--toy-parity", action="store_true",
                      help="built-in reference detector backend")
    parser.add_argument("--device", default="cpu", help="inference device for --model")
    parser.add_argument("--score-floor", type=float, default=0.0,
                        help="drop model detections below this confidence")
    parser.add_argument("--person-classes", default="person",
                        help="comma-separated model class names reported as person")
    parser.add_argument("--name", help="override the handshake name")
    args = parser.parse_args(argv)

    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="bridge: %(levelname)s %(message)s")
    try:
        backend = make_backend(args)  # the handshake must wait for the model
    except ModelError as exc:
        log.error("%s", exc)
        print(json.dumps({"error": str(exc)}), flush=True)
        return EXIT_MODEL_FAILURE
    return serve(backend, args.name or backend.name)


if __name__ == "__main__":
    sys.exit(main())
