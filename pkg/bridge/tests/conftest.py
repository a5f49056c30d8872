"""Spawn helpers: drive a real bridge child over pipes like a client would."""

import base64
import json
import subprocess
import sys

import numpy as np
import pytest


class BridgeProc:
    def __init__(self, *flags):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "detector_bridge", *flags],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )

    def read(self) -> dict:
        line = self.proc.stdout.readline()
        assert line, "bridge closed stdout unexpectedly"
        return json.loads(line)

    def send_raw(self, text: str) -> None:
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def request(self, rid: int, image: np.ndarray) -> None:
        h, w = image.shape
        self.send_raw(
            json.dumps(
                {
                    "id": rid,
                    "width": w,
                    "height": h,
                    "pixels_b64": base64.b64encode(
                        image.astype(np.uint8).tobytes()
                    ).decode("ascii"),
                }
            )
        )

    def round_trip(self, rid: int, image: np.ndarray) -> dict:
        self.request(rid, image)
        return self.read()

    def close(self) -> tuple[int, str]:
        """Close stdin, reap the child, return (exit code, stderr text)."""
        self.proc.stdin.close()
        code = self.proc.wait(timeout=10)
        err = self.proc.stderr.read()
        return code, err


@pytest.fixture
def bridge():
    started = []

    def spawn(*flags):
        b = BridgeProc(*flags)
        started.append(b)
        return b

    yield spawn
    for b in started:
        if b.proc.poll() is None:
            b.proc.kill()
            b.proc.wait()


def solid_rect(size=(80, 60), origin=(10, 12), rect=(27, 15), value=200, bg=10):
    """Canvas with one solid rectangle: (origin y, x), rect (h, w)."""
    img = np.full(size, bg, dtype=np.uint8)
    y, x = origin
    h, w = rect
    img[y : y + h, x : x + w] = value
    return img
