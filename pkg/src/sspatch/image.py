"""8-bit grayscale image I/O and quantization.

Images are carried in memory as float64 arrays of shape ``(h, w)`` with
values in [0, 1].  On disk they are 8-bit grayscale PNG or binary PGM (P5);
reading maps byte ``b`` to ``b / 255`` and writing maps ``v`` to
``round(v * 255)``.  float64 matters: float32 mis-rounds 0.9 * 255.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

_PGM_MAGIC = b"P5"


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap intensities to the 8-bit grid: round(v * 255) / 255."""
    return np.round(img * 255.0) / 255.0


def read_gray(path: str | os.PathLike) -> np.ndarray:
    """Read a grayscale PNG or PGM file into a float array in [0, 1]."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_gray(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write an image as 8-bit grayscale; format picked by file extension."""
    if img.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {img.shape}")
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = os.fspath(path)
    if path.lower().endswith(".pgm"):
        h, w = data.shape
        with open(path, "wb") as fh:
            fh.write(_PGM_MAGIC + b"\n%d %d\n255\n" % (w, h))
            fh.write(data.tobytes())
    else:
        Image.fromarray(data, mode="L").save(path)
