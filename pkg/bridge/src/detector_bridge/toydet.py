"""Self-contained threshold-and-components person detector on 8-bit images.

Reference backend used to cross-check the protocol plumbing end to end:
a second, independent implementation of the in-process detector the
attack toolkit evaluates against.  Deliberately written from scratch on
plain breadth-first flood fill so the two routes share no code and no
third-party labeling library.
"""

from __future__ import annotations

from collections import deque

import numpy as np

# 8-bit person-intensity band: the first level whose [0, 1] value reaches
# 0.5 and the last level strictly below 0.9 (255 * 0.5 = 127.5, 255 * 0.9 = 229.5).
BAND_LO = 128
BAND_HI = 229

MIN_AREA = 400
ASPECT_RANGE = (1.2, 4.0)
FILL_FLOOR = 0.55
FILL_SHARPNESS = 9.0
PERSON_CLASS = "person"


def band_mask(gray: np.ndarray) -> np.ndarray:
    """Pixels inside the person-intensity band."""
    return (gray >= BAND_LO) & (gray <= BAND_HI)


def flood_components(mask: np.ndarray):
    """Yield (pixels, x0, y0, x1, y1) per 4-connected mask component."""
    h, w = mask.shape
    seen = np.zeros(mask.shape, dtype=bool)
    for sy, sx in zip(*np.nonzero(mask)):
        if seen[sy, sx]:
            continue
        sy, sx = int(sy), int(sx)
        seen[sy, sx] = True
        queue = deque([(sy, sx)])
        pixels = 0
        x0 = x1 = sx
        y0 = y1 = sy
        while queue:
            y, x = queue.popleft()
            pixels += 1
            x0, x1 = min(x0, x), max(x1, x)
            y0, y1 = min(y0, y), max(y1, y)
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    queue.append((ny, nx))
        yield pixels, x0, y0, x1 + 1, y1 + 1


def detect(gray: np.ndarray) -> list[dict]:
    """Protocol detections for an 8-bit grayscale image, canonically sorted.

    Components are gated on pixel area and bounding-box aspect, then scored
    by how solidly they fill their box:
    ``score = clamp((fill - floor) / (1 - floor), 0, 1) ** sharpness``.
    """
    dets: list[dict] = []
    for pixels, x0, y0, x1, y1 in flood_components(band_mask(gray)):
        if pixels < MIN_AREA:
            continue
        bw, bh = x1 - x0, y1 - y0
        aspect = bh / bw
        if not (ASPECT_RANGE[0] <= aspect <= ASPECT_RANGE[1]):
            continue
        fill = pixels / (bw * bh)
        base = (fill - FILL_FLOOR) / (1.0 - FILL_FLOOR)
        base = min(max(base, 0.0), 1.0)
        dets.append(
            {
                "x": x0,
                "y": y0,
                "w": bw,
                "h": bh,
                "class": PERSON_CLASS,
                "score": base**FILL_SHARPNESS,
            }
        )
    dets.sort(key=lambda d: (-d["score"], d["x"], d["y"], d["w"], d["h"]))
    return dets
