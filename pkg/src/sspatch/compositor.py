"""Render patch genomes onto scenes.

Placement maps a normalized position (x_j, y_j) in [0, 1]^2 to a pixel
anchor inside the person box:

    side   s = l * box.h, capped at box.w (tall narrow boxes)
    cell   c = floor(s / 3)
    anchor = (box.x + round(x_j * (box.w - s)), box.y + round(y_j * (box.h - s)))

so the full 3x3 grid (span 3c <= s) stays inside the person box for every
position.  Active cells overwrite an exact c x c square with the genome's
pixel value; pixels falling outside the image are skipped.  Inputs are never
mutated.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleError
from .geometry import BoundingBox
from .grid import GRID_DIM, Genome

MIN_SIDE = 3  # below this the grid cells are empty


def cell_geometry(person: BoundingBox, l: float) -> tuple[float, int]:
    """Render side and cell size (pixels) of a grid on this person box.

    The side is capped at the box width so the grid stays inside even for
    tall narrow boxes.  Raises InfeasibleError when the side would be under
    3 pixels and the cells empty.
    """
    side = min(l * person.h, float(person.w))
    if side < MIN_SIDE:
        raise InfeasibleError(
            f"patch side {side:.2f}px is degenerate (< {MIN_SIDE}px) "
            f"for box {person.to_dict()} at l={l}"
        )
    return side, int(side // GRID_DIM)


def patch_anchor(person: BoundingBox, side: float, pos: tuple[float, float]) -> tuple[int, int]:
    """Pixel anchor (top-left) of one grid for a normalized position."""
    ax = int(person.x) + int(round(pos[0] * (person.w - side)))
    ay = int(person.y) + int(round(pos[1] * (person.h - side)))
    return ax, ay


def patch_cells(person: BoundingBox, g: Genome) -> list[tuple[int, int, int, int]]:
    """Pixel rectangles (x, y, w, h) of every active cell on one person."""
    side, cell = cell_geometry(person, g.l)
    rects = []
    for pos in g.positions:
        ax, ay = patch_anchor(person, side, pos)
        for idx, active in enumerate(g.shape.cells):
            if not active:
                continue
            r, c = divmod(idx, GRID_DIM)
            rects.append((ax + c * cell, ay + r * cell, cell, cell))
    return rects


def _write_cells(img: np.ndarray, rects, value: float) -> None:
    h, w = img.shape
    for (x, y, cw, ch) in rects:
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + cw, w), min(y + ch, h)
        if x0 < x1 and y0 < y1:
            img[y0:y1, x0:x1] = value


def place_patches(image: np.ndarray, person: BoundingBox, g: Genome) -> np.ndarray:
    """Render the genome onto one person; returns a new image."""
    out = image.copy()
    _write_cells(out, patch_cells(person, g), g.pixel_value)
    return out


def place_on_scene(image: np.ndarray, persons, g: Genome) -> np.ndarray:
    """Render the genome onto every person box (universal attack).

    Persons are processed in list order; later boxes overwrite earlier ones
    where patches overlap.  Returns a new image.
    """
    out = image.copy()
    for person in persons:
        _write_cells(out, patch_cells(person, g), g.pixel_value)
    return out
