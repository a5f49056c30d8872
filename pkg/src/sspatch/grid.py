"""Patch genome: a shared 3x3 cell pattern plus per-patch positions.

A genome describes an attack entirely by size, shape and position:

* ``shape`` -- a 3x3 binary matrix shared by every patch; active cells are
  rendered, inactive cells leave the image untouched.
* ``positions`` -- ``m`` normalized top-left anchors, one per patch, each in
  [0, 1]^2 relative to the person box (see :mod:`sspatch.compositor`).
* ``l`` -- patch side length as a fraction of person height, in (0, 1].
* ``pixel_value`` -- the single intensity written into active cells.

Genomes are immutable and hashable so they can key evaluation caches.
The flat search vector layout is ``[9 cell latents, x1, y1, ..., xm, ym]``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

CELL_COUNT = 9
GRID_DIM = 3
CELL_THRESHOLD = 0.5


# --- shape -----------------------------------------------------------------


@dataclass(frozen=True)
class ShapeMatrix:
    """3x3 binary cell pattern, row-major."""

    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != CELL_COUNT:
            raise ValueError(f"shape needs {CELL_COUNT} cells, got {len(self.cells)}")
        if any(c not in (0, 1) for c in self.cells):
            raise ValueError(f"cells must be 0/1, got {self.cells}")

    @classmethod
    def from_rows(cls, rows) -> "ShapeMatrix":
        flat = tuple(int(v) for row in rows for v in row)
        return cls(flat)

    def rows(self) -> list[list[int]]:
        c = self.cells
        return [list(c[r * GRID_DIM : (r + 1) * GRID_DIM]) for r in range(GRID_DIM)]

    @property
    def n(self) -> int:
        """Number of active cells."""
        return sum(self.cells)


ALL_ZERO = ShapeMatrix((0,) * CELL_COUNT)


# --- genome ----------------------------------------------------------------


@dataclass(frozen=True)
class Genome:
    shape: ShapeMatrix
    positions: tuple[tuple[float, float], ...]
    l: float
    pixel_value: float

    def __post_init__(self) -> None:
        if len(self.positions) < 1:
            raise ValueError("genome needs at least one patch position")
        for p in self.positions:
            if not (0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0):
                raise ValueError(f"positions must lie in [0,1]^2, got {p}")
        if not (0.0 < self.l <= 1.0):
            raise ValueError(f"side fraction l must be in (0,1], got {self.l}")
        if not (0.0 <= self.pixel_value <= 1.0):
            raise ValueError(f"pixel_value must be in [0,1], got {self.pixel_value}")

    @property
    def m(self) -> int:
        """Number of patches."""
        return len(self.positions)

    @property
    def n(self) -> int:
        """Number of active cells in the shared shape."""
        return self.shape.n

    @property
    def is_degenerate(self) -> bool:
        """True when no cell is active; such genomes render as a no-op."""
        return self.n == 0


def area_measure(g: Genome) -> float:
    """Normalized patched area: n * m * l^2 / 9.

    Monotone in each of n, m and l; equals m * l^2 exactly when all nine
    cells are active.  Units are (fraction of person height)^2.
    """
    return g.n * g.m * g.l * g.l / CELL_COUNT


# --- flat vector encoding ---------------------------------------------------


def encode(g: Genome) -> np.ndarray:
    """Flatten a genome to a search vector of length 9 + 2m."""
    vec = np.empty(CELL_COUNT + 2 * g.m, dtype=np.float64)
    vec[:CELL_COUNT] = g.shape.cells
    flat = [c for pos in g.positions for c in pos]
    vec[CELL_COUNT:] = flat
    return vec


def decode(
    vec: np.ndarray,
    m: int,
    l: float,
    pixel_value: float,
    position_steps: int | None = None,
) -> Genome:
    """Threshold a search vector back into a genome.

    Cell latents at or above 0.5 become active; position components are
    clamped to [0, 1].  ``position_steps`` optionally snaps each component
    to a uniform grid of that many values per axis (used when comparing the
    swarm against the finite brute-force oracle).  Raises ``ValueError`` on
    a length mismatch.
    """
    vec = np.asarray(vec, dtype=np.float64)
    want = CELL_COUNT + 2 * m
    if vec.shape != (want,):
        raise ValueError(f"expected vector of length {want} for m={m}, got shape {vec.shape}")
    cells = tuple(int(v >= CELL_THRESHOLD) for v in vec[:CELL_COUNT])
    pos = np.clip(vec[CELL_COUNT:], 0.0, 1.0)
    if position_steps is not None:
        if position_steps < 2:
            raise ValueError("position_steps must be >= 2")
        k = position_steps - 1
        pos = np.round(pos * k) / k
    positions = tuple((float(pos[2 * j]), float(pos[2 * j + 1])) for j in range(m))
    return Genome(shape=ShapeMatrix(cells), positions=positions, l=l, pixel_value=pixel_value)


# --- genome files -----------------------------------------------------------


@dataclass(frozen=True)
class GenomeMeta:
    """Provenance recorded next to a stored genome."""

    seed: int | None = None
    lam: float | None = None
    fitness: float | None = None
    detector_id: str | None = None
    extra: dict = field(default_factory=dict)


def genome_to_dict(g: Genome, meta: GenomeMeta | None = None) -> dict:
    meta = meta or GenomeMeta()
    return {
        "m": g.m,
        "l": g.l,
        "pixel_value": g.pixel_value,
        "shape": g.shape.rows(),
        "positions": [[x, y] for x, y in g.positions],
        "meta": {
            "seed": meta.seed,
            "lambda": meta.lam,
            "fitness": meta.fitness,
            "detector_id": meta.detector_id,
            **meta.extra,
        },
    }


def genome_from_dict(d: dict) -> tuple[Genome, dict]:
    """Parse a stored genome; returns (genome, meta dict)."""
    try:
        shape = ShapeMatrix.from_rows(d["shape"])
        positions = tuple((float(x), float(y)) for x, y in d["positions"])
        g = Genome(
            shape=shape,
            positions=positions,
            l=float(d["l"]),
            pixel_value=float(d["pixel_value"]),
        )
        if int(d["m"]) != g.m:
            raise ValueError(f"m={d['m']} disagrees with {g.m} positions")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed genome record: {exc}") from exc
    return g, dict(d.get("meta") or {})


def save_genome(path: str | os.PathLike, g: Genome, meta: GenomeMeta | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(genome_to_dict(g, meta), fh, indent=2)
        fh.write("\n")


def load_genome(path: str | os.PathLike) -> tuple[Genome, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return genome_from_dict(json.load(fh))
