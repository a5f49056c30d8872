"""Particle-swarm search over patch genomes, plus a brute-force oracle.

Particles move through the flat genome vector space (9 cell latents plus 2m
position components, everything in [0, 1]).  One step is batch-synchronous:

1. every particle's velocity and position update are computed from the
   previous step's personal/global bests,
2. all moved positions are decoded and their batch scores evaluated
   (possibly in parallel -- no state is touched yet, so a detector failure
   aborts the step atomically),
3. acceptances are applied serially in particle-index order.

A move is accepted greedily when its loss undercuts the particle's accepted
genome; the stored accepted loss is the genome's own batch score (the
area-growth penalty applies only when a move is compared against it, so a
stored fitness can always be recomputed with no reference).  Rejected moves
still update position and velocity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import AnnotatedScene
from .detector import DetectorConfig
from .errors import InfeasibleError
from .grid import CELL_COUNT, Genome, ShapeMatrix, decode
from .objective import BatchEvaluator, LossConfig, growth_penalty

# constriction-style coefficients; velocity clamped per component
OMEGA = 0.729
C1 = 1.49445
C2 = 1.49445
VELOCITY_CLAMP = 0.5
VELOCITY_INIT = 0.25

DEFAULT_POPULATION = 100
MAX_ORACLE_EVALS = 1_000_000
MAX_ORACLE_GRID = 10


@dataclass(frozen=True)
class PatchTemplate:
    """Attack attributes held fixed during a run: patch count, size, value."""

    m: int
    l: float
    pixel_value: float

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"patch count m must be >= 1, got {self.m}")
        if not (0.0 < self.l <= 1.0):
            raise ValueError(f"side fraction l must be in (0,1], got {self.l}")
        if not (0.0 <= self.pixel_value <= 1.0):
            raise ValueError(f"pixel_value must be in [0,1], got {self.pixel_value}")

    @property
    def dim(self) -> int:
        return CELL_COUNT + 2 * self.m


@dataclass(frozen=True)
class TracePoint:
    step: int
    best_loss: float
    best_n: int
    mean_loss: float
    evals: int


@dataclass
class SwarmState:
    """Full optimizer state; arrays are (pop, dim) rows per particle."""

    x: np.ndarray
    v: np.ndarray
    accepted: list[Genome]
    accepted_loss: np.ndarray
    pb_x: np.ndarray
    pb_loss: np.ndarray
    gb_x: np.ndarray
    gb_genome: Genome
    gb_loss: float
    rng: np.random.Generator
    iteration: int = 0


@dataclass
class OptimizeResult:
    genome: Genome
    loss: float
    trace: list[TracePoint] = field(default_factory=list)
    evals: int = 0


def _decode_all(x: np.ndarray, template: PatchTemplate, position_steps: int | None) -> list[Genome]:
    return [
        decode(row, template.m, template.l, template.pixel_value, position_steps)
        for row in x
    ]


def init_swarm(
    pop: int,
    template: PatchTemplate,
    seed: int,
    evaluator: BatchEvaluator,
    position_steps: int | None = None,
) -> SwarmState:
    """Uniform-random swarm; every particle starts as its own accepted genome."""
    if pop < 2:
        raise ValueError(f"swarm needs at least 2 particles, got {pop}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(pop, template.dim))
    v = rng.uniform(-VELOCITY_INIT, VELOCITY_INIT, size=(pop, template.dim))
    genomes = _decode_all(x, template, position_steps)
    scores = np.asarray(evaluator.mean_scores(genomes), dtype=np.float64)
    best = int(np.argmin(scores))
    return SwarmState(
        x=x,
        v=v,
        accepted=list(genomes),
        accepted_loss=scores.copy(),
        pb_x=x.copy(),
        pb_loss=scores.copy(),
        gb_x=x[best].copy(),
        gb_genome=genomes[best],
        gb_loss=float(scores[best]),
        rng=rng,
    )


def step(
    state: SwarmState,
    template: PatchTemplate,
    cfg: LossConfig,
    evaluator: BatchEvaluator,
    position_steps: int | None = None,
) -> SwarmState:
    """Advance the swarm one batch-synchronous iteration (mutates state)."""
    pop, dim = state.x.shape
    r1 = state.rng.uniform(size=(pop, dim))
    r2 = state.rng.uniform(size=(pop, dim))
    v_new = (
        OMEGA * state.v
        + C1 * r1 * (state.pb_x - state.x)
        + C2 * r2 * (state.gb_x - state.x)
    )
    np.clip(v_new, -VELOCITY_CLAMP, VELOCITY_CLAMP, out=v_new)
    x_new = np.clip(state.x + v_new, 0.0, 1.0)

    candidates = _decode_all(x_new, template, position_steps)
    scores = evaluator.mean_scores(candidates)  # may raise; state untouched

    state.x, state.v = x_new, v_new
    for i in range(pop):
        cand_loss = scores[i] + growth_penalty(candidates[i], state.accepted[i], cfg.lam)
        if cand_loss < state.accepted_loss[i]:
            state.accepted[i] = candidates[i]
            state.accepted_loss[i] = scores[i]
            if scores[i] < state.pb_loss[i]:
                state.pb_loss[i] = scores[i]
                state.pb_x[i] = x_new[i]
            if scores[i] < state.gb_loss:
                state.gb_loss = float(scores[i])
                state.gb_x = x_new[i].copy()
                state.gb_genome = candidates[i]
    state.iteration += 1
    return state


def optimize(
    train: list[AnnotatedScene],
    template: PatchTemplate,
    epochs: int,
    cfg: LossConfig,
    detector: DetectorConfig,
    seed: int,
    pop: int = DEFAULT_POPULATION,
    jobs: int = 1,
    position_steps: int | None = None,
    evaluator: BatchEvaluator | None = None,
) -> OptimizeResult:
    """Run the swarm for ``epochs`` steps over the training batch.

    Deterministic for a fixed (seed, batch, settings) regardless of ``jobs``.
    The recorded loss of the returned genome is its plain batch score, equal
    to ``loss(train, genome, None, cfg, det)`` recomputed from scratch.
    """
    if not train:
        raise ValueError("optimize needs a non-empty training batch")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    own_evaluator = evaluator is None
    ev = evaluator or BatchEvaluator(train, detector, jobs=jobs)
    try:
        state = init_swarm(pop, template, seed, ev, position_steps)
        trace = [
            TracePoint(0, state.gb_loss, state.gb_genome.n, float(np.mean(state.accepted_loss)), ev.evals)
        ]
        for k in range(1, epochs + 1):
            step(state, template, cfg, ev, position_steps)
            trace.append(
                TracePoint(
                    k,
                    state.gb_loss,
                    state.gb_genome.n,
                    float(np.mean(state.accepted_loss)),
                    ev.evals,
                )
            )
        return OptimizeResult(genome=state.gb_genome, loss=state.gb_loss, trace=trace, evals=ev.evals)
    finally:
        if own_evaluator:
            ev.close()


# --- exhaustive reference ------------------------------------------------------


def _all_shapes() -> list[ShapeMatrix]:
    """The 511 non-empty cell patterns, ordered by (n, cells)."""
    shapes = [
        ShapeMatrix(cells)
        for cells in itertools.product((0, 1), repeat=CELL_COUNT)
        if any(cells)
    ]
    shapes.sort(key=lambda s: (s.n, s.cells))
    return shapes


def brute_force_oracle(
    train: list[AnnotatedScene],
    l: float,
    pixel_value: float,
    position_steps: int,
    detector: DetectorConfig,
    jobs: int = 1,
    evaluator: BatchEvaluator | None = None,
) -> OptimizeResult:
    """Exhaustive single-patch optimum over all shapes and a finite position grid.

    Only m=1 is supported.  Ties in loss go to the smaller active-cell count,
    then to the lexicographically smallest position.  Refuses search spaces
    beyond 10x10 positions or 1e6 evaluations.
    """
    if not train:
        raise ValueError("oracle needs a non-empty batch")
    if not (2 <= position_steps <= MAX_ORACLE_GRID):
        raise InfeasibleError(
            f"position grid must be 2..{MAX_ORACLE_GRID} steps per axis, got {position_steps}"
        )
    shapes = _all_shapes()
    k = position_steps - 1
    positions = [(i / k, j / k) for i in range(position_steps) for j in range(position_steps)]
    total = len(shapes) * len(positions)
    if total > MAX_ORACLE_EVALS:
        raise InfeasibleError(f"oracle search space too large: {total} > {MAX_ORACLE_EVALS}")
    own_evaluator = evaluator is None
    ev = evaluator or BatchEvaluator(train, detector, jobs=jobs)
    try:
        genomes = [
            Genome(shape=s, positions=(p,), l=l, pixel_value=pixel_value)
            for s in shapes
            for p in positions
        ]
        scores = ev.mean_scores(genomes)

        def key(i: int):
            g = genomes[i]
            return (scores[i], g.n, g.positions[0], g.shape.cells)

        best_i = min(range(total), key=key)
        return OptimizeResult(genome=genomes[best_i], loss=float(scores[best_i]), evals=ev.evals)
    finally:
        if own_evaluator:
            ev.close()
