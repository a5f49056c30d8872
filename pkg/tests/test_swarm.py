import numpy as np
import pytest

from sspatch.dataset import generate_synthetic
from sspatch.detector import DetectorConfig, ToyDetector
from sspatch.errors import DetectorTransportError, InfeasibleError
from sspatch.grid import ShapeMatrix, area_measure
from sspatch.objective import BatchEvaluator, LossConfig, loss, object_probability
from sspatch.swarm import (
    PatchTemplate,
    brute_force_oracle,
    init_swarm,
    optimize,
    step,
)

from conftest import make_solid_scene
from test_objective import bisecting_scene


@pytest.fixture(scope="module")
def batch4():
    return generate_synthetic(4, seed=21)


def small_run(batch, seed=0, lam=0.0, epochs=3, pop=8, **kw):
    template = PatchTemplate(m=2, l=0.15, pixel_value=0.2)
    return optimize(
        batch, template, epochs, LossConfig(lam=lam), DetectorConfig(),
        seed=seed, pop=pop, **kw,
    )


# --- template validation ------------------------------------------------------


def test_template_validation():
    with pytest.raises(ValueError):
        PatchTemplate(m=0, l=0.1, pixel_value=0.2)
    with pytest.raises(ValueError):
        PatchTemplate(m=1, l=0.0, pixel_value=0.2)
    with pytest.raises(ValueError):
        PatchTemplate(m=1, l=0.1, pixel_value=1.5)
    assert PatchTemplate(m=3, l=0.1, pixel_value=0.2).dim == 15


# --- optimize contract -----------------------------------------------------------


def test_optimize_deterministic_same_seed(batch4):
    a = small_run(batch4, seed=9)
    b = small_run(batch4, seed=9)
    assert a.genome == b.genome
    assert a.loss == b.loss
    assert a.trace == b.trace
    assert a.evals == b.evals


def test_optimize_rejects_bad_arguments(batch4):
    with pytest.raises(ValueError):
        small_run(batch4, epochs=0)
    with pytest.raises(ValueError):
        small_run(batch4, pop=1)
    with pytest.raises(ValueError):
        small_run([])


def test_trace_shape_and_monotone_best(batch4):
    res = small_run(batch4, epochs=5)
    assert [pt.step for pt in res.trace] == list(range(6))
    losses = [pt.best_loss for pt in res.trace]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert res.trace[-1].best_loss == res.loss
    assert res.trace[-1].best_n == res.genome.n
    assert res.trace[-1].evals == res.evals
    # every step evaluates at most pop new genomes
    assert res.evals <= 8 * 6


def test_recorded_fitness_recomputable_from_scratch(batch4):
    res = small_run(batch4, seed=3, lam=3.0, epochs=4)
    recomputed = loss(batch4, res.genome, None, LossConfig(lam=3.0), ToyDetector())
    assert res.loss == recomputed


def test_position_steps_snap_returned_genome(batch4):
    res = small_run(batch4, position_steps=5)
    for x, y in res.genome.positions:
        assert x in {0.0, 0.25, 0.5, 0.75, 1.0}
        assert y in {0.0, 0.25, 0.5, 0.75, 1.0}


def test_jobs_do_not_change_the_answer(batch4):
    serial = small_run(batch4, seed=5)
    pooled = small_run(batch4, seed=5, jobs=2)
    assert pooled.genome == serial.genome
    assert pooled.trace == serial.trace


# --- swarm state details -----------------------------------------------------------


def test_state_stays_clamped(batch4):
    template = PatchTemplate(m=2, l=0.15, pixel_value=0.2)
    with BatchEvaluator(batch4, DetectorConfig(), jobs=1) as ev:
        state = init_swarm(8, template, seed=1, evaluator=ev)
        for _ in range(4):
            step(state, template, LossConfig(lam=0.0), ev)
            assert np.all(state.x >= 0.0) and np.all(state.x <= 1.0)
            assert np.all(np.abs(state.v) <= 0.5)


def test_rejected_moves_still_update_positions(batch4):
    template = PatchTemplate(m=2, l=0.15, pixel_value=0.2)
    with BatchEvaluator(batch4, DetectorConfig(), jobs=1) as ev:
        state = init_swarm(8, template, seed=1, evaluator=ev)
        before = state.x.copy()
        step(state, template, LossConfig(lam=0.0), ev)
        assert not np.array_equal(state.x, before)


def test_huge_lambda_freezes_area_growth(batch4):
    # any n growth costs >= 1e6 * l^2/9 >> 1, so accepted areas never grow
    template = PatchTemplate(m=1, l=0.12, pixel_value=0.2)
    cfg = LossConfig(lam=1e6)
    with BatchEvaluator(batch4, DetectorConfig(), jobs=1) as ev:
        state = init_swarm(10, template, seed=2, evaluator=ev)
        areas = [area_measure(g) for g in state.accepted]
        for _ in range(5):
            step(state, template, cfg, ev)
            now = [area_measure(g) for g in state.accepted]
            assert all(b <= a + 1e-12 for a, b in zip(areas, now))
            areas = now


class FailingEvaluator:
    """Delegates to a real evaluator, then blows up on call `fail_at`."""

    def __init__(self, inner, fail_at):
        self.inner = inner
        self.calls = 0
        self.fail_at = fail_at

    def mean_scores(self, genomes):
        self.calls += 1
        if self.calls == self.fail_at:
            raise DetectorTransportError("child died mid-batch")
        return self.inner.mean_scores(genomes)


def test_detector_failure_aborts_step_atomically(batch4):
    template = PatchTemplate(m=2, l=0.15, pixel_value=0.2)
    with BatchEvaluator(batch4, DetectorConfig(), jobs=1) as ev:
        flaky = FailingEvaluator(ev, fail_at=2)  # init succeeds, step 1 fails
        state = init_swarm(6, template, seed=4, evaluator=flaky)
        x, v = state.x.copy(), state.v.copy()
        accepted = list(state.accepted)
        gb = state.gb_genome
        with pytest.raises(DetectorTransportError):
            step(state, template, LossConfig(lam=0.0), flaky)
        assert np.array_equal(state.x, x)
        assert np.array_equal(state.v, v)
        assert state.accepted == accepted
        assert state.gb_genome == gb
        assert state.iteration == 0


# --- brute-force oracle ---------------------------------------------------------------


def test_oracle_finds_the_minimal_bisector():
    # hand-built so a full-width three-cell carve can zero the score.  The
    # 18x50 body admits two kill routes for a single carved row of cells:
    # a centred cut (both halves < 400px, nothing detected) and an offset
    # cut whose larger half survives detection but covers less than half
    # the person box, so the 0.5-IoU match floor discards it.  Exhaustive
    # enumeration over all 511 shapes x 25 positions (tie key: loss, cell
    # count, position, cells) lands on the bottom-row shape at y=0.25:
    # carve rows [40, 46) leave a 360px top (< 400, gone) and a 432px
    # bottom whose IoU is 432/900 = 0.48.
    scene = bisecting_scene()
    res = brute_force_oracle([scene], l=0.36, pixel_value=0.2, position_steps=5,
                             detector=DetectorConfig())
    assert res.loss == 0.0
    assert res.genome.shape == ShapeMatrix((0, 0, 0, 0, 0, 0, 1, 1, 1))
    assert res.genome.n == 3
    assert res.genome.positions == ((0.0, 0.25),)
    assert res.evals == 511 * 25


def test_oracle_attack_ineffective_regime():
    # a paste inside the person band never alters the mask: the oracle can
    # do no better than the clean score
    scene = make_solid_scene()
    clean = object_probability(scene, None, ToyDetector())
    res = brute_force_oracle([scene], l=0.3, pixel_value=0.7, position_steps=3,
                             detector=DetectorConfig())
    assert res.loss == clean == 1.0


def test_oracle_never_beaten_by_the_swarm(batch4):
    det = DetectorConfig()
    with BatchEvaluator(batch4, det, jobs=1) as ev:
        oracle = brute_force_oracle(batch4, l=0.3, pixel_value=0.2, position_steps=4,
                                    detector=det, evaluator=ev)
        template = PatchTemplate(m=1, l=0.3, pixel_value=0.2)
        swarm = optimize(batch4, template, 5, LossConfig(lam=0.0), det,
                         seed=11, pop=16, position_steps=4, evaluator=ev)
    assert oracle.loss <= swarm.loss


def test_oracle_validates_inputs(batch4):
    det = DetectorConfig()
    with pytest.raises(ValueError):
        brute_force_oracle([], l=0.3, pixel_value=0.2, position_steps=5, detector=det)
    with pytest.raises(InfeasibleError):
        brute_force_oracle(batch4, l=0.3, pixel_value=0.2, position_steps=1, detector=det)
    with pytest.raises(InfeasibleError):
        brute_force_oracle(batch4, l=0.3, pixel_value=0.2, position_steps=11, detector=det)
