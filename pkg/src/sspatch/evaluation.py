"""End-to-end evaluation runs: clean pass, attacked pass, report assembly."""

from __future__ import annotations

import numpy as np

from .compositor import place_on_scene
from .dataset import AnnotatedScene
from .detector import Detection, DetectorConfig, object_score
from .grid import Genome
from .image import quantize
from .metrics import (
    EvalReport,
    SceneOutcome,
    attack_success_rate,
    average_precision,
    format_label,
    greedy_match,
)

GenomesArg = Genome | list[Genome | None] | None


def _genome_for(genomes: GenomesArg, index: int) -> Genome | None:
    if genomes is None or isinstance(genomes, Genome):
        return genomes
    return genomes[index]


def detect_scenes(
    scenes: list[AnnotatedScene],
    detector,
    genomes: GenomesArg = None,
) -> dict[str, list[Detection]]:
    """Detections per scene id, attacking each scene with its genome if given."""
    out: dict[str, list[Detection]] = {}
    for idx, scene in enumerate(scenes):
        g = _genome_for(genomes, idx)
        img = scene.image
        if g is not None and not g.is_degenerate:
            img = place_on_scene(img, scene.persons, g)
        out[scene.id] = detector.detect(quantize(img))
    return out


def _scene_v_obj(dets: list[Detection], scene: AnnotatedScene, iou_threshold: float) -> float:
    if not scene.persons:
        return 0.0
    return float(np.mean([object_score(dets, p, iou_threshold) for p in scene.persons]))


def evaluate_attack(
    scenes: list[AnnotatedScene],
    genomes: GenomesArg,
    detector,
    config: DetectorConfig,
) -> EvalReport:
    """Evaluate a (possibly absent) attack: AP, ASR and per-scene outcomes.

    ``genomes`` may be one universal genome, a per-scene list (baseline arms),
    or None for a clean-only run (AP only, ASR omitted).
    """
    gts = {scene.id: list(scene.persons) for scene in scenes}
    clean = detect_scenes(scenes, detector)
    clean_ap, clean_curve = average_precision(clean, gts, config.iou_threshold)

    if genomes is None:
        per_scene = [
            SceneOutcome(s.id, _scene_v_obj(clean[s.id], s, config.iou_threshold),
                         _scene_v_obj(clean[s.id], s, config.iou_threshold), False)
            for s in scenes
        ]
        return EvalReport(
            ap=clean_ap, pr_curve=clean_curve, per_scene=per_scene, clean_ap=clean_ap
        )

    attacked = detect_scenes(scenes, detector, genomes)
    ap, curve = average_precision(attacked, gts, config.iou_threshold)
    asr, n, l_pre = attack_success_rate(
        clean, attacked, gts, config.score_threshold, config.iou_threshold
    )
    clean_matched = greedy_match(clean, gts, config.iou_threshold, config.score_threshold)
    per_scene = []
    for scene in scenes:
        mine = {lab for lab in clean_matched if lab[0] == scene.id}
        hidden = mine and not (mine & l_pre)
        per_scene.append(
            SceneOutcome(
                scene.id,
                _scene_v_obj(clean[scene.id], scene, config.iou_threshold),
                _scene_v_obj(attacked[scene.id], scene, config.iou_threshold),
                bool(hidden),
            )
        )
    return EvalReport(
        ap=ap,
        asr=asr,
        n_baseline_tp=n,
        matched_labels=sorted(format_label(lab) for lab in l_pre),
        pr_curve=curve,
        per_scene=per_scene,
        clean_ap=clean_ap,
    )
