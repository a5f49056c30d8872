"""Evaluation metrics: average precision and attack success rate.

AP is single-class ("person"), all-point interpolated: detections from the
whole dataset are sorted by descending score (ties broken by scene id, then
box x), matched greedily one-to-one against ground truth at the working IoU
threshold, and the area under the precision envelope is integrated across
every recall change.

ASR counts how many of the persons found by the clean run are no longer
matched under attack:

    ASR = 1 - (1/N) * sum(sign_i)

with N the clean-run true positives at the working score threshold and
sign_i = 1 when person i is still matched in the attacked run.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .detector import PERSON_CLASS, Detection
from .errors import UndefinedMetricError
from .geometry import BoundingBox, iou

Label = tuple[str, int]  # (scene id, person index)


@dataclass
class SceneOutcome:
    scene_id: str
    clean_v_obj: float
    attacked_v_obj: float
    success: bool

    def to_dict(self) -> dict:
        return {
            "id": self.scene_id,
            "clean_v_obj": self.clean_v_obj,
            "attacked_v_obj": self.attacked_v_obj,
            "success": self.success,
        }


@dataclass
class EvalReport:
    """Evaluation summary; ``asr`` and friends are None for clean-only runs."""

    ap: float
    asr: float | None = None
    n_baseline_tp: int | None = None
    matched_labels: list[str] = field(default_factory=list)
    pr_curve: list[tuple[float, float]] = field(default_factory=list)
    per_scene: list[SceneOutcome] = field(default_factory=list)
    clean_ap: float | None = None

    def to_dict(self) -> dict:
        d = {
            "ap": self.ap,
            "n_baseline_tp": self.n_baseline_tp,
            "matched_labels": self.matched_labels,
            "pr_curve": [[r, p] for r, p in self.pr_curve],
            "per_scene": [s.to_dict() for s in self.per_scene],
            "clean_ap": self.clean_ap,
        }
        if self.asr is not None:
            d["asr"] = self.asr
        return d

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def save_pr_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["recall", "precision"])
            for r, p in self.pr_curve:
                writer.writerow([r, p])


# --- matching ------------------------------------------------------------------


def _person_dets(dets: list[Detection], min_score: float = 0.0) -> list[Detection]:
    return [d for d in dets if d.class_name == PERSON_CLASS and d.score >= min_score]


def greedy_match(
    detections: dict[str, list[Detection]],
    gts: dict[str, list[BoundingBox]],
    iou_threshold: float,
    min_score: float = 0.0,
) -> set[Label]:
    """One-to-one greedy assignment per scene; returns the matched GT labels."""
    matched: set[Label] = set()
    for scene_id, boxes in gts.items():
        dets = sorted(
            _person_dets(detections.get(scene_id, []), min_score),
            key=lambda d: (-d.score, d.box.x, d.box.y),
        )
        taken = [False] * len(boxes)
        for det in dets:
            best_j, best_iou = -1, iou_threshold
            for j, gt in enumerate(boxes):
                if taken[j]:
                    continue
                v = iou(det.box, gt)
                if v >= best_iou and (best_j < 0 or v > best_iou):
                    best_j, best_iou = j, v
            if best_j >= 0:
                taken[best_j] = True
                matched.add((scene_id, best_j))
    return matched


def average_precision(
    detections: dict[str, list[Detection]],
    gts: dict[str, list[BoundingBox]],
    iou_threshold: float = 0.5,
) -> tuple[float, list[tuple[float, float]]]:
    """All-point interpolated AP plus the raw (recall, precision) samples."""
    n_gt = sum(len(b) for b in gts.values())
    if n_gt == 0:
        raise UndefinedMetricError("average precision undefined: no ground-truth persons")
    flat = [
        (det, scene_id)
        for scene_id in gts
        for det in _person_dets(detections.get(scene_id, []))
    ]
    flat.sort(key=lambda t: (-t[0].score, t[1], t[0].box.x, t[0].box.y))
    taken: dict[str, list[bool]] = {sid: [False] * len(b) for sid, b in gts.items()}
    tp = np.zeros(len(flat))
    for i, (det, scene_id) in enumerate(flat):
        boxes = gts[scene_id]
        best_j, best_iou = -1, iou_threshold
        for j, gt in enumerate(boxes):
            if taken[scene_id][j]:
                continue
            v = iou(det.box, gt)
            if v >= best_iou and (best_j < 0 or v > best_iou):
                best_j, best_iou = j, v
        if best_j >= 0:
            taken[scene_id][best_j] = True
            tp[i] = 1.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recalls = tp_cum / n_gt
    precisions = tp_cum / np.maximum(tp_cum + fp_cum, 1e-12)
    curve = list(zip(recalls.tolist(), precisions.tolist()))
    # precision envelope, integrated over every recall change
    env = precisions.copy()
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, env):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap), curve


def attack_success_rate(
    clean: dict[str, list[Detection]],
    attacked: dict[str, list[Detection]],
    gts: dict[str, list[BoundingBox]],
    score_threshold: float,
    iou_threshold: float = 0.5,
) -> tuple[float, int, set[Label]]:
    """Fraction of clean-run true positives hidden by the attack.

    Returns (asr, N, attacked-run matched labels).  Raises when the clean
    run matched nothing (N = 0), which leaves the rate undefined.
    """
    clean_matched = greedy_match(clean, gts, iou_threshold, score_threshold)
    n = len(clean_matched)
    if n == 0:
        raise UndefinedMetricError(
            f"attack success rate undefined: clean run matched no persons "
            f"at score >= {score_threshold}"
        )
    attacked_matched = greedy_match(attacked, gts, iou_threshold, score_threshold)
    survivors = len(clean_matched & attacked_matched)
    return 1.0 - survivors / n, n, attacked_matched


def format_label(label: Label) -> str:
    return f"{label[0]}#{label[1]}"
