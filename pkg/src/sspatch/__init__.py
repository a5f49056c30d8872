"""sspatch: black-box size/shape/position patch attacks on IR person detectors."""

from .baselines import BaselineSpec, baseline_genomes, sample_baseline
from .compositor import place_on_scene, place_patches
from .dataset import (
    AnnotatedScene,
    SynthParams,
    emit_augmented,
    generate_synthetic,
    load_split,
    write_dataset,
)
from .detector import (
    Detection,
    DetectorConfig,
    ToyDetectorParams,
    object_score,
    toy_detect,
)
from .evaluation import evaluate_attack
from .geometry import BoundingBox, iou
from .grid import Genome, ShapeMatrix, area_measure, decode, encode, load_genome, save_genome
from .image import quantize, read_gray, write_gray
from .metrics import EvalReport, attack_success_rate, average_precision
from .objective import BatchEvaluator, LossConfig, loss, object_probability
from .swarm import OptimizeResult, PatchTemplate, brute_force_oracle, optimize

__version__ = "0.1.0"

__all__ = [
    "AnnotatedScene",
    "BaselineSpec",
    "BatchEvaluator",
    "BoundingBox",
    "Detection",
    "DetectorConfig",
    "EvalReport",
    "Genome",
    "LossConfig",
    "OptimizeResult",
    "PatchTemplate",
    "ShapeMatrix",
    "SynthParams",
    "ToyDetectorParams",
    "area_measure",
    "attack_success_rate",
    "average_precision",
    "baseline_genomes",
    "brute_force_oracle",
    "decode",
    "emit_augmented",
    "encode",
    "evaluate_attack",
    "generate_synthetic",
    "iou",
    "load_genome",
    "load_split",
    "loss",
    "object_probability",
    "object_score",
    "optimize",
    "place_on_scene",
    "place_patches",
    "quantize",
    "read_gray",
    "sample_baseline",
    "save_genome",
    "toy_detect",
    "write_dataset",
    "write_gray",
]
