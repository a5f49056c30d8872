"""Command-line front end.

Subcommands: attack, apply, evaluate, sweep, baseline, synth, augment.
Options layer as CLI > --config file > built-in defaults; the external
detector command can also come from the SSP_DETECTOR_CMD environment
variable.  Exit codes: 0 ok, 2 usage, 3 data, 4 detector transport,
5 infeasible configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import __version__
from .baselines import BaselineSpec, baseline_genomes
from .compositor import place_on_scene
from .dataset import (
    DEFAULT_MIN_PERSON_HEIGHT,
    SynthParams,
    convert_yolo_labels,
    emit_augmented,
    generate_synthetic,
    load_split,
    write_dataset,
)
from .detector import DetectorConfig
from .errors import EXIT_USAGE, SspatchError
from .evaluation import evaluate_attack
from .grid import GenomeMeta, load_genome, save_genome
from .image import quantize
from .objective import BatchEvaluator, LossConfig, default_jobs
from .swarm import DEFAULT_POPULATION, PatchTemplate, optimize

ENV_DETECTOR_CMD = "SSP_DETECTOR_CMD"
SWEEP_FIELDS = ["method", "m", "l", "ap", "asr"]
SWEEP_METHODS = ("hcb", "r", "mr")


# --- shared argument groups -----------------------------------------------------


def _csv_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _csv_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _pair_floats(text: str) -> tuple[float, float]:
    vals = _csv_floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI got {text!r}")
    return vals[0], vals[1]


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="path to a manifest.jsonl")
    p.add_argument("--synth", type=int, metavar="N", help="generate N synthetic scenes instead")
    p.add_argument("--synth-seed", type=int, default=1)
    p.add_argument("--body-intensity", type=_pair_floats, metavar="LO,HI",
                   help="synthetic body intensity range override")
    p.add_argument("--min-height", type=int, default=DEFAULT_MIN_PERSON_HEIGHT,
                   help="person boxes must be taller than this to count")


def _add_detector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detector", choices=["toy", "external"], default="toy")
    p.add_argument("--detector-cmd", default=os.environ.get(ENV_DETECTOR_CMD),
                   help=f"external child command (default ${ENV_DETECTOR_CMD})")
    p.add_argument("--score-threshold", type=float, default=0.25)
    p.add_argument("--iou-threshold", type=float, default=0.5)


def _add_attack_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, default=4, help="number of patches")
    p.add_argument("--l", type=float, default=0.12, help="patch side as fraction of person height")
    p.add_argument("--lambda", dest="lam", type=float, default=3.0, help="area growth penalty weight")
    p.add_argument("--pixel-value", type=float, default=0.2)
    p.add_argument("--pop", type=int, default=DEFAULT_POPULATION)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--position-steps", type=int, default=None,
                   help="snap positions to a finite grid (oracle comparisons)")


def _load_scenes(args: argparse.Namespace):
    if bool(args.dataset) == bool(args.synth):
        raise SspatchUsage("exactly one of --dataset or --synth is required")
    if args.dataset:
        scenes, stats = load_split(args.dataset, args.min_height)
        print(
            f"loaded {stats.scenes_kept} scenes ({stats.scenes_dropped} dropped); "
            f"{stats.persons_kept} persons kept, {stats.persons_dropped} under height filter",
            file=sys.stderr,
        )
        if not scenes:
            raise SspatchUsage("dataset has no eligible scenes")
        return scenes
    params = SynthParams()
    if args.body_intensity:
        params = SynthParams(body_intensity=args.body_intensity)
    return generate_synthetic(args.synth, args.synth_seed, params)


def _detector_config(args: argparse.Namespace) -> DetectorConfig:
    cfg = DetectorConfig(
        kind=args.detector,
        score_threshold=args.score_threshold,
        iou_threshold=args.iou_threshold,
        command=args.detector_cmd,
    )
    if cfg.kind == "external" and not cfg.command:
        raise SspatchUsage(
            f"external detector needs --detector-cmd or ${ENV_DETECTOR_CMD}"
        )
    return cfg


class SspatchUsage(Exception):
    """CLI-level usage problem (maps to exit code 2)."""


# --- subcommands -----------------------------------------------------------------


def cmd_attack(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    det_cfg = _detector_config(args)
    template = PatchTemplate(m=args.m, l=args.l, pixel_value=args.pixel_value)
    loss_cfg = LossConfig(lam=args.lam, iou_threshold=args.iou_threshold)
    with BatchEvaluator(scenes, det_cfg, jobs=args.jobs) as ev:
        result = optimize(
            scenes, template, args.epochs, loss_cfg, det_cfg,
            seed=args.seed, pop=args.pop, position_steps=args.position_steps,
            evaluator=ev,
        )
        detector_id = ev.detector_name
    meta = GenomeMeta(seed=args.seed, lam=args.lam, fitness=result.loss, detector_id=detector_id)
    save_genome(args.out, result.genome, meta)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "best_loss", "best_n", "mean_loss", "evals"])
            for pt in result.trace:
                writer.writerow([pt.step, pt.best_loss, pt.best_n, pt.mean_loss, pt.evals])
    detector = det_cfg.create()
    try:
        report = evaluate_attack(scenes, result.genome, detector, det_cfg)
    finally:
        detector.close()
    print(f"loss={result.loss!r} n={result.genome.n} m={result.genome.m} evals={result.evals}")
    print(f"train_ap={report.ap:.4f} train_asr={report.asr:.4f} clean_ap={report.clean_ap:.4f}")
    return 0


def cmd_apply(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    genome, _ = load_genome(args.genome)
    os.makedirs(os.path.join(args.out_dir, "images"), exist_ok=True)
    manifest = os.path.join(args.out_dir, "manifest.jsonl")
    from .image import write_gray  # local import keeps the top tidy

    with open(manifest, "w", encoding="utf-8") as fh:
        for scene in scenes:
            attacked = quantize(place_on_scene(scene.image, scene.persons, genome))
            rel = f"images/{scene.id}.{args.format}"
            write_gray(os.path.join(args.out_dir, rel), attacked)
            rec = {
                "id": scene.id,
                "image": rel,
                "persons": [b.to_dict() for b in scene.all_persons],
            }
            fh.write(json.dumps(rec) + "\n")
    print(f"wrote {len(scenes)} attacked scenes to {manifest}")
    return 0


def _print_report(report) -> None:
    if report.asr is None:
        print(f"ap={report.ap:.6f} (clean run)")
    else:
        print(
            f"ap={report.ap:.6f} asr={report.asr:.6f} "
            f"n_baseline_tp={report.n_baseline_tp} clean_ap={report.clean_ap:.6f}"
        )


def _save_report(args: argparse.Namespace, report) -> None:
    if getattr(args, "report", None):
        report.save(args.report)
    if getattr(args, "pr_csv", None):
        report.save_pr_csv(args.pr_csv)


def cmd_evaluate(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    det_cfg = _detector_config(args)
    genome = None
    if args.genome:
        genome, _ = load_genome(args.genome)
    detector = det_cfg.create()
    try:
        report = evaluate_attack(scenes, genome, detector, det_cfg)
    finally:
        detector.close()
    _save_report(args, report)
    _print_report(report)
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    det_cfg = _detector_config(args)
    spec = BaselineSpec(kind=args.kind, m=args.m, l=args.l, pixel_value=args.pixel_value)
    genomes = baseline_genomes(spec, scenes, args.seed)
    detector = det_cfg.create()
    try:
        report = evaluate_attack(scenes, genomes, detector, det_cfg)
    finally:
        detector.close()
    _save_report(args, report)
    _print_report(report)
    return 0


def _sweep_cell(args, scenes, det_cfg, method: str, m: int, l: float):
    """Mean (ap, asr) across seeds for one sweep cell."""
    aps, asrs = [], []
    detector = det_cfg.create()
    try:
        for seed in args.seeds:
            if method == "hcb":
                template = PatchTemplate(m=m, l=l, pixel_value=args.pixel_value)
                loss_cfg = LossConfig(lam=args.lam, iou_threshold=args.iou_threshold)
                result = optimize(
                    scenes, template, args.epochs, loss_cfg, det_cfg,
                    seed=seed, pop=args.pop, jobs=args.jobs,
                )
                genomes = result.genome
            else:
                kind = "random" if method == "r" else "manual_random"
                spec = BaselineSpec(kind=kind, m=m, l=l, pixel_value=args.pixel_value)
                genomes = baseline_genomes(spec, scenes, seed)
            report = evaluate_attack(scenes, genomes, detector, det_cfg)
            aps.append(report.ap)
            asrs.append(report.asr)
    finally:
        detector.close()
    return sum(aps) / len(aps), sum(asrs) / len(asrs)


def cmd_sweep(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    det_cfg = _detector_config(args)
    done: set[tuple[str, int, float]] = set()
    mode = "w"
    if args.resume and os.path.exists(args.out):
        with open(args.out, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                done.add((row["method"], int(row["m"]), float(row["l"])))
        mode = "a"
    with open(args.out, mode, encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(SWEEP_FIELDS)
            fh.flush()
        for m in args.m_list:
            for l in args.l_list:
                for method in SWEEP_METHODS:
                    if (method, m, l) in done:
                        continue
                    ap, asr = _sweep_cell(args, scenes, det_cfg, method, m, l)
                    writer.writerow([method, m, l, ap, asr])
                    fh.flush()
                    print(f"{method} m={m} l={l}: ap={ap:.4f} asr={asr:.4f}", file=sys.stderr)
    print(f"sweep written to {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    params = SynthParams()
    if args.body_intensity:
        params = SynthParams(body_intensity=args.body_intensity)
    scenes = generate_synthetic(args.count, args.seed, params)
    manifest = write_dataset(args.out_dir, scenes, fmt=args.format)
    persons = sum(len(s.persons) for s in scenes)
    print(f"wrote {len(scenes)} scenes ({persons} persons) to {manifest}")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    scenes = _load_scenes(args)
    genome, _ = load_genome(args.genome)
    manifest = emit_augmented(scenes, genome, args.out_dir, fmt=args.format)
    print(f"augmented dataset written to {manifest}")
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    count = convert_yolo_labels(args.images, args.labels, args.out, args.person_class)
    print(f"converted {count} scenes to {args.out}")
    return 0


# --- parser / dispatch ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspatch",
        description="Size/shape/position patch attacks against infrared person detectors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = dict(jobs=lambda p: p.add_argument(
        "--jobs", type=int, default=default_jobs(),
        help="parallel evaluation workers (results independent of this)"))

    p = sub.add_parser("attack", help="optimize a patch genome with the particle swarm")
    _add_dataset_args(p)
    _add_detector_args(p)
    _add_attack_args(p)
    common["jobs"](p)
    p.add_argument("--out", required=True, help="genome JSON output path")
    p.add_argument("--trace", help="per-step trace CSV output path")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("apply", help="render a stored genome onto a dataset")
    _add_dataset_args(p)
    p.add_argument("--genome", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=["png", "pgm"], default="png")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("evaluate", help="AP/ASR of a genome (or a clean run) on a dataset")
    _add_dataset_args(p)
    _add_detector_args(p)
    p.add_argument("--genome")
    p.add_argument("--report", help="write the full report JSON here")
    p.add_argument("--pr-csv", help="write the precision/recall curve CSV here")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="evaluate a random-placement arm")
    _add_dataset_args(p)
    _add_detector_args(p)
    p.add_argument("--kind", choices=["random", "manual_random"], required=True)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--l", type=float, default=0.12)
    p.add_argument("--pixel-value", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.add_argument("--pr-csv")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="attack + baselines over an m x l grid, CSV out")
    _add_dataset_args(p)
    _add_detector_args(p)
    _add_attack_args(p)
    common["jobs"](p)
    p.add_argument("--m-list", type=_csv_ints, default=[1, 2, 4])
    p.add_argument("--l-list", type=_csv_floats, default=[0.08, 0.12, 0.16])
    p.add_argument("--seeds", type=_csv_ints, default=[0])
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--resume", action="store_true", help="skip cells already in the CSV")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=["png", "pgm"], default="png")
    p.add_argument("--body-intensity", type=_pair_floats, metavar="LO,HI")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="emit original + attacked copies for retraining")
    _add_dataset_args(p)
    p.add_argument("--genome", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=["png", "pgm"], default="png")
    p.add_argument("--config", help="JSON file with option defaults")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("convert", help="convert YOLO-layout labels to a manifest")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--person-class", type=int, default=0)
    p.set_defaults(func=cmd_convert)

    return parser


def _layer_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse args with --config JSON values layered under CLI flags."""
    args = parser.parse_args(argv)
    config_path = getattr(args, "config", None)
    if not config_path:
        return args
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SspatchUsage(f"bad --config file {config_path}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise SspatchUsage(f"--config {config_path} must hold a JSON object")
    known = set(vars(args)) - {"func", "command", "config"}
    unknown = [k for k in overrides if k.replace("-", "_") not in known]
    if unknown:
        raise SspatchUsage(f"--config keys not recognized: {', '.join(sorted(unknown))}")
    # install the config values as the subcommand's defaults and re-parse:
    # explicit CLI flags keep priority (a namespace pre-seed would not survive
    # argparse's subparser round trip)
    sub_action = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    sub_action.choices[args.command].set_defaults(
        **{k.replace("-", "_"): v for k, v in overrides.items()}
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _layer_config(parser, argv)
        return args.func(args)
    except SspatchUsage as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SspatchError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
