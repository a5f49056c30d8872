#!/usr/bin/env python3
"""Small m x l sweep (optimized arm plus both baselines) to a CSV.

Thin wrapper over the `sspatch sweep` subcommand with desk-scale defaults;
pass --resume to continue an interrupted sweep in place.
"""

import argparse
import sys

from sspatch.cli import main as sspatch_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=60)
    ap.add_argument("--m-list", default="1,2,4")
    ap.add_argument("--l-list", default="0.08,0.12,0.16")
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--pop", type=int, default=40)
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--resume", action="store_true")
    args = ap.parse_args()

    argv = [
        "sweep", "--synth", str(args.scenes), "--synth-seed", "1",
        "--m-list", args.m_list, "--l-list", args.l_list, "--seeds", args.seeds,
        "--pop", str(args.pop), "--epochs", str(args.epochs),
        "--jobs", "1", "--out", args.out,
    ]
    if args.resume:
        argv.append("--resume")
    return sspatch_main(argv)


if __name__ == "__main__":
    sys.exit(main())
