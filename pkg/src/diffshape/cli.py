"""Command-line entry points.

    diffshape run --config experiment.cfg [--out DIR] [--snapshot-every K]
    diffshape noise-study --config experiment.cfg --runs N [--out DIR]
    diffshape gradient-check --config experiment.cfg [--fields N]
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffshape",
        description="Interface identification for piecewise-constant "
                    "diffusivities via adjoint shape gradients")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single optimization run")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--snapshot-every", type=int, default=0, metavar="K",
                     help="write a VTK mesh snapshot every K iterations")

    study = sub.add_parser("noise-study", help="repeated runs under noise")
    study.add_argument("--config", required=True)
    study.add_argument("--runs", type=int, required=True)
    study.add_argument("--out", default=None)

    check = sub.add_parser("gradient-check",
                           help="finite-difference check of the shape gradient")
    check.add_argument("--config", required=True)
    check.add_argument("--fields", type=int, default=5)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.command == "run":
        return experiments.run_experiment(config, out_dir=args.out,
                                          snapshot_every=args.snapshot_every)
    if args.command == "noise-study":
        try:
            summary = experiments.run_noise_study(config, args.runs, out_dir=args.out)
        except Exception:
            logging.getLogger(__name__).exception("noise study failed")
            return 1
        print(f"spread ratio: {summary['ratio']:.6f}")
        return 0
    if args.command == "gradient-check":
        results = experiments.gradient_check(config, n_fields=args.fields)
        print("field  predicted      fd(min eps)    rel err")
        worst = 0.0
        for r in results:
            worst = max(worst, r["errors"][-1])
            print(f"{r['field']:>5}  {r['predicted']: .6e}  "
                  f"{r['quotients'][-1]: .6e}  {r['errors'][-1]:.3%}")
        return 0 if worst <= 0.05 else 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
