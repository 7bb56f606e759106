"""Command-line entry points: train, sweep, diag.

Configuration comes from an optional JSON file; any flag given on the command
line overrides the file value. The fully resolved config is echoed into the
output directory for provenance.
"""

import argparse
import sys

from .agent import TrainingDiverged
from .config import RunConfig
from .harness import run, sweep


def _parse_seeds(text):
    return tuple(int(s) for s in text.split(","))


def _add_override_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--env", choices=("pendulum", "reacher"))
    parser.add_argument("--alpha", type=float, help="episodic blend coefficient")
    parser.add_argument("--beta", type=float, help="prioritization exponent")
    parser.add_argument("--u", type=int, help="projected key dimension")
    parser.add_argument("--k", type=int, help="neighbors per lookup")
    parser.add_argument("--seed", type=_parse_seeds, metavar="N[,N...]",
                        help="seed or comma-separated seed list")
    parser.add_argument("--steps", type=int, help="total environment steps")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")


def _build_config(args, extra=None):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    if args.env is not None:
        overrides["env"] = args.env
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.beta is not None:
        overrides["beta"] = args.beta
    if args.u is not None:
        overrides["u"] = args.u
    if args.k is not None:
        overrides["k"] = args.k
    if args.seed is not None:
        overrides["seeds"] = args.seed
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    if extra:
        overrides.update(extra)
    return cfg.replace(**overrides) if overrides else cfg


_INT_AXES = {"u", "k", "batch_size", "warmup_steps", "total_steps"}


def _parse_sweep_values(axis, text):
    raw = [v.strip() for v in text.split(",") if v.strip()]
    cast = int if axis in _INT_AXES else float
    return [cast(v) for v in raw]


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="emac",
        description="Episodic-memory actor-critic training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training with one config")
    _add_override_flags(p_train)

    p_sweep = sub.add_parser("sweep", help="independent runs along one config axis")
    _add_override_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="config field to vary")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values for the axis")

    p_diag = sub.add_parser(
        "diag", help="training with overestimation measurements enabled")
    _add_override_flags(p_diag)
    p_diag.add_argument("--cadence", type=int, default=5000,
                        help="steps between measurements (default 5000)")

    args = parser.parse_args(argv)
    verbose = not args.quiet
    try:
        if args.command == "train":
            out = args.out or "runs/train"
            run(_build_config(args), out, verbose=verbose)
        elif args.command == "sweep":
            out = args.out or "runs/sweep"
            cfg = _build_config(args)
            values = _parse_sweep_values(args.axis, args.values)
            sweep(cfg, args.axis, values, out, verbose=verbose)
        elif args.command == "diag":
            out = args.out or "runs/diag"
            cfg = _build_config(args, extra={"diag_every": args.cadence})
            run(cfg, out, verbose=verbose)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
