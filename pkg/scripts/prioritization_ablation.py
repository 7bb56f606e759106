#!/usr/bin/env python3
"""Prioritization ablation: episodic-return prioritized sampling vs uniform.

beta=0.5 is the prioritized configuration; beta=0 recovers uniform replay
with everything else identical.

Usage:
    python scripts/prioritization_ablation.py [--env pendulum] [--steps N]
        [--seeds 0,1,2] [--out runs/prioritization_ablation]
"""

import argparse

from emac.config import RunConfig
from emac.harness import sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", default="pendulum", choices=("pendulum", "reacher"))
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--out", default="runs/prioritization_ablation")
    args = parser.parse_args()

    config = RunConfig(
        env=args.env,
        total_steps=args.steps,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
    )
    arts = sweep(config, "beta", [0.0, 0.5], args.out, verbose=True)
    labels = {0.0: "uniform (beta=0)", 0.5: "prioritized (beta=0.5)"}
    print()
    for art in arts:
        label = labels.get(art.config.beta, f"beta={art.config.beta}")
        print(f"{label:>24}: final10 over seeds = "
              f"{art.summary['final10_mean_over_seeds']:.1f}")
    print(f"\nartifacts under {args.out}/")


if __name__ == "__main__":
    main()
