#!/usr/bin/env python3
"""Projected-key-dimension ablation: sweep u over {4, 16, 32}.

Runs the full agent on the chosen environment once per (u, seed) and writes
a combined comparison table. Larger keys preserve distances better but slow
the lookup; the default everywhere else is the cheapest option u=4.

Usage:
    python scripts/projection_ablation.py [--env pendulum] [--steps N]
        [--seeds 0,1,2] [--out runs/projection_ablation]
"""

import argparse

from emac.config import RunConfig
from emac.harness import sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", default="pendulum", choices=("pendulum", "reacher"))
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--out", default="runs/projection_ablation")
    parser.add_argument("--values", default="4,16,32")
    args = parser.parse_args()

    config = RunConfig(
        env=args.env,
        total_steps=args.steps,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
    )
    values = [int(v) for v in args.values.split(",")]
    arts = sweep(config, "u", values, args.out, verbose=True)
    print(f"\n{'u':>4}  {'final10 mean over seeds':>24}")
    for art in arts:
        print(f"{art.config.u:>4}  {art.summary['final10_mean_over_seeds']:>24.1f}")
    print(f"\nartifacts under {args.out}/")


if __name__ == "__main__":
    main()
