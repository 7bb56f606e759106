#!/usr/bin/env python3
"""Critic overestimation study: predicted Q vs true return vs memory value.

Trains with periodic measurements and prints the three batch means per
cadence point. A bootstrapped critic typically sits above the true value;
the episodic memory values, coming from older policies, sit below the
critic's estimate.

Usage:
    python scripts/overestimation_study.py [--env pendulum] [--steps N]
        [--cadence 5000] [--seed 0] [--out runs/overestimation_study]
"""

import argparse

from emac.config import RunConfig
from emac.harness import run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", default="pendulum", choices=("pendulum", "reacher"))
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--cadence", type=int, default=5000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/overestimation_study")
    args = parser.parse_args()

    config = RunConfig(
        env=args.env,
        total_steps=args.steps,
        seeds=(args.seed,),
        diag_every=args.cadence,
    )
    art = run(config, args.out, verbose=True)
    print(f"\n{'step':>8} {'q_pred':>10} {'q_true':>10} {'q_mem':>10}")
    for s in art.seed_results[0].diag:
        print(f"{s.step:>8} {s.q_pred_mean:>10.2f} {s.q_true_mean:>10.2f} "
              f"{s.q_mem_mean:>10.2f}")
    print(f"\nartifacts under {args.out}/")


if __name__ == "__main__":
    main()
