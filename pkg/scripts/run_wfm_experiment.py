#!/usr/bin/env python3
"""Run the weighted-vs-standard flow matching comparison and print scores.

    python3 scripts/run_wfm_experiment.py [--seed 7] [--train-pairs 200]
        [--eval-pairs 50] [--steps 2000]
"""

import argparse

from clfm.experiment import ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train-pairs", type=int, default=200)
    parser.add_argument("--eval-pairs", type=int, default=50)
    parser.add_argument("--steps", type=int, default=2000)
    args = parser.parse_args()

    cfg = ExperimentConfig(
        seed=args.seed,
        train_pairs=args.train_pairs,
        eval_pairs=args.eval_pairs,
        steps=args.steps,
    )
    result = run_experiment(cfg)
    print(f"standard loss  mean edge-diff vs input: {result.fm_edge_diff:.6f}")
    print(f"weighted loss  mean edge-diff vs input: {result.wfm_edge_diff:.6f}")
    print(f"weighted wins: {result.weighted_wins}")
    print(f"runtime: {result.runtime_seconds:.1f}s")
    return 0 if result.weighted_wins else 1


if __name__ == "__main__":
    raise SystemExit(main())
