"""Composite test of an estimated propensity ratio: linear vs kernel logistic."""
from __future__ import annotations

import argparse
import os

from drpt.engine import TestConfig
from drpt.io import parse_grid
from drpt.sim.harness import ExperimentConfig, run_experiment


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/causal")
    p.add_argument("--gamma", default="0,0.25,0.5,1,2")
    p.add_argument("--estimators", default="ll,klr")
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--test-size", type=int, default=200)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--H", type=int, default=99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args(argv)
    for est in a.estimators.split(","):
        cfg = ExperimentConfig(scenario="causal", grid=tuple(parse_grid(a.gamma)), estimator=est,
                               train_size=a.train_size, test_size=a.test_size, reps=a.reps,
                               test=TestConfig(copies=a.H), seed=a.seed, workers=a.workers,
                               out_dir=os.path.join(a.out, est))
        for pt in run_experiment(cfg):
            print(f"{est} gamma={pt.param:g} rejection={pt.rate:.3f} se={pt.se:.3f}")


if __name__ == "__main__":
    main()
