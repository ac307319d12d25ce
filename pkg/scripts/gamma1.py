"""Share of ones among permuted second-sample points against the closed form."""
from __future__ import annotations

import argparse

from drpt.engine import TestConfig
from drpt.io import parse_grid
from drpt.sim.harness import ExperimentConfig, run_experiment


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/gamma1")
    p.add_argument("--g1", default="0.5:0.9:0.1", help="second-sample share grid")
    p.add_argument("--f1", type=float, default=0.5)
    p.add_argument("--r", type=float, default=3.0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--H", type=int, default=99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args(argv)
    cfg = ExperimentConfig(scenario="gamma1", grid=tuple(parse_grid(a.g1)), f1=a.f1, r1=a.r, n=a.n, m=a.m,
                           reps=a.reps, test=TestConfig(copies=a.H), seed=a.seed, workers=a.workers, out_dir=a.out)
    for pt in run_experiment(cfg):
        print(f"g1={pt.param:.2f} share={pt.rate:.4f} se={pt.se:.4f} closed_form={pt.oracle:.4f}")


if __name__ == "__main__":
    main()
