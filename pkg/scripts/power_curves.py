"""Power curves for the bivariate scenarios and the binary scenario.

Writes one ``power.csv``/``power.svg``/``manifest.json`` triple per curve
under ``--out``.  Defaults are desk scale; pass ``--reps 500`` (bivariate)
and ``--binary-reps 5000`` for the full-size runs.
"""
from __future__ import annotations

import argparse
import os

from drpt.engine import TestConfig
from drpt.io import parse_grid
from drpt.sim.harness import ExperimentConfig, run_experiment


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/power")
    p.add_argument("--eta", default="0:0.8:0.1", help="bivariate eta grid")
    p.add_argument("--binary-eta", default="0:0.9:0.1")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--binary-reps", type=int, default=500)
    p.add_argument("--binary-m", default="100,200,500,2000")
    p.add_argument("--H", type=int, default=99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args(argv)
    test = TestConfig(copies=a.H)
    for sc in ("e1", "e2", "e1prime", "e2prime"):
        cfg = ExperimentConfig(scenario=sc, grid=tuple(parse_grid(a.eta)), n=a.n, m=a.n, reps=a.reps, test=test,
                               seed=a.seed, workers=a.workers, out_dir=os.path.join(a.out, sc))
        for pt in run_experiment(cfg):
            print(f"{sc} eta={pt.param:g} power={pt.rate:.3f} se={pt.se:.3f}")
    for m in (int(v) for v in a.binary_m.split(",")):
        cfg = ExperimentConfig(scenario="e3", grid=tuple(parse_grid(a.binary_eta)), n=100, m=m, reps=a.binary_reps,
                               test=test, seed=a.seed, workers=a.workers, out_dir=os.path.join(a.out, f"e3_m{m}"))
        for pt in run_experiment(cfg):
            print(f"e3 m={m} eta={pt.param:g} power={pt.rate:.3f} se={pt.se:.3f}")


if __name__ == "__main__":
    main()
