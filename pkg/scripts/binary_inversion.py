"""Confidence set for a binary odds multiplier by test inversion, next to the Wald interval."""
from __future__ import annotations

import argparse

import numpy as np

from drpt.engine import TestConfig, invert_confidence_set, wald_odds_interval
from drpt.io import parse_grid
from drpt.ratio import TableRatio
from drpt.sim.scenarios import gen_binary


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=2000, help="first-sample size")
    p.add_argument("--m", type=int, default=400, help="second-sample size")
    p.add_argument("--f1", type=float, default=0.1)
    p.add_argument("--r", type=float, default=5.0, help="true odds multiplier")
    p.add_argument("--grid", default="0.1:7:0.1")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--H", type=int, default=199)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    g1 = a.r * a.f1 / (a.r * a.f1 + 1 - a.f1)
    sample, _ = gen_binary(a.f1, g1, a.r, a.n, a.m, np.random.default_rng(a.seed))
    grid = parse_grid(a.grid)
    cands = [TableRatio.from_sequence([1.0, c]) for c in grid]
    res = invert_confidence_set(sample, cands, a.alpha, TestConfig(copies=a.H, seed=a.seed, statistic="discrete"))
    kept = [c for c, ok in zip(grid, res.accepted) if ok]
    y, x = sample.second, sample.first
    lo, hi = wald_odds_interval(int(y.sum()), a.m, int(x.sum()), a.n, a.alpha)
    print(f"accepted r: {min(kept):g}..{max(kept):g} ({len(kept)} of {len(grid)} grid points)" if kept else "none accepted")
    print(f"Wald interval: [{lo:.3f}, {hi:.3f}]")


if __name__ == "__main__":
    main()
