"""Replicate runner and result emitters (CSV, SVG, manifest)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
import scipy

from .. import __version__, rng
from ..discrete import gamma1
from ..engine import TestConfig, composite_drpt, drpt
from ..estimation import KernelLogistic, LinearLogistic
from ..permutations import ChainConfig, run_star_scheme
from .baseline import rejection_sample_baseline
from .scenarios import (CausalDesign, causal_sample, gen_binary, gen_binary_E3, gen_bivariate_E1,
                        gen_gaussian_misspec, misspec_tv_bound)

SCENARIOS = ("e1", "e1prime", "e2", "e2prime", "e3", "misspec", "causal", "gamma1")


@dataclass(frozen=True)
class ExperimentConfig:
    """One power curve.

    ``grid`` holds eta (e1, e1prime, e2, e2prime, e3), the plugged shift nu
    (misspec), gamma (causal) or the second-sample share g1 (gamma1).
    For the causal scenario ``train_size`` and ``test_size`` count units
    before splitting by treatment; ``n`` and ``m`` are unused there.
    """

    scenario: str
    grid: tuple
    n: int = 150
    m: int = 150
    reps: int = 200
    alpha: float = 0.05
    test: TestConfig = TestConfig()
    seed: int = 0
    out_dir: Optional[str] = None
    workers: int = 1
    record_timing: bool = False
    mu: float = 1.0
    estimator: str = "ll"
    train_size: int = 1000
    test_size: int = 200
    design: CausalDesign = CausalDesign()
    f1: float = 0.5
    r1: float = 3.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if not self.grid:
            raise ValueError("the parameter grid is empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.estimator not in ("ll", "klr"):
            raise ValueError("estimator must be 'll' or 'klr'")

    def echo(self) -> dict:
        d = asdict(self)
        d["test"] = self.test.echo()
        d.pop("out_dir")
        d.pop("workers")
        return d


@dataclass(frozen=True)
class PowerPoint:
    """Rejection rate at one grid value, with its binomial standard error.

    For the ``gamma1`` scenario ``rate`` is the mean share of ones among
    permuted second-sample points and ``se`` its Monte Carlo standard error.
    """

    param: float
    rate: float
    se: float
    reps: int
    runtime_ms: Optional[float] = None
    oracle: Optional[float] = field(default=None, compare=False)


def replicate(config: ExperimentConfig, grid_index: int, rep: int) -> float:
    """Outcome of one replicate: 1.0/0.0 rejection, or a share for gamma1."""
    param = config.grid[grid_index]
    gen = rng.generator(config.seed, config.scenario, grid_index, rep)
    test = replace(config.test, seed=rng.sub_seed(config.seed, "test", grid_index, rep), alpha=config.alpha,
                   workers=1)
    sc = config.scenario
    if sc in ("e1", "e1prime", "e2", "e2prime"):
        sample, ratio = gen_bivariate_E1(param, config.n, config.m, gen, prime=sc.endswith("prime"))
        if sc.startswith("e1"):
            p = drpt(sample, ratio, test).p_value
        else:
            p = rejection_sample_baseline(sample, ratio, test.seed, test.copies, test.statistic, test.kernel).p_value
    elif sc == "e3":
        sample, ratio = gen_binary_E3(param, config.n, config.m, gen)
        p = drpt(sample, ratio, test).p_value
    elif sc == "misspec":
        sample, ratio = gen_gaussian_misspec(config.mu, param, config.n, config.m, gen)
        p = drpt(sample, ratio, test).p_value
    elif sc == "causal":
        train = causal_sample(param, config.train_size, gen, config.design)
        held = causal_sample(param, config.test_size, gen, config.design)
        est = LinearLogistic() if config.estimator == "ll" else KernelLogistic(seed=test.seed)
        p = composite_drpt(train, held, est, test).result.p_value
    else:
        sample, ratio = gen_binary(config.f1, param, config.r1, config.n, config.m, gen)
        chain = ChainConfig(test.sweeps, test.variant, test.copies, test.seed)
        _, copies = run_star_scheme(sample, ratio.values(sample), chain)
        return float(np.mean(sample.points[copies[:, sample.n:]]))
    return float(p <= config.alpha)


def oracle_value(config: ExperimentConfig, param: float) -> Optional[float]:
    if config.scenario == "misspec":
        return misspec_tv_bound(config.m, config.mu, param)
    if config.scenario == "gamma1":
        return gamma1(config.f1, param, config.r1, config.n / config.m)
    return None


def run_experiment(config: ExperimentConfig) -> list:
    """Run all replicates; write ``power.csv``, ``power.svg`` and
    ``manifest.json`` when ``out_dir`` is set.  Output is identical for any
    ``workers`` count."""
    tasks = [(gi, rep) for gi in range(len(config.grid)) for rep in range(config.reps)]

    def job(t):
        start = time.perf_counter()
        v = replicate(config, *t)
        return v, time.perf_counter() - start

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(job, tasks))
    else:
        results = [job(t) for t in tasks]
    points = []
    for gi, param in enumerate(config.grid):
        chunk = results[gi * config.reps:(gi + 1) * config.reps]
        vals = np.array([v for v, _ in chunk])
        rate = float(vals.mean())
        if config.scenario == "gamma1":
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        else:
            se = math.sqrt(rate * (1 - rate) / config.reps)
        runtime = 1000 * float(np.mean([t for _, t in chunk])) if config.record_timing else None
        points.append(PowerPoint(param, rate, se, config.reps, runtime, oracle_value(config, param)))
    if config.out_dir:
        write_outputs(config, points)
    return points


def power_csv(scenario: str, points: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "param", "rate", "se", "reps", "runtime_ms"])
    for p in points:
        w.writerow([scenario, repr(p.param), repr(p.rate), repr(p.se), p.reps,
                    "" if p.runtime_ms is None else f"{p.runtime_ms:.3f}"])
    return buf.getvalue()


def power_svg(points: list, title: str, alpha: Optional[float] = None, width: int = 480, height: int = 320) -> str:
    """Line chart of rate against parameter with +-1 SE bars."""
    left, right, top, bottom = 50, 15, 30, 40
    xs = [p.param for p in points]
    lo, hi = min(xs), max(xs)
    span = hi - lo or 1.0
    px = lambda x: left + (x - lo) / span * (width - left - right)  # noqa: E731
    py = lambda y: top + (1 - y) * (height - top - bottom)  # noqa: E731
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
           f'<rect x="{left}" y="{top}" width="{width - left - right}" height="{height - top - bottom}" fill="none" stroke="#888"/>']
    for y in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{left - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:g}</text>')
    for x in xs:
        out.append(f'<text x="{px(x):.1f}" y="{height - bottom + 15}" text-anchor="middle">{x:g}</text>')
    if alpha is not None:
        out.append(f'<line x1="{left}" x2="{width - right}" y1="{py(alpha):.1f}" y2="{py(alpha):.1f}" stroke="#c33" stroke-dasharray="4 3"/>')
    path = " ".join(f"{px(p.param):.1f},{py(p.rate):.1f}" for p in points)
    out.append(f'<polyline points="{path}" fill="none" stroke="#246" stroke-width="1.5"/>')
    for p in points:
        x = px(p.param)
        out.append(f'<line x1="{x:.1f}" x2="{x:.1f}" y1="{py(min(1.0, p.rate + p.se)):.1f}" '
                   f'y2="{py(max(0.0, p.rate - p.se)):.1f}" stroke="#246"/>')
        out.append(f'<circle cx="{x:.1f}" cy="{py(p.rate):.1f}" r="2.5" fill="#246"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_outputs(config: ExperimentConfig, points: list) -> None:
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "power.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(power_csv(config.scenario, points))
    with open(os.path.join(config.out_dir, "power.svg"), "w", encoding="utf-8") as fh:
        fh.write(power_svg(points, config.scenario, None if config.scenario == "gamma1" else config.alpha))
    manifest = {
        "config": config.echo(),
        "oracle": [p.oracle for p in points],
        "versions": {"drpt": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    with open(os.path.join(config.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
