"""Command-line interface: ``drpt test``, ``drpt invert`` and ``drpt sim``."""

from __future__ import annotations

import argparse
import csv
import sys

from .engine import TestConfig, drpt, invert_confidence_set
from .io import load_csv, parse_grid, parse_ratio
from .ratio import ExpressionRatio
from .sim.harness import SCENARIOS, ExperimentConfig, run_experiment
from .statistics import KernelSpec


def _params(items):
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if not name or not value:
            raise argparse.ArgumentTypeError(f"--param expects name=value, got {item!r}")
        out[name] = float(value)
    return out


def _add_test_flags(p):
    p.add_argument("--stat", choices=["v", "u", "discrete"], default="u")
    p.add_argument("--kernel", choices=["gaussian", "laplace", "collision"], default=None,
                   help="default: gaussian for real data, collision for categories")
    p.add_argument("--bandwidth", default="median", help="'median' or a positive number")
    p.add_argument("--S", type=int, default=50, help="sweeps per chain")
    p.add_argument("--H", type=int, default=99, help="number of permuted copies")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path", choices=["auto", "mcmc", "exact"], default="auto")
    p.add_argument("--variant", choices=["plain", "weighted"], default="plain")
    p.add_argument("--workers", type=int, default=1)


def _test_config(args) -> TestConfig:
    kernel = None
    if args.kernel is not None:
        kernel = KernelSpec(args.kernel, args.bandwidth)
    elif args.bandwidth != "median":
        kernel = KernelSpec("gaussian", args.bandwidth)
    return TestConfig(sweeps=args.S, copies=args.H, seed=args.seed, statistic=args.stat, kernel=kernel,
                      variant=args.variant, path=args.path, alpha=args.alpha, workers=args.workers)


def cmd_test(args) -> int:
    sample, rcol = load_csv(args.data)
    ratio = parse_ratio(args.ratio, rcol, _params(args.param))
    result = drpt(sample, ratio, _test_config(args))
    text = result.to_json(include_timing=args.record_timing) + "\n"
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_invert(args) -> int:
    sample, _ = load_csv(args.data)
    base = ExpressionRatio(args.ratio, _params(args.param))
    grid = parse_grid(args.grid)
    cands = [base.with_params(**{args.name: v}) for v in grid]
    res = invert_confidence_set(sample, cands, args.alpha, _test_config(args))
    out = open(args.csv_out, "w", encoding="utf-8", newline="") if args.csv_out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["candidate", "p_value", "accepted"])
        for v, p, a in zip(grid, res.p_values, res.accepted):
            w.writerow([repr(v), repr(float(p)), int(bool(a))])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_sim(args) -> int:
    test = TestConfig(sweeps=args.S, copies=args.H, statistic=args.stat, variant=args.variant)
    cfg = ExperimentConfig(
        scenario=args.scenario, grid=tuple(parse_grid(args.grid)), n=args.n, m=args.m, reps=args.reps,
        alpha=args.alpha, test=test, seed=args.seed, out_dir=args.out_dir, workers=args.workers,
        record_timing=args.record_timing, mu=args.mu, estimator=args.estimator,
        train_size=args.train_size, test_size=args.test_size,
    )
    points = run_experiment(cfg)
    for p in points:
        extra = "" if p.oracle is None else f"  oracle={p.oracle:.4f}"
        print(f"{args.scenario} param={p.param:g} rate={p.rate:.4f} se={p.se:.4f}{extra}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drpt", description="Density ratio permutation tests.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test g ∝ r f on a CSV data file")
    t.add_argument("--data", required=True)
    t.add_argument("--ratio", required=True, help="expression, table .json file, or column:r")
    t.add_argument("--param", action="append", help="expression constant, name=value (repeatable)")
    t.add_argument("--json-out")
    t.add_argument("--record-timing", action="store_true", help="include wall time (breaks byte-identity)")
    _add_test_flags(t)
    t.set_defaults(func=cmd_test)

    i = sub.add_parser("invert", help="confidence set over a parameterised ratio expression")
    i.add_argument("--data", required=True)
    i.add_argument("--ratio", required=True, help="expression with a free parameter, e.g. 'exp(mu*x - mu^2/2)'")
    i.add_argument("--name", required=True, help="the parameter swept by --grid")
    i.add_argument("--grid", required=True, help="start:stop:step or a comma list")
    i.add_argument("--param", action="append")
    i.add_argument("--csv-out")
    _add_test_flags(i)
    i.set_defaults(func=cmd_invert)

    s = sub.add_parser("sim", help="run a synthetic power experiment")
    s.add_argument("--scenario", choices=SCENARIOS, required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--n", type=int, default=150)
    s.add_argument("--m", type=int, default=150)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--S", type=int, default=50)
    s.add_argument("--H", type=int, default=99)
    s.add_argument("--stat", choices=["v", "u", "discrete"], default="u")
    s.add_argument("--variant", choices=["plain", "weighted"], default="plain")
    s.add_argument("--mu", type=float, default=1.0, help="true shift (misspec)")
    s.add_argument("--estimator", choices=["ll", "klr"], default="ll", help="ratio estimator (causal)")
    s.add_argument("--train-size", type=int, default=1000)
    s.add_argument("--test-size", type=int, default=200)
    s.add_argument("--record-timing", action="store_true")
    s.set_defaults(func=cmd_sim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
