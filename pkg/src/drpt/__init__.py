"""Density ratio permutation tests."""

from __future__ import annotations

__version__ = "0.1.0"

from .discrete import CountTable, fisher_ncmh_pmf, gamma1, sample_count_table, tabulate
from .engine import Path, TestConfig, TestResult, composite_drpt, drpt, invert_confidence_set, wald_odds_interval
from .estimation import LogisticModel, fit_kernel_logistic, fit_linear_logistic, predict_ratio
from .permutations import Acceptance, ChainConfig, run_star_scheme
from .ratio import (ExpressionRatio, PooledSample, PopulationModel, PrecomputedRatio, TableRatio, solve_lambda_hat,
                    solve_lambda_zero)
from .statistics import KernelFamily, KernelSpec, StatisticKind

__all__ = [
    "Acceptance", "ChainConfig", "CountTable", "ExpressionRatio", "KernelFamily", "KernelSpec", "LogisticModel",
    "Path", "PooledSample", "PopulationModel", "PrecomputedRatio", "StatisticKind", "TableRatio", "TestConfig",
    "TestResult", "composite_drpt", "drpt", "fisher_ncmh_pmf", "fit_kernel_logistic", "fit_linear_logistic",
    "gamma1", "invert_confidence_set", "predict_ratio", "run_star_scheme", "sample_count_table",
    "solve_lambda_hat", "solve_lambda_zero", "tabulate", "wald_odds_interval",
]
