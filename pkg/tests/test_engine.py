from __future__ import annotations

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import ks_2samp, norm, rankdata

from drpt import rng
from drpt.engine import (OracleEstimator, Path, RatioClippedWarning, TestConfig, composite_drpt, drpt,
                         invert_confidence_set, p_value, train_test_split, wald_odds_interval)
from drpt.errors import EmptyCandidates, EstimatorFailure, ZeroCell
from drpt.estimation import LinearLogistic
from drpt.ratio import ExpressionRatio, PooledSample, TableRatio
from drpt.sim.scenarios import gen_binary


def binary_null(n, m, g, f1=0.5, r1=3.0):
    g1 = r1 * f1 / (r1 * f1 + 1 - f1)
    return gen_binary(f1, g1, r1, n, m, g)


# -- p-value arithmetic -------------------------------------------------------


def test_p_value_examples():
    assert p_value(3.0, [1.0]) == 0.5
    assert p_value(1.0, [1.0]) == 1.0
    assert p_value(2.0, [1.0, 2.0, 3.0]) == 0.75
    assert p_value(2.0, [1.999999, 0.0], tie_tol=1e-5) == 2 / 3


@given(st.floats(-10, 10), st.lists(st.floats(-10, 10), min_size=1, max_size=50))
def test_p_value_lattice_and_monotone_invariance(t, perm):
    H = len(perm)
    p = p_value(t, perm)
    k = p * (H + 1)
    assert abs(k - round(k)) < 1e-9 and 1 <= round(k) <= H + 1
    # strictly increasing maps that are exact in floating point: ranks and scaling by 4
    ranks = rankdata([t] + perm, method="dense")
    assert p_value(ranks[0], ranks[1:]) == p
    assert p_value(4 * t, [4 * v for v in perm]) == p


def test_drpt_result_recomputes_and_lies_on_lattice():
    g = np.random.default_rng(1)
    s = PooledSample.from_samples(g.normal(size=(30, 1)), g.normal(size=(25, 1)) + 0.5)
    r = ExpressionRatio("exp(0.5*x - 0.125)")
    for stat in ("v", "u"):
        res = drpt(s, r, TestConfig(copies=39, seed=3, statistic=stat))
        assert res.p_value == p_value(res.t_observed, res.t_permuted, res.tie_tol)
        assert res.p_value in {k / 40 for k in range(1, 41)}
        assert len(res.t_permuted) == 39 and res.path == Path.MCMC
        # a strictly increasing transform of T leaves p unchanged
        assert p_value(np.exp(res.t_observed), np.exp(res.t_permuted)) == p_value(res.t_observed, res.t_permuted)


def test_degenerate_data_gives_p_one():
    s = PooledSample.from_samples(np.ones((6, 2)), np.ones((5, 2)))
    assert drpt(s, np.linspace(0.5, 4.0, 11), TestConfig(copies=19, statistic="v")).p_value == 1.0
    assert drpt(s, np.full(11, 2.0), TestConfig(copies=19, statistic="u")).p_value == 1.0
    c = PooledSample.from_categories([1] * 6, [1] * 5, 3)
    assert drpt(c, TableRatio.from_sequence([1.0, 2.0, 3.0]), TestConfig(copies=19)).p_value == 1.0


def test_drpt_is_deterministic_across_workers():
    g = np.random.default_rng(2)
    s = PooledSample.from_samples(g.normal(size=(20, 2)), g.normal(size=(20, 2)))
    r = np.exp(g.normal(size=40) * 0.3)
    a = drpt(s, r, TestConfig(copies=29, seed=5, workers=1)).to_json()
    b = drpt(s, r, TestConfig(copies=29, seed=5, workers=3)).to_json()
    assert a == b
    d = json.loads(a)
    assert d["timing"] is None and d["config"]["H"] == 29 and len(d["t_permuted"]) == 29


def test_auto_path_selection():
    g = np.random.default_rng(0)
    s, r = binary_null(40, 40, g)
    assert drpt(s, r, TestConfig(copies=9)).path == Path.EXACT
    assert drpt(s, r, TestConfig(copies=9, path="mcmc")).path == Path.MCMC
    # r varying within a category rules out the count path
    rv = np.where(s.points == 1, 3.0, 1.0) * np.linspace(1.0, 1.1, s.size)
    assert drpt(s, rv, TestConfig(copies=9)).path == Path.MCMC


def test_config_validation():
    with pytest.raises(ValueError):
        TestConfig(copies=0)
    with pytest.raises(ValueError):
        TestConfig(alpha=1.0)
    with pytest.raises(ValueError):
        TestConfig(statistic="bogus")


# -- validity and path agreement ---------------------------------------------------


def test_exact_path_size_binary_null():
    g = np.random.default_rng(10)
    reps = 400
    rej = 0
    for k in range(reps):
        s, r = binary_null(100, 100, g)
        rej += drpt(s, r, TestConfig(seed=k, statistic="v")).p_value <= 0.05
    assert rej / reps <= 0.05 + 2 * math.sqrt(0.05 * 0.95 / reps)


@pytest.mark.slow
def test_mcmc_and_exact_paths_agree():
    g = np.random.default_rng(20)
    pm, pe = [], []
    for k in range(500):
        s, r = gen_binary(0.5, 0.6, 3.0, 20, 20, g)
        pm.append(drpt(s, r, TestConfig(seed=k, path="mcmc")).p_value)
        pe.append(drpt(s, r, TestConfig(seed=k, path="exact")).p_value)
    assert ks_2samp(pm, pe).pvalue > 0.01


@pytest.mark.slow
def test_reciprocal_relabel_invariance():
    g = np.random.default_rng(30)
    a, b = [], []
    cfg = dict(copies=49, variant="weighted", statistic="v")
    for k in range(500):
        x, y = g.normal(size=(25, 1)), g.normal(size=(25, 1)) + 0.3
        s = PooledSample.from_samples(x, y)
        r = np.exp(0.6 * s.points[:, 0] - 0.18)
        a.append(drpt(s, r, TestConfig(seed=k, **cfg)).p_value)
        swapped = PooledSample.from_samples(y, x)
        rs = 1.0 / np.r_[r[25:], r[:25]]
        b.append(drpt(swapped, rs, TestConfig(seed=10_000 + k, **cfg)).p_value)
    assert ks_2samp(a, b).pvalue > 0.01


def test_relabel_gives_identical_statistic():
    g = np.random.default_rng(31)
    x, y = g.normal(size=(12, 1)), g.normal(size=(9, 1))
    s, sw = PooledSample.from_samples(x, y), PooledSample.from_samples(y, x)
    r = np.exp(0.4 * s.points[:, 0])
    a = drpt(s, r, TestConfig(copies=5, statistic="v"))
    b = drpt(sw, 1.0 / np.r_[r[12:], r[:12]], TestConfig(copies=5, statistic="v"))
    assert b.t_observed == pytest.approx(a.t_observed, rel=1e-10)
    assert b.lambda_hat == pytest.approx(1 / a.lambda_hat, rel=1e-10)


# -- confidence sets ----------------------------------------------------------------


def test_invert_requires_candidates():
    s = PooledSample.from_categories([0, 1], [1, 1])
    with pytest.raises(EmptyCandidates):
        invert_confidence_set(s, [], 0.05)


def test_invert_uses_independent_candidate_seeds():
    g = np.random.default_rng(3)
    s, r = binary_null(30, 30, g)
    res = invert_confidence_set(s, [r, r], 0.05, TestConfig(copies=19))
    assert len(res.p_values) == 2 and res.accepted.dtype == bool
    single = drpt(s, r, TestConfig(copies=19, seed=0)).p_value
    assert res.p_values[0] == drpt(s, r, TestConfig(copies=19, seed=rng.sub_seed(0, "candidate", 0))).p_value
    assert single in {k / 20 for k in range(1, 21)}


def test_invert_covers_true_odds_multiplier():
    g = np.random.default_rng(4)
    grid = [0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    cands = [TableRatio.from_sequence([1.0, v]) for v in grid]
    reps, covered, hits_one = 300, 0, 0
    for k in range(reps):
        s, _ = binary_null(100, 100, g, f1=0.3, r1=5.0)
        res = invert_confidence_set(s, cands, 0.05, TestConfig(seed=k, statistic="v"))
        covered += res.accepted[grid.index(5.0)]
        hits_one += res.accepted[grid.index(1.0)]
    assert covered / reps >= 0.95 - 2 * math.sqrt(0.05 * 0.95 / reps)
    assert hits_one / reps < 0.2


# -- Wald interval ---------------------------------------------------------------------


def test_wald_symmetric_null_case():
    lo, hi = wald_odds_interval(30, 100, 30, 100)
    assert lo < 1 < hi
    assert math.log(lo) == pytest.approx(-math.log(hi), abs=1e-12)


def test_wald_shrinks_as_alpha_grows():
    lo, hi = wald_odds_interval(300, 1000, 100, 1000, alpha=1 - 1e-12)
    point = (0.3 / 0.7) / (0.1 / 0.9)
    assert lo == pytest.approx(point, rel=1e-9) and hi == pytest.approx(point, rel=1e-9)


def test_wald_matches_simulated_spread():
    lo, hi = wald_odds_interval(300, 1000, 100, 1000, alpha=0.05)
    half = (math.log(hi) - math.log(lo)) / 2 / norm.ppf(0.975)
    g = np.random.default_rng(0)
    w = g.binomial(1000, 0.3, 200_000) / 1000
    b = g.binomial(1000, 0.1, 200_000) / 1000
    spread = np.std(np.log(w / (1 - w)) - np.log(b / (1 - b)))
    assert half == pytest.approx(spread, rel=0.03)
    assert math.sqrt(lo * hi) == pytest.approx((0.3 / 0.7) / (0.1 / 0.9), rel=1e-12)


def test_wald_zero_cell():
    with pytest.raises(ZeroCell):
        wald_odds_interval(0, 100, 30, 100)
    with pytest.raises(ZeroCell):
        wald_odds_interval(30, 100, 100, 100)


# -- composite null -------------------------------------------------------------------


def gaussian_shift(n, m, mu, g):
    return PooledSample.from_samples(g.normal(size=(n, 1)), g.normal(size=(m, 1)) + mu)


def test_composite_with_oracle_estimator_is_valid():
    g = np.random.default_rng(5)
    oracle = OracleEstimator(lambda z: np.exp(z[:, 0] - 0.5))
    reps, rej = 300, 0
    for k in range(reps):
        train, test = gaussian_shift(50, 50, 1.0, g), gaussian_shift(60, 60, 1.0, g)
        out = composite_drpt(train, test, oracle, TestConfig(seed=k, copies=49),
                             reference=lambda z: np.exp(z[:, 0] - 0.5))
        rej += out.result.p_value <= 0.05
        assert out.diagnostics["eta"] == 0.0 and out.diagnostics["clipped"] == 0
    assert rej / reps <= 0.05 + 2 * math.sqrt(0.05 * 0.95 / reps)


def test_composite_clips_with_warning():
    g = np.random.default_rng(6)
    train, test = gaussian_shift(10, 10, 0.0, g), gaussian_shift(10, 10, 0.0, g)
    wild = OracleEstimator(lambda z: np.where(z[:, 0] > 0, np.inf, 0.0))
    with pytest.warns(RatioClippedWarning):
        out = composite_drpt(train, test, wild, TestConfig(copies=9))
    assert out.diagnostics["clipped"] == 20
    assert out.diagnostics["rhat_min"] == 1e-6 and out.diagnostics["rhat_max"] == 1e6
    assert out.result.diagnostics["clipped"] == 20


def test_composite_wraps_estimator_errors():
    class Broken:
        def fit(self, train):
            raise RuntimeError("boom")

    s = gaussian_shift(5, 5, 0.0, np.random.default_rng(0))
    with pytest.raises(EstimatorFailure):
        composite_drpt(s, s, Broken(), TestConfig(copies=9))


def test_composite_power_grows_with_sample_size():
    # a variance change is outside the log-linear class fitted by LL
    g = np.random.default_rng(7)
    rates = []
    for n in (100, 200, 400):
        rej = 0
        for k in range(40):
            s = PooledSample.from_samples(g.normal(size=(n, 1)), 1.6 * g.normal(size=(n, 1)))
            train, test = train_test_split(s, 0.5, seed=k)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RatioClippedWarning)
                out = composite_drpt(train, test, LinearLogistic(), TestConfig(seed=k, copies=49))
            rej += out.result.p_value <= 0.05
        rates.append(rej / 40)
    assert rates[0] <= rates[1] + 0.1 and rates[1] <= rates[2] + 0.1
    assert rates[2] > rates[0] and rates[2] >= 0.7


def test_train_test_split_shapes():
    s = gaussian_shift(50, 30, 0.0, np.random.default_rng(0))
    train, test = train_test_split(s, seed=1)
    assert (train.n, train.m, test.n, test.m) == (40, 24, 10, 6)
    again = train_test_split(s, seed=1)[0]
    assert np.array_equal(train.points, again.points)
    with pytest.raises(ValueError):
        train_test_split(s, 1.0)
