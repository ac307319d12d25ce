from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from drpt import rng
from drpt.errors import TooLarge
from drpt.permutations import (Acceptance, ChainConfig, acceptance_plain, acceptance_weighted,
                               exact_permutation_distribution, one_sweep_transitions, permutation_json,
                               permutation_weights, run_chains, run_star_scheme, split_of, sweep)
from drpt.ratio import PooledSample, solve_lambda_hat


def sample_of(n, m):
    return PooledSample.from_samples(np.arange(n, dtype=float), np.arange(n, n + m, dtype=float))


def split_tv(copies, n, dist):
    counts = {}
    for row in copies:
        key = split_of(row, n)
        counts[key] = counts.get(key, 0) + 1
    total = len(copies)
    return 0.5 * sum(abs(counts.get(k, 0) / total - p) for k, p in dist.items())


# -- acceptance probabilities ---------------------------------------------------


def test_plain_acceptance_examples():
    assert acceptance_plain(3.0, 1.0) == 0.75
    assert acceptance_plain(2.2, 2.2) == 0.5
    p = acceptance_plain(5.0, 2.0)
    assert p / (1 - p) == pytest.approx(2.5, rel=1e-14)


def test_weighted_acceptance_examples():
    assert acceptance_weighted(1.0, 4.0, 0.5, 1, 1) == pytest.approx(0.5 / 4.5, rel=1e-15)
    assert acceptance_weighted(3.0, 3.0, 1 / 3, 4, 4) == pytest.approx(0.25, rel=1e-15)
    assert acceptance_weighted(3.0, 3.0, 1 / 3, 2, 6) == pytest.approx(12 / 64, rel=1e-15)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-2, 1e2), st.integers(1, 50), st.integers(1, 50))
def test_swap_odds_property(ri, rj, lam, n, m):
    pw = acceptance_weighted(ri, rj, lam, n, m) / acceptance_weighted(rj, ri, lam, n, m)
    pp = acceptance_plain(ri, rj) / acceptance_plain(rj, ri)
    assert pw == pytest.approx(ri / rj, rel=1e-12)
    assert pp == pytest.approx(ri / rj, rel=1e-12)
    assert 0 < acceptance_weighted(ri, rj, lam, n, m) < 1


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_plain_acceptance_reciprocal_invariance(ri, rj):
    # after swapping roles, the old second-sample point is now "first" with ratio 1/r
    assert acceptance_plain(1 / rj, 1 / ri) == pytest.approx(acceptance_plain(ri, rj), abs=1e-15)


# -- sweeps and chains ----------------------------------------------------------


@st.composite
def chain_problems(draw):
    n = draw(st.integers(1, 9))
    m = draw(st.integers(1, 9))
    r = np.array(draw(st.lists(st.floats(0.05, 20.0), min_size=n + m, max_size=n + m)))
    return n, m, r


@given(chain_problems(), st.integers(0, 2**32), st.sampled_from(list(Acceptance)))
def test_sweep_preserves_bijection_and_multiset(prob, key, variant):
    n, m, r = prob
    sigma = np.arange(n + m)
    for t in range(5):
        sigma = sweep(sigma, r, n, m, key, t, variant)
    assert sorted(sigma.tolist()) == list(range(n + m))
    assert sorted(r[sigma].tolist()) == sorted(r.tolist())


def test_single_pair_swap_probability():
    r = np.array([1.0, 3.0])
    keys = rng.derive_keys(17, np.arange(200_000))
    out = run_chains(np.arange(2), r, 1, 1, keys, 1)
    rate = np.mean(out[:, 0] == 1)
    assert abs(rate - 0.25) < 4 * np.sqrt(0.25 * 0.75 / len(keys))


def test_equal_ratios_swap_with_probability_half():
    n = m = 4
    keys = rng.derive_keys(3, np.arange(50_000))
    out = run_chains(np.arange(8), np.ones(8), n, m, keys, 1)
    moved = np.mean(out[:, :n] >= n)  # share of first-sample slots now holding a second-sample index
    assert abs(moved - 0.5) < 0.01


def test_star_scheme_determinism_across_workers():
    n, m = 7, 5
    s = sample_of(n, m)
    r = np.linspace(0.5, 3.0, n + m)
    a = run_star_scheme(s, r, ChainConfig(sweeps=10, copies=5, seed=42, workers=1))
    b = run_star_scheme(s, r, ChainConfig(sweeps=10, copies=5, seed=42, workers=4))
    c = run_star_scheme(s, r, ChainConfig(sweeps=10, copies=5, seed=42))
    for x, y in ((a, b), (a, c)):
        assert np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1])
    assert permutation_json(a[0]) == permutation_json(c[0])


def test_chain_prefix_independent_of_batch():
    r = np.linspace(0.5, 3.0, 10)
    keys = rng.derive_keys(9, np.arange(50))
    full = run_chains(np.arange(10), r, 4, 6, keys, 7)
    part = run_chains(np.arange(10), r, 4, 6, keys[10:13], 7)
    assert np.array_equal(full[10:13], part)


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(sweeps=0)
    with pytest.raises(ValueError):
        ChainConfig(copies=0)
    assert ChainConfig().resolved_sweeps(10, 10) == int(np.ceil(8 * np.log(20)))


def test_star_scheme_symmetric_under_uniform_ratio():
    n, m = 2, 2
    s = sample_of(n, m)
    _, copies = run_star_scheme(s, np.ones(4), ChainConfig(sweeps=1, copies=40_000, seed=5))
    # relabelling within the first sample: indices 0 and 1 equally likely to move across
    moved0 = np.mean(np.any(copies[:, n:] == 0, axis=1))
    moved1 = np.mean(np.any(copies[:, n:] == 1, axis=1))
    assert moved0 > 0.1
    assert abs(moved0 - moved1) < 0.015


# -- exact distribution oracle ----------------------------------------------------


def test_exact_distribution_small_examples():
    d = exact_permutation_distribution(sample_of(1, 1), [1.0, 3.0])
    assert d[(1,)] == pytest.approx(0.75, abs=1e-15)
    assert d[(0,)] == pytest.approx(0.25, abs=1e-15)
    d = exact_permutation_distribution(sample_of(2, 2), [1.0, 1.0, 2.0, 2.0])
    assert d[(2, 3)] == pytest.approx(4 / 13, abs=1e-15)
    for k in [(0, 2), (0, 3), (1, 2), (1, 3)]:
        assert d[k] == pytest.approx(2 / 13, abs=1e-15)
    assert d[(0, 1)] == pytest.approx(1 / 13, abs=1e-15)


def test_exact_distribution_uniform_and_normalised():
    d = exact_permutation_distribution(sample_of(3, 4), np.ones(7))
    assert len(d) == 35
    assert all(p == pytest.approx(1 / 35, abs=1e-15) for p in d.values())
    d = exact_permutation_distribution(sample_of(5, 6), np.linspace(0.1, 9, 11))
    assert sum(d.values()) == pytest.approx(1.0, abs=1e-12)


def test_exact_distribution_guard():
    with pytest.raises(TooLarge):
        exact_permutation_distribution(sample_of(7, 6), np.ones(13))


@pytest.mark.parametrize("variant", list(Acceptance))
def test_detailed_balance_small(variant):
    g = np.random.default_rng(0)
    for n, m in [(a, b) for a in range(1, 6) for b in range(1, 6) if a + b <= 6]:
        r = g.uniform(0.2, 5.0, n + m)
        states, P = one_sweep_transitions(r, n, m, variant)
        pi = permutation_weights(r, n, states)
        flow = pi[:, None] * P
        assert np.max(np.abs(flow - flow.T)) <= 1e-10
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-13)
        assert np.max(np.abs(pi @ P - pi)) <= 1e-12


def test_stationarity_from_exact_draws():
    n, m = 3, 3
    s = sample_of(n, m)
    r = np.array([1.0, 2.0, 3.0, 1.0, 2.0, 3.0])
    dist = exact_permutation_distribution(s, r)
    splits = list(dist)
    probs = np.array([dist[k] for k in splits])
    g = np.random.default_rng(1)
    draws = g.choice(len(splits), size=100_000, p=probs)
    starts = np.array([[i for i in range(6) if i not in splits[k]] + list(splits[k]) for k in draws])
    out = run_chains(starts, r, n, m, rng.derive_keys(77, np.arange(len(starts))), 1)
    index = {k: i for i, k in enumerate(splits)}
    counts = np.bincount([index[split_of(row, n)] for row in out], minlength=len(splits))
    assert chisquare(counts, probs * len(out)).pvalue > 0.01


def test_variants_share_stationary_split_law():
    n, m = 2, 3
    s = sample_of(n, m)
    r = np.array([0.5, 1.0, 2.0, 4.0, 1.5])
    dist = exact_permutation_distribution(s, r)
    for variant in Acceptance:
        _, copies = run_star_scheme(s, r, ChainConfig(sweeps=60, variant=variant, copies=100_000, seed=8))
        assert split_tv(copies, n, dist) < 0.02


def test_transition_enumeration_guard():
    with pytest.raises(TooLarge):
        one_sweep_transitions(np.ones(8), 4, 4)


def test_weighted_chain_uses_lambda_hat():
    r = np.array([1.0, 4.0])
    lam = solve_lambda_hat((1, 1), r).value
    keys = rng.derive_keys(1, np.arange(100_000))
    out = run_chains(np.arange(2), r, 1, 1, keys, 1, Acceptance.WEIGHTED, lam)
    # from the identity the pair is (r_i, r_j) = (1, 4): swap probability 0.5/4.5
    assert abs(np.mean(out[:, 0] == 1) - 1 / 9) < 0.005


def test_split_enumeration_counts():
    assert len(list(itertools.combinations(range(6), 3))) == len(exact_permutation_distribution(sample_of(3, 3), np.ones(6)))
