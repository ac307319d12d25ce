"""Rejection-sampling baseline: thin the first sample to ``r f`` and run a
classical (uniform permutation) MMD test."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import rng
from ..engine import p_value
from ..errors import AllRejectedWarning
from ..ratio import PooledSample, RatioFunction
from ..statistics import KernelSpec, SplitStatistic, StatisticKind


@dataclass(frozen=True)
class BaselineResult:
    p_value: float
    n_effective: int
    t_observed: Optional[float]
    t_permuted: Optional[np.ndarray]


def rejection_sample_baseline(sample: PooledSample, ratio: RatioFunction, seed: int = 0, copies: int = 99,
                              statistic: StatisticKind = StatisticKind.USTAT,
                              kernel: Optional[KernelSpec] = None) -> BaselineResult:
    """Keep ``X_i`` with probability ``r(X_i) / max_j r(X_j)``, then test the kept
    points against the second sample with uniformly random permutations."""
    rvalues = ratio.values(sample)
    rx = rvalues[: sample.n]
    u = rng.uniforms(np.array([rng.derive_key(seed, "thin")], dtype=np.uint64), sample.n)[0]
    keep = np.flatnonzero(u < rx / rx.max())
    if keep.size == 0:
        warnings.warn("rejection sampling kept no first-sample point; returning p = 1", AllRejectedWarning)
        return BaselineResult(1.0, 0, None, None)
    first = sample.first[keep]
    if sample.categorical:
        reduced = PooledSample.from_categories(first, sample.second, sample.n_categories)
    else:
        reduced = PooledSample.from_samples(first, sample.second)
    kind = StatisticKind(statistic)
    if kind == StatisticKind.USTAT and (reduced.n < 2 or reduced.m < 2):
        kind = StatisticKind.VSTAT
    if kernel is None:
        kernel = KernelSpec("collision") if sample.categorical else KernelSpec()
    st = SplitStatistic(reduced, np.ones(reduced.size), 1.0, kind, kernel=kernel)
    keys = rng.derive_keys(rng.derive_key(seed, "uniform-perm"), np.arange(copies))
    perms = np.argsort(rng.uniforms(keys, reduced.size), axis=1, kind="stable")
    values = st.evaluate(np.vstack([st.identity_counts(), st.counts_from_permutations(perms)]))
    return BaselineResult(p_value(values[0], values[1:], st.noise_floor), int(keep.size), float(values[0]), values[1:])
