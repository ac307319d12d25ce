"""Full tests: p-value assembly, path selection, composite nulls, inversion."""

from __future__ import annotations

import enum
import json
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np
from scipy.stats import norm

from . import rng
from .discrete import LATTICE_LIMIT, lattice_size, sample_counts, tabulate
from .errors import DegenerateSample, DomainMismatch, EmptyCandidates, EstimatorFailure, InvalidTable, ZeroCell
from .permutations import Acceptance, ChainConfig, run_star_scheme
from .ratio import PooledSample, PrecomputedRatio, RatioFunction, check_positive, solve_lambda_hat
from .statistics import KernelFamily, KernelSpec, SplitStatistic, StatisticKind


class Path(str, enum.Enum):
    AUTO = "auto"
    MCMC = "mcmc"
    EXACT = "exact"


class RatioClippedWarning(UserWarning):
    """Estimated ratio values were clipped to the safe range."""


@dataclass(frozen=True)
class TestConfig:
    """Settings of one test.

    ``kernel=None`` picks a median-heuristic Gaussian kernel for real-valued
    data and the collision kernel for categorical data.  ``dictionary`` is
    used only by the ``ipm`` statistic.
    """

    __test__ = False

    sweeps: Optional[int] = 50
    copies: int = 99
    seed: int = 0
    statistic: StatisticKind = StatisticKind.USTAT
    kernel: Optional[KernelSpec] = None
    variant: Acceptance = Acceptance.PLAIN
    path: Path = Path.AUTO
    alpha: float = 0.05
    workers: int = 1
    dictionary: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "statistic", StatisticKind(self.statistic))
        object.__setattr__(self, "variant", Acceptance(self.variant))
        object.__setattr__(self, "path", Path(self.path))
        if self.copies < 1:
            raise ValueError("copies (H) must be >= 1")
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps (S) must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def kernel_for(self, sample: PooledSample) -> KernelSpec:
        if self.kernel is not None:
            return self.kernel
        return KernelSpec(KernelFamily.COLLISION) if sample.categorical else KernelSpec()

    def echo(self) -> dict:
        k = self.kernel
        return {
            "S": self.sweeps,
            "H": self.copies,
            "seed": self.seed,
            "statistic": self.statistic.value,
            "kernel": None if k is None else {"family": k.family.value, "bandwidth": k.bandwidth},
            "variant": self.variant.value,
            "path": self.path.value,
            "alpha": self.alpha,
        }


@dataclass
class TestResult:
    __test__ = False

    p_value: float
    t_observed: float
    t_permuted: np.ndarray
    lambda_hat: float
    path: Path
    bandwidth: Optional[float]
    n: int
    m: int
    config: TestConfig
    timing: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    tie_tol: float = 0.0

    @property
    def rejected(self) -> bool:
        return self.p_value <= self.config.alpha

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "p_value": self.p_value,
            "t_observed": self.t_observed,
            "t_permuted": [float(t) for t in self.t_permuted],
            "lambda_hat": self.lambda_hat,
            "path": self.path.value,
            "bandwidth": self.bandwidth,
            "n": self.n,
            "m": self.m,
            "rejected": self.rejected,
            "config": self.config.echo(),
            "timing": self.timing if include_timing else None,
            "tie_tol": self.tie_tol,
        }
        if self.diagnostics:
            d["diagnostics"] = self.diagnostics
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)


def p_value(t_observed: float, t_permuted, tie_tol: float = 0.0) -> float:
    """``(1 + #{t_h >= t}) / (1 + H)``; ties count against rejection.

    Values within ``tie_tol`` below ``t`` also count as ties, so rounding
    noise can only raise the p-value.
    """
    t_permuted = np.asarray(t_permuted, dtype=float)
    return (1 + int(np.count_nonzero(t_permuted >= t_observed - tie_tol))) / (1 + t_permuted.size)


def _category_ratio(sample: PooledSample, rvalues: np.ndarray) -> Optional[np.ndarray]:
    """Per-category r when r is constant within every category present."""
    J1 = sample.n_categories
    r = np.ones(J1)
    seen = np.zeros(J1, dtype=bool)
    for c, v in zip(sample.points, rvalues):
        if seen[c] and r[c] != v:
            return None
        r[c], seen[c] = v, True
    return r


def _choose_path(sample, config, rcat):
    if config.path == Path.MCMC:
        return Path.MCMC
    exact_ok = sample.categorical and rcat is not None
    if config.path == Path.EXACT:
        if not sample.categorical:
            raise DomainMismatch("the exact path needs categorical data")
        if rcat is None:
            raise InvalidTable("the exact path needs r constant within each category")
        return Path.EXACT
    if exact_ok and lattice_size(np.bincount(sample.points, minlength=sample.n_categories), sample.m) <= LATTICE_LIMIT:
        return Path.EXACT
    return Path.MCMC


def drpt(sample: PooledSample, ratio: Union[RatioFunction, np.ndarray], config: TestConfig = TestConfig()) -> TestResult:
    """Density ratio permutation test of ``g ∝ r f``."""
    start = time.perf_counter()
    if isinstance(ratio, RatioFunction):
        rvalues = ratio.values(sample)
    else:
        rvalues = check_positive(ratio)
        if rvalues.shape != (sample.size,):
            raise DomainMismatch("one ratio value per pooled point is required")
    lam = solve_lambda_hat(sample, rvalues).value
    rcat = _category_ratio(sample, rvalues) if sample.categorical else None
    path = _choose_path(sample, config, rcat)
    kernel = config.kernel_for(sample)
    if config.statistic in (StatisticKind.VSTAT, StatisticKind.USTAT):
        try:
            kernel = kernel.resolve(sample)
        except DegenerateSample:
            # all points coincide, so every split gives the same value whatever the bandwidth
            kernel = replace(kernel, bandwidth=1.0)
    st = SplitStatistic(sample, rvalues, lam, config.statistic, kernel=kernel, dictionary=config.dictionary)
    H = config.copies
    if path == Path.EXACT:
        tab = tabulate(sample)
        w = sample_counts(tab.tots, rcat, sample.n, sample.m, H, config.seed)
        counts = st.counts_from_categories(w)
    else:
        chain = ChainConfig(config.sweeps, config.variant, H, config.seed, config.workers)
        _, copies = run_star_scheme(sample, rvalues, chain)
        counts = st.counts_from_permutations(copies)
    # one joint evaluation, so identical splits give bit-identical values
    values = st.evaluate(np.vstack([st.identity_counts(), counts]))
    t_obs, t_perm = float(values[0]), values[1:]
    tol = st.noise_floor
    return TestResult(p_value(t_obs, t_perm, tol), t_obs, t_perm, lam, path, st.bandwidth, sample.n, sample.m,
                      config, timing=time.perf_counter() - start, tie_tol=tol)


# ---------------------------------------------------------------------------
# confidence sets


@dataclass
class InversionResult:
    candidates: list
    p_values: np.ndarray
    accepted: np.ndarray

    @property
    def accepted_candidates(self) -> list:
        return [c for c, a in zip(self.candidates, self.accepted) if a]


def invert_confidence_set(sample: PooledSample, candidates: Sequence[RatioFunction], alpha: float,
                          config: TestConfig = TestConfig()) -> InversionResult:
    """Test every candidate ratio; keep those with ``p > alpha``.

    Candidate ``k`` uses the seed ``sub_seed(config.seed, "candidate", k)``,
    so sets for different grids need not be nested.
    """
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("no candidate ratios to test")
    ps = []
    for k, cand in enumerate(candidates):
        cfg = replace(config, seed=rng.sub_seed(config.seed, "candidate", k), alpha=alpha)
        ps.append(drpt(sample, cand, cfg).p_value)
    ps = np.array(ps)
    return InversionResult(candidates, ps, ps > alpha)


def wald_odds_interval(ones_second: int, n_second: int, ones_first: int, n_first: int, alpha: float = 0.05):
    """Wald interval for the odds multiplier of a binary second sample over a
    binary first sample."""
    cells = (ones_second, n_second - ones_second, ones_first, n_first - ones_first)
    if min(cells) < 1:
        raise ZeroCell(f"all four cell counts must be >= 1, got {cells}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    w = ones_second / n_second
    b = ones_first / n_first
    centre = math.log(w / (1 - w)) - math.log(b / (1 - b))
    se = math.sqrt(1 / (n_second * w) + 1 / (n_second * (1 - w)) + 1 / (n_first * b) + 1 / (n_first * (1 - b)))
    z = norm.ppf(1 - alpha / 2)
    return math.exp(centre - z * se), math.exp(centre + z * se)


# ---------------------------------------------------------------------------
# composite null


class RatioModel(Protocol):
    def predict_ratio(self, z) -> np.ndarray: ...


class RatioEstimator(Protocol):
    def fit(self, train: PooledSample) -> RatioModel: ...


@dataclass(frozen=True)
class OracleEstimator:
    """Returns a fixed, known ratio function (for checks and simulations)."""

    fn: Callable[[np.ndarray], np.ndarray]

    def fit(self, train: PooledSample) -> "OracleEstimator":
        return self

    def predict_ratio(self, z) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(z)), dtype=float)


@dataclass
class CompositeResult:
    result: TestResult
    model: object
    diagnostics: dict


CLIP_LO, CLIP_HI = 1e-6, 1e6


def composite_drpt(train: PooledSample, test: PooledSample, estimator: RatioEstimator,
                   config: TestConfig = TestConfig(), reference: Optional[Callable] = None) -> CompositeResult:
    """Fit ``r_hat`` on ``train`` and run the test on the independent ``test`` split.

    ``reference`` (optional true ratio) adds the diagnostic
    ``eta = max |log r_hat - log r|`` over the test points.
    """
    try:
        model = estimator.fit(train)
    except EstimatorFailure:
        raise
    except Exception as exc:  # estimators are user code
        raise EstimatorFailure(f"ratio estimator failed: {exc}") from exc
    raw = np.asarray(model.predict_ratio(test.points), dtype=float).reshape(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bad = ~np.isfinite(raw) | (raw < CLIP_LO) | (raw > CLIP_HI)
    n_clipped = int(np.count_nonzero(bad))
    if n_clipped:
        warnings.warn(f"{n_clipped} estimated ratio values clipped to [{CLIP_LO:g}, {CLIP_HI:g}]", RatioClippedWarning)
    rhat = np.clip(np.nan_to_num(raw, nan=1.0, posinf=CLIP_HI, neginf=CLIP_LO), CLIP_LO, CLIP_HI)
    diag = {"rhat_min": float(rhat.min()), "rhat_max": float(rhat.max()), "clipped": n_clipped}
    if reference is not None:
        true = np.asarray(reference(test.points), dtype=float)
        diag["eta"] = float(np.max(np.abs(np.log(rhat) - np.log(true))))
    res = drpt(test, PrecomputedRatio(rhat), config)
    res.diagnostics.update(diag)
    return CompositeResult(res, model, diag)


def train_test_split(sample: PooledSample, train_fraction: float = 0.8, seed: int = 0):
    """Random split of each sample into train/test parts (default 80/20)."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    g = rng.generator(seed, "split")
    parts = []
    for block in (sample.first, sample.second):
        idx = g.permutation(len(block))
        k = int(round(train_fraction * len(block)))
        if k < 1 or k >= len(block):
            raise ValueError("each sample needs at least one train and one test point")
        parts.append((block[np.sort(idx[:k])], block[np.sort(idx[k:])]))
    (xtr, xte), (ytr, yte) = parts
    if sample.categorical:
        mk = lambda a, b: PooledSample.from_categories(a, b, sample.n_categories)  # noqa: E731
    else:
        mk = PooledSample.from_samples
    return mk(xtr, ytr), mk(xte, yte)
