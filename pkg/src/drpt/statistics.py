"""Kernels and shifted-MMD test statistics.

All statistics here are functions of which pooled points sit in the second
sample.  :class:`SplitStatistic` exploits that: it collapses the pooled data
into *atoms* (distinct ``(point, r)`` pairs) and evaluates a statistic from
per-atom second-sample counts.  Identical splits are evaluated once, so ties
between the observed statistic and permuted copies are exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateSample, DomainMismatch, EmptyDictionary, InvalidTable, LambdaMismatch, TooFewPoints
from .ratio import PooledSample, PopulationModel, mixing_weights

MEDIAN_MAX_POINTS = 4000
GRAM_CACHE_ATOMS = 4000
# statistics within this many ulps of their magnitude bound are treated as ties
TIE_ULPS = 64
LAMBDA_CHECK_TOL = 1e-9


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    COLLISION = "collision"


class StatisticKind(str, enum.Enum):
    VSTAT = "v"
    USTAT = "u"
    DISCRETE_ABS = "discrete"
    IPM = "ipm"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth (a positive float or ``"median"``)."""

    family: KernelFamily = KernelFamily.GAUSSIAN
    bandwidth: Union[float, str] = "median"

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        bw = self.bandwidth
        if isinstance(bw, str):
            if bw != "median":
                bw = float(bw)
        if not isinstance(bw, str) and not bw > 0:
            raise ValueError(f"bandwidth must be positive, got {bw}")
        object.__setattr__(self, "bandwidth", bw)

    def resolve(self, sample: PooledSample) -> "KernelSpec":
        """Fix the bandwidth (median heuristic on the pooled sample if requested)."""
        if self.family == KernelFamily.COLLISION:
            if not sample.categorical:
                raise DomainMismatch("the collision kernel needs categorical data")
            return replace(self, bandwidth=1.0)
        if sample.categorical:
            raise DomainMismatch(f"the {self.family.value} kernel needs real-valued data")
        if self.bandwidth == "median":
            return replace(self, bandwidth=median_heuristic(sample))
        return self


@dataclass(frozen=True)
class StatisticValue:
    value: float
    kind: StatisticKind
    lambda_hat: float
    bandwidth: Optional[float]


def median_heuristic(sample: PooledSample) -> float:
    """``1 / median`` of the nonzero pairwise Euclidean distances."""
    pts = sample.points if not sample.categorical else sample.points[:, None].astype(float)
    if len(pts) > MEDIAN_MAX_POINTS:
        pts = pts[np.linspace(0, len(pts) - 1, MEDIAN_MAX_POINTS).astype(int)]
    d = pdist(pts)
    d = d[d > 0]
    if d.size == 0:
        raise DegenerateSample("all points are identical; the median heuristic is undefined")
    return 1.0 / float(np.median(d))


def gram(family: KernelFamily, bandwidth: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    family = KernelFamily(family)
    if family == KernelFamily.COLLISION:
        a = np.asarray(a).reshape(-1)
        b = np.asarray(b).reshape(-1)
        return (a[:, None] == b[None, :]).astype(float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    d = a.shape[1]
    z = float(bandwidth)
    if family == KernelFamily.GAUSSIAN:
        return (z**d * math.pi ** (-d / 2)) * np.exp(-(z * z) * cdist(a, b, "sqeuclidean"))
    return (z**d * 2.0 ** (-d)) * np.exp(-z * cdist(a, b, "cityblock"))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """``k(x, y)`` for a resolved spec (numeric bandwidth)."""
    if spec.family == KernelFamily.COLLISION:
        if np.ndim(x) != 0 or np.ndim(y) != 0:
            raise DomainMismatch("the collision kernel compares category codes")
        return float(int(x) == int(y))
    if isinstance(spec.bandwidth, str):
        raise ValueError("resolve the bandwidth before evaluating the kernel")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise DomainMismatch("x and y must be vectors of equal dimension")
    return float(gram(spec.family, spec.bandwidth, x[None, :], y[None, :])[0, 0])


def _check_lambda(rvalues, lam, n, m):
    res = float(np.sum(1.0 / (n + lam * m * np.asarray(rvalues, dtype=float)))) - 1.0
    if abs(res) > LAMBDA_CHECK_TOL:
        raise LambdaMismatch(f"lambda_hat={lam} leaves residual {res:.3g} in its defining equation")


class SplitStatistic:
    """Shifted-MMD (V or U), finite-dictionary IPM or discrete |.| statistic
    evaluated on arbitrary splits of a fixed pooled sample."""

    def __init__(self, sample: PooledSample, rvalues, lambda_hat: float, kind: StatisticKind,
                 kernel: Optional[KernelSpec] = None, dictionary: Optional[Sequence[Callable]] = None):
        self.sample = sample
        self.n, self.m = sample.n, sample.m
        self.kind = StatisticKind(kind)
        self.lambda_hat = float(lambda_hat)
        r = np.asarray(rvalues, dtype=float)
        pts = sample.points[:, None].astype(float) if sample.categorical else sample.points
        atoms, inverse, counts = np.unique(np.column_stack([pts, r]), axis=0,
                                           return_inverse=True, return_counts=True)
        self.atom_of = inverse.reshape(-1)
        self.tot = counts.astype(float)
        self.atom_points = atoms[:, :-1] if not sample.categorical else atoms[:, 0].astype(np.int64)
        self.atom_r = atoms[:, -1]
        self.q = mixing_weights(self.atom_r, self.lambda_hat, self.n, self.m)
        self.scale = (self.n + self.m) / (self.n * self.m)
        self.kernel = None
        self._gram = None
        self._phi = None
        if self.kind in (StatisticKind.VSTAT, StatisticKind.USTAT):
            if self.kind == StatisticKind.USTAT and (self.n < 2 or self.m < 2):
                raise TooFewPoints("the U-statistic needs n >= 2 and m >= 2")
            self.kernel = (kernel or KernelSpec()).resolve(sample)
            if len(self.tot) <= GRAM_CACHE_ATOMS:
                self._gram = self._gram_block(slice(None))
            self._diag = np.diag(self._gram).copy() if self._gram is not None else self._diag_only()
        elif self.kind == StatisticKind.IPM:
            if not dictionary:
                raise EmptyDictionary("the IPM statistic needs at least one function")
            self._phi = np.vstack([np.asarray(phi(self.atom_points), dtype=float).reshape(-1)
                                   * np.ones(len(self.tot)) for phi in dictionary])
        elif self.kind == StatisticKind.DISCRETE_ABS:
            if not sample.categorical:
                raise DomainMismatch("the discrete statistic needs categorical data")
            cats = self.atom_points
            if len(np.unique(cats)) != len(cats):
                raise InvalidTable("the discrete statistic needs r constant within each category")
            J1 = sample.n_categories
            self._cat_r = np.ones(J1)
            self._cat_r[cats] = self.atom_r
            self._cats = cats

    @property
    def bandwidth(self) -> Optional[float]:
        return None if self.kernel is None or self.kernel.family == KernelFamily.COLLISION else float(self.kernel.bandwidth)

    def _gram_block(self, rows):
        pts = self.atom_points
        return gram(self.kernel.family, self.kernel.bandwidth, pts[rows], pts)

    def _diag_only(self):
        # translation-invariant kernels have a constant diagonal
        pts = self.atom_points
        k0 = gram(self.kernel.family, self.kernel.bandwidth, pts[:1], pts[:1])[0, 0]
        return np.full(len(pts), k0)

    # -- split encodings -------------------------------------------------

    def counts_from_permutations(self, sigmas) -> np.ndarray:
        """Per-atom second-sample counts for each permutation row."""
        sig = np.atleast_2d(np.asarray(sigmas, dtype=np.int64))
        U = len(self.tot)
        idx = self.atom_of[sig[:, self.n:]] + U * np.arange(sig.shape[0])[:, None]
        return np.bincount(idx.ravel(), minlength=U * sig.shape[0]).reshape(sig.shape[0], U).astype(float)

    def identity_counts(self) -> np.ndarray:
        return self.counts_from_permutations(np.arange(self.n + self.m))

    def counts_from_categories(self, w) -> np.ndarray:
        """Per-atom counts from per-category second-sample counts (categorical,
        r constant within categories)."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        cats = self.atom_points
        if len(np.unique(cats)) != len(cats):
            raise InvalidTable("category counts do not determine the split when r varies within a category")
        return w[:, cats]

    # -- evaluation ------------------------------------------------------

    def evaluate(self, y_counts) -> np.ndarray:
        """Statistic for each row of per-atom second-sample counts."""
        cy = np.atleast_2d(np.asarray(y_counts, dtype=float))
        uniq, inv = np.unique(cy, axis=0, return_inverse=True)
        vals = self._evaluate_unique(uniq)
        return vals[inv.reshape(-1)]

    def _evaluate_unique(self, cy):
        cx = self.tot - cy
        if self.kind == StatisticKind.DISCRETE_ABS:
            J1 = self.sample.n_categories
            wy = np.zeros((cy.shape[0], J1))
            tots = np.zeros(J1)
            wy[:, self._cats] = cy
            tots[self._cats] = self.tot
            return discrete_abs_rows(tots, wy, self._cat_r, self.n, self.m)
        a = self.q * cx - (1.0 - self.q) * cy
        if self.kind == StatisticKind.IPM:
            return self.scale * np.max(np.abs(a @ self._phi.T), axis=1)
        if self._gram is not None:
            quad = np.sum(a * (a @ self._gram), axis=1)
        else:
            quad = np.zeros(a.shape[0])
            U = len(self.tot)
            step = max(1, (1 << 24) // U)
            for s in range(0, U, step):
                blk = self._gram_block(slice(s, s + step))
                quad += np.sum(a[:, s:s + step] * (a @ blk.T), axis=1)
        v = self.scale**2 * quad
        if self.kind == StatisticKind.USTAT:
            diag = (self.q**2 * cx + (1.0 - self.q) ** 2 * cy) @ self._diag
            v = v - self.scale**2 * diag
        return v

    def observed(self) -> float:
        return float(self.evaluate(self.identity_counts())[0])

    @property
    def noise_floor(self) -> float:
        """Bound on the rounding error of ``evaluate``: values closer than this
        are indistinguishable in floating point."""
        N = float(self.n + self.m)
        if self.kind == StatisticKind.DISCRETE_ABS:
            r = self._cat_r / self._cat_r[0]
            mag = np.sum(np.sqrt(r) + 1.0 / np.sqrt(r)) * N * N / (self.n * self.m)
        elif self.kind == StatisticKind.IPM:
            mag = self.scale * N * float(np.max(np.abs(self._phi)))
        else:
            mag = self.scale**2 * N * N * float(np.max(np.abs(self._diag)))
        return TIE_ULPS * np.finfo(float).eps * mag


def _statistic(sample, rvalues, lambda_hat, spec, kind):
    _check_lambda(rvalues, lambda_hat, sample.n, sample.m)
    st = SplitStatistic(sample, rvalues, lambda_hat, kind, kernel=spec)
    return StatisticValue(st.observed(), kind, float(lambda_hat), st.bandwidth)


def vstat_shifted_mmd(sample: PooledSample, rvalues, lambda_hat: float, spec: KernelSpec = KernelSpec()) -> StatisticValue:
    """Shifted-MMD V-statistic (squared RKHS norm of the weighted embedding difference)."""
    return _statistic(sample, rvalues, lambda_hat, spec, StatisticKind.VSTAT)


def ustat_shifted_mmd(sample: PooledSample, rvalues, lambda_hat: float, spec: KernelSpec = KernelSpec()) -> StatisticValue:
    """Shifted-MMD statistic with the within-sample diagonal terms removed."""
    if sample.n < 2 or sample.m < 2:
        raise TooFewPoints("the U-statistic needs n >= 2 and m >= 2")
    return _statistic(sample, rvalues, lambda_hat, spec, StatisticKind.USTAT)


def shifted_mmd_direct(sample: PooledSample, rvalues, lambda_hat: float, spec: KernelSpec, diagonal: bool = True) -> float:
    """Reference evaluation of the three double sums over all point pairs, O((n+m)^2)."""
    n, m = sample.n, sample.m
    spec = spec.resolve(sample)
    r = np.asarray(rvalues, dtype=float)
    pts = sample.points
    K = gram(spec.family, spec.bandwidth, pts, pts)
    rx, ry = r[:n], r[n:]
    lam = lambda_hat
    tau = n / m
    dx = lam * rx / (tau + lam * rx)
    dy = 1.0 / (tau + lam * ry)
    Kxx, Kyy, Kxy = K[:n, :n], K[n:, n:], K[:n, n:]
    if not diagonal:
        Kxx = Kxx - np.diag(np.diag(Kxx))
        Kyy = Kyy - np.diag(np.diag(Kyy))
    c = (n + m) ** 2
    t1 = c / (n**2 * m**2) * (dx @ Kxx @ dx)
    t2 = c / m**4 * (dy @ Kyy @ dy)
    t3 = 2 * c / (n * m**3) * (dx @ Kxy @ dy)
    return float(t1 + t2 - t3)


def generic_ipm_statistic(sample: PooledSample, rvalues, lambda_hat: float, dictionary: Sequence[Callable]) -> float:
    """Maximum over a finite dictionary of the weighted mean-difference functional.

    Each function receives an array of points (``(k, d)`` or category codes)
    and returns one value per point.
    """
    if not dictionary:
        raise EmptyDictionary("the IPM statistic needs at least one function")
    _check_lambda(rvalues, lambda_hat, sample.n, sample.m)
    st = SplitStatistic(sample, rvalues, lambda_hat, StatisticKind.IPM, dictionary=dictionary)
    return st.observed()


def population_shifted_mmd(model: PopulationModel, n: int, m: int, lambda0: float,
                           spec: KernelSpec = KernelSpec(KernelFamily.COLLISION)) -> float:
    """Population shifted MMD squared of a discrete model, as finite sums over the support."""
    spec = KernelSpec(spec.family, spec.bandwidth)
    sup = model.support
    if spec.family == KernelFamily.COLLISION:
        K = np.eye(len(model.f))
    else:
        if isinstance(spec.bandwidth, str):
            raise ValueError("population_shifted_mmd needs a numeric bandwidth")
        K = gram(spec.family, spec.bandwidth, sup, sup)
    f, g, r = model.f, model.g, model.r
    den = n + lambda0 * m * r
    b = (n + m) * (lambda0 * r * f - g) / den
    return float(max(b @ K @ b, 0.0))


def discrete_abs_rows(tots, w, r, n, m) -> np.ndarray:
    """Discrete absolute-difference statistic for rows of second-sample counts."""
    tots = np.asarray(tots, dtype=float)
    w = np.atleast_2d(np.asarray(w, dtype=float))
    r = np.asarray(r, dtype=float)
    r = r / r[0]
    w0 = w[:, :1]
    terms = r[1:] ** -0.5 * w[:, 1:] * (tots[0] - w0) - r[1:] ** 0.5 * w0 * (tots[1:] - w[:, 1:])
    return np.sum(np.abs(terms), axis=1) / (n * m)


def discrete_abs_statistic(counts, r) -> float:
    """Discrete statistic for a count table (``tots``, ``w``, ``n``, ``m``)."""
    r = np.asarray(r, dtype=float)
    if r.shape != np.shape(counts.tots) or np.any(r <= 0):
        raise InvalidTable("r must be a positive vector with one entry per category")
    return float(discrete_abs_rows(counts.tots, counts.w, r, counts.n, counts.m)[0])


def count_form_vstat(tots, w, r, lambda_hat: float, n: int, m: int, ustat: bool = False) -> float:
    """Collision-kernel V (or U) statistic from category counts, O(J).

    Same normalisation as the point-level statistic.
    """
    tots = np.asarray(tots, dtype=float)
    wy = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    wx = tots - wy
    tau = n / m
    den = (tau + lambda_hat * r) ** 2
    v = np.sum((lambda_hat * r * wx / n - wy / m) ** 2 / den)
    if ustat:
        v -= np.sum(lambda_hat**2 * r**2 / den * wx / n**2) + np.sum(wy / (m**2 * den))
    return float(((n + m) / m) ** 2 * v)
