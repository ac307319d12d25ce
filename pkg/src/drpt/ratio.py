"""Pooled samples, hypothesised ratio functions and their normalising constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from . import expr
from .errors import DomainMismatch, NoBracket, NoConvergence, NonPositiveRatio

LAMBDA_TOL = 1e-12
LAMBDA_MAXITER = 200


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PooledSample:
    """The combined data ``(X_1..X_n, Y_1..Y_m)``.

    ``points`` has shape ``(n+m, d)`` for real vectors, or ``(n+m,)`` integer
    codes in ``0..n_categories-1`` for categorical data (``dim == 0``).
    """

    points: np.ndarray
    n: int
    m: int
    n_categories: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points)
        if self.n < 1 or self.m < 1:
            raise ValueError(f"both samples must be non-empty (n={self.n}, m={self.m})")
        if pts.shape[0] != self.n + self.m:
            raise ValueError(f"expected {self.n + self.m} points, got {pts.shape[0]}")
        if self.n_categories is not None:
            if pts.ndim != 1 or not np.issubdtype(pts.dtype, np.integer):
                raise ValueError("categorical points must be a 1-d integer array")
            if pts.min() < 0 or pts.max() >= self.n_categories:
                raise DomainMismatch(f"category codes must lie in 0..{self.n_categories - 1}")
            pts = pts.astype(np.int64)
        else:
            pts = np.asarray(pts, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2:
                raise ValueError("continuous points must have shape (n+m, d)")
            if not np.all(np.isfinite(pts)):
                raise ValueError("all coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def from_samples(cls, x, y) -> "PooledSample":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        return cls(np.vstack([x, y]), len(x), len(y))

    @classmethod
    def from_categories(cls, x, y, n_categories: Optional[int] = None) -> "PooledSample":
        pts = np.concatenate([np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)])
        if n_categories is None:
            n_categories = int(pts.max()) + 1 if pts.size else 1
        return cls(pts, len(x), len(y), n_categories=max(int(n_categories), 1))

    @property
    def categorical(self) -> bool:
        return self.n_categories is not None

    @property
    def dim(self) -> int:
        return 0 if self.categorical else self.points.shape[1]

    @property
    def size(self) -> int:
        return self.n + self.m

    @property
    def first(self) -> np.ndarray:
        return self.points[: self.n]

    @property
    def second(self) -> np.ndarray:
        return self.points[self.n:]

    def permuted(self, sigma: np.ndarray) -> "PooledSample":
        """The sample ``Z_sigma``, i.e. position ``p`` holds ``Z[sigma[p]]``."""
        return PooledSample(self.points[np.asarray(sigma)], self.n, self.m, self.n_categories)

    def swapped(self) -> "PooledSample":
        """Roles of the two samples exchanged (second sample first)."""
        order = np.r_[np.arange(self.n, self.size), np.arange(self.n)]
        return PooledSample(self.points[order], self.m, self.n, self.n_categories)


# ---------------------------------------------------------------------------
# ratio functions


class RatioFunction:
    """A hypothesised unnormalised ratio ``r`` with ``g ∝ r f`` under the null."""

    def raw(self, points: np.ndarray, index: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def values(self, sample: PooledSample) -> np.ndarray:
        """``r(Z_i)`` for every pooled point, validated positive and finite."""
        if isinstance(self, PrecomputedRatio) and len(self.rvalues) != sample.size:
            raise DomainMismatch(f"precomputed ratio has {len(self.rvalues)} values for {sample.size} points")
        v = self.raw(sample.points, np.arange(sample.size))
        return check_positive(v)


def check_positive(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    bad = ~np.isfinite(v) | (v <= 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonPositiveRatio(f"ratio must be finite and > 0; got {v[i]!r} at point {i}")
    return v


@dataclass(frozen=True)
class TableRatio(RatioFunction):
    """Ratio over categories, ``table[j] = r_j``."""

    table: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "table", {int(k): float(v) for k, v in dict(self.table).items()})

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "TableRatio":
        return cls({j: v for j, v in enumerate(seq)})

    def as_array(self, n_categories: int) -> np.ndarray:
        missing = [j for j in range(n_categories) if j not in self.table]
        if missing:
            raise DomainMismatch(f"ratio table has no entry for categories {missing}")
        return np.array([self.table[j] for j in range(n_categories)])

    def raw(self, points, index=None):
        pts = np.asarray(points)
        if pts.ndim != 1 or not np.issubdtype(pts.dtype, np.integer):
            raise DomainMismatch("a table ratio needs categorical data")
        try:
            return np.array([self.table[int(c)] for c in pts], dtype=float)
        except KeyError as exc:
            raise DomainMismatch(f"category {exc.args[0]} not in ratio table") from None

    def reciprocal(self) -> "TableRatio":
        return TableRatio({k: 1.0 / v for k, v in self.table.items()})


@dataclass(frozen=True)
class PrecomputedRatio(RatioFunction):
    """Per-point ratio values aligned with a particular pooled sample."""

    rvalues: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rvalues", _frozen(np.asarray(self.rvalues, dtype=float)))

    def raw(self, points, index=None):
        if index is None:
            raise DomainMismatch("a precomputed ratio is evaluated by position; pass index")
        return self.rvalues[np.asarray(index)]


@dataclass(frozen=True)
class ExpressionRatio(RatioFunction):
    """Ratio given by an arithmetic expression in ``x1..xd``, e.g. ``"4*x1*x2"``."""

    text: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        tree = expr.parse(self.text)
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        object.__setattr__(self, "_tree", tree)

    def raw(self, points, index=None):
        return expr.evaluate(self._tree, points, self.params)

    def with_params(self, **params) -> "ExpressionRatio":
        return ExpressionRatio(self.text, {**self.params, **params})

    def free_names(self) -> set:
        return {n for n in expr.names(self._tree) if n not in self.params and not expr._COORD.match(n)} - set(expr._CONSTS)


def constant_ratio(c: float = 1.0) -> ExpressionRatio:
    return ExpressionRatio(repr(float(c)))


def eval_ratio(r: RatioFunction, z, index: Optional[int] = None) -> float:
    """``r(z)`` for a single observation (``index`` for precomputed ratios)."""
    if isinstance(r, PrecomputedRatio):
        if index is None:
            raise DomainMismatch("a precomputed ratio is evaluated by position; pass index")
        v = r.rvalues[int(index)]
    elif isinstance(r, TableRatio):
        v = r.raw(np.array([z], dtype=np.int64))[0]
    else:
        pts = np.atleast_1d(np.asarray(z, dtype=float))[None, :]
        v = r.raw(pts)[0]
    return float(check_positive([v])[0])


# ---------------------------------------------------------------------------
# normalising constants


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    residual: float
    iterations: int


def _normalizer(r: np.ndarray, weights: np.ndarray, n: int, m: int) -> LambdaEstimate:
    # root of  sum_i w_i (n+m)/(n + lam m r_i) = 1, w a probability vector
    r = np.asarray(r, dtype=float)
    w = np.asarray(weights, dtype=float)
    if n < 1 or m < 1 or r.size == 0:
        raise NoBracket("need n, m >= 1 and at least one ratio value")
    if not (np.all(np.isfinite(r)) and np.all(r > 0)):
        raise NoBracket("ratio values must be finite and positive")
    keep = w > 0
    r, w = r[keep], w[keep]
    N = n + m

    def F(lam):
        return float(np.sum(w * N / (n + lam * m * r))) - 1.0

    lo = 1.0 / float(np.sum(w * r))
    hi = float(np.sum(w / r))
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = F(lo), F(hi)
    if abs(flo) <= LAMBDA_TOL:
        return LambdaEstimate(lo, flo, 0)
    if abs(fhi) <= LAMBDA_TOL:
        return LambdaEstimate(hi, fhi, 0)
    widen = 0
    while flo < 0 or fhi > 0:
        # rounding at the bracket ends; the bracket holds in exact arithmetic
        widen += 1
        if widen > 60:
            raise NoBracket(f"no sign change on [{lo}, {hi}]")
        lo, hi = lo * (1 - 1e-12 * 2**widen), hi * (1 + 1e-12 * 2**widen)
        flo, fhi = F(lo), F(hi)
    try:
        root, info = brentq(F, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                            maxiter=LAMBDA_MAXITER, full_output=True, disp=False)
    except RuntimeError as exc:  # pragma: no cover - brentq only raises on bad brackets here
        raise NoConvergence(str(exc)) from None
    res = F(root)
    if not info.converged or abs(res) > LAMBDA_TOL:
        raise NoConvergence(f"normaliser residual {res:.3g} after {info.iterations} iterations")
    return LambdaEstimate(float(root), res, int(info.iterations))


def solve_lambda_hat(sample: Union[PooledSample, tuple], rvalues) -> LambdaEstimate:
    """Solve ``sum_i 1/(n + lam m r_i) = 1`` for the empirical normaliser.

    ``sample`` may be a :class:`PooledSample` or an ``(n, m)`` pair.
    """
    n, m = (sample.n, sample.m) if isinstance(sample, PooledSample) else sample
    r = np.asarray(rvalues, dtype=float)
    if r.size != n + m:
        raise ValueError(f"expected {n + m} ratio values, got {r.size}")
    return _normalizer(r, np.full(r.size, 1.0 / r.size), n, m)


@dataclass(frozen=True)
class PopulationModel:
    """Discrete population ``(f, g, r)`` on ``J+1`` support points."""

    f: np.ndarray
    g: np.ndarray
    r: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        f, g, r = (np.asarray(a, dtype=float) for a in (self.f, self.g, self.r))
        if not (f.shape == g.shape == r.shape and f.ndim == 1):
            raise ValueError("f, g and r must be vectors of equal length")
        if np.any(f < 0) or np.any(g < 0) or abs(f.sum() - 1) > 1e-12 or abs(g.sum() - 1) > 1e-12:
            raise ValueError("f and g must be probability vectors")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise NonPositiveRatio("r must be positive")
        sup = np.arange(f.size, dtype=float) if self.support is None else np.asarray(self.support, dtype=float)
        if sup.ndim == 1:
            sup = sup[:, None]
        for name, a in (("f", f), ("g", g), ("r", r), ("support", sup)):
            object.__setattr__(self, name, _frozen(a))

    @classmethod
    def null_model(cls, f, r) -> "PopulationModel":
        """The model with ``g ∝ r f``."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(r, dtype=float) * f
        return cls(f, g / g.sum(), r)


def solve_lambda_zero(model: PopulationModel, n: int, m: int) -> float:
    """Population normaliser: ``sum_j (n f_j + m g_j)/(n + lam m r_j) = 1``."""
    w = (n * model.f + m * model.g) / (n + m)
    return _normalizer(model.r, w, n, m).value


def mixing_weights(rvalues, lam: float, n: int, m: int) -> np.ndarray:
    """``q_i = lam m r_i / (n + lam m r_i)``: weight of a point when in the first sample."""
    lr = lam * m * np.asarray(rvalues, dtype=float)
    return lr / (n + lr)
