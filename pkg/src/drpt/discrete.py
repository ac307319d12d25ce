"""Exact resampling for categorical data.

Under the weighted permutation law the vector of second-sample category
counts follows Fisher's multivariate noncentral hypergeometric distribution,
which can be sampled exactly and independently instead of by MCMC.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, gammaln, logsumexp

from . import rng
from .errors import InfeasibleTotals, InvalidTable, OutOfRange, TooLarge
from .ratio import PooledSample

LATTICE_LIMIT = 10**6
# terms more than this many nats below their peak are dropped (relative weight < 2e-22)
WINDOW_NATS = 50.0


@dataclass(frozen=True)
class CountTable:
    """Pooled per-category counts ``tots`` and second-sample counts ``w``."""

    tots: np.ndarray
    w: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        tots = np.asarray(self.tots, dtype=np.int64).reshape(-1)
        w = np.asarray(self.w, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "tots", tots)
        object.__setattr__(self, "w", w)
        if tots.shape != w.shape or tots.size == 0:
            raise InvalidTable("tots and w must be nonempty vectors of equal length")
        if self.n < 1 or self.m < 1:
            raise InvalidTable("n and m must be positive")
        if tots.sum() != self.n + self.m or w.sum() != self.m:
            raise InvalidTable("counts do not add up to n + m and m")
        if np.any(w < np.maximum(0, tots - self.n)) or np.any(w > np.minimum(self.m, tots)):
            raise InvalidTable("second-sample counts outside their feasible range")

    def to_json(self) -> str:
        return json.dumps({"tots": self.tots.tolist(), "w": self.w.tolist(), "n": int(self.n), "m": int(self.m)})

    @classmethod
    def from_json(cls, text: str) -> "CountTable":
        d = json.loads(text)
        return cls(np.array(d["tots"]), np.array(d["w"]), int(d["n"]), int(d["m"]))


def tabulate(sample: PooledSample) -> CountTable:
    if not sample.categorical:
        raise InvalidTable("tabulate needs a categorical sample")
    J1 = sample.n_categories
    tots = np.bincount(sample.points, minlength=J1)
    w = np.bincount(sample.second, minlength=J1)
    return CountTable(tots, w, sample.n, sample.m)


def _check_totals(tots, n, m):
    tots = np.asarray(tots, dtype=np.int64).reshape(-1)
    if tots.size == 0 or np.any(tots < 0) or n < 1 or m < 1 or tots.sum() != n + m:
        raise InfeasibleTotals(f"category totals {tots.tolist()} are incompatible with n={n}, m={m}")
    return tots


def _normalised_log_r(r, size):
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.size != size:
        raise InvalidTable("r must have one entry per category")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise InvalidTable("r must be finite and positive")
    return np.log(r) - np.log(r).min()


def lattice_size(tots, m: int, cap: int = LATTICE_LIMIT) -> int:
    """Number of feasible ``w`` vectors (saturating at ``cap + 1``)."""
    ways = np.zeros(m + 1, dtype=np.int64)
    ways[0] = 1
    for t in np.asarray(tots, dtype=np.int64):
        c = np.cumsum(ways)
        new = c.copy()
        new[t + 1:] -= c[: m + 1 - (t + 1)] if t + 1 <= m else 0
        ways = np.minimum(new, cap + 1)
    return int(ways[m])


def _log_terms(tots, logr):
    """Per-category log weights ``w log r + log C(tot, w)`` for ``w = 0..tot``."""
    out = []
    for t, lr in zip(tots, logr):
        w = np.arange(t + 1)
        out.append(w * lr + gammaln(t + 1) - gammaln(w + 1) - gammaln(t - w + 1))
    return out


def _enumerate(tots, m):
    """All feasible ``w`` vectors in lexicographic order."""
    rows = [[]]
    rest = np.concatenate([np.cumsum(tots[::-1])[::-1][1:], [0]])
    for k, t in enumerate(tots):
        nxt = []
        for row in rows:
            s = m - sum(row)
            for v in range(max(0, s - int(rest[k])), min(int(t), s) + 1):
                nxt.append(row + [v])
        rows = nxt
    return np.array(rows, dtype=np.int64).reshape(-1, len(tots))


def _enumerated_pmf(tots, r, n, m):
    tots = _check_totals(tots, n, m)
    logr = _normalised_log_r(r, tots.size)
    if lattice_size(tots, m) > LATTICE_LIMIT:
        raise TooLarge("feasible lattice exceeds the enumeration limit")
    states = _enumerate(tots, m)
    if states.shape[0] == 0:
        raise InfeasibleTotals("no feasible second-sample counts")
    terms = _log_terms(tots, logr)
    logw = np.zeros(states.shape[0])
    for k in range(tots.size):
        logw += terms[k][states[:, k]]
    return states, np.exp(logw - logsumexp(logw))


def fisher_ncmh_pmf(tots, r, n: int, m: int) -> dict:
    """Map from feasible ``w`` tuples to probabilities."""
    states, p = _enumerated_pmf(tots, r, n, m)
    return {tuple(int(v) for v in s): float(pk) for s, pk in zip(states, p)}


def _tilt(tots, logr, m):
    """Shift ``theta`` added to every ``log r`` so that independent binomials
    with success odds ``r e^theta`` have total mean ``m``; the pmf is unchanged."""
    def excess(theta):
        return float(np.sum(tots * expit(logr + theta))) - m

    lo, hi = -logr.max() - 1.0, 1.0
    while excess(lo) > 0:
        lo = 2 * lo - 1
    while excess(hi) < 0:
        hi = 2 * hi + 1
    return brentq(excess, lo, hi, xtol=1e-12)


def _windows(tots, logr, m):
    """Tilted per-category log weights, each truncated to the contiguous range
    within ``WINDOW_NATS`` of its maximum (the terms are log-concave)."""
    theta = _tilt(tots, logr, m)
    out = []
    for t in _log_terms(tots, logr + theta):
        keep = np.nonzero(t >= t.max() - WINDOW_NATS)[0]
        out.append((int(keep[0]), t[keep[0]:keep[-1] + 1]))
    return out


def _log_convolve(a, b):
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    out = np.full(len(a) + len(b) - 1, -np.inf)
    for i, v in enumerate(short):
        out[i:i + len(long_)] = np.logaddexp(out[i:i + len(long_)], v + long_)
    return out


def _tail_tables(terms):
    """``L[k] = (offset, arr)``: log total weight of categories ``k..J``
    summing to ``offset + i``."""
    L = [None] * (len(terms) + 1)
    L[-1] = (0, np.zeros(1))
    for k in range(len(terms) - 1, -1, -1):
        off, arr = terms[k]
        L[k] = (off + L[k + 1][0], _log_convolve(arr, L[k + 1][1]))
    return L


def _sample_sequential(tots, logr, m, u):
    """Exact draws by sampling each category count from its conditional
    marginal given the earlier ones (log-space generating-function recursion)."""
    terms = _windows(tots, logr, m)
    L = _tail_tables(terms)
    H, J1 = u.shape[0], tots.size
    if not L[0][0] <= m < L[0][0] + len(L[0][1]):
        raise InfeasibleTotals("no feasible second-sample counts")
    out = np.zeros((H, J1), dtype=np.int64)
    remaining = np.full(H, m, dtype=np.int64)
    for k in range(J1 - 1):
        off, arr = terms[k]
        toff, tarr = L[k + 1]
        for s in np.unique(remaining):
            idx = np.nonzero(remaining == s)[0]
            lo, hi = max(off, s - (toff + len(tarr) - 1)), min(off + len(arr) - 1, s - toff)
            v = np.arange(lo, hi + 1)
            lp = arr[v - off] + tarr[s - v - toff]
            cdf = np.cumsum(np.exp(lp - logsumexp(lp)))
            pick = np.minimum(np.searchsorted(cdf, u[idx, k] * cdf[-1], side="right"), len(v) - 1)
            out[idx, k] = v[pick]
        remaining = remaining - out[:, k]
    out[:, J1 - 1] = remaining
    return out


def sample_counts(tots, r, n: int, m: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` independent draws of ``w`` as a ``(count, J+1)`` integer array.

    Draw ``h`` uses the counter stream ``(seed, "fisher", h)``, so any prefix
    of the draws is reproducible on its own.
    """
    tots = _check_totals(tots, n, m)
    logr = _normalised_log_r(r, tots.size)
    keys = rng.derive_keys(rng.derive_key(seed, "fisher"), np.arange(count))
    if lattice_size(tots, m) <= LATTICE_LIMIT:
        states, p = _enumerated_pmf(tots, np.exp(logr), n, m)
        cdf = np.cumsum(p)
        u = rng.uniforms(keys, 1)[:, 0]
        pick = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(p) - 1)
        return states[pick]
    return _sample_sequential(tots, logr, m, rng.uniforms(keys, tots.size))


def sample_count_table(tots, r, n: int, m: int, count: int, seed: int = 0) -> list:
    return [CountTable(tots, w, n, m) for w in sample_counts(tots, r, n, m, count, seed)]


def gamma1(f1: float, g1: float, r: float, tau: float) -> float:
    """Limiting share of category 1 among permuted second-sample points
    (binary data, ratio ``(1, r)``, ``n/m -> tau``)."""
    for name, v, lo, hi in (("f1", f1, 0.0, 1.0), ("g1", g1, 0.0, 1.0)):
        if not (lo <= v <= hi):
            raise OutOfRange(f"{name}={v} must lie in [0, 1]")
    if not (r > 0 and math.isfinite(r)) or not (tau > 0 and math.isfinite(tau)):
        raise OutOfRange("r and tau must be finite and positive")
    if r < 1:
        # swap the category labels; the ratio becomes 1/r
        return 1.0 - gamma1(1.0 - f1, 1.0 - g1, 1.0 / r, tau)
    a = tau * f1 + g1
    base = a / (tau + 1)
    if r == 1:
        return base
    b = (r - 1) * ((tau - 1) / (tau + 1)) * a + tau + r
    disc = (tau + r + (r - 1) * a) ** 2 - 4 * (r - 1) * r * a
    # rationalised form of (b - sqrt(disc)) / (2 (r - 1)); no cancellation near r = 1
    tail = 2 * a * tau * (r - 1) * (tau + 1 - a) / ((tau + 1) ** 2 * (b + math.sqrt(max(disc, 0.0))))
    return min(max(base + tail, 0.0), 1.0)
