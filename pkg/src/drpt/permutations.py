"""Weighted permutation sampling.

The target law on permutations puts mass proportional to the product of
``r(Z_sigma(p))`` over the last ``m`` positions ``p``.  It is sampled with a
pairwise-swap Markov chain; independent copies exchangeable with the data are
produced by the star scheme (hub chain from the identity, then ``H`` chains
from the hub).
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .errors import TooLarge
from .ratio import PooledSample, solve_lambda_hat

ENUMERATION_LIMIT = 12


class Acceptance(str, enum.Enum):
    PLAIN = "plain"
    WEIGHTED = "weighted"


def acceptance_plain(r_i, r_j):
    """Swap probability ``r_i / (r_i + r_j)``; ``r_i`` is the first-sample point."""
    r_i = np.asarray(r_i, dtype=float)
    return r_i / (r_i + np.asarray(r_j, dtype=float))


def acceptance_weighted(r_i, r_j, lambda_hat: float, n: int, m: int):
    """Swap probability ``lam m n r_i / ((n + lam m r_i)(n + lam m r_j))``."""
    a = lambda_hat * m * np.asarray(r_i, dtype=float)
    b = lambda_hat * m * np.asarray(r_j, dtype=float)
    return (a * n) / ((n + a) * (n + b))


def default_sweeps(n: int, m: int) -> int:
    return int(math.ceil(8 * max(n / m, m / n) * math.log(n + m)))


@dataclass(frozen=True)
class ChainConfig:
    sweeps: Optional[int] = None
    variant: Acceptance = Acceptance.PLAIN
    copies: int = 1
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        object.__setattr__(self, "variant", Acceptance(self.variant))

    def resolved_sweeps(self, n: int, m: int) -> int:
        return self.sweeps if self.sweeps is not None else default_sweeps(n, m)


def _acceptance(variant, r_i, r_j, lam, n, m):
    if variant == Acceptance.PLAIN:
        return acceptance_plain(r_i, r_j)
    return acceptance_weighted(r_i, r_j, lam, n, m)


def _run_chains(start, rvalues, n, m, keys, sweeps, variant, lam, first_step=0):
    """Advance a batch of chains; row ``c`` uses the stream ``keys[c]``."""
    sig = np.array(start, dtype=np.int64, copy=True)
    r = np.asarray(rvalues, dtype=float)
    rv = r[sig]
    K = min(n, m)
    side = m if n <= m else n
    rows = np.arange(sig.shape[0])[:, None]
    for t in range(first_step, first_step + sweeps):
        u = rng.uniforms(rng.step_keys(keys, t), side + K)
        # uniform ordered K-subset of the larger side, matched to the whole
        # smaller side: the same law as two independent partial shuffles
        pick = np.argsort(u[:, :side], axis=1, kind="stable")[:, :K]
        if n <= m:
            ipos = np.broadcast_to(np.arange(n), pick.shape)
            jpos = pick + n
        else:
            ipos = pick
            jpos = np.broadcast_to(np.arange(n, n + m), pick.shape)
        ri = np.take_along_axis(rv, ipos, axis=1)
        rj = np.take_along_axis(rv, jpos, axis=1)
        acc = u[:, side:] < _acceptance(variant, ri, rj, lam, n, m)
        rr, cc = np.nonzero(acc)
        a, b = ipos[rr, cc], jpos[rr, cc]
        sig[rr, a], sig[rr, b] = sig[rr, b], sig[rr, a].copy()
        rv[rr, a], rv[rr, b] = rv[rr, b], rv[rr, a].copy()
    return sig


def run_chains(start, rvalues, n, m, keys, sweeps, variant=Acceptance.PLAIN, lambda_hat=None,
               workers: int = 1, first_step: int = 0):
    """Run ``len(keys)`` chains for ``sweeps`` sweeps each.

    ``start`` is a single permutation (shared start) or one row per chain.
    Output does not depend on ``workers``.
    """
    variant = Acceptance(variant)
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    start = np.asarray(start, dtype=np.int64)
    if start.ndim == 1:
        start = np.broadcast_to(start, (len(keys), start.size))
    if variant == Acceptance.WEIGHTED and lambda_hat is None:
        lambda_hat = solve_lambda_hat((n, m), rvalues).value
    N = n + m
    chunk = max(1, min(len(keys), (1 << 21) // (N + min(n, m))))
    if workers > 1:
        chunk = max(1, min(chunk, -(-len(keys) // workers)))
    bounds = [(s, min(s + chunk, len(keys))) for s in range(0, len(keys), chunk)]

    def job(b):
        lo, hi = b
        return _run_chains(start[lo:hi], rvalues, n, m, keys[lo:hi], sweeps, variant, lambda_hat, first_step)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    return np.concatenate(parts, axis=0)


def sweep(sigma, rvalues, n: int, m: int, key: int, step: int = 0,
          variant: Acceptance = Acceptance.PLAIN, lambda_hat: Optional[float] = None) -> np.ndarray:
    """One sweep of the pairwise sampler on a single permutation."""
    out = run_chains(np.asarray(sigma)[None, :], rvalues, n, m, np.array([key], dtype=np.uint64), 1,
                     variant, lambda_hat, first_step=step)
    return out[0]


def run_star_scheme(sample: PooledSample, rvalues, config: ChainConfig):
    """Hub permutation (from the identity) and ``H`` copies run from the hub."""
    n, m = sample.n, sample.m
    S = config.resolved_sweeps(n, m)
    lam = solve_lambda_hat(sample, rvalues).value if config.variant == Acceptance.WEIGHTED else None
    hub_key = np.array([rng.derive_key(config.seed, "hub")], dtype=np.uint64)
    identity = np.arange(sample.size)
    sigma_star = run_chains(identity, rvalues, n, m, hub_key, S, config.variant, lam)[0]
    copy_keys = rng.derive_keys(rng.derive_key(config.seed, "copies"), np.arange(config.copies))
    copies = run_chains(sigma_star, rvalues, n, m, copy_keys, S, config.variant, lam, workers=config.workers)
    return sigma_star, copies


# ---------------------------------------------------------------------------
# enumeration oracles


def split_of(sigma, n: int) -> tuple:
    """Pooled indices occupying the last ``m`` positions, sorted."""
    return tuple(sorted(int(i) for i in np.asarray(sigma)[n:]))


def exact_permutation_distribution(sample: PooledSample, rvalues) -> dict:
    """Exact law of the induced split under the weighted permutation law.

    Keys are the sorted tuples of pooled indices sent to the second sample.
    """
    N, m = sample.size, sample.m
    if N > ENUMERATION_LIMIT:
        raise TooLarge(f"enumeration is limited to n+m <= {ENUMERATION_LIMIT}")
    r = np.asarray(rvalues, dtype=float)
    logr = np.log(r)
    splits = list(itertools.combinations(range(N), m))
    logw = np.array([logr[list(s)].sum() for s in splits])
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return dict(zip(splits, w.tolist()))


def permutation_weights(rvalues, n: int, states) -> np.ndarray:
    """Normalised target probabilities for an explicit list of permutations."""
    logr = np.log(np.asarray(rvalues, dtype=float))
    lw = np.array([logr[list(s[n:])].sum() for s in states])
    w = np.exp(lw - lw.max())
    return w / w.sum()


def one_sweep_transitions(rvalues, n: int, m: int, variant=Acceptance.PLAIN, lambda_hat=None):
    """Exact one-sweep transition matrix over all permutations (small ``n+m``).

    Enumerates every ordered draw of the pair vector exactly as written in the
    pairwise algorithm (ordered ``K``-samples without replacement from each
    side) and every accept/reject pattern.  Returns ``(states, P)``.
    """
    N = n + m
    if N > 7:
        raise TooLarge("transition enumeration is limited to n+m <= 7")
    variant = Acceptance(variant)
    r = np.asarray(rvalues, dtype=float)
    if variant == Acceptance.WEIGHTED and lambda_hat is None:
        lambda_hat = solve_lambda_hat((n, m), r).value
    K = min(n, m)
    states = list(itertools.permutations(range(N)))
    index = {s: k for k, s in enumerate(states)}
    iseqs = list(itertools.permutations(range(n), K))
    jseqs = list(itertools.permutations(range(n, N), K))
    pdraw = 1.0 / (len(iseqs) * len(jseqs))
    P = np.zeros((len(states), len(states)))
    for a, s in enumerate(states):
        for iseq in iseqs:
            for jseq in jseqs:
                probs = [float(_acceptance(variant, r[s[i]], r[s[j]], lambda_hat, n, m)) for i, j in zip(iseq, jseq)]
                for pattern in itertools.product((0, 1), repeat=K):
                    pr = pdraw
                    t = list(s)
                    for bit, p, i, j in zip(pattern, probs, iseq, jseq):
                        pr *= p if bit else 1 - p
                        if bit:
                            t[i], t[j] = t[j], t[i]
                    P[a, index[tuple(t)]] += pr
    return states, P


def permutation_json(sigma) -> str:
    return json.dumps([int(i) for i in np.asarray(sigma)])
