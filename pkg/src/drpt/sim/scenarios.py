"""Synthetic data generators.

Each generator takes a ``numpy.random.Generator`` so that replicate streams
can be derived from one master seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..ratio import ExpressionRatio, PooledSample, TableRatio


def sample_q(gen: np.random.Generator, size) -> np.ndarray:
    """Draws from the density ``2x`` on ``[0, 1]`` (inverse CDF ``sqrt(u)``)."""
    return np.sqrt(gen.random(size))


def sample_arcsine(gen: np.random.Generator, size) -> np.ndarray:
    """Beta(1/2, 1/2) draws via the inverse CDF ``sin^2(pi u / 2)``."""
    return np.sin(0.5 * np.pi * gen.random(size)) ** 2


def gen_bivariate_E1(eta: float, n: int, m: int, gen: np.random.Generator, prime: bool = False):
    """Uniform first sample on the unit square; second sample a mixture of
    the null law (weight ``1/(1+eta)``) and an arcsine product law.

    The null law has density ``4 x1 x2`` (``2 x1`` with ``prime=True``)
    relative to the uniform.
    """
    if not 0 <= eta <= 0.8:
        raise ValueError("eta must lie in [0, 0.8]")
    x = gen.random((n, 2))
    null = np.column_stack([sample_q(gen, m), sample_q(gen, m) if not prime else gen.random(m)])
    alt = sample_arcsine(gen, (m, 2))
    pick_alt = gen.random(m) < eta / (1 + eta)
    y = np.where(pick_alt[:, None], alt, null)
    ratio = ExpressionRatio("2*x1" if prime else "4*x1*x2")
    return PooledSample.from_samples(x, y), ratio


def gen_binary_E3(eta: float, n: int, m: int, gen: np.random.Generator):
    """Bernoulli(1/2) against Bernoulli(3(1-eta)/4 + eta/4) with ``r = (1, 3)``."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    p1 = 0.75 * (1 - eta) + 0.25 * eta
    x = (gen.random(n) < 0.5).astype(np.int64)
    y = (gen.random(m) < p1).astype(np.int64)
    return PooledSample.from_categories(x, y, 2), TableRatio.from_sequence([1.0, 3.0])


def gen_binary(f1: float, g1: float, r: float, n: int, m: int, gen: np.random.Generator):
    x = (gen.random(n) < f1).astype(np.int64)
    y = (gen.random(m) < g1).astype(np.int64)
    return PooledSample.from_categories(x, y, 2), TableRatio.from_sequence([1.0, r])


def gen_gaussian_misspec(mu: float, nu: float, n: int, m: int, gen: np.random.Generator):
    """``N(0,1)`` against ``N(mu,1)``, tested with the ratio of a shift ``nu``."""
    x = gen.standard_normal((n, 1))
    y = gen.standard_normal((m, 1)) + mu
    return PooledSample.from_samples(x, y), ExpressionRatio("exp(nu*x - nu^2/2)", {"nu": nu})


def misspec_tv_bound(m: int, mu: float, nu: float) -> float:
    """Total-variation distance between the ``m``-fold products of
    ``N(mu,1)`` and ``N(nu,1)``: ``2 Phi(sqrt(m)|mu-nu|/2) - 1``."""
    return float(2 * norm.cdf(math.sqrt(m) * abs(mu - nu) / 2) - 1)


@dataclass(frozen=True)
class CausalDesign:
    """Propensity model ``P(D=1|z) = 1/(1+exp(eta(z)))`` with
    ``eta(z) = beta0 + beta.z + gamma (sin(10 z1) + z2 z3)`` and
    ``Z ~ N(0, scale^2 I)``.

    With ``scale = 1`` the interaction term is too weak for a 200-unit test
    sample to detect a linear fit (power near 0.2 at ``gamma = 2``); a pilot
    study put the default at ``scale = 3``.
    """

    beta0: float = 0.0
    beta: tuple = (0.2, -0.2, 0.15, 0.15, -0.05, 0.05, 0.0, 0.0, 0.0, 0.0)
    scale: float = 3.0

    @property
    def dim(self) -> int:
        return len(self.beta)

    def eta(self, z: np.ndarray, gamma: float) -> np.ndarray:
        return self.beta0 + z @ np.asarray(self.beta) + gamma * (np.sin(10 * z[:, 0]) + z[:, 1] * z[:, 2])

    def log_ratio_shape(self, z: np.ndarray, gamma: float) -> np.ndarray:
        """Log of the treated-over-control covariate density ratio, up to a constant."""
        return -self.eta(z, gamma)


def gen_causal_propensity(gamma: float, N: int, gen: np.random.Generator, design: CausalDesign = CausalDesign()):
    """Covariates ``Z`` and treatment labels ``D``."""
    z = design.scale * gen.standard_normal((N, design.dim))
    d = (gen.random(N) < 1.0 / (1.0 + np.exp(design.eta(z, gamma)))).astype(np.int64)
    return z, d


def causal_sample(gamma: float, N: int, gen: np.random.Generator, design: CausalDesign = CausalDesign()) -> PooledSample:
    """Controls as the first sample, treated units as the second."""
    z, d = gen_causal_propensity(gamma, N, gen, design)
    if d.min() == d.max():
        raise ValueError("all units received the same treatment")
    return PooledSample.from_samples(z[d == 0], z[d == 1])
