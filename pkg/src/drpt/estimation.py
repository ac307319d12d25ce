"""Density-ratio estimation by probabilistic classification.

A logistic model for the probability that a point came from the second sample
gives ``r_hat(z) = (n/m) p(z) / (1 - p(z)) = (n/m) exp(logit(z))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

from . import rng
from .errors import EstimatorFailure, SeparableData
from .ratio import PooledSample
from .statistics import KernelFamily, KernelSpec, gram

CLIP_LO = 1e-6
CLIP_HI = 1e6
GRAD_TOL = 1e-8
MAX_NEWTON = 500
# multiples of the median-heuristic bandwidth tried by cross-validation
CV_FACTORS = (0.25, 0.5, 1.0, 2.0)


@dataclass
class LogisticModel:
    """Fitted logistic membership model.

    ``weights`` excludes the intercept.  For the kernel kind, features are
    ``k(z, c) / k(c, c)`` over ``centers``.  ``clip_events`` counts ratio
    predictions clipped to ``[1e-6, 1e6]``.
    """

    kind: str
    weights: np.ndarray
    intercept: float
    ridge: float
    n_train: int
    m_train: int
    centers: Optional[np.ndarray] = None
    kernel: Optional[KernelSpec] = None
    iterations: int = 0
    grad_norm: float = 0.0
    clip_events: int = field(default=0, compare=False)

    @property
    def prior(self) -> float:
        return self.m_train / (self.n_train + self.m_train)

    def features(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if self.kind == "linear":
            return z
        return _kernel_features(self.kernel, self.centers, z)

    def logit(self, z) -> np.ndarray:
        return self.features(z) @ self.weights + self.intercept

    def predict_ratio(self, z) -> np.ndarray:
        return predict_ratio(self, z)

    def to_json(self) -> str:
        d = {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "ridge": self.ridge,
            "n_train": self.n_train,
            "m_train": self.m_train,
            "centers": None if self.centers is None else self.centers.tolist(),
            "kernel": None if self.kernel is None else {"family": self.kernel.family.value, "bandwidth": self.kernel.bandwidth},
        }
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        d = json.loads(text)
        kernel = None if d["kernel"] is None else KernelSpec(d["kernel"]["family"], d["kernel"]["bandwidth"])
        centers = None if d["centers"] is None else np.array(d["centers"], dtype=float)
        return cls(d["kind"], np.array(d["weights"], dtype=float), float(d["intercept"]), float(d["ridge"]),
                   int(d["n_train"]), int(d["m_train"]), centers, kernel)


def _kernel_features(spec, centers, z):
    k = gram(spec.family, spec.bandwidth, z, centers)
    return k / gram(spec.family, spec.bandwidth, centers[:1], centers[:1])[0, 0]


def predict_ratio(model: LogisticModel, z) -> np.ndarray:
    """``r_hat(z)``, clipped to ``[1e-6, 1e6]``; clipped points are counted."""
    logr = np.log(model.n_train / model.m_train) + model.logit(z)
    lo, hi = np.log(CLIP_LO), np.log(CLIP_HI)
    clipped = (logr < lo) | (logr > hi) | ~np.isfinite(logr)
    model.clip_events += int(np.count_nonzero(clipped))
    out = np.exp(np.clip(np.nan_to_num(logr, nan=0.0), lo, hi))
    out[logr >= hi] = CLIP_HI
    out[logr <= lo] = CLIP_LO
    return out


def logistic_objective(params, X, y, ridge):
    """Mean negative log-likelihood plus ``ridge/2 |w|^2`` (intercept unpenalised).

    ``params`` is ``(w..., b)``.  Returns ``(value, gradient)``.
    """
    w, b = params[:-1], params[-1]
    eta = X @ w + b
    nll = -np.mean(y * log_expit(eta) + (1 - y) * log_expit(-eta))
    value = nll + 0.5 * ridge * float(w @ w)
    resid = expit(eta) - y
    grad = np.r_[X.T @ resid / len(y) + ridge * w, resid.mean()]
    return float(value), grad


def _newton(X, y, ridge, max_iter=MAX_NEWTON, tol=GRAD_TOL, start=None):
    N, p = X.shape
    A = np.column_stack([X, np.ones(N)])
    theta = np.zeros(p + 1) if start is None else np.array(start, dtype=float)
    if start is None:
        prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        theta[-1] = np.log(prior / (1 - prior))
    pen = np.r_[np.full(p, ridge), 0.0]
    value, grad = logistic_objective(theta, X, y, ridge)
    it = 0
    polish = 0
    while it < max_iter:
        gnorm = np.max(np.abs(grad))
        if gnorm <= tol:
            # a couple of extra Newton steps take the solution to machine precision
            if polish >= 2 or gnorm == 0.0:
                break
            polish += 1
        s = expit(A @ theta)
        H = (A * (s * (1 - s))[:, None]).T @ A / N + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H + 1e-12 * np.eye(p + 1), grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = theta - t * step
            cv, cg = logistic_objective(cand, X, y, ridge)
            if cv <= value + 1e-4 * t * float(grad @ -step) or t < 1e-10:
                break
            t *= 0.5
        if cv > value and polish:
            break
        theta, value, grad = cand, cv, cg
        it += 1
        if ridge == 0 and np.max(np.abs(theta)) > 1e8:
            raise SeparableData("the classes are separable; use a positive ridge")
    if ridge == 0 and np.all((A @ theta > 0) == (y == 1)):
        raise SeparableData("the classes are completely separated; use a positive ridge")
    gnorm = float(np.max(np.abs(grad)))
    if gnorm > tol:
        if ridge == 0:
            raise SeparableData(f"no finite optimum found (gradient {gnorm:.3g}); use a positive ridge")
        raise EstimatorFailure(f"Newton iterations stopped with gradient norm {gnorm:.3g}")
    return theta, it, gnorm


def default_ridge(features: np.ndarray) -> float:
    """``1e-4 * trace(second moment) / dims`` of the feature matrix."""
    return 1e-4 * float(np.mean(features**2)) if features.size else 1e-4


def _labels(train: PooledSample):
    if train.categorical:
        raise EstimatorFailure("logistic ratio estimators need real-valued features")
    return np.r_[np.zeros(train.n), np.ones(train.m)]


def fit_linear_logistic(train: PooledSample, ridge: Optional[float] = None) -> LogisticModel:
    """Ridge-penalised linear logistic regression of sample membership."""
    y = _labels(train)
    X = train.points
    lam = default_ridge(X) if ridge is None else float(ridge)
    if lam < 0:
        raise ValueError("ridge must be nonnegative")
    theta, it, g = _newton(X, y, lam)
    return LogisticModel("linear", theta[:-1], float(theta[-1]), lam, train.n, train.m, iterations=it, grad_norm=g)


def fit_kernel_logistic(train: PooledSample, spec: KernelSpec = KernelSpec(), ridge: Optional[float] = None,
                        max_centers: int = 200, seed: int = 0) -> LogisticModel:
    """Logistic regression on kernel features at up to ``max_centers`` training points."""
    y = _labels(train)
    if spec.family == KernelFamily.COLLISION:
        raise EstimatorFailure("kernel logistic regression needs a Gaussian or Laplace kernel")
    spec = spec.resolve(train)
    N = train.size
    k = min(int(max_centers), N)
    pick = np.sort(rng.generator(seed, "centers").choice(N, size=k, replace=False))
    centers = train.points[pick]
    X = _kernel_features(spec, centers, train.points)
    lam = default_ridge(X) if ridge is None else float(ridge)
    if lam < 0:
        raise ValueError("ridge must be nonnegative")
    theta, it, g = _newton(X, y, lam)
    return LogisticModel("kernel", theta[:-1], float(theta[-1]), lam, train.n, train.m,
                         centers=centers, kernel=spec, iterations=it, grad_norm=g)


def _mean_log_loss(model: LogisticModel, sample: PooledSample) -> float:
    y = np.r_[np.zeros(sample.n), np.ones(sample.m)]
    eta = model.logit(sample.points)
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def select_bandwidth(train: PooledSample, spec: KernelSpec = KernelSpec(), factors=CV_FACTORS, folds: int = 5,
                     ridge: Optional[float] = None, max_centers: int = 200, seed: int = 0) -> KernelSpec:
    """Pick ``factor * zeta_median`` by ``folds``-fold cross-validated log-loss."""
    y = _labels(train)
    base = spec.resolve(train).bandwidth
    fold = rng.generator(seed, "folds").permutation(train.size) % folds
    best = None
    for f in factors:
        cand = KernelSpec(spec.family, base * f)
        loss = 0.0
        for k in range(folds):
            inside = fold != k
            fit_part = PooledSample.from_samples(train.points[inside & (y == 0)], train.points[inside & (y == 1)])
            held = PooledSample.from_samples(train.points[~inside & (y == 0)], train.points[~inside & (y == 1)])
            model = fit_kernel_logistic(fit_part, cand, ridge, max_centers, seed)
            loss += _mean_log_loss(model, held)
        if best is None or loss < best[0]:
            best = (loss, cand)
    return best[1]


@dataclass(frozen=True)
class LinearLogistic:
    """Estimator handle for the composite test."""

    ridge: Optional[float] = None

    def fit(self, train: PooledSample) -> LogisticModel:
        return fit_linear_logistic(train, self.ridge)


@dataclass(frozen=True)
class KernelLogistic:
    """Estimator handle; with a median bandwidth the width is tuned over
    ``cv_factors`` (pass ``cv_factors=None`` for the plain median heuristic)."""

    spec: KernelSpec = KernelSpec()
    ridge: Optional[float] = None
    max_centers: int = 200
    seed: int = 0
    cv_factors: Optional[tuple] = CV_FACTORS

    def fit(self, train: PooledSample) -> LogisticModel:
        spec = self.spec
        if self.cv_factors and spec.bandwidth == "median":
            spec = select_bandwidth(train, spec, self.cv_factors, ridge=self.ridge, max_centers=self.max_centers,
                                    seed=self.seed)
        return fit_kernel_logistic(train, spec, self.ridge, self.max_centers, self.seed)
