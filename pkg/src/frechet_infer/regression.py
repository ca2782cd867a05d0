"""Global Fréchet regression.

The estimator is lazy: fitting only stores the predictor mean and inverse
covariance, and every prediction solves a weighted Fréchet mean with weights

    s_j(x) = 1 + (X_j - Xbar)^T Sigma^{-1} (x - Xbar)

over the retained sample. A base model uses a subset of the predictor
columns in the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, FrechetError
from .spaces import MeanResult, MetricSpace

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Predictors ``X`` (n x p) paired with responses ``Y`` in ``space``."""

    X: np.ndarray
    Y: np.ndarray
    space: MetricSpace
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionError("X must be a 2-D array")
        object.__setattr__(self, "X", X)
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.shape[:1] != X.shape[:1]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if Y.shape[1:] != self.space.point_shape:
            raise DimensionError(
                f"responses have shape {Y.shape[1:]}, space expects {self.space.point_shape}")
        object.__setattr__(self, "Y", Y)
        n, p = X.shape
        if n < p + 2:
            raise FrechetError(f"need n >= p + 2 observations, got n={n}, p={p}")
        if not np.all(np.isfinite(X)):
            raise FrechetError("X has non-finite entries")
        if self.validate:
            self.space.check_sample(Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _covariance(Z):
    Zc = Z - Z.mean(axis=0)
    # population-style denominator n
    return Zc.T @ Zc / Z.shape[0]


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Fitted global (``subset`` = all columns) or base Fréchet regression."""

    xbar: np.ndarray
    sigma_inv: np.ndarray
    subset: tuple
    data: Dataset

    @property
    def space(self) -> MetricSpace:
        return self.data.space

    @property
    def is_full(self) -> bool:
        return self.subset == tuple(range(self.data.p))

    def _query(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = len(self.subset)
        if x.ndim == 0:
            x = x[None]
        if x.shape[-1] != k:
            raise DimensionError(f"query points must have {k} coordinates, got {x.shape[-1]}")
        return x

    def weight_matrix(self, x) -> np.ndarray:
        """Weights ``s_j(x_i)`` with one row per query point ``x_i``."""
        x = np.atleast_2d(self._query(x))
        Z = self.data.X[:, self.subset]
        return 1.0 + ((x - self.xbar) @ self.sigma_inv) @ (Z - self.xbar).T

    def weights_at(self, x) -> np.ndarray:
        x = self._query(x)
        if x.ndim != 1:
            raise DimensionError("weights_at takes a single query point")
        return self.weight_matrix(x)[0]

    def solve(self, x) -> MeanResult:
        """Predictions at each row of ``x`` with solver diagnostics."""
        return self.space.weighted_means(self.data.Y, self.weight_matrix(x))

    def predict(self, x) -> np.ndarray:
        """Estimated regression function at ``x`` (one point or a batch)."""
        x = self._query(x)
        res = self.solve(x)
        return res.points[0] if x.ndim == 1 else res.points

    @cached_property
    def training_fit(self) -> MeanResult:
        """Predictions at the training predictors, computed once per model."""
        return self.solve(self.data.X[:, self.subset])


def _check_subset(subset, p):
    if subset is None:
        return tuple(range(p))
    idx = tuple(int(i) for i in subset)
    if not idx:
        raise FrechetError("predictor subset is empty")
    if len(set(idx)) != len(idx):
        raise FrechetError(f"duplicate predictor index in subset {idx}")
    if min(idx) < 0 or max(idx) >= p:
        raise FrechetError(f"predictor index out of range in subset {idx} (p={p})")
    return idx


def fit(data: Dataset, subset: Sequence[int] | None = None) -> RegressionModel:
    """Fit the global Fréchet regression of ``data.Y`` on the ``subset`` columns of ``data.X``."""
    idx = _check_subset(subset, data.p)
    Z = data.X[:, idx]
    xbar = Z.mean(axis=0)
    cov = _covariance(Z)
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise FrechetError(f"predictor covariance is singular (condition number {cond:.3g})")
    sigma_inv = np.linalg.inv(cov)
    sigma_inv = 0.5 * (sigma_inv + sigma_inv.T)
    return RegressionModel(xbar=xbar, sigma_inv=sigma_inv, subset=idx, data=data)


def frechet_mean(data: Dataset) -> np.ndarray:
    """Unweighted sample Fréchet mean of the responses."""
    return frechet_mean_result(data).points[0]


def frechet_mean_result(data: Dataset) -> MeanResult:
    return data.space.weighted_means(data.Y, np.ones(data.n))


@dataclass(frozen=True)
class ObjectiveTerms:
    """Per-observation values of the empirical Fréchet objective.

    ``a[i] = M_n(mean, X_i)``, ``b[i] = M_n(full fit at X_i, X_i)`` and
    ``c[i] = M_n(base fit at X_i1, X_i)``; all use full-model weights.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray | None
    converged: np.ndarray
    iterations: np.ndarray


def objective_matrix(full: RegressionModel, base: RegressionModel | None = None) -> ObjectiveTerms:
    """Evaluate the objective terms entering the Fréchet R-squared statistics."""
    if not full.is_full:
        raise FrechetError("objective_matrix needs the full model first")
    if base is not None and base.data is not full.data:
        raise FrechetError("full and base models were fitted to different datasets")
    data = full.data
    space = data.space
    n = data.n
    S = full.weight_matrix(data.X)

    mean = frechet_mean_result(data)
    d_mean = space.sq_dist_matrix(mean.points, data.Y)[0]
    a = S @ d_mean / n

    fit_full = full.training_fit
    b = np.einsum("ij,ij->i", S, space.sq_dist_matrix(fit_full.points, data.Y)) / n

    converged = [mean.converged.repeat(n), fit_full.converged]
    iterations = fit_full.iterations.copy()
    c = None
    if base is not None:
        fit_base = base.training_fit
        c = np.einsum("ij,ij->i", S, space.sq_dist_matrix(fit_base.points, data.Y)) / n
        converged.append(fit_base.converged)
        iterations = iterations + fit_base.iterations
    return ObjectiveTerms(a=a, b=b, c=c,
                          converged=np.logical_and.reduce(converged),
                          iterations=iterations)
