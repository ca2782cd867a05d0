"""Metric spaces for object-valued responses.

Each space is an immutable descriptor that knows how to validate a point,
measure distances and compute weighted Fréchet means

    argmin_w  sum_j w_j d(w, Y_j)^2

where the weights may be negative (global Fréchet regression weights are
unbounded below) but must have a positive sum.

Points are plain numpy arrays:

=============  ==============================================================
space          point
=============  ==============================================================
euclidean      vector of length ``dim``
sphere         unit vector of length ``dim``
laplacian      symmetric ``m x m`` matrix, zero row sums, off-diagonals in
               ``[-edge_bound, 0]``
wasserstein    non-decreasing quantile values on the levels ``(k - 1/2)/M``
simplex        composition (non-negative, sums to one); distances are
               geodesic distances between componentwise square roots
=============  ==============================================================

Samples of points are stacked along a leading axis.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ._backend import STATUS_ANTIPODAL, kernels
from .errors import (
    ConvergenceWarning,
    DegenerateGeometryError,
    DimensionError,
    FrechetError,
    InvalidPointError,
)

UNIT_NORM_TOL = 1e-9
LAPLACIAN_TOL = 1e-9
SIMPLEX_TOL = 1e-9
MONOTONE_TOL = 1e-9
TANGENT_TOL = 1e-8
ANTIPODAL_EPS = 1e-8


class Kind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    LAPLACIAN = "laplacian"
    WASSERSTEIN = "wasserstein"
    SIMPLEX = "simplex"


@dataclass(frozen=True)
class SolverSettings:
    """Stopping rules for the iterative weighted-mean solvers.

    ``tol`` bounds the largest edge-weight update in a coordinate-descent sweep
    (Laplacian); ``grad_tol`` bounds the Riemannian gradient norm of the
    weight-normalised objective (sphere, simplex). ``restarts`` extra starting
    points are tried on the sphere.
    """

    tol: float = 1e-10
    grad_tol: float = 1e-9
    max_iter: int = 10_000
    restarts: int = 5

    def __post_init__(self):
        if not self.tol > 0 or not self.grad_tol > 0:
            raise ValueError("solver tolerances must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if int(self.restarts) < 0:
            raise ValueError("restarts must be >= 0")


@dataclass(frozen=True)
class MeanResult:
    """Weighted Fréchet means for a batch of weight vectors."""

    points: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _as_weights(weights, n):
    W = np.asarray(weights, dtype=np.float64)
    if W.ndim == 1:
        W = W[None, :]
    if W.ndim != 2 or W.shape[1] != n:
        raise DimensionError(f"weights must have {n} columns, got shape {np.shape(weights)}")
    if n == 0:
        raise FrechetError("weighted mean of an empty sample")
    if not np.all(np.isfinite(W)):
        raise FrechetError("weights must be finite")
    sums = W.sum(axis=1)
    if np.any(sums <= 0):
        raise FrechetError(f"weights must have a positive sum, got {sums.min():.3g}")
    return W


@dataclass(frozen=True)
class MetricSpace:
    """Common interface; use the concrete subclasses or :func:`make_space`."""

    kind: ClassVar[Kind]
    solver: SolverSettings = field(default_factory=SolverSettings, kw_only=True)

    @property
    def point_shape(self) -> tuple:
        raise NotImplementedError

    @property
    def row_width(self) -> int:
        """Number of CSV columns used to encode one point."""
        return int(np.prod(self.point_shape))

    # -- membership -------------------------------------------------------

    def validate(self, point) -> str | None:
        """Return ``None`` if ``point`` is a member, else the first violation."""
        a = np.asarray(point, dtype=np.float64)
        if a.shape != self.point_shape:
            return f"shape: expected {self.point_shape}, got {a.shape}"
        if not np.all(np.isfinite(a)):
            return "finite: point has non-finite entries"
        return self._violation(a)

    def _violation(self, a):
        return None

    def check(self, point) -> np.ndarray:
        a = np.asarray(point, dtype=np.float64)
        if a.shape != self.point_shape:
            raise DimensionError(f"expected point of shape {self.point_shape}, got {a.shape}")
        msg = self.validate(a)
        if msg is not None:
            raise InvalidPointError(msg)
        return a

    def check_sample(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=np.float64)
        if P.shape[1:] != self.point_shape:
            raise DimensionError(
                f"expected points of shape (n, {', '.join(map(str, self.point_shape))}), got {P.shape}")
        for idx in range(P.shape[0]):
            msg = self.validate(P[idx])
            if msg is not None:
                raise InvalidPointError(f"point {idx}: {msg}")
        return P

    # -- distances --------------------------------------------------------

    def distance(self, a, b) -> float:
        a = self.check(a)
        b = self.check(b)
        return float(np.sqrt(self.sq_dist_matrix(a[None], b[None])[0, 0]))

    def sq_dist_matrix(self, P, Y) -> np.ndarray:
        """Squared distances between every row of ``P`` and every row of ``Y``."""
        raise NotImplementedError

    # -- means ------------------------------------------------------------

    def weighted_means(self, points, weights) -> MeanResult:
        """Weighted Fréchet means of ``points``, one per row of ``weights``."""
        Y = np.asarray(points, dtype=np.float64)
        if Y.ndim != len(self.point_shape) + 1 or Y.shape[1:] != self.point_shape:
            raise DimensionError(f"points must have shape (n, *{self.point_shape}), got {Y.shape}")
        W = _as_weights(weights, Y.shape[0])
        return self._weighted_means(Y, W)

    def _weighted_means(self, Y, W) -> MeanResult:
        raise NotImplementedError

    def objective(self, omega, points, weights) -> float:
        """``sum_j w_j d(omega, Y_j)^2``."""
        D2 = self.sq_dist_matrix(np.asarray(omega, dtype=np.float64)[None], points)[0]
        return float(np.dot(np.asarray(weights, dtype=np.float64), D2))

    # -- CSV encoding -----------------------------------------------------

    def to_rows(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=np.float64)
        return P.reshape(P.shape[0], -1)

    def from_rows(self, rows) -> np.ndarray:
        R = np.asarray(rows, dtype=np.float64)
        if R.ndim != 2 or R.shape[1] != self.row_width:
            raise DimensionError(f"expected {self.row_width} values per row, got {R.shape[-1]}")
        return R.reshape((R.shape[0],) + self.point_shape)


def _centered_sq_dists(P, Y, ref):
    """||p - y||^2 via a Gram product on recentred data."""
    Pc = P - ref
    Yc = Y - ref
    D2 = (np.einsum("ij,ij->i", Pc, Pc)[:, None]
          + np.einsum("ij,ij->i", Yc, Yc)[None, :]
          - 2.0 * (Pc @ Yc.T))
    np.maximum(D2, 0.0, out=D2)
    return D2


def _linear_average(Y2, W):
    ref = Y2[0]
    return ref + (W @ (Y2 - ref)) / W.sum(axis=1)[:, None]


@dataclass(frozen=True)
class Euclidean(MetricSpace):
    kind: ClassVar[Kind] = Kind.EUCLIDEAN
    dim: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def point_shape(self):
        return (self.dim,)

    def sq_dist_matrix(self, P, Y):
        P = np.asarray(P, dtype=np.float64).reshape(-1, self.dim)
        Y = np.asarray(Y, dtype=np.float64).reshape(-1, self.dim)
        return _centered_sq_dists(P, Y, Y[0])

    def _weighted_means(self, Y, W):
        k = W.shape[0]
        return MeanResult(_linear_average(Y, W), np.ones(k, bool), np.zeros(k, np.int64))


@dataclass(frozen=True)
class Sphere(MetricSpace):
    """Unit sphere in R^dim with the geodesic (great-circle) distance."""

    kind: ClassVar[Kind] = Kind.SPHERE
    dim: int = 3

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def point_shape(self):
        return (self.dim,)

    def _violation(self, a):
        err = abs(math.sqrt(float(a @ a)) - 1.0)
        if err > UNIT_NORM_TOL:
            return f"unit norm: | |x| - 1 | = {err:.3g}"
        return None

    def sq_dist_matrix(self, P, Y):
        P = np.asarray(P, dtype=np.float64).reshape(-1, self.dim)
        Y = np.asarray(Y, dtype=np.float64).reshape(-1, self.dim)
        return np.arccos(np.clip(P @ Y.T, -1.0, 1.0)) ** 2

    def _weighted_means(self, Y, W):
        s = self.solver
        out, conv, iters, status = kernels.sphere_means(
            Y, W, s.grad_tol, int(s.max_iter), int(s.restarts))
        bad = np.flatnonzero(status == STATUS_ANTIPODAL)
        if bad.size:
            raise DegenerateGeometryError(
                f"antipodal pair met while solving weighted mean (row {int(bad[0])})")
        return MeanResult(out, conv, iters)


@dataclass(frozen=True)
class LaplacianFrobenius(MetricSpace):
    """Graph Laplacians of undirected networks with edge weights in ``[0, edge_bound]``."""

    kind: ClassVar[Kind] = Kind.LAPLACIAN
    m: int = 2
    edge_bound: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.edge_bound > 0:
            raise ValueError("edge_bound must be positive")

    @property
    def point_shape(self):
        return (self.m, self.m)

    @property
    def row_width(self):
        return self.m * (self.m - 1) // 2

    def _violation(self, a):
        asym = float(np.max(np.abs(a - a.T), initial=0.0))
        if asym > LAPLACIAN_TOL:
            return f"symmetry: max |G - G^T| = {asym:.3g}"
        rs = float(np.max(np.abs(a.sum(axis=1)), initial=0.0))
        if rs > LAPLACIAN_TOL:
            return f"row sum: max |row sum| = {rs:.3g}"
        off = a[~np.eye(self.m, dtype=bool)]
        if off.size:
            if off.max() > LAPLACIAN_TOL:
                return f"edge sign: off-diagonal entry {off.max():.3g} > 0"
            if off.min() < -self.edge_bound - LAPLACIAN_TOL:
                return f"edge bound: off-diagonal entry {off.min():.3g} < -{self.edge_bound:g}"
        return None

    def sq_dist_matrix(self, P, Y):
        mm = self.m * self.m
        P = np.asarray(P, dtype=np.float64).reshape(-1, mm)
        Y = np.asarray(Y, dtype=np.float64).reshape(-1, mm)
        return _centered_sq_dists(P, Y, Y[0])

    def _weighted_means(self, Y, W):
        mm = self.m * self.m
        A = _linear_average(Y.reshape(-1, mm), W).reshape(-1, self.m, self.m)
        s = self.solver
        out, conv, sweeps = kernels.project_laplacians(
            A, float(self.edge_bound), s.tol, int(s.max_iter))
        return MeanResult(out, conv, sweeps)

    def to_rows(self, points):
        P = np.asarray(points, dtype=np.float64)
        iu, ju = np.triu_indices(self.m, 1)
        return P[:, iu, ju]

    def from_rows(self, rows):
        R = np.asarray(rows, dtype=np.float64)
        if R.ndim != 2 or R.shape[1] != self.row_width:
            width = R.shape[-1] if R.ndim else 0
            raise DimensionError(
                f"q != m(m-1)/2: got {width} values per row for m={self.m} "
                f"(expected {self.row_width})")
        return np.stack([vech_inverse(r, self.m) for r in R]) if len(R) else \
            np.zeros((0, self.m, self.m))


def quantile_levels(M: int) -> np.ndarray:
    """Midpoint levels ``(k - 1/2)/M`` for ``k = 1..M``."""
    return (np.arange(1, M + 1) - 0.5) / M


@dataclass(frozen=True)
class Wasserstein1D(MetricSpace):
    """Distributions on ``[lo, hi]`` stored as quantile functions on a midpoint grid.

    The 2-Wasserstein distance is the L2 distance between quantile functions,
    evaluated by the midpoint rule.
    """

    kind: ClassVar[Kind] = Kind.WASSERSTEIN
    M: int = 100
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.lo < self.hi:
            raise ValueError("domain must satisfy lo < hi")

    @property
    def point_shape(self):
        return (self.M,)

    @property
    def levels(self):
        return quantile_levels(self.M)

    def _violation(self, a):
        if a.size > 1:
            drop = float(np.min(np.diff(a)))
            if drop < -MONOTONE_TOL:
                return f"monotone: quantiles decrease by {-drop:.3g}"
        if a.min() < self.lo - MONOTONE_TOL or a.max() > self.hi + MONOTONE_TOL:
            return f"domain: values outside [{self.lo:g}, {self.hi:g}]"
        return None

    def sq_dist_matrix(self, P, Y):
        P = np.asarray(P, dtype=np.float64).reshape(-1, self.M)
        Y = np.asarray(Y, dtype=np.float64).reshape(-1, self.M)
        return _centered_sq_dists(P, Y, Y[0]) / self.M

    def _weighted_means(self, Y, W):
        A = _linear_average(Y, W)
        out = np.clip(kernels.isotonic_rows(A), self.lo, self.hi)
        k = W.shape[0]
        return MeanResult(out, np.ones(k, bool), np.zeros(k, np.int64))


@dataclass(frozen=True)
class SimplexSqrt(MetricSpace):
    """Compositions compared through the square-root map onto the sphere.

    Means are solved on the full sphere; negative coordinates of the solution
    are then set to zero and the point renormalised, which approximates the
    solve constrained to the closed positive orthant.
    """

    kind: ClassVar[Kind] = Kind.SIMPLEX
    dim: int = 3

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def point_shape(self):
        return (self.dim,)

    @property
    def sphere(self) -> Sphere:
        return Sphere(dim=self.dim, solver=self.solver)

    def _violation(self, a):
        if a.min() < -SIMPLEX_TOL:
            return f"nonnegative: component {a.min():.3g} < 0"
        err = abs(float(a.sum()) - 1.0)
        if err > SIMPLEX_TOL:
            return f"sum: components sum to 1 {'+' if a.sum() > 1 else '-'} {err:.3g}"
        return None

    def sq_dist_matrix(self, P, Y):
        P = np.sqrt(np.clip(np.asarray(P, dtype=np.float64).reshape(-1, self.dim), 0, None))
        Y = np.sqrt(np.clip(np.asarray(Y, dtype=np.float64).reshape(-1, self.dim), 0, None))
        return self.sphere.sq_dist_matrix(P, Y)

    def _weighted_means(self, Y, W):
        U = np.sqrt(np.clip(Y, 0.0, None))
        res = self.sphere._weighted_means(U, W)
        B = np.clip(res.points, 0.0, None)
        B /= np.linalg.norm(B, axis=1, keepdims=True)
        return MeanResult(B * B, res.converged, res.iterations)


_SPACES = {
    Kind.EUCLIDEAN: Euclidean,
    Kind.SPHERE: Sphere,
    Kind.LAPLACIAN: LaplacianFrobenius,
    Kind.WASSERSTEIN: Wasserstein1D,
    Kind.SIMPLEX: SimplexSqrt,
}


def make_space(kind, **params) -> MetricSpace:
    """Build a space from its kind name, e.g. ``make_space("laplacian", m=10, edge_bound=3)``."""
    return _SPACES[Kind(kind)](**params)


# -- module-level operations ---------------------------------------------


def distance(space: MetricSpace, a, b) -> float:
    return space.distance(a, b)


def validate(space: MetricSpace, a) -> str | None:
    return space.validate(a)


def weighted_frechet_mean(space: MetricSpace, points, weights) -> np.ndarray:
    """Minimiser of ``sum_j w_j d(., Y_j)^2`` over ``space``.

    Emits :class:`ConvergenceWarning` and returns the last iterate if the
    solver stops at ``max_iter``.
    """
    P = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1:
        raise DimensionError("weights must be a vector")
    res = space.weighted_means(P, w)
    if not res.all_converged:
        warnings.warn("weighted Fréchet mean did not converge", ConvergenceWarning, stacklevel=2)
    return res.points[0]


def sqrt_transform(composition) -> np.ndarray:
    a = np.asarray(composition, dtype=np.float64)
    if a.min() < 0:
        raise InvalidPointError(f"negative component {a.min():.3g}")
    if abs(a.sum() - 1.0) > SIMPLEX_TOL:
        raise InvalidPointError(f"components sum to {a.sum():.12g}, not 1")
    return np.sqrt(a)


def inverse_sqrt_transform(point) -> np.ndarray:
    b = np.asarray(point, dtype=np.float64)
    if abs(np.linalg.norm(b) - 1.0) > UNIT_NORM_TOL:
        raise InvalidPointError(f"not a unit vector (norm {np.linalg.norm(b):.12g})")
    return b * b


def _triangular_size(q: int) -> int:
    m = int(round((1 + math.sqrt(1 + 8 * q)) / 2))
    if m * (m - 1) // 2 != q:
        raise DimensionError(f"q={q} is not of the form m(m-1)/2")
    return m


def vech(L) -> np.ndarray:
    """Strict upper triangle of ``L`` in row-major order."""
    L = np.asarray(L, dtype=np.float64)
    iu, ju = np.triu_indices(L.shape[0], 1)
    return L[iu, ju]


def vech_inverse(v, m: int | None = None) -> np.ndarray:
    """Laplacian with off-diagonals ``v`` (strict upper triangle, row-major)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if m is None:
        m = _triangular_size(v.size)
    elif v.size != m * (m - 1) // 2:
        raise DimensionError(f"q != m(m-1)/2: {v.size} values for m={m}")
    L = np.zeros((m, m))
    iu, ju = np.triu_indices(m, 1)
    L[iu, ju] = v
    L[ju, iu] = v
    L[np.diag_indices(m)] = -L.sum(axis=1)
    return L


def exp_map(base, tangent) -> np.ndarray:
    """Sphere exponential map ``cos|e| base + sin|e| e/|e|``."""
    base = np.asarray(base, dtype=np.float64)
    e = np.asarray(tangent, dtype=np.float64)
    if e.shape != base.shape:
        raise DimensionError("base and tangent shapes differ")
    nrm = float(np.linalg.norm(e))
    if abs(float(base @ e)) > TANGENT_TOL * max(1.0, nrm):
        raise InvalidPointError("tangent vector is not orthogonal to the base point")
    if nrm == 0.0:
        return base.copy()
    return math.cos(nrm) * base + math.sin(nrm) * (e / nrm)


def log_map(base, target) -> np.ndarray:
    """Inverse of :func:`exp_map`; undefined for antipodal points."""
    base = np.asarray(base, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if base.shape != target.shape:
        raise DimensionError("base and target shapes differ")
    c = float(base @ target)
    v = target - c * base
    s = float(np.linalg.norm(v))
    d = math.atan2(s, c)
    if d > math.pi - ANTIPODAL_EPS:
        raise DegenerateGeometryError("log map undefined at the antipode")
    if s == 0.0:
        return np.zeros_like(base)
    return (d / s) * v
