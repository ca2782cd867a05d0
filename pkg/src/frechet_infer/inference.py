"""Fréchet R-squared and the multiplier / Cauchy-combination significance tests."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import FrechetError, SolverError
from .regression import Dataset, ObjectiveTerms, fit, objective_matrix

R2_NEG_TOL = 1e-10
R2_DEGENERATE = 1e-14
# lower bound on 1 - Phi(|z|), i.e. Phi(|z|) <= 1 - 1e-16
SF_FLOOR = 1e-16
MULTIPLIER_SD = math.sqrt(0.5)


@dataclass(frozen=True)
class MultiplierConfig:
    """Randomisation settings: ``K`` multiplier draws combined with weights ``c``.

    Multipliers are Normal(1, 1/2). Draw ``k`` uses its own Philox stream keyed
    by ``(seed, k)``, so results do not depend on evaluation order.
    """

    K: int = 50
    seed: int = 0
    c: tuple | None = None

    def __post_init__(self):
        if int(self.K) < 1:
            raise ValueError("K must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.c is not None:
            c = np.asarray(self.c, dtype=np.float64)
            if c.shape != (self.K,):
                raise ValueError(f"c must have length K={self.K}")
            if np.any(c < 0):
                raise ValueError("combination weights must be nonnegative")
            if abs(c.sum() - 1.0) > 1e-12:
                raise ValueError("combination weights must sum to 1")
            object.__setattr__(self, "c", tuple(float(v) for v in c))

    @property
    def weights(self) -> np.ndarray:
        if self.c is None:
            return np.full(self.K, 1.0 / self.K)
        return np.asarray(self.c)

    def multipliers(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(phi, psi)``, each of shape ``(K, n)``."""
        phi = np.empty((self.K, n))
        psi = np.empty((self.K, n))
        for k in range(self.K):
            ss = np.random.SeedSequence(int(self.seed), spawn_key=(k,))
            rng = np.random.Generator(np.random.Philox(ss))
            phi[k] = rng.normal(1.0, MULTIPLIER_SD, n)
            psi[k] = rng.normal(1.0, MULTIPLIER_SD, n)
        return phi, psi


@dataclass
class TestReport:
    """Outcome of a global or partial test."""

    __test__ = False  # not a pytest class

    kind: str
    r_squared: float
    z_scores: list
    cauchy_stat: float
    p_value: float
    sigma_hat: float
    n: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def rejects(self, alpha: float = 0.05) -> bool:
        return self.p_value <= alpha


def _r_squared(num_terms, den_terms):
    den = float(np.sum(den_terms))
    if den < R2_DEGENERATE:
        return 0.0
    r2 = 1.0 - float(np.sum(num_terms)) / den
    if r2 < 0.0:
        if r2 < -R2_NEG_TOL:
            raise SolverError(
                f"R-squared {r2:.3g} < 0: the fitted objective exceeds the reference objective")
        r2 = 0.0
    return min(r2, 1.0)


def r_squared_global(a, b) -> float:
    """Sample global Fréchet R-squared ``1 - sum(b) / sum(a)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("objective vectors differ in length")
    return _r_squared(b, a)


def r_squared_partial(c, b) -> float:
    """Sample partial Fréchet R-squared ``1 - sum(b) / sum(c)``."""
    c = np.asarray(c, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if c.shape != b.shape:
        raise ValueError("objective vectors differ in length")
    return _r_squared(b, c)


def randomized_statistic(a_or_c, b, phi, psi):
    """``mean(phi * a) - mean(psi * b)``; multipliers may be stacked along axis 0."""
    a = np.asarray(a_or_c, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    n = a.shape[0]
    if b.shape != a.shape or phi.shape[-1] != n or psi.shape[-1] != n:
        raise ValueError("objective and multiplier vectors differ in length")
    return (phi @ a - psi @ b) / n


def sigma_hat(b) -> float:
    b = np.asarray(b, dtype=np.float64)
    if b.size == 0:
        raise ValueError("sigma_hat of an empty vector")
    return math.sqrt(float(np.mean(b * b)))


def cauchy_transform(z) -> np.ndarray:
    """``tan{(2 Phi(|z|) - 3/2) pi}``, evaluated as ``cot(2 pi (1 - Phi(|z|)))``."""
    z = np.asarray(z, dtype=np.float64)
    sf = np.maximum(ndtr(-np.abs(z)), SF_FLOOR)
    return 1.0 / np.tan(2.0 * np.pi * sf)


def cauchy_combine(z_scores, c=None) -> tuple[float, float]:
    """Combine z-scores into ``(C, p)`` with ``p = 1 - (2/pi) arctan|C|``."""
    z = np.asarray(z_scores, dtype=np.float64).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("z-scores must be finite")
    w = np.full(z.size, 1.0 / z.size) if c is None else np.asarray(c, dtype=np.float64)
    if w.shape != z.shape:
        raise ValueError("weights and z-scores differ in length")
    stat = float(np.dot(w, cauchy_transform(z)))
    p = 1.0 - 2.0 * math.atan(abs(stat)) / math.pi
    return stat, min(max(p, 0.0), 1.0)


def _is_constant(Y):
    return bool(np.all(Y == Y[0]))


def _randomized_report(kind, ref, b, r2, data, cfg, terms: ObjectiveTerms, extra=None):
    n = data.n
    diagnostics = {
        "all_converged": bool(np.all(terms.converged)),
        "nonconverged": np.flatnonzero(~terms.converged).tolist(),
        "max_iterations": int(terms.iterations.max(initial=0)),
        "degenerate": False,
    }
    if extra:
        diagnostics.update(extra)
    sig = sigma_hat(b)
    if _is_constant(data.Y) or sig == 0.0:
        diagnostics["degenerate"] = True
        diagnostics["reason"] = "constant responses" if _is_constant(data.Y) else "sigma_hat = 0"
        return TestReport(kind=kind, r_squared=r2, z_scores=[0.0] * cfg.K,
                          cauchy_stat=0.0, p_value=1.0, sigma_hat=sig, n=n,
                          diagnostics=diagnostics)
    phi, psi = cfg.multipliers(n)
    T = randomized_statistic(ref, b, phi, psi)
    z = math.sqrt(n) * T / sig
    stat, p = cauchy_combine(z, cfg.weights)
    return TestReport(kind=kind, r_squared=r2, z_scores=z.tolist(), cauchy_stat=stat,
                      p_value=p, sigma_hat=sig, n=n, diagnostics=diagnostics)


def test_global(data: Dataset, cfg: MultiplierConfig | None = None) -> TestReport:
    """Test whether the Fréchet regression function is constant in ``X``."""
    cfg = cfg or MultiplierConfig()
    full = fit(data)
    terms = objective_matrix(full)
    r2 = r_squared_global(terms.a, terms.b)
    return _randomized_report("global", terms.a, terms.b, r2, data, cfg, terms)


def test_partial(data: Dataset, base_subset: Sequence[int],
                 cfg: MultiplierConfig | None = None) -> TestReport:
    """Test whether the predictors outside ``base_subset`` add to the base model."""
    cfg = cfg or MultiplierConfig()
    base_idx = tuple(int(i) for i in base_subset)
    if set(base_idx) >= set(range(data.p)):
        raise FrechetError("base subset must be a proper subset of the predictors")
    full = fit(data)
    base = fit(data, base_idx)
    terms = objective_matrix(full, base)
    r2 = r_squared_partial(terms.c, terms.b)
    added = sorted(set(range(data.p)) - set(base_idx))
    return _randomized_report("partial", terms.c, terms.b, r2, data, cfg, terms,
                              extra={"base": list(base_idx), "added": added})

test_global.__test__ = False
test_partial.__test__ = False
