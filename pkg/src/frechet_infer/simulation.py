"""Synthetic network and spherical regression data, and Monte Carlo size/power studies.

Network responses come from a two-community weighted stochastic block model
whose edge weights are uniform around ``alpha0 + beta x1 + gamma x2`` with a
latent half-width ``W``; spherical responses are exponential-map
perturbations of a great-circle regression curve. In both generators ``W``
is correlated with the predictors, so responses depend on ``X`` even when
the regression function is constant.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import FrechetError
from .inference import MultiplierConfig, test_global, test_partial
from .regression import Dataset
from .spaces import LaplacianFrobenius, SolverSettings, Sphere

logger = logging.getLogger(__name__)


def _latent_uniforms(rng, n, rho12, rho_w):
    """``(X1, X2, W) = Phi(V)`` for ``V ~ N3(0, Sigma)`` with unit variances."""
    cov = np.array([[1.0, rho12, rho_w],
                    [rho12, 1.0, rho_w],
                    [rho_w, rho_w, 1.0]])
    L = np.linalg.cholesky(cov)
    V = rng.standard_normal((n, 3)) @ L.T
    return ndtr(V)


@dataclass(frozen=True)
class NetworkSimConfig:
    n: int = 300
    m: int = 10
    m1: int | None = None
    p11: float = 0.9
    p22: float = 0.9
    p12: float = 0.7
    alpha0: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    C: float = 3.0

    def __post_init__(self):
        if self.m1 is None:
            object.__setattr__(self, "m1", math.ceil(self.m / 2))
        if self.n < 4:
            raise FrechetError("n must be at least 4")
        if self.m < 2 or not 1 <= self.m1 < self.m:
            raise FrechetError(f"need 1 <= m1 < m, got m1={self.m1}, m={self.m}")
        for name in ("p11", "p22", "p12"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise FrechetError(f"{name} must be a probability")
        top = self.alpha0 + self.beta + self.gamma
        if self.beta < 0 or self.gamma < 0 or not 1.0 <= top:
            raise FrechetError("need beta, gamma >= 0 and alpha0 + beta + gamma >= 1")
        # edges reach alpha0 + beta + gamma + W with W < 1
        if top + 1.0 > self.C:
            raise FrechetError(
                f"edge bound C={self.C:g} below the largest edge weight {top + 1:g}")

    @property
    def space(self) -> LaplacianFrobenius:
        return LaplacianFrobenius(m=self.m, edge_bound=self.C)

    def block_probabilities(self) -> np.ndarray:
        """The m x m matrix of edge probabilities (Lambda)."""
        z = np.arange(self.m) < self.m1
        return np.where(z[:, None] == z[None, :],
                        np.where(z[:, None], self.p11, self.p22), self.p12)

    def regression_function(self, x) -> np.ndarray:
        """True conditional Fréchet mean ``Lambda * vech^-1(-s(x), ...)``."""
        x = np.asarray(x, dtype=np.float64)
        s = self.alpha0 + self.beta * x[0] + self.gamma * x[1]
        G = -s * self.block_probabilities()
        np.fill_diagonal(G, 0.0)
        np.fill_diagonal(G, -G.sum(axis=1))
        return G


def gen_network_sample(cfg: NetworkSimConfig, rng: np.random.Generator,
                       latent_width: bool = True) -> Dataset:
    """Draw ``cfg.n`` predictor/Laplacian pairs.

    ``latent_width=False`` replaces ``W`` by 0 (noise-free edge weights).
    """
    n, m = cfg.n, cfg.m
    U3 = _latent_uniforms(rng, n, 0.5, 0.5)
    X, W = U3[:, :2], U3[:, 2]
    if not latent_width:
        W = np.zeros(n)
    iu, ju = np.triu_indices(m, 1)
    probs = cfg.block_probabilities()[iu, ju]
    mask = rng.random((n, iu.size)) < probs
    s = cfg.alpha0 + cfg.beta * X[:, 0] + cfg.gamma * X[:, 1]
    g = s[:, None] + W[:, None] * (2.0 * rng.random((n, iu.size)) - 1.0)
    off = -np.where(mask, g, 0.0)
    G = np.zeros((n, m, m))
    G[:, iu, ju] = off
    G[:, ju, iu] = off
    G[:, np.arange(m), np.arange(m)] = -G.sum(axis=2)
    return Dataset(X, G, cfg.space)


@dataclass(frozen=True)
class SphereSimConfig:
    n: int = 200
    alpha0: float = math.pi / 6
    beta: float = 0.0
    gamma: float = 0.0
    phi: float = math.pi / 4
    sigma_noise: float = 0.25

    def __post_init__(self):
        if self.n < 4:
            raise FrechetError("n must be at least 4")
        if not self.alpha0 > 0 or self.beta < 0 or self.gamma < 0:
            raise FrechetError("need alpha0 > 0 and beta, gamma >= 0")
        if not self.alpha0 + self.beta + self.gamma < math.pi / 2:
            raise FrechetError("need alpha0 + beta + gamma < pi/2")
        if not 0 < self.phi < math.pi / 2:
            raise FrechetError("phi must lie in (0, pi/2)")
        # |e| <= sigma * sqrt(2) * max W and W < 1
        if not 0 < self.sigma_noise * math.sqrt(2) < math.pi:
            raise FrechetError("sigma_noise must satisfy 0 < sigma*sqrt(2) < pi")

    @property
    def space(self) -> Sphere:
        return Sphere(dim=3)

    def regression_function(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        h = self.alpha0 + self.beta * x[..., 0] + self.gamma * x[..., 1]
        return np.stack([np.sin(h), np.cos(h) * math.cos(self.phi),
                         np.cos(h) * math.sin(self.phi)], axis=-1)

    def tangent_basis(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        h = self.alpha0 + self.beta * x[..., 0] + self.gamma * x[..., 1]
        nu1 = np.broadcast_to(np.array([0.0, -math.sin(self.phi), math.cos(self.phi)]),
                              h.shape + (3,))
        nu2 = np.stack([np.cos(h), -np.sin(h) * math.cos(self.phi),
                        -np.sin(h) * math.sin(self.phi)], axis=-1)
        return nu1, nu2


def _arcsine(rng, size):
    """Beta(1/2, 1/2) draws as ``sin^2(pi U / 2)``."""
    return np.sin(0.5 * math.pi * rng.random(size)) ** 2


def gen_sphere_sample(cfg: SphereSimConfig, rng: np.random.Generator) -> Dataset:
    n = cfg.n
    U3 = _latent_uniforms(rng, n, 0.0, 0.5)
    X, W = U3[:, :2], U3[:, 2]
    mu = cfg.regression_function(X)
    nu1, nu2 = cfg.tangent_basis(X)
    gram = np.stack([np.einsum("ij,ij->i", a, b)
                     for a, b in ((nu1, nu1), (nu2, nu2), (nu1, nu2), (nu1, mu), (nu2, mu))])
    target = np.array([1.0, 1.0, 0.0, 0.0, 0.0])[:, None]
    if np.max(np.abs(gram - target)) > 1e-12:
        raise FrechetError("tangent basis is not orthonormal")
    e = cfg.sigma_noise * (2.0 * _arcsine(rng, (n, 2)) - 1.0)
    E = W[:, None] * (e[:, :1] * nu1 + e[:, 1:] * nu2)
    nrm = np.linalg.norm(E, axis=1)
    if np.any(nrm >= math.pi):
        raise FrechetError("tangent noise left the injectivity radius")
    with np.errstate(invalid="ignore", divide="ignore"):
        dirn = np.where(nrm[:, None] > 0, E / nrm[:, None], 0.0)
    Y = np.cos(nrm)[:, None] * mu + np.sin(nrm)[:, None] * dirn
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    return Dataset(X, Y, cfg.space)


# -- power studies -------------------------------------------------------------

@dataclass(frozen=True)
class PowerCell:
    """One grid cell: a generator configuration and the test to run on it."""

    kind: str
    space: str
    config: NetworkSimConfig | SphereSimConfig
    base: tuple = (0,)

    def columns(self) -> dict:
        cfg = self.config
        cols = {"kind": self.kind, "space": self.space, "n": cfg.n}
        if isinstance(cfg, NetworkSimConfig):
            cols["m"] = cfg.m
        cols.update(alpha0=cfg.alpha0, beta=cfg.beta, gamma=cfg.gamma)
        return cols


@dataclass
class CellResult:
    cell: PowerCell
    rate: float
    se: float
    mean_p: float
    B: int
    failures: int
    p_values: list = field(repr=False, default_factory=list)

    def row(self) -> dict:
        r = self.cell.columns()
        r.update(rate=self.rate, se=self.se, mean_p=self.mean_p, B=self.B,
                 failures=self.failures)
        return r


@dataclass
class PowerStudyResult:
    cells: list
    alpha: float
    K: int
    seed: int

    def rows(self) -> list[dict]:
        return [c.row() for c in self.cells]

    @property
    def failures(self) -> int:
        return sum(c.failures for c in self.cells)


def _stream(seed, cell_idx, rep, purpose):
    ss = np.random.SeedSequence(int(seed), spawn_key=(cell_idx, rep, purpose))
    return np.random.Generator(np.random.Philox(ss))


def _test_seed(seed, cell_idx, rep):
    ss = np.random.SeedSequence(int(seed), spawn_key=(cell_idx, rep, 1))
    return int(ss.generate_state(1, np.uint64)[0])


def generate(cell: PowerCell, rng) -> Dataset:
    if cell.space == "network":
        return gen_network_sample(cell.config, rng)
    if cell.space == "sphere":
        return gen_sphere_sample(cell.config, rng)
    raise FrechetError(f"unknown simulation space {cell.space!r}")


def run_replicate(cell: PowerCell, cell_idx: int, rep: int, seed: int, K: int,
                  solver: SolverSettings | None = None) -> float:
    """p-value of one replication; same arguments always give the same value."""
    data = generate(cell, _stream(seed, cell_idx, rep, 0))
    if solver is not None:
        data = Dataset(data.X, data.Y, replace(data.space, solver=solver), validate=False)
    cfg = MultiplierConfig(K=K, seed=_test_seed(seed, cell_idx, rep))
    if cell.kind == "global":
        return test_global(data, cfg).p_value
    if cell.kind == "partial":
        return test_partial(data, cell.base, cfg).p_value
    raise FrechetError(f"unknown test kind {cell.kind!r}")


def _run_job(args):
    cell, cell_idx, rep, seed, K, solver = args
    try:
        return run_replicate(cell, cell_idx, rep, seed, K, solver), None
    except FrechetError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_power_study(cells: Sequence[PowerCell], B: int = 500, alpha: float = 0.05,
                    K: int = 50, seed: int = 0, workers: int = 1,
                    solver: SolverSettings | None = None) -> PowerStudyResult:
    """Rejection rates over ``B`` replications for each cell.

    Replication ``(cell, r)`` draws from streams keyed by ``(seed, cell, r)``,
    so serial and parallel runs give identical results. Replications whose
    solve fails are excluded from the rate and counted in ``failures``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    jobs = [(cell, ci, r, seed, K, solver) for ci, cell in enumerate(cells) for r in range(B)]
    t0 = time.perf_counter()
    if workers == 1:
        outcomes = list(map(_run_job, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers or None) as pool:
            outcomes = list(pool.map(_run_job, jobs, chunksize=max(1, B // 8)))
    logger.info("power study: %d replications in %.1fs", len(jobs), time.perf_counter() - t0)
    results = []
    for ci, cell in enumerate(cells):
        chunk = outcomes[ci * B:(ci + 1) * B]
        pv = [p for p, err in chunk if err is None]
        failures = len(chunk) - len(pv)
        for p, err in chunk:
            if err is not None:
                logger.warning("cell %d: replication failed: %s", ci, err)
        used = len(pv)
        rate = float(np.mean(np.asarray(pv) <= alpha)) if used else float("nan")
        se = math.sqrt(rate * (1 - rate) / used) if used else float("nan")
        mean_p = float(np.mean(pv)) if used else float("nan")
        results.append(CellResult(cell, rate, se, mean_p, used, failures, pv))
    return PowerStudyResult(results, alpha, K, seed)


# -- presets -------------------------------------------------------------------

PRESETS = {
    "paper-network-global": dict(kind="global", space="network", alpha0=1.0,
                                 effects=[(b, b) for b in (0.0, 0.1, 0.2, 0.3)]),
    "paper-network-partial": dict(kind="partial", space="network", alpha0=1.0,
                                  effects=[(0.25, g) for g in (0.0, 0.15, 0.3, 0.45, 0.6)]),
    "paper-sphere-global": dict(kind="global", space="sphere", alpha0=math.pi / 6,
                                effects=[(b, b) for b in (0.0, 0.05, 0.1, 0.15, 0.2)]),
    "paper-sphere-partial": dict(kind="partial", space="sphere", alpha0=math.pi / 6,
                                 effects=[(math.pi / 12, g) for g in (0.0, 0.1, 0.2, 0.3)]),
}


def preset_cells(name: str, n_values: Iterable[int], m: int = 10,
                 effects: Sequence[tuple] | None = None) -> list[PowerCell]:
    """Grid cells for a named preset; ``effects`` overrides the (beta, gamma) grid."""
    if name not in PRESETS:
        raise FrechetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    spec = PRESETS[name]
    grid = spec["effects"] if effects is None else effects
    cells = []
    for n in n_values:
        for beta, gamma in grid:
            if spec["space"] == "network":
                cfg = NetworkSimConfig(n=n, m=m, alpha0=spec["alpha0"], beta=beta, gamma=gamma)
            else:
                cfg = SphereSimConfig(n=n, alpha0=spec["alpha0"], beta=beta, gamma=gamma)
            cells.append(PowerCell(spec["kind"], spec["space"], cfg))
    return cells


def config_dict(cell: PowerCell) -> dict:
    return {"kind": cell.kind, "space": cell.space, "base": list(cell.base),
            **asdict(cell.config)}
