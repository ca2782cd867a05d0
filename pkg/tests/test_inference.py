import math

import numpy as np
import pytest
from scipy import stats

from frechet_infer.errors import FrechetError, SolverError
from frechet_infer.inference import (
    SF_FLOOR,
    MultiplierConfig,
    cauchy_combine,
    cauchy_transform,
    r_squared_global,
    r_squared_partial,
    randomized_statistic,
    sigma_hat,
    test_global,
    test_partial,
)
from frechet_infer.regression import Dataset
from frechet_infer.simulation import NetworkSimConfig, gen_network_sample
from frechet_infer.spaces import Euclidean, Sphere


def test_multiplier_config_validation():
    with pytest.raises(ValueError):
        MultiplierConfig(K=0)
    with pytest.raises(ValueError):
        MultiplierConfig(K=2, c=(0.5, 0.6))
    with pytest.raises(ValueError):
        MultiplierConfig(K=2, c=(1.5, -0.5))
    np.testing.assert_allclose(MultiplierConfig(K=4).weights, 0.25)


def test_multipliers_reproducible_and_moments():
    cfg = MultiplierConfig(K=3, seed=9)
    a, b = cfg.multipliers(10)
    c, d = cfg.multipliers(10)
    assert np.array_equal(a, c) and np.array_equal(b, d)
    phi, psi = MultiplierConfig(K=1, seed=1).multipliers(200_000)
    assert phi.mean() == pytest.approx(1.0, abs=0.01)
    assert phi.var() == pytest.approx(0.5, abs=0.01)
    assert abs(np.corrcoef(phi[0], psi[0])[0, 1]) < 0.01


def test_multiplier_streams_do_not_depend_on_k():
    small, _ = MultiplierConfig(K=2, seed=3).multipliers(5)
    big, _ = MultiplierConfig(K=5, seed=3).multipliers(5)
    np.testing.assert_array_equal(small, big[:2])


def test_r_squared_guards():
    assert r_squared_global([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert r_squared_global([1.0, 1.0], [1.0, 1.0 + 1e-11]) == 0.0
    with pytest.raises(SolverError):
        r_squared_global([1.0, 1.0], [1.5, 1.0])
    assert r_squared_partial([2.0, 2.0], [1.0, 1.0]) == pytest.approx(0.5)


def test_r_squared_exact_fit():
    X = np.linspace(0, 1, 20)
    data = Dataset(X, (2 * X + 1)[:, None], Euclidean(dim=1))
    rep = test_global(data, MultiplierConfig(K=5))
    assert rep.r_squared == pytest.approx(1.0, abs=1e-8)


def test_r_squared_matches_classical(rng):
    X = rng.normal(size=(60, 2))
    y = X @ [1.0, -0.5] + rng.normal(size=60)
    rep = test_global(Dataset(X, y[:, None], Euclidean(dim=1)), MultiplierConfig(K=3))
    A = np.column_stack([np.ones(60), X])
    resid = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    assert rep.r_squared == pytest.approx(1 - resid @ resid / ((y - y.mean()) @ (y - y.mean())),
                                          abs=1e-10)


def test_randomized_statistic_shapes():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([0.5, 0.5, 0.5])
    assert randomized_statistic(a, b, np.ones(3), np.ones(3)) == pytest.approx(1.5)
    T = randomized_statistic(a, b, np.ones((4, 3)), np.zeros((4, 3)))
    np.testing.assert_allclose(T, 2.0)
    with pytest.raises(ValueError):
        randomized_statistic(a, b[:2], np.ones(3), np.ones(3))


def test_sigma_hat():
    assert sigma_hat([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))


def test_cauchy_transform_identity():
    # z = 0 sits on the pole of tan, where both forms are +-1e16 with arbitrary sign
    z = np.linspace(-6, 6, 40)
    direct = np.tan((2 * stats.norm.cdf(np.abs(z)) - 1.5) * np.pi)
    np.testing.assert_allclose(cauchy_transform(z), direct, rtol=1e-6, atol=1e-9)


def test_cauchy_transform_extreme_is_finite():
    big = cauchy_transform([40.0])[0]
    assert np.isfinite(big)
    assert big == pytest.approx(1 / np.tan(2 * np.pi * SF_FLOOR), rel=1e-12)


def test_cauchy_combine_pvalue():
    # |z| at the upper quartile maps to tan(0) = 0
    q = stats.norm.ppf(0.75)
    stat, p = cauchy_combine([q, -q])
    assert abs(stat) < 1e-12 and p == pytest.approx(1.0)
    stat, p = cauchy_combine([10.0] * 5)
    assert p < 1e-10
    with pytest.raises(ValueError):
        cauchy_combine([np.nan])


def test_cauchy_combine_matches_cauchy_sf():
    stat, p = cauchy_combine([2.0, 1.0, 3.0], [0.2, 0.3, 0.5])
    assert p == pytest.approx(2 * stats.cauchy.sf(abs(stat)), rel=1e-12)


def test_degenerate_constant_responses():
    data = Dataset(np.arange(8.0), np.tile([[0.0, 1.0]], (8, 1)), Sphere(dim=2))
    rep = test_global(data, MultiplierConfig(K=4))
    assert rep.p_value == 1.0 and rep.r_squared == 0.0
    assert rep.diagnostics["degenerate"]
    assert rep.diagnostics["reason"] == "constant responses"


def test_global_report_fields(rng):
    data = gen_network_sample(NetworkSimConfig(n=80, m=4, beta=0.3, gamma=0.3), rng)
    rep = test_global(data, MultiplierConfig(K=7, seed=2))
    assert rep.kind == "global" and rep.n == 80 and len(rep.z_scores) == 7
    assert 0 <= rep.p_value <= 1 and 0 <= rep.r_squared <= 1 and rep.sigma_hat > 0
    assert rep.diagnostics["all_converged"]
    assert set(rep.to_dict()) == {"kind", "r_squared", "z_scores", "cauchy_stat", "p_value",
                                  "sigma_hat", "n", "diagnostics"}
    assert rep.rejects(1.0)
    again = test_global(data, MultiplierConfig(K=7, seed=2))
    assert again.to_dict() == rep.to_dict()


def test_partial_report(rng):
    X = rng.normal(size=(100, 3))
    y = X[:, 0] + 2 * X[:, 2] + 0.1 * rng.normal(size=100)
    data = Dataset(X, y[:, None], Euclidean(dim=1))
    rep = test_partial(data, [0, 1], MultiplierConfig(K=10))
    assert rep.kind == "partial"
    assert rep.diagnostics["added"] == [2]
    assert rep.r_squared > 0.9 and rep.p_value < 1e-6
    with pytest.raises(FrechetError):
        test_partial(data, [0, 1, 2])


def test_global_no_effect_is_not_extreme(rng):
    X = rng.normal(size=(200, 2))
    data = Dataset(X, rng.normal(size=(200, 1)), Euclidean(dim=1))
    assert test_global(data, MultiplierConfig(K=50, seed=5)).p_value > 0.001
