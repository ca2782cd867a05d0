"""Property-based checks of metric axioms and estimator invariances."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from frechet_infer.regression import Dataset, fit
from frechet_infer.spaces import (
    Euclidean,
    LaplacianFrobenius,
    SimplexSqrt,
    Sphere,
    Wasserstein1D,
    vech_inverse,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def sphere_points(draw, k=3):
    pts = []
    for _ in range(k):
        t = draw(st.floats(0, np.pi))
        ph = draw(st.floats(0, 2 * np.pi))
        pts.append(np.array([np.sin(t) * np.cos(ph), np.sin(t) * np.sin(ph), np.cos(t)]))
    return Sphere(dim=3), pts


@st.composite
def laplacian_points(draw, m=4, k=3):
    q = m * (m - 1) // 2
    pts = [vech_inverse(-np.asarray(draw(arrays(float, q, elements=st.floats(0, 2)))), m)
           for _ in range(k)]
    return LaplacianFrobenius(m=m, edge_bound=2.0), pts


@st.composite
def quantile_points(draw, M=6, k=3):
    pts = [np.sort(draw(arrays(float, M, elements=st.floats(0, 1)))) for _ in range(k)]
    return Wasserstein1D(M=M), pts


@st.composite
def simplex_points(draw, dim=3, k=3):
    pts = []
    for _ in range(k):
        v = np.asarray(draw(arrays(float, dim, elements=st.floats(0, 1)))) + 1e-3
        pts.append(v / v.sum())
    return SimplexSqrt(dim=dim), pts


spaces_and_points = st.one_of(sphere_points(), laplacian_points(), quantile_points(),
                              simplex_points())


@SETTINGS
@given(spaces_and_points)
def test_metric_axioms(sp_pts):
    sp, (a, b, c) = sp_pts
    dab, dba = sp.distance(a, b), sp.distance(b, a)
    assert dab >= 0
    assert abs(dab - dba) <= 1e-12
    assert sp.distance(a, a) <= 1e-7
    assert dab <= sp.distance(a, c) + sp.distance(c, b) + 1e-7


@SETTINGS
@given(sphere_points(k=2), arrays(float, (3, 3), elements=finite))
def test_sphere_distance_rotation_invariant(sp_pts, M):
    sp, (a, b) = sp_pts
    Q, R = np.linalg.qr(M + 5 * np.eye(3))
    assert abs(sp.distance(a, b) - sp.distance(Q @ a, Q @ b)) < 1e-7


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), arrays(float, 2, elements=finite))
def test_prediction_invariant_to_predictor_affine_maps(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 2))
    Y = rng.normal(size=(25, 2))
    Xq = rng.normal(size=(3, 2))
    sp = Euclidean(dim=2)
    a = fit(Dataset(X, Y, sp)).predict(Xq)
    b = fit(Dataset(scale * X + shift, Y, sp)).predict(scale * Xq + shift)
    np.testing.assert_allclose(a, b, atol=1e-8)


@SETTINGS
@given(st.integers(0, 2**32 - 1))
def test_sphere_regression_rotation_equivariant(seed):
    rng = np.random.default_rng(seed)
    base = np.array([0.0, 0.0, 1.0])
    E = rng.normal(scale=0.3, size=(20, 3))
    E[:, 2] = 0.0
    nrm = np.linalg.norm(E, axis=1, keepdims=True)
    Y = np.cos(nrm) * base + np.sin(nrm) * E / nrm
    X = rng.normal(size=(20, 1))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    sp = Sphere(dim=3)
    p1 = fit(Dataset(X, Y, sp)).predict([[0.3]])
    p2 = fit(Dataset(X, Y @ Q.T, sp)).predict([[0.3]])
    np.testing.assert_allclose(p1 @ Q.T, p2, atol=1e-7)


@SETTINGS
@given(st.integers(0, 2**32 - 1))
def test_laplacian_mean_no_better_feasible_point(seed):
    rng = np.random.default_rng(seed)
    sp = LaplacianFrobenius(m=3, edge_bound=1.0)
    Y = np.stack([vech_inverse(-rng.uniform(0, 1, 3)) for _ in range(6)])
    w = rng.normal(size=6)
    w[0] += abs(w.sum()) + 0.3
    mu = sp.weighted_means(Y, w).points[0]
    f0 = sp.objective(mu, Y, w)
    for _ in range(30):
        cand = vech_inverse(-rng.uniform(0, 1, 3))
        assert sp.objective(cand, Y, w) >= f0 - 1e-10
