import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.manifold import trustworthiness as sk_trustworthiness

import oracles
from noisydr.datagen import make_rng
from noisydr.errors import ParameterError
from noisydr.metrics import (
    Geometry,
    shepard_goodness,
    silhouette,
    trustworthiness,
    trustworthiness_subsampled,
)


def rigid(rng, X):
    return X @ oracles.random_rotation(rng, X.shape[1]) + rng.normal(size=X.shape[1])


def test_rigid_motion_is_perfectly_trustworthy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    assert trustworthiness(X, rigid(rng, X), 5).value == 1.0


def test_line_reversal():
    line = np.arange(20.0)[:, None]
    assert trustworthiness(line, line[::-1] * -1.0 + 0.0, 5).value == 1.0
    assert trustworthiness(line, -line, 5).value == 1.0


@pytest.mark.parametrize("k", [1, 5])
def test_trustworthiness_matches_bruteforce(k):
    rng = np.random.default_rng(10 + k)
    A, B = rng.normal(size=(20, 4)), rng.normal(size=(20, 2))
    assert abs(trustworthiness(A, B, k).value - oracles.trustworthiness(A, B, k)) < 1e-12


def test_trustworthiness_agrees_with_sklearn():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(60, 5)), rng.normal(size=(60, 2))
    for k in (3, 10):
        assert abs(trustworthiness(A, B, k).value - sk_trustworthiness(A, B, n_neighbors=k)) < 1e-12


def test_trustworthiness_argument_checks():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(ParameterError):
        trustworthiness(X, X[:9], 2)
    with pytest.raises(ParameterError):
        trustworthiness(X, X, 7)  # 3k must stay below 2n - 1
    with pytest.raises(ParameterError):
        trustworthiness(X, X, 0)
    with pytest.raises(ParameterError):
        trustworthiness(X[:3], X[:3], 1)


def test_subsampled_full_equals_exact():
    rng = np.random.default_rng(2)
    A, B = rng.normal(size=(30, 3)), rng.normal(size=(30, 2))
    exact = trustworthiness(A, B, 4).value
    sub = trustworthiness_subsampled(A, B, 4, 30, seed=9)
    assert abs(sub.value - exact) < 1e-12
    assert sub.subsample_size == 30 and sub.subsample_seed == 9


def test_subsampled_matches_bruteforce_rows():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(25, 3)), rng.normal(size=(25, 2))
    rows = sorted(make_rng(77).choice(25, size=8, replace=False))
    expected = oracles.trustworthiness(A, B, 3, rows=rows)
    assert abs(trustworthiness_subsampled(A, B, 3, 8, seed=77).value - expected) < 1e-12


def test_subsampled_rigid_is_one():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 4))
    assert trustworthiness_subsampled(X, rigid(rng, X), 6, 7, seed=1).value == 1.0


def test_subsampled_close_to_exact_on_random_projection():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 8))
    emb = X @ rng.normal(size=(8, 2))
    exact = trustworthiness(X, emb, 10).value
    approx = trustworthiness_subsampled(X, emb, 10, 50, seed=3).value
    assert abs(exact - approx) < 0.05


def test_shepard_scaling_and_reversal():
    X = np.random.default_rng(6).normal(size=(25, 3))
    assert shepard_goodness(X, 3.5 * X).value == 1.0
    # pair distances (d01, d12, d02) = (1, 2, 3) against (3, 2, 1)
    a = np.array([[0.0], [1.0], [3.0]])
    b = np.array([[0.0], [3.0], [1.0]])
    assert shepard_goodness(a, b).value == pytest.approx(-1.0, abs=1e-15)


def test_shepard_matches_bruteforce():
    rng = np.random.default_rng(7)
    A, B = rng.normal(size=(30, 4)), rng.normal(size=(30, 2))
    assert abs(shepard_goodness(A, B).value - oracles.shepard(A, B)) < 1e-12


def test_shepard_with_ties_matches_bruteforce():
    rng = np.random.default_rng(8)
    A = rng.integers(0, 3, size=(15, 2)).astype(float)
    B = rng.integers(0, 2, size=(15, 2)).astype(float)
    assert abs(shepard_goodness(A, B).value - oracles.shepard(A, B)) < 1e-12


def test_shepard_degenerate():
    rep = shepard_goodness(np.eye(4), np.random.default_rng(0).normal(size=(4, 2)))
    assert rep.degenerate and np.isnan(rep.value)


def test_shepard_subsample():
    rng = np.random.default_rng(9)
    A, B = rng.normal(size=(40, 3)), rng.normal(size=(40, 2))
    rep = shepard_goodness(A, B, subsample=(12, 5))
    idx = np.sort(make_rng(5).choice(40, size=12, replace=False))
    assert abs(rep.value - oracles.shepard(A[idx], B[idx])) < 1e-12
    assert shepard_goodness(A, B, subsample=(40, 1)).value == pytest.approx(shepard_goodness(A, B).value, abs=1e-12)


def test_silhouette_separated_clusters():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.01, (20, 2)), rng.normal(100, 0.01, (20, 2))])
    assert silhouette(X, [0] * 20 + [1] * 20).value > 0.9


def test_silhouette_identical_points():
    assert silhouette(np.zeros((6, 2)), [0, 0, 0, 1, 1, 1]).value == 0.0


def test_silhouette_matches_bruteforce():
    rng = np.random.default_rng(12)
    X = np.vstack([rng.normal(c, 1.0, (8, 2)) for c in (0, 3, 6)])
    labels = np.repeat([0, 1, 2], 8)
    assert abs(silhouette(X, labels).value - oracles.silhouette(X, labels)) < 1e-12


def test_silhouette_singletons_and_errors():
    X = np.random.default_rng(1).normal(size=(7, 2))
    labels = [0, 0, 0, 1, 1, 1, 2]
    assert abs(silhouette(X, labels).value - oracles.silhouette(X, labels)) < 1e-12
    with pytest.raises(ParameterError):
        silhouette(X, [0] * 7)


matrices = st.tuples(st.integers(0, 2**31), st.integers(6, 25), st.integers(1, 4))


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_metric_invariants(args):
    seed, n, d = args
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(n, d))
    E = rng.normal(size=(n, 2))
    k = int(rng.integers(1, (2 * n - 2) // 3 + 1))
    assert trustworthiness(D, D, k).value == 1.0
    t = trustworthiness(D, E, k).value
    if 2 * k < n:
        # the normaliser is the worst case only while k < n/2
        assert 0.0 <= t <= 1.0
    assert abs(trustworthiness(D, rigid(rng, E), k).value - t) < 1e-12
    s = shepard_goodness(D, E).value
    assert -1.0 <= s <= 1.0
    assert abs(shepard_goodness(2.0 * D, 0.1 * E).value - s) < 1e-12
    g = Geometry(D)
    assert trustworthiness(g, E, k).value == trustworthiness(g, E, k).value
