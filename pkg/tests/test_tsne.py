import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from noisydr.datagen import embed_and_noise, generate_links
from noisydr.errors import DataError, ParameterError, RunError
from noisydr.neighbors import pairwise_distances
from noisydr.tsne import (
    AffinityModel,
    ClampWarning,
    TsneSettings,
    conditional_affinities,
    gradient_step_reference,
    kl_divergence,
    kl_gradient,
    low_dim_similarities,
    run_tsne,
    symmetrize,
)

FAST = TsneSettings(n_iter=120, exaggeration_iters=40, momentum_switch_iter=40)


def random_joint(rng, n):
    P = rng.random((n, n))
    P = P + P.T
    np.fill_diagonal(P, 0.0)
    return P / P.sum()


def test_equidistant_triangle_perplexity_two():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    cond = conditional_affinities(pairwise_distances(tri), 2.0)
    off = cond.matrix[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, 0.5, atol=1e-12)


def test_simplex_uniform_rows_at_max_perplexity():
    n = 7
    cond = conditional_affinities(pairwise_distances(np.eye(n)), n - 1)
    off = cond.matrix[~np.eye(n, dtype=bool)]
    np.testing.assert_allclose(off, 1.0 / (n - 1), atol=1e-15)
    np.testing.assert_allclose(cond.achieved_perplexity, n - 1, atol=1e-12)


@pytest.mark.parametrize("perp", [3.0, 10.0, 25.0])
def test_row_perplexity_by_independent_entropy(perp):
    X = np.random.default_rng(1).normal(size=(60, 4))
    cond = conditional_affinities(pairwise_distances(X), perp, tol=1e-5)
    assert cond.converged.all()
    for i in range(60):
        row = cond.matrix[i]
        assert row[i] == 0.0
        assert abs(row.sum() - 1.0) < 1e-12
        assert abs(oracles.perplexity_of_row(row) - perp) <= 1e-5


def test_duplicates_are_legal():
    X = np.vstack([np.zeros((3, 2)), np.random.default_rng(0).normal(size=(10, 2))])
    cond = conditional_affinities(pairwise_distances(X), 4.0)
    assert cond.converged.all() and np.all(np.isfinite(cond.matrix))


def test_perplexity_range():
    D = pairwise_distances(np.random.default_rng(0).normal(size=(10, 2)))
    for bad in (1.0, 10.0, 12.0):
        with pytest.raises(ParameterError):
            conditional_affinities(D, bad)


def test_unconverged_rows_flagged():
    D = pairwise_distances(np.random.default_rng(0).normal(size=(20, 2)))
    with pytest.warns(RuntimeWarning):
        cond = conditional_affinities(D, 5.0, tol=1e-5, max_iter=3)
    assert not cond.converged.all()


def test_symmetrize_uniform():
    n = 6
    C = (np.ones((n, n)) - np.eye(n)) / (n - 1)
    P = symmetrize(C).P
    np.testing.assert_allclose(P[~np.eye(n, dtype=bool)], 1.0 / (n * (n - 1)), atol=1e-15)


def test_symmetrize_matches_loop():
    rng = np.random.default_rng(5)
    C = rng.random((8, 8))
    np.fill_diagonal(C, 0.0)
    C /= C.sum(axis=1, keepdims=True)
    P = symmetrize(C).P
    assert np.max(np.abs(P - oracles.joint_from_conditional(C))) <= 1e-15
    assert abs(P.sum() - 1.0) < 1e-10 and np.array_equal(P, P.T)


def test_symmetrize_rejects_bad_rows():
    C = np.full((3, 3), 0.4)
    np.fill_diagonal(C, 0.0)
    with pytest.raises(DataError):
        symmetrize(C)


def test_q_two_points():
    Q = low_dim_similarities([[0.0, 0.0], [7.0, -3.0]])
    assert Q[0, 1] == 0.5 and Q[1, 0] == 0.5


def test_q_equilateral():
    tri = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, np.sqrt(3)]])
    Q = low_dim_similarities(tri)
    np.testing.assert_allclose(Q[~np.eye(3, dtype=bool)], 1 / 6, atol=1e-15)


def test_q_matches_loop():
    X = np.random.default_rng(2).normal(size=(10, 2))
    Q = low_dim_similarities(X)
    np.testing.assert_allclose(Q, oracles.student_q(X), atol=1e-12, rtol=0)
    assert abs(Q.sum() - 1) < 1e-10
    with pytest.raises(DataError):
        low_dim_similarities([[0.0, np.nan], [1.0, 1.0]])


def test_kl_identical_and_uniform():
    rng = np.random.default_rng(0)
    P = random_joint(rng, 9)
    assert kl_divergence(AffinityModel(P, None, 3.0, None), P.copy()) < 1e-10
    U = np.ones((5, 5)) - np.eye(5)
    U /= U.sum()
    assert kl_divergence(U, U) == 0.0


def test_kl_matches_loop():
    rng = np.random.default_rng(4)
    P = random_joint(rng, 7)
    Q = random_joint(rng, 7)
    assert abs(kl_divergence(P, Q) - oracles.kl(P, Q)) < 1e-12


def test_kl_clamp_is_reported():
    P = np.array([[0, 0.25, 0.25], [0.25, 0, 0], [0.25, 0, 0]])
    Q = np.array([[0, 0.5, 0.0], [0.5, 0, 0], [0.0, 0, 0]])
    with pytest.warns(ClampWarning):
        value = kl_divergence(P, Q)
    assert np.isfinite(value) and value > 0


def test_gradient_zero_at_stationary_point():
    X = np.random.default_rng(3).normal(size=(6, 2))
    P = low_dim_similarities(X)
    assert np.max(np.abs(kl_gradient(P, X))) < 1e-10


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    P = random_joint(rng, 8)
    X = rng.normal(size=(8, 2))
    analytic = kl_gradient(P, X)
    numeric = oracles.finite_difference_gradient(P, X, h=1e-5)
    rel = np.abs(analytic - numeric) / np.abs(numeric)
    assert rel.max() < 1e-4


def test_gradient_translation_invariant():
    rng = np.random.default_rng(9)
    P = random_joint(rng, 8)
    X = rng.normal(size=(8, 2))
    np.testing.assert_allclose(kl_gradient(P, X), kl_gradient(P, X + [5.0, -3.0]), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 12), st.integers(1, 3), st.floats(1.0, 12.0))
def test_compiled_kernel_matches_numpy_gradient(seed, n, q, alpha):
    rng = np.random.default_rng(seed)
    P = random_joint(rng, n)
    X = rng.normal(size=(n, q))
    np.testing.assert_allclose(
        gradient_step_reference(P, X, alpha), kl_gradient(alpha * P, X), atol=1e-12, rtol=1e-10
    )


@pytest.fixture(scope="module")
def small_links():
    Y, labels = generate_links(30)
    return embed_and_noise(Y, 5, 0.3, seed=3)


def test_run_descends_and_is_deterministic(small_links):
    a = run_tsne(small_links.observed, 10.0, seed=5, settings=FAST)
    b = run_tsne(small_links.observed.copy(), 10.0, seed=5, settings=FAST)
    assert a.final_kl <= a.initial_kl
    assert np.array_equal(a.X, b.X) and a.final_kl == b.final_kl
    assert a.X.shape == (60, 2) and np.all(np.isfinite(a.X))
    assert a.hyperparameters["learning_rate"] == 200.0
    c = run_tsne(small_links.observed, 10.0, seed=6, settings=FAST)
    assert not np.array_equal(a.X, c.X)


def test_reported_kl_matches_recomputation(small_links):
    run = run_tsne(small_links.observed, 10.0, seed=1, settings=FAST)
    P = symmetrize(conditional_affinities(pairwise_distances(small_links.observed), 10.0))
    assert abs(run.final_kl - kl_divergence(P, low_dim_similarities(run.X))) < 1e-9


def test_distance_input_and_other_dims(small_links):
    D = pairwise_distances(small_links.observed)
    run = run_tsne(D, 8.0, q=3, seed=2, settings=FAST)
    assert run.X.shape == (60, 3)
    rnd = run_tsne(small_links.observed, 8.0, q=1, seed=2, settings=TsneSettings(n_iter=50, init="random"))
    assert rnd.X.shape == (60, 1)


def test_divergence_raises_run_error(small_links):
    wild = TsneSettings(n_iter=50, learning_rate=1e305, use_gains=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(RunError) as info:
            run_tsne(small_links.observed, 10.0, seed=0, settings=wild)
    assert info.value.iteration is not None


def test_settings_validation():
    with pytest.raises(ParameterError):
        TsneSettings(init="spectral")
    with pytest.raises(ParameterError):
        TsneSettings.from_dict({"n_iters": 3})
    with pytest.raises(ParameterError):
        run_tsne(np.zeros((5, 2)) + np.arange(5)[:, None], 2.0, q=0)
