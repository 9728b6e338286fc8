import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from ucsl.clustering import (
    GmmModel,
    KmeansModel,
    clusterer_from_dict,
    fit_gmm,
    fit_kmeans,
    kmeans_plusplus,
)
from ucsl.errors import InsufficientSamplesError


def _blobs(seed, n=100, centres=((-10.0, 0.0), (10.0, 0.0))):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((n, 2)) + c for c in centres])
    return X, np.repeat(np.arange(len(centres)), n)


def test_gmm_recovers_blob_means():
    X, lab = _blobs(0)
    g = fit_gmm(X, 2, seed=0)
    truth = np.array([X[lab == k].mean(0) for k in range(2)])
    order = np.argsort(g.means[:, 0])
    assert np.all(np.abs(g.means[order] - truth) < 0.5)


def test_gmm_k1_is_global_mean():
    X, _ = _blobs(1)
    g = fit_gmm(X, 1, seed=0)
    np.testing.assert_allclose(g.means[0], X.mean(0), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(g.posterior(X), 1.0)


def test_gmm_deterministic():
    X, _ = _blobs(2)
    assert fit_gmm(X, 3, seed=4).to_dict() == fit_gmm(X, 3, seed=4).to_dict()


def test_component_density_matches_scipy():
    X, _ = _blobs(3)
    g = fit_gmm(X, 2, seed=0)
    ref = np.column_stack([multivariate_normal(g.means[k], g.covariances[k]).logpdf(X) for k in range(2)])
    np.testing.assert_allclose(g.component_log_density(X), ref, atol=1e-9)


def test_posterior_at_component_mean():
    g = GmmModel(np.array([[0.0, 0.0], [20.0, 0.0]]), np.stack([np.eye(2)] * 2), np.array([0.5, 0.5]))
    p = g.posterior([[0.0, 0.0], [20.0, 0.0]])
    # density ratio exp(-200) is far below the 1e-3 slack
    assert p[0, 0] >= 0.999 and p[1, 1] >= 0.999


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_em_monotone_jensen_and_rows(seed, K, d):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((60, d)) + rng.integers(0, 3, (60, 1)) * 3.0
    g = fit_gmm(X, K, seed=seed, n_init=1, max_iter=50, tol=0.0)
    hist = np.array(g.log_likelihood_history)
    assert np.all(np.diff(hist) >= -1e-8 * np.maximum(1.0, np.abs(hist[1:])))
    R = g.posterior(X)
    np.testing.assert_allclose(R.sum(1), 1.0, atol=1e-9)
    # lower bound sum_c q log(p(x,c)/q) with q = posterior equals log p(x)
    J = g.joint_log_density(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(R > 0, R * (J - np.log(R)), 0.0)
    np.testing.assert_allclose(terms.sum(1), logsumexp(J, axis=1), atol=1e-8)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        fit_gmm(np.zeros((2, 1)), 3)
    with pytest.raises(InsufficientSamplesError):
        fit_kmeans(np.zeros((2, 1)), 3)


def test_duplicate_points_do_not_break_gmm():
    X = np.vstack([np.zeros((10, 2)), np.ones((10, 2))])
    g = fit_gmm(X, 2, seed=0)
    assert np.all(np.isfinite(g.posterior(X)))


def test_kmeans_k_equals_n():
    X = np.random.default_rng(0).standard_normal((7, 3))
    m = fit_kmeans(X, 7, seed=1)
    assert m.inertia == 0.0
    assert sorted(m.predict(X).tolist()) == list(range(7))


def test_kmeans_two_blobs_optimal_partition():
    X, lab = _blobs(4, n=6)
    m = fit_kmeans(X, 2, seed=0)
    # exhaustive search over all 2-partitions (first point fixed to side 0)
    best, best_lab = np.inf, None
    for bits in itertools.product([0, 1], repeat=len(X) - 1):
        part = np.array((0,) + bits)
        if part.min() == part.max():
            continue
        cost = sum(((X[part == k] - X[part == k].mean(0)) ** 2).sum() for k in (0, 1))
        if cost < best:
            best, best_lab = cost, part
    pred = m.predict(X)
    assert m.inertia == pytest.approx(best, rel=1e-12)
    assert (np.array_equal(pred, best_lab) or np.array_equal(pred, 1 - best_lab))
    assert np.array_equal(best_lab, lab) or np.array_equal(best_lab, 1 - lab)


def test_kmeans_beats_random_centroids():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 2)) * [3, 1]
    m = fit_kmeans(X, 3, seed=0)
    for _ in range(50):
        C = X[rng.choice(80, 3, replace=False)] + rng.standard_normal((3, 2)) * 0.1
        inertia = ((X[:, None, :] - C[None]) ** 2).sum(-1).min(1).sum()
        assert m.inertia <= inertia + 1e-9


def test_kmeans_history_monotone_and_one_hot():
    X, _ = _blobs(6)
    m = fit_kmeans(X, 3, seed=2, n_init=1)
    assert np.all(np.diff(m.inertia_history) <= 1e-9)
    P = m.posterior(X)
    assert set(np.unique(P)) <= {0.0, 1.0}
    np.testing.assert_array_equal(P.sum(1), 1.0)


def test_kmeans_plusplus_distinct_indices():
    X = np.arange(10.0)[:, None]
    idx = kmeans_plusplus(X, 5, np.random.default_rng(0))
    assert len(set(idx.tolist())) == 5


@pytest.mark.parametrize("model_cls", [GmmModel, KmeansModel])
def test_from_labels_and_round_trip(model_cls):
    X, lab = _blobs(7)
    m = model_cls.from_labels(X, lab, 2)
    assert np.mean(m.predict(X) == lab) > 0.99
    back = clusterer_from_dict(m.to_dict())
    np.testing.assert_allclose(back.posterior(X), m.posterior(X), atol=0)


@pytest.mark.parametrize("fit", [fit_gmm, fit_kmeans])
def test_warm_start_keeps_clean_partition(fit):
    X, lab = _blobs(8)
    m = fit(X, 2, seed=0, init_labels=1 - lab)
    np.testing.assert_array_equal(m.predict(X), 1 - lab)


@pytest.mark.parametrize("fit", [fit_gmm, fit_kmeans])
def test_warm_start_with_empty_component_falls_back(fit):
    X, lab = _blobs(9)
    a = fit(X, 2, seed=3, n_init=1, init_labels=np.zeros(len(X), int))
    b = fit(X, 2, seed=3, n_init=1)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))
