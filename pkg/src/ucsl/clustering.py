"""Gaussian mixtures (EM, full covariance) and k-means (Lloyd + k-means++)."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError, InsufficientSamplesError

COV_FLOOR = 1e-6


class ClusteringMethod(str, Enum):
    GMM = "gmm"
    KMEANS = "kmeans"


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_dim(X, p):
    if X.shape[1] != p:
        raise DimensionMismatchError(p, X.shape[1])


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; returns indices of the chosen rows."""
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[idx])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return np.array(idx)


# -- k-means ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KmeansModel:
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple = ()

    kind = ClusteringMethod.KMEANS

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        _check_dim(X, self.n_features)
        return np.argmin(_sq_dists(X, self.centroids), axis=1)

    def posterior(self, X) -> np.ndarray:
        """Hard (one-hot) responsibilities."""
        lab = self.predict(X)
        R = np.zeros((len(lab), self.n_clusters))
        R[np.arange(len(lab)), lab] = 1.0
        return R

    def to_dict(self) -> dict:
        return {"kind": "kmeans", "centroids": self.centroids.tolist(), "inertia": float(self.inertia)}

    @classmethod
    def from_dict(cls, d) -> "KmeansModel":
        return cls(np.asarray(d["centroids"], dtype=float), d["inertia"])

    @classmethod
    def from_labels(cls, X, labels, K) -> "KmeansModel":
        X = _as_2d(X)
        C = np.vstack([X[labels == k].mean(0) if np.any(labels == k) else X.mean(0) for k in range(K)])
        return cls(C, _inertia(X, C, labels))


def _lloyd(X, centroids, max_iter, history):
    n, K = len(X), len(centroids)
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centroids)
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = centroids.copy()
        for k in range(K):
            members = labels == k
            if members.any():
                centroids[k] = X[members].mean(0)
            else:
                # reseed an empty cluster at the worst-served point
                far = int(np.argmax(d2[np.arange(n), labels]))
                centroids[k] = X[far]
                labels = labels.copy()
                labels[far] = k
                d2[far] = 0.0
    labels = np.argmin(_sq_dists(X, centroids), axis=1)
    return centroids, labels, _inertia(X, centroids, labels)


def _inertia(X, centroids, labels) -> float:
    # direct differences: the expanded form leaves round-off at exact hits
    return float(((X - centroids[labels]) ** 2).sum())


def fit_kmeans(X, K: int, seed: int = 0, n_init: int = 10, max_iter: int = 300,
               init_labels=None) -> KmeansModel:
    X = _as_2d(X)
    if len(X) < K:
        raise InsufficientSamplesError(f"{len(X)} samples for {K} clusters")
    warm = _usable_labels(init_labels, len(X), K)
    if warm is not None:
        hist = []
        C0 = np.vstack([X[warm == k].mean(0) for k in range(K)])
        C, _, inertia = _lloyd(X, C0, max_iter, hist)
        return KmeansModel(C, inertia, tuple(hist))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        hist = []
        C, _, inertia = _lloyd(X, X[kmeans_plusplus(X, K, rng)].copy(), max_iter, hist)
        if best is None or inertia < best.inertia:
            best = KmeansModel(C, inertia, tuple(hist))
    return best


def kmeans_assign(model: KmeansModel, X) -> np.ndarray:
    return model.posterior(X)


# -- Gaussian mixture ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GmmModel:
    means: np.ndarray
    covariances: np.ndarray
    mixing_weights: np.ndarray
    fit_log_likelihood: float = float("nan")
    log_likelihood_history: tuple = ()

    kind = ClusteringMethod.GMM

    @property
    def n_clusters(self) -> int:
        return self.means.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def component_log_density(self, X) -> np.ndarray:
        """log N(x | mu_k, Sigma_k), shape (n, K)."""
        X = _as_2d(X)
        _check_dim(X, self.n_features)
        n, p = X.shape
        out = np.empty((n, self.n_clusters))
        for k in range(self.n_clusters):
            L = np.linalg.cholesky(self.covariances[k])
            z = np.linalg.solve(L, (X - self.means[k]).T)
            logdet = 2 * np.log(np.diag(L)).sum()
            out[:, k] = -0.5 * ((z * z).sum(0) + logdet + p * np.log(2 * np.pi))
        return out

    def joint_log_density(self, X) -> np.ndarray:
        return self.component_log_density(X) + np.log(self.mixing_weights)

    def score_samples(self, X) -> np.ndarray:
        """Log marginal density per sample."""
        return logsumexp(self.joint_log_density(X), axis=1)

    def posterior(self, X) -> np.ndarray:
        J = self.joint_log_density(X)
        R = np.exp(J - logsumexp(J, axis=1, keepdims=True))
        return R / R.sum(1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.posterior(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "gmm",
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "weights": self.mixing_weights.tolist(),
            "log_likelihood": float(self.fit_log_likelihood),
        }

    @classmethod
    def from_dict(cls, d) -> "GmmModel":
        return cls(np.asarray(d["means"], float), np.asarray(d["covariances"], float),
                   np.asarray(d["weights"], float), d.get("log_likelihood", float("nan")))

    @classmethod
    def from_labels(cls, X, labels, K, reg: float = COV_FLOOR) -> "GmmModel":
        """Single M-step from a hard partition."""
        X = _as_2d(X)
        R = np.zeros((len(X), K))
        R[np.arange(len(X)), labels] = 1.0
        means, covs, weights = _m_step(X, R, _floor(X, reg))
        m = cls(means, covs, weights)
        return cls(means, covs, weights, float(m.score_samples(X).sum()))


def _floor(X, reg):
    v = X.var(axis=0).mean() if len(X) > 1 else 0.0
    return reg * (v if v > 0 else 1.0)


def _clip_cov(S, floor):
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    if vals.min() >= floor:
        return S
    # constrained MLE under Sigma >= floor * I
    vals = np.maximum(vals, floor)
    S = (vecs * vals) @ vecs.T
    return 0.5 * (S + S.T)


def _m_step(X, R, floor):
    n, p = X.shape
    nk = R.sum(0)
    nk_safe = np.where(nk > 0, nk, 1.0)
    means = (R.T @ X) / nk_safe[:, None]
    covs = np.empty((R.shape[1], p, p))
    for k in range(R.shape[1]):
        if nk[k] > 0:
            D = X - means[k]
            S = (R[:, k, None] * D).T @ D / nk[k]
        else:
            S = np.eye(p) * floor
        covs[k] = _clip_cov(S, floor)
    weights = nk / n
    weights = np.maximum(weights, np.finfo(float).tiny)
    return means, covs, weights / weights.sum()


def _em_run(X, R, max_iter, tol, floor):
    n = len(X)
    means, covs, weights = _m_step(X, R, floor)
    hist = []
    for _ in range(max_iter):
        model = GmmModel(means, covs, weights)
        J = model.joint_log_density(X)
        lse = logsumexp(J, axis=1, keepdims=True)
        hist.append(float(lse.sum()))
        R = np.exp(J - lse)
        if len(hist) > 1 and abs(hist[-1] - hist[-2]) <= tol * n:
            break
        means, covs, weights = _m_step(X, R, floor)
    else:
        hist.append(float(GmmModel(means, covs, weights).score_samples(X).sum()))
    return GmmModel(means, covs, weights, hist[-1], tuple(hist)), R


def _hard(labels, K):
    R = np.zeros((len(labels), K))
    R[np.arange(len(labels)), labels] = 1.0
    return R


def _usable_labels(labels, n, K):
    if labels is None:
        return None
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,):
        raise DimensionMismatchError(n, len(labels), "initial label length")
    # a warm start needs every component populated
    return labels if np.all(np.bincount(labels, minlength=K)[:K] > 0) and labels.max() < K else None


def fit_gmm(X, K: int, seed: int = 0, n_init: int = 10, max_iter: int = 200,
            tol: float = 1e-7, reg: float = COV_FLOOR, init_labels=None) -> GmmModel:
    """EM from ``n_init`` k-means++ seedings; the best final log-likelihood wins.

    Covariance eigenvalues are kept above ``reg`` times the mean feature
    variance. ``tol`` is on the per-sample log-likelihood change. With
    ``init_labels`` (one label per row, every component used) a single run
    starts from that partition instead.
    """
    X = _as_2d(X)
    if X.shape[1] < 1:
        raise ValueError("need at least one feature")
    if len(X) < K:
        raise InsufficientSamplesError(f"{len(X)} samples for {K} components")
    rng = np.random.default_rng(seed)
    floor = _floor(X, reg)
    warm = _usable_labels(init_labels, len(X), K)
    if warm is not None:
        return _em_run(X, _hard(warm, K), max_iter, tol, floor)[0]
    best = None
    for _ in range(n_init):
        model, _ = _em_run(X, _hard(np.argmin(_sq_dists(X, X[kmeans_plusplus(X, K, rng)]), axis=1), K),
                           max_iter, tol, floor)
        if best is None or model.fit_log_likelihood > best.fit_log_likelihood:
            best = model
    return best


def gmm_posterior(model: GmmModel, X) -> np.ndarray:
    return model.posterior(X)


ClusteringModel = Union[GmmModel, KmeansModel]


def fit_clusterer(method, X, K: int, seed: int, n_init: int = 1, init_labels=None) -> ClusteringModel:
    method = ClusteringMethod(method)
    if method is ClusteringMethod.GMM:
        return fit_gmm(X, K, seed=seed, n_init=n_init, init_labels=init_labels)
    return fit_kmeans(X, K, seed=seed, n_init=n_init, init_labels=init_labels)


def clusterer_from_labels(method, X, labels, K) -> ClusteringModel:
    method = ClusteringMethod(method)
    if method is ClusteringMethod.GMM:
        return GmmModel.from_labels(X, labels, K)
    return KmeansModel.from_labels(X, labels, K)


def clusterer_from_dict(d: dict) -> ClusteringModel:
    return GmmModel.from_dict(d) if d["kind"] == "gmm" else KmeansModel.from_dict(d)
