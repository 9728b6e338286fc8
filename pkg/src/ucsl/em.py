"""The UCSL expectation-maximisation loop and the fitted model.

Each EM iteration fits one weighted linear model per latent cluster
(M-step), spans their normal vectors with an orthonormal basis, projects the
data onto it and re-clusters the clustered class there (E-step). Several
independently seeded runs are merged by spectral consensus, and a last EM
run starts from that consensus.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .clustering import (
    ClusteringMethod,
    ClusteringModel,
    clusterer_from_dict,
    clusterer_from_labels,
    fit_clusterer,
)
from .consensus import cooccurrence, spectral_clustering
from .errors import (
    ClusterCollapseError,
    ConvergenceError,
    DegenerateWeightsError,
    DimensionMismatchError,
    EmptyBasisError,
    EnsembleError,
    InsufficientSamplesError,
)
from .estimators import EstimatorKind, LinearModel, fit_weighted
from .metrics import adjusted_rand_index
from .projection import DirectionBasis, gram_schmidt, project

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COLLAPSE_FRACTION = 1e-3


class NegativeWeighting(str, Enum):
    POSTERIOR_EXTENSION = "posterior_extension"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class UcslConfig:
    n_clusters: int = 2
    n_ensembles: int = 10
    max_em_iter: int = 30
    stop_ari: float = 0.85
    clustering_method: ClusteringMethod = ClusteringMethod.GMM
    estimator_kind: EstimatorKind = EstimatorKind.LOGISTIC
    negative_weighting: NegativeWeighting = NegativeWeighting.POSTERIOR_EXTENSION
    regularization: float = 1.0
    seed: int = 0
    # clustering restarts at initialisation and in every E-step
    cluster_n_init: int = 1
    # share of the uniform 1/K mixed into negatives' posterior weights
    negative_weight_floor: float = 1e-3
    # E-step clustering starts from the previous hard labels instead of a fresh seeding
    warm_start: bool = True

    def __post_init__(self):
        object.__setattr__(self, "clustering_method", ClusteringMethod(self.clustering_method))
        object.__setattr__(self, "estimator_kind", EstimatorKind(self.estimator_kind))
        object.__setattr__(self, "negative_weighting", NegativeWeighting(self.negative_weighting))
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.n_ensembles < 1 or self.max_em_iter < 1 or self.cluster_n_init < 1:
            raise ValueError("n_ensembles, max_em_iter and cluster_n_init must be >= 1")
        if not 0 <= self.stop_ari <= 1:
            raise ValueError("stop_ari must lie in [0, 1]")
        if not self.regularization > 0:
            raise ValueError("regularization must be positive")
        if not 0 <= self.negative_weight_floor <= 1:
            raise ValueError("negative_weight_floor must lie in [0, 1]")

    @property
    def is_regression(self) -> bool:
        return self.estimator_kind is EstimatorKind.REGRESSION

    def to_dict(self) -> dict:
        return {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "UcslConfig":
        return cls(**d)


def _cluster_mask(y, regression: bool) -> np.ndarray:
    y = np.asarray(y)
    return np.ones(len(y), dtype=bool) if regression else y == 1


def _seed_stream(seed: int):
    rng = np.random.default_rng(seed)
    return lambda: int(rng.integers(2**63))


# -- steps -------------------------------------------------------------------

def initialize_q(X, y, K: int, method=ClusteringMethod.GMM, seed: int = 0,
                 n_init: int = 1, regression: bool = False) -> np.ndarray:
    """Cluster the clustered class in raw feature space; responsibilities for all rows."""
    X = np.asarray(X, dtype=float)
    mask = _cluster_mask(y, regression)
    if mask.sum() < K:
        raise InsufficientSamplesError(f"{int(mask.sum())} clustered samples for K={K}")
    if K == 1:
        return np.ones((len(X), 1))
    return fit_clusterer(method, X[mask], K, seed=seed, n_init=n_init).posterior(X)


def sample_weights_from_q(Q, y, config: UcslConfig) -> np.ndarray:
    """Per-cluster sample weights for the M-step (columns of the returned matrix)."""
    W = np.array(Q, dtype=float, copy=True)
    if config.is_regression:
        return W
    K = W.shape[1]
    neg = np.asarray(y) != 1
    if config.negative_weighting is NegativeWeighting.UNIFORM:
        W[neg] = 1.0 / K
    else:
        W[neg] = W[neg] + config.negative_weight_floor * (1.0 / K - W[neg])
    return W


def m_step(X, y, Q, config: UcslConfig) -> List[LinearModel]:
    """One weighted linear model per column of ``Q``."""
    W = sample_weights_from_q(Q, y, config)
    models = []
    for k in range(W.shape[1]):
        try:
            models.append(fit_weighted(config.estimator_kind, X, y, W[:, k], config.regularization))
        except DegenerateWeightsError as exc:
            raise ClusterCollapseError(k, str(exc)) from exc
    return models


def e_step(X, y, sub_models: Sequence[LinearModel], K: int, method=ClusteringMethod.GMM,
           seed: int = 0, n_init: int = 1, regression: bool = False, init_labels=None):
    """Project onto the span of the classifiers' normals and re-cluster there.

    ``init_labels`` (clustered rows only) warm-starts the clustering.
    Returns ``(Q, basis, cluster_model)``.
    """
    if not sub_models:
        raise ValueError("need at least one sub-model")
    basis = gram_schmidt(np.vstack([m.weights for m in sub_models]))
    Xp = project(X, basis)
    mask = _cluster_mask(y, regression)
    model = fit_clusterer(method, Xp[mask], K, seed=seed, n_init=n_init, init_labels=init_labels)
    return model.posterior(Xp), basis, model


def rescue_collapsed(Q, mask, fraction: float = COLLAPSE_FRACTION):
    """Give nearly empty columns the most uncertain clustered rows.

    Returns the (possibly) modified copy of ``Q`` and the rescued columns.
    """
    Q = np.array(Q, dtype=float, copy=True)
    idx = np.flatnonzero(mask)
    n_pos, K = len(idx), Q.shape[1]
    rescued = []
    for k in range(K):
        if Q[idx, k].sum() >= fraction * n_pos:
            continue
        P = np.clip(Q[idx], 1e-300, 1.0)
        entropy = -(P * np.log(P)).sum(1)
        take = idx[np.argsort(-entropy, kind="stable")[: max(1, n_pos // K)]]
        Q[take] = 0.0
        Q[take, k] = 1.0
        rescued.append(k)
    return Q, rescued


@dataclass(frozen=True, eq=False)
class EmRun:
    labels: np.ndarray                # hard labels of the clustered rows
    sub_models: tuple
    basis: DirectionBasis
    cluster_model: ClusteringModel
    n_iter: int
    converged: bool
    responsibilities: np.ndarray


def run_em_once(X, y, config: UcslConfig, seed: int, q_init=None) -> EmRun:
    """Alternate M- and E-steps until successive labelings agree (ARI >= stop_ari)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    K = config.n_clusters
    mask = _cluster_mask(y, config.is_regression)
    draw = _seed_stream(seed)
    init_seed = draw()
    if q_init is None:
        Q = initialize_q(X, y, K, config.clustering_method, init_seed,
                         config.cluster_n_init, config.is_regression)
    else:
        Q = np.asarray(q_init, dtype=float)
    labels = np.argmax(Q[mask], axis=1)
    converged = False
    models = basis = clus = None
    it = 0
    for it in range(1, config.max_em_iter + 1):
        Q, rescued = rescue_collapsed(Q, mask)
        if rescued:
            logger.debug("seed %d iter %d: rescued collapsed clusters %s", seed, it, rescued)
        models = m_step(X, y, Q, config)
        warm = np.argmax(Q[mask], axis=1) if config.warm_start else None
        Q, basis, clus = e_step(X, y, models, K, config.clustering_method, draw(),
                                config.cluster_n_init, config.is_regression, warm)
        new = np.argmax(Q[mask], axis=1)
        agreement = adjusted_rand_index(labels, new) if len(new) >= 2 else 1.0
        labels = new
        if agreement >= config.stop_ari:
            converged = True
            break
    return EmRun(labels, tuple(models), basis, clus, it, converged, Q)


# -- fitted model --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UcslModel:
    sub_models: tuple
    basis: DirectionBasis
    cluster_model: ClusteringModel
    consensus_labels: np.ndarray      # final labels of the clustered training rows
    config: UcslConfig
    n_em_iters_run: int
    ensemble_consensus: Optional[np.ndarray] = None
    member_iters: tuple = ()
    member_converged: tuple = ()
    n_failed_members: int = 0

    @property
    def n_features(self) -> int:
        return self.basis.n_features

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(self.n_features, X.shape[1])
        return X

    def cluster_posterior(self, X) -> np.ndarray:
        """p(c | x) from the clustering model in the projected space."""
        X = self._check(X)
        return self.cluster_model.posterior(project(X, self.basis))

    def predict_proba(self, X) -> np.ndarray:
        """Mixture over clusters: sum_c p(y=+1 | x, c) p(c | x)."""
        X = self._check(X)
        P = self.cluster_posterior(X)
        S = np.column_stack([m.predict_proba(X) for m in self.sub_models])
        return (P * S).sum(1)

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        if self.config.is_regression:
            P = self.cluster_posterior(X)
            F = np.column_stack([m.decision_function(X) for m in self.sub_models])
            return (P * F).sum(1)
        return np.where(self.predict_proba(X) >= 0.5, 1, -1)

    def predict_cluster(self, X, y_true=None) -> np.ndarray:
        """Argmax posterior cluster; ``-1`` for rows whose ``y_true`` is not +1."""
        labels = np.argmax(self.cluster_posterior(X), axis=1)
        if y_true is not None and not self.config.is_regression:
            labels = np.where(np.asarray(y_true) == 1, labels, -1)
        return labels

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "sub_models": [m.to_dict() for m in self.sub_models],
            "basis": self.basis.to_dict(),
            "cluster_model": self.cluster_model.to_dict(),
            "consensus_labels": [int(v) for v in self.consensus_labels],
            "n_em_iters_run": int(self.n_em_iters_run),
            "member_iters": [int(v) for v in self.member_iters],
            "member_converged": [bool(v) for v in self.member_converged],
            "n_failed_members": int(self.n_failed_members),
        }
        if self.ensemble_consensus is not None:
            d["ensemble_consensus"] = [int(v) for v in self.ensemble_consensus]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "UcslModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {d.get('schema_version')!r}")
        ens = d.get("ensemble_consensus")
        return cls(
            tuple(LinearModel.from_dict(m) for m in d["sub_models"]),
            DirectionBasis.from_dict(d["basis"]),
            clusterer_from_dict(d["cluster_model"]),
            np.asarray(d["consensus_labels"], dtype=int),
            UcslConfig.from_dict(d["config"]),
            d["n_em_iters_run"],
            None if ens is None else np.asarray(ens, dtype=int),
            tuple(d.get("member_iters", ())),
            tuple(d.get("member_converged", ())),
            d.get("n_failed_members", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> "UcslModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "UcslModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def predict_proba(model: UcslModel, X) -> np.ndarray:
    return model.predict_proba(X)


def predict_cluster(model: UcslModel, X, y_true=None) -> np.ndarray:
    return model.predict_cluster(X, y_true)


# -- ensembling ------------------------------------------------------------------

_MEMBER_FAILURES = (ClusterCollapseError, EmptyBasisError, ConvergenceError)


def _member(args):
    X, y, config, seed = args
    try:
        return run_em_once(X, y, config, seed)
    except _MEMBER_FAILURES as exc:
        return exc


def _resolve_jobs(n_jobs: Optional[int]) -> int:
    if n_jobs is None:
        n_jobs = int(os.environ.get("UCSL_THREADS", "1") or 1)
    return max(1, n_jobs)


def run_members(X, y, config: UcslConfig, n_jobs: Optional[int] = None) -> list:
    """All ensemble members, in seed order; failed members come back as exceptions."""
    tasks = [(X, y, config, config.seed + i) for i in range(config.n_ensembles)]
    jobs = min(_resolve_jobs(n_jobs), len(tasks))
    if jobs == 1:
        return [_member(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_member, tasks))


def consensus_responsibilities(X, y, consensus, config: UcslConfig) -> np.ndarray:
    """One-hot consensus on clustered rows, extended to the other rows.

    Negatives get the posterior of a clustering model built directly from
    the consensus partition, in the space spanned by classifiers fitted to
    that partition.
    """
    K = config.n_clusters
    mask = _cluster_mask(y, config.is_regression)
    Q = np.zeros((len(X), K))
    Q[np.flatnonzero(mask), consensus] = 1.0
    if mask.all():
        return Q
    Q[~mask] = 1.0 / K
    Q, _ = rescue_collapsed(Q, mask)
    uniform = replace(config, negative_weighting=NegativeWeighting.UNIFORM)
    basis = gram_schmidt(np.vstack([m.weights for m in m_step(X, y, Q, uniform)]))
    Xp = project(X, basis)
    labels = np.argmax(Q[mask], axis=1)
    clus = clusterer_from_labels(config.clustering_method, Xp[mask], labels, K)
    Q[~mask] = clus.posterior(Xp[~mask])
    return Q


def fit(X, y, config: UcslConfig = UcslConfig(), n_jobs: Optional[int] = None) -> UcslModel:
    """Ensemble of EM runs, spectral consensus, then a final EM run from the consensus.

    ``n_jobs`` (default: ``$UCSL_THREADS`` or 1) bounds the worker processes
    used for ensemble members; results do not depend on it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if y.shape != (len(X),):
        raise DimensionMismatchError(len(X), len(y), "label length")
    K = config.n_clusters
    mask = _cluster_mask(y, config.is_regression)
    if mask.sum() < K:
        raise InsufficientSamplesError(f"{int(mask.sum())} clustered samples for K={K}")
    if not config.is_regression and not np.all(np.isin(y, (-1, 1))):
        raise ValueError("classification labels must be -1/+1")

    results = run_members(X, y, config, n_jobs)
    ok = [r for r in results if isinstance(r, EmRun)]
    failed = [r for r in results if not isinstance(r, EmRun)]
    for exc in failed:
        logger.warning("ensemble member failed: %s", exc)
    if 2 * len(failed) >= len(results):
        raise EnsembleError(f"{len(failed)} of {len(results)} ensemble members failed; first: {failed[0]}")

    consensus = spectral_clustering(cooccurrence([r.labels for r in ok]), K, seed=config.seed)
    q0 = consensus_responsibilities(X, y, consensus, config)
    final = run_em_once(X, y, config, seed=config.seed + config.n_ensembles, q_init=q0)
    return UcslModel(
        final.sub_models,
        final.basis,
        final.cluster_model,
        final.labels,
        config,
        final.n_iter,
        consensus,
        tuple(r.n_iter if isinstance(r, EmRun) else 0 for r in results),
        tuple(isinstance(r, EmRun) and r.converged for r in results),
        len(failed),
    )


def fit_regression(X, y, config: UcslConfig) -> UcslModel:
    """UCSL with weighted linear regressors; every sample is clustered."""
    if not config.is_regression:
        config = replace(config, estimator_kind=EstimatorKind.REGRESSION)
    return fit(X, np.asarray(y, dtype=float), config)


@dataclass(frozen=True, eq=False)
class MulticlassUcsl:
    classes: np.ndarray
    models: tuple

    def predict_proba(self, X) -> np.ndarray:
        """Column c holds the class-c model's p(y=+1 | x)."""
        return np.column_stack([m.predict_proba(X) for m in self.models])

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]


def fit_multiclass(X, y, config: UcslConfig) -> MulticlassUcsl:
    """One-vs-rest: each class in turn is the clustered positive class."""
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    for c in classes:
        if (y == c).sum() < config.n_clusters:
            raise InsufficientSamplesError(
                f"class {c!r} has {(y == c).sum()} samples, fewer than K={config.n_clusters}")
    models = tuple(fit(X, np.where(y == c, 1, -1), config) for c in classes)
    return MulticlassUcsl(classes, models)
