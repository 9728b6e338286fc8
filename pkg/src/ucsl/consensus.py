"""Ensemble consensus: co-occurrence affinity and normalised spectral clustering."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .clustering import fit_kmeans


@dataclass(frozen=True, eq=False)
class CooccurrenceMatrix:
    values: np.ndarray
    n_runs: int

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")


def cooccurrence(runs: Sequence[Sequence[int]]) -> CooccurrenceMatrix:
    """Fraction of runs in which each pair of samples shares a label."""
    runs = [np.asarray(r) for r in runs]
    if not runs:
        raise ValueError("need at least one run")
    m = len(runs[0])
    if any(len(r) != m for r in runs):
        raise ValueError("all runs must label the same number of samples")
    counts = np.zeros((m, m), dtype=np.int64)
    for r in runs:
        _, inv = np.unique(r, return_inverse=True)
        onehot = np.zeros((m, inv.max() + 1), dtype=np.int64)
        onehot[np.arange(m), inv] = 1
        counts += onehot @ onehot.T
    return CooccurrenceMatrix(counts / len(runs), len(runs))


def normalized_laplacian(A) -> np.ndarray:
    """I - D^-1/2 A D^-1/2 for a non-negative symmetric affinity."""
    A = np.asarray(A, dtype=float)
    deg = A.sum(1)
    inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    L = np.eye(len(A)) - inv[:, None] * A * inv[None, :]
    return 0.5 * (L + L.T)


def relabel_by_first_occurrence(labels) -> np.ndarray:
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    mapping = {v: i for i, v in enumerate(order)}
    return np.array([mapping[v] for v in labels], dtype=int)


def spectral_clustering(affinity, K: int, seed: int = 0, n_init: int = 10) -> np.ndarray:
    """Partition samples from an affinity matrix into at most ``K`` groups.

    Rows with no off-diagonal affinity are left out of the embedding and
    joined to the largest resulting cluster. Labels are renumbered by first
    appearance.
    """
    A = affinity.values if isinstance(affinity, CooccurrenceMatrix) else np.asarray(affinity, float)
    m = len(A)
    if K > m:
        raise ValueError(f"K={K} exceeds {m} samples")
    labels = np.zeros(m, dtype=int)
    off = A - np.diag(np.diag(A))
    core = np.flatnonzero(off.sum(1) > 0)
    if K == 1 or len(core) == 0:
        return labels
    # canonical order from the affinity itself, so the result does not
    # depend on how the caller ordered the samples (up to exact row ties)
    sub0 = A[np.ix_(core, core)]
    keys = np.sort(sub0, axis=1)
    order = np.lexsort(keys.T[::-1])
    core = core[order]
    sub = sub0[np.ix_(order, order)]
    k = min(K, len(core))
    n_comp, comp = connected_components(sub > 0, directed=False)
    if n_comp >= k:
        # components already separate; merge the smallest ones if there are too many
        sizes = np.bincount(comp)
        keep = np.argsort(-sizes, kind="stable")[:k]
        remap = {c: i for i, c in enumerate(keep)}
        big = keep[0]
        core_lab = np.array([remap.get(c, remap[big]) for c in comp])
    else:
        L = normalized_laplacian(sub)
        _, vecs = scipy.linalg.eigh(L, subset_by_index=[0, k - 1])
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        emb = vecs / np.where(norms > 0, norms, 1.0)
        core_lab = fit_kmeans(emb, k, seed=seed, n_init=n_init).predict(emb)
    labels[core] = core_lab
    isolated = np.setdiff1d(np.arange(m), core)
    if len(isolated):
        labels[isolated] = np.argmax(np.bincount(core_lab, minlength=k))
    return relabel_by_first_occurrence(labels)
