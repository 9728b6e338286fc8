"""Partition agreement and classification scores."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray
    row_labels: np.ndarray
    col_labels: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _check_pair(a, b, min_len=1):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    if len(a) < min_len:
        raise ValueError(f"need at least {min_len} samples")
    return a, b


def contingency(a, b) -> ContingencyTable:
    a, b = _check_pair(a, b)
    ra, ia = np.unique(a, return_inverse=True)
    rb, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((len(ra), len(rb)), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ContingencyTable(counts, ra, rb)


def _pairs(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(x))


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index, computed in exact integer arithmetic.

    Returns 1.0 when the chance-corrected denominator vanishes (both
    partitions trivial in the same way).
    """
    a, b = _check_pair(a, b, min_len=2)
    t = contingency(a, b)
    n2 = len(a) * (len(a) - 1) // 2
    sum_ij = _pairs(t.counts)
    sum_a = _pairs(t.row_sums)
    sum_b = _pairs(t.col_sums)
    num = 2 * (n2 * sum_ij - sum_a * sum_b)
    den = n2 * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return float(Fraction(num, den))


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(-(p * np.log(p)).sum())


def homogeneity_completeness_v(truth, pred):
    """(homogeneity, completeness, v) of ``pred`` against ``truth``; 0/0 := 1."""
    t = contingency(truth, pred)
    C = t.counts.astype(float)
    n = C.sum()
    h_truth = _entropy(t.row_sums)
    h_pred = _entropy(t.col_sums)
    nz = C > 0
    joint = C[nz] / n
    # conditional entropies H(truth | pred) and H(pred | truth)
    h_t_given_p = -float((joint * np.log(C[nz] / np.broadcast_to(t.col_sums, C.shape)[nz])).sum())
    h_p_given_t = -float((joint * np.log(C[nz] / np.broadcast_to(t.row_sums[:, None], C.shape)[nz])).sum())
    hom = 1.0 if h_truth == 0 else 1.0 - h_t_given_p / h_truth
    com = 1.0 if h_pred == 0 else 1.0 - h_p_given_t / h_pred
    v = 0.0 if hom + com == 0 else 2 * hom * com / (hom + com)
    return hom, com, v


def v_measure(a, b) -> float:
    _check_pair(a, b)
    return homogeneity_completeness_v(a, b)[2]


def balanced_accuracy(y_true, y_pred) -> float:
    """Unweighted mean of per-class recall over the classes present in ``y_true``."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    recalls = [np.mean(y_pred[y_true == c] == c) for c in np.unique(y_true)]
    return float(np.mean(recalls))


def cluster_balanced_accuracy(truth, clusters) -> float:
    """Best balanced accuracy over injective cluster -> class maps.

    The map is an optimal bipartite matching on per-class recall; clusters
    left unmatched count as errors.
    """
    t = contingency(truth, clusters)
    recall = t.counts / t.row_sums[:, None]           # classes x clusters
    rows, cols = linear_sum_assignment(recall, maximize=True)
    return float(recall[rows, cols].sum() / len(t.row_labels))
