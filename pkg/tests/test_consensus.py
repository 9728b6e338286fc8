import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components

from ucsl.consensus import (
    cooccurrence,
    normalized_laplacian,
    relabel_by_first_occurrence,
    spectral_clustering,
)
from ucsl.metrics import adjusted_rand_index


def test_four_in_ten():
    runs = [[0, 0] if r < 4 else [0, 1] for r in range(10)]
    assert cooccurrence(runs).values[0, 1] == 0.4


def test_single_run_blocks():
    C = cooccurrence([[1, 0, 1, 2]]).values
    np.testing.assert_array_equal(C, [[1, 0, 1, 0], [0, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 1]])


def test_identical_runs_all_ones():
    np.testing.assert_array_equal(cooccurrence([[3] * 5] * 4).values, 1.0)


def test_block_affinity_recovered():
    labels = np.array([0, 1, 0, 1, 1, 0, 0])
    A = (labels[:, None] == labels[None]).astype(float)
    pred = spectral_clustering(A, 2)
    _, comp = connected_components(A > 0, directed=False)
    assert adjusted_rand_index(pred, comp) == 1.0


def test_all_ones_k1():
    assert spectral_clustering(np.ones((5, 5)), 1).tolist() == [0] * 5


def test_noisy_blocks():
    rng = np.random.default_rng(0)
    truth = np.repeat([0, 1, 2], 20)
    runs = [np.where(rng.random(60) < 0.1, rng.integers(0, 3, 60), truth) for _ in range(10)]
    assert adjusted_rand_index(spectral_clustering(cooccurrence(runs), 3), truth) > 0.9


def test_isolated_rows_join_largest():
    A = np.zeros((5, 5))
    A[:3, :3] = 1.0
    A[3, 3] = A[4, 4] = 1.0
    lab = spectral_clustering(A, 2)
    assert lab[3] == lab[4] == lab[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_laplacian_spectrum(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 15))
    blocks = rng.integers(0, int(rng.integers(1, 4)), m)
    A = (blocks[:, None] == blocks[None]) * rng.uniform(0.2, 1.0, (m, m))
    A = (A + A.T) / 2
    ev = np.linalg.eigvalsh(normalized_laplacian(A))
    assert ev.min() >= -1e-9 and ev.max() <= 2 + 1e-9
    n_comp, _ = connected_components(A > 0, directed=False)
    assert np.sum(np.abs(ev) < 1e-9) == n_comp


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_permutation_equivariance_and_label_count(seed, K):
    rng = np.random.default_rng(seed)
    runs = [rng.integers(0, 3, 25) for _ in range(6)]
    A = cooccurrence(runs).values
    base = spectral_clustering(A, K)
    assert len(np.unique(base)) <= K
    perm = rng.permutation(25)
    again = spectral_clustering(A[np.ix_(perm, perm)], K)
    unperm = np.empty_like(again)
    unperm[perm] = again
    assert adjusted_rand_index(base, unperm) == 1.0


def test_relabel_by_first_occurrence():
    assert relabel_by_first_occurrence([5, 2, 5, 9]).tolist() == [0, 1, 0, 2]


def test_errors():
    with pytest.raises(ValueError):
        cooccurrence([])
    with pytest.raises(ValueError):
        cooccurrence([[0, 1], [0]])
    with pytest.raises(ValueError):
        spectral_clustering(np.ones((2, 2)), 3)
