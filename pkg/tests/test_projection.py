import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ucsl.errors import DimensionMismatchError, EmptyBasisError
from ucsl.projection import DirectionBasis, gram_schmidt, project


def test_forced_residual():
    b = gram_schmidt([[2.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(b.rows, [[1, 0], [0, 1]], atol=1e-15)
    assert b.dropped == ()


def test_exact_collinearity_dropped():
    b = gram_schmidt([[1.0, 0.0], [2.0, 0.0]])
    np.testing.assert_array_equal(b.rows, [[1.0, 0.0]])
    assert b.dropped == (1,)


def test_orthonormal_input_unchanged():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 4)))
    b = gram_schmidt(Q.T)
    np.testing.assert_allclose(b.rows, Q.T, atol=1e-12)


def test_all_dropped():
    with pytest.raises(EmptyBasisError):
        gram_schmidt(np.zeros((2, 3)))


def _with_collinear(D, rng):
    # inject exact multiples and sums of earlier rows
    extra = [3.0 * D[0], D[0] - 2 * D[-1]]
    out = np.vstack([D] + extra)
    return out[rng.permutation(len(out))]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_orthonormality_and_span(K, d, seed):
    rng = np.random.default_rng(seed)
    D = _with_collinear(rng.standard_normal((K, d)), rng)
    b = gram_schmidt(D)
    np.testing.assert_allclose(b.rows @ b.rows.T, np.eye(b.rank), atol=1e-10)
    assert b.rank <= min(len(D), d)
    # every retained input reconstructs from the basis
    kept = np.delete(D, list(b.dropped), axis=0)
    recon = (kept @ b.rows.T) @ b.rows
    assert np.all(np.linalg.norm(recon - kept, axis=1) <= 1e-8 * np.linalg.norm(kept, axis=1))
    # rank agrees with an SVD oracle
    assert b.rank == np.linalg.matrix_rank(D, tol=1e-8 * np.linalg.norm(D, 2))


def test_scale_invariance_of_basis():
    D = np.random.default_rng(1).standard_normal((3, 5))
    a = gram_schmidt(D)
    b = gram_schmidt(D * np.array([[2.0], [0.01], [7.0]]))
    np.testing.assert_allclose(a.rows, b.rows, atol=1e-12)


def test_project_coordinate_selection():
    basis = DirectionBasis(np.array([[0, 0, 1.0], [1.0, 0, 0]]))
    X = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(project(X, basis), X[:, [2, 0]])


def test_project_orthogonal_row_is_zero():
    basis = gram_schmidt([[1.0, 1.0, 0.0]])
    np.testing.assert_allclose(project([[1.0, -1.0, 5.0]], basis), [[0.0]], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_contracts_and_reconstructs(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 10))
    b = gram_schmidt(rng.standard_normal((int(rng.integers(1, d + 1)), d)))
    X = rng.standard_normal((20, d))
    P = project(X, b)
    assert np.all(np.linalg.norm(P, axis=1) <= np.linalg.norm(X, axis=1) * (1 + 1e-12))
    inside = rng.standard_normal((5, b.rank)) @ b.rows
    np.testing.assert_allclose(project(inside, b) @ b.rows, inside, atol=1e-10)


def test_project_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        project(np.ones((2, 4)), gram_schmidt([[1.0, 0.0, 0.0]]))
