"""Orthonormal subspace spanned by the sub-classifiers' normal vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyBasisError

GS_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DirectionBasis:
    rows: np.ndarray          # r x d, orthonormal
    dropped: tuple = ()       # input row indices found linearly dependent

    @property
    def rank(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def to_dict(self) -> dict:
        return {"rows": self.rows.tolist(), "dropped": list(self.dropped)}

    @classmethod
    def from_dict(cls, d) -> "DirectionBasis":
        return cls(np.asarray(d["rows"], dtype=float), tuple(d["dropped"]))


def gram_schmidt(D, tol: float = GS_TOL) -> DirectionBasis:
    """Modified Gram-Schmidt over the rows of ``D``, in order.

    A row whose residual norm falls below ``tol`` times its own norm is
    dropped (zero rows included). Each kept row is orthogonalised twice,
    which keeps ``rows @ rows.T`` at the identity to ~1e-15 even for nearly
    dependent inputs.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    basis, dropped = [], []
    for i, row in enumerate(D):
        norm0 = np.linalg.norm(row)
        v = row.copy()
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        res = np.linalg.norm(v)
        if norm0 == 0 or res < tol * norm0:
            dropped.append(i)
            continue
        basis.append(v / res)
    if not basis:
        raise EmptyBasisError("every direction was dropped; classifiers are degenerate")
    return DirectionBasis(np.vstack(basis), tuple(dropped))


def project(X, basis: DirectionBasis) -> np.ndarray:
    """Coordinates of ``X`` in the basis, ``X @ rows.T``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != basis.n_features:
        raise DimensionMismatchError(basis.n_features, X.shape[1])
    return X @ basis.rows.T
