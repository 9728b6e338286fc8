"""Sample-weighted linear models p(y | x, c), one per latent cluster.

All three losses share the objective

    J(w, b) = 0.5 * ||w||^2 + C * sum_i s_i * loss(y_i, x_i . w + b)

with an unpenalised intercept, minimised by damped Newton iterations. The
hinge loss is quadratically smoothed over a band of width ``HINGE_SMOOTHING``
below the margin so that the Newton system is defined everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import (
    ConvergenceError,
    DegenerateWeightsError,
    DimensionMismatchError,
    UnsupportedOperationError,
)

HINGE_SMOOTHING = 0.5
HINGE_PROBA_SCALE = 2.0
GRAD_TOL = 1e-6
MAX_ITER = 500
WEIGHT_TOL = 1e-12


class EstimatorKind(str, Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"
    REGRESSION = "regression"


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    intercept: float
    kind: EstimatorKind
    regularization: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "kind", EstimatorKind(self.kind))

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.weights.shape[0]:
            raise DimensionMismatchError(self.weights.shape[0], X.shape[1])
        return X @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        """p(y=+1 | x) for classifiers; hinge margins go through sigmoid(2 * margin)."""
        if self.kind is EstimatorKind.LOGISTIC:
            return expit(self.decision_function(X))
        if self.kind is EstimatorKind.HINGE:
            return expit(HINGE_PROBA_SCALE * self.decision_function(X))
        raise UnsupportedOperationError("predict_proba is undefined for regression models")

    def predict(self, X) -> np.ndarray:
        f = self.decision_function(X)
        if self.kind is EstimatorKind.REGRESSION:
            return f
        return np.where(f >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "weights": [float(v) for v in self.weights],
            "intercept": float(self.intercept),
            "regularization": float(self.regularization),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["weights"], dtype=float), d["intercept"], d["kind"], d["regularization"])


def decision_function(model: LinearModel, X) -> np.ndarray:
    return model.decision_function(X)


def predict_proba(model: LinearModel, X) -> np.ndarray:
    return model.predict_proba(X)


# -- losses: value, first and second derivative w.r.t. the score f -----------

def _loss_terms(kind: EstimatorKind, y: np.ndarray, f: np.ndarray):
    if kind is EstimatorKind.LOGISTIC:
        m = y * f
        # log(1 + exp(-m)) evaluated without overflow
        val = np.where(m > 0, np.log1p(np.exp(-np.abs(m))), -m + np.log1p(np.exp(-np.abs(m))))
        p = expit(-m)
        return val, -y * p, p * (1 - p)
    if kind is EstimatorKind.HINGE:
        g = HINGE_SMOOTHING
        m = y * f
        z = 1.0 - m
        quad = (z > 0) & (z < g)
        lin = z >= g
        val = np.where(lin, z - g / 2, np.where(quad, z * z / (2 * g), 0.0))
        dm = np.where(lin, -1.0, np.where(quad, -z / g, 0.0))
        return val, y * dm, np.where(quad, 1.0 / g, 0.0)
    r = f - y
    return 0.5 * r * r, r, np.ones_like(r)


def objective(kind, w, b, X, y, sample_weights, regularization):
    """Return ``(J, grad_w, grad_b)`` for the regularised weighted loss."""
    kind = EstimatorKind(kind)
    f = X @ w + b
    val, d1, _ = _loss_terms(kind, y, f)
    cs = regularization * sample_weights
    J = 0.5 * w @ w + cs @ val
    return J, w + X.T @ (cs * d1), float(cs @ d1)


def _check_weights(kind, y, s):
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DegenerateWeightsError("sample weights must be finite and non-negative")
    total = s.sum()
    if not total > 0:
        raise DegenerateWeightsError("sample weights sum to zero")
    if kind is not EstimatorKind.REGRESSION:
        for cls in (-1, 1):
            mass = s[y == cls].sum()
            if not mass > WEIGHT_TOL * total:
                raise DegenerateWeightsError(f"class {cls:+d} has total weight {mass:.3e}")


def fit_weighted(kind, X, y, sample_weights=None, regularization: float = 1.0,
                 tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> LinearModel:
    """Minimise the L2-regularised weighted loss by damped Newton steps.

    Stops once the gradient infinity-norm drops below ``tol * max(1, |g0|)``
    where ``g0`` is the gradient at the zero start.
    """
    kind = EstimatorKind(kind)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if y.shape != (n,):
        raise DimensionMismatchError(n, y.shape[0], "label length")
    s = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    if s.shape != (n,):
        raise DimensionMismatchError(n, s.shape[0], "sample weight length")
    if not regularization > 0:
        raise ValueError("regularization must be positive")
    _check_weights(kind, y, s)

    C = float(regularization)
    Xa = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    penal = np.ones(d + 1)
    penal[-1] = 0.0

    def evaluate(th):
        f = Xa @ th
        val, d1, d2 = _loss_terms(kind, y, f)
        cs = C * s
        J = 0.5 * (penal * th) @ th + cs @ val
        g = penal * th + Xa.T @ (cs * d1)
        return J, g, cs * d2

    J, g, h = evaluate(theta)
    stop = tol * max(1.0, np.abs(g).max())
    for _ in range(max_iter):
        gmax = np.abs(g).max()
        if gmax <= stop:
            break
        H = (Xa * h[:, None]).T @ Xa
        H[np.diag_indices_from(H)] += penal
        # intercept row can be flat when no sample sits in a curved loss region
        H[-1, -1] += 1e-10 * (1.0 + np.trace(H))
        scale = np.trace(H) / len(H)
        # plain Newton first, then increasingly damped steps
        for mu in (0.0, 1e-6, 1e-3, 1.0, 1e3):
            try:
                step = np.linalg.solve(H + mu * scale * np.eye(len(H)), g)
            except np.linalg.LinAlgError:
                continue
            slope = g @ step
            t = 1.0
            while t >= 1e-10:
                cand = theta - t * step
                Jc, gc, hc = evaluate(cand)
                if Jc <= J - 1e-4 * t * slope:
                    break
                t *= 0.5
            else:
                continue
            break
        else:
            # no descent left at machine precision; accept if already tiny
            if gmax <= max(stop, 1e-9 * max(1.0, abs(J))):
                break
            raise ConvergenceError("line search failed", float(gmax))
        theta, J, g, h = cand, Jc, gc, hc
    else:
        gmax = np.abs(g).max()
        if gmax > stop:
            raise ConvergenceError(f"no convergence after {max_iter} iterations", float(gmax))
    if not np.all(np.isfinite(theta)):
        raise ConvergenceError("non-finite coefficients", float(np.abs(g).max()))
    return LinearModel(theta[:-1], theta[-1], kind, C)
