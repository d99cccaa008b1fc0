"""Linear readout training and the benchmark performance metrics."""

from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .linalg import svd_lstsq


class LinearReadout(BaseEstimator, RegressorMixin):
    """Linear output layer fitted by SVD least squares.

    Minimises the Euclidean distance between targets and a linear
    combination of the feature columns (the bias enters as the feature
    matrix's constant column, not as a separate intercept).  With
    ``ridge > 0`` the normal equations are Tikhonov-regularised instead of
    using the plain pseudoinverse.

    Attributes set by fit: ``weights_`` (one per column), ``residual_``
    (Euclidean training residual), ``rcond_`` (cutoff actually used).
    """

    def __init__(self, rcond: float = 1e-10, ridge: float = 0.0):
        self.rcond = rcond
        self.ridge = ridge

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows vs {y.shape[0]} targets")
        if self.ridge > 0.0:
            n = X.shape[1]
            self.weights_ = np.linalg.solve(X.T @ X + self.ridge * np.eye(n), X.T @ y)
        else:
            self.weights_ = svd_lstsq(X, y, rcond=self.rcond)
        self.rcond_ = self.rcond
        self.residual_ = float(np.linalg.norm(X @ self.weights_ - y))
        return self

    def predict(self, X):
        if not hasattr(self, "weights_"):
            raise NotFittedError("this LinearReadout instance is not fitted yet")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.weights_.shape[0]:
            raise ValueError(f"expected {self.weights_.shape[0]} columns, got {X.shape[1]}")
        return X @ self.weights_

    def to_json(self, feature_labels: list[str] | None = None) -> str:
        if not hasattr(self, "weights_"):
            raise NotFittedError("this LinearReadout instance is not fitted yet")
        payload = {
            "weights": self.weights_.tolist(),
            "rcond": self.rcond_,
            "ridge": self.ridge,
            "residual": self.residual_,
        }
        if feature_labels is not None:
            payload["feature_labels"] = list(feature_labels)
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LinearReadout":
        payload = json.loads(text)
        out = cls(rcond=payload["rcond"], ridge=payload.get("ridge", 0.0))
        out.weights_ = np.asarray(payload["weights"], dtype=float)
        out.rcond_ = payload["rcond"]
        out.residual_ = payload["residual"]
        return out


def train(features: np.ndarray, targets: np.ndarray, rcond: float = 1e-10) -> LinearReadout:
    """Fit a readout on a training segment (invalid target rows removed by caller)."""
    return LinearReadout(rcond=rcond).fit(features, targets)


def capacity(y: np.ndarray, yhat: np.ndarray, var_floor: float = 1e-14) -> float:
    """Squared Pearson correlation cov^2(y, yhat) / (var(y) var(yhat)).

    Ranges from 0 (complete mismatch) to 1 (perfect accuracy); defined as 0
    when either series has variance below ``var_floor``.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size < 2:
        raise ValueError("capacity needs at least two points")
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    vy = float(np.mean(dy * dy))
    vp = float(np.mean(dp * dp))
    if vy < var_floor or vp < var_floor:
        return 0.0
    cov = float(np.mean(dy * dp))
    return cov * cov / (vy * vp)


def mse(y: np.ndarray, yhat: np.ndarray) -> float:
    """Mean squared error over the evaluation points."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size < 1:
        raise ValueError("mse needs at least one point")
    return float(np.mean((yhat - y) ** 2))
