"""Shared classifier contracts and input validation."""

from __future__ import annotations

import numpy as np

__all__ = ["ModelError", "TrainedClassifier", "ConstantClassifier", "check_training_inputs"]


class ModelError(ValueError):
    """Invalid training data or prediction input."""


class TrainedClassifier:
    """A fitted model exposing class-probability prediction.

    Subclasses implement ``_proba`` on a validated float64 matrix; rows of
    the returned matrix are nonnegative and sum to 1 within 1e-6.
    """

    class_count: int
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"dimension mismatch: model expects {self.n_features} features, "
                f"got shape {X.shape}"
            )
        if not np.isfinite(X).all():
            raise ModelError("non-finite feature value")
        return self._proba(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def _proba(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


class ConstantClassifier(TrainedClassifier):
    """Degenerate model for a single-class labeled set: probability 1 everywhere."""

    def __init__(self, class_index: int, class_count: int, n_features: int):
        self.class_index = class_index
        self.class_count = class_count
        self.n_features = n_features

    def _proba(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((X.shape[0], self.class_count))
        out[:, self.class_index] = 1.0
        return out


def check_training_inputs(
    X: np.ndarray, y: np.ndarray, class_count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Validate and coerce (X, y) for training."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ModelError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or len(y) != X.shape[0]:
        raise ModelError(f"y length {y.shape} does not match X rows {X.shape[0]}")
    if len(y) < 1:
        raise ModelError("training set is empty")
    if not np.isfinite(X).all():
        raise ModelError("non-finite feature value")
    if class_count < 2:
        raise ModelError("class_count must be >= 2")
    if y.min() < 0 or y.max() >= class_count:
        raise ModelError(f"label outside [0, {class_count})")
    return X, y
