"""Linear SVM with probability calibration.

Hinge-loss classifiers are trained one-vs-rest by deterministic full-batch
subgradient descent (Pegasos-style step schedule with norm projection; the
bias rides along as an augmented, regularized constant feature).  Scores are
mapped to probabilities by Platt's sigmoid fit on the training scores; with
more than two classes the per-class sigmoid outputs are renormalized to
sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import TrainedClassifier, check_training_inputs

__all__ = ["SvmConfig", "LinearSvmModel", "fit_linear_svm", "fit_platt"]


@dataclass(frozen=True)
class SvmConfig:
    reg: float = 0.01  # L2 strength lambda in the hinge objective
    iterations: int = 500


def _fit_hinge(Xa: np.ndarray, t: np.ndarray, config: SvmConfig) -> np.ndarray:
    """Minimize (reg/2)||w||^2 + mean hinge(t, Xa w) over the augmented weights."""
    n, d = Xa.shape
    w = np.zeros(d)
    cap = 1.0 / math.sqrt(config.reg)
    for it in range(1, config.iterations + 1):
        margins = t * (Xa @ w)
        viol = margins < 1.0
        grad = config.reg * w - (t[viol] @ Xa[viol]) / n
        w -= grad / (config.reg * it)
        norm = float(np.linalg.norm(w))
        if norm > cap:
            w *= cap / norm
    return w


def fit_platt(scores: np.ndarray, positive: np.ndarray) -> tuple[float, float]:
    """Fit sigmoid parameters (A, B) so that P(pos|s) = 1 / (1 + exp(A*s + B)).

    Newton iteration with backtracking on the regularized maximum-likelihood
    targets; deterministic and robust to perfectly separated scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    prior1 = int(positive.sum())
    prior0 = len(scores) - prior1
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(positive, hi, lo)

    A = 0.0
    B = math.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma = 1e-12  # Hessian ridge

    def objective(a: float, b: float) -> float:
        fApB = a * scores + b
        pos_part = fApB >= 0
        out = np.where(
            pos_part,
            t * fApB + np.log1p(np.exp(-np.abs(fApB))),
            (t - 1.0) * fApB + np.log1p(np.exp(-np.abs(fApB))),
        )
        return float(out.sum())

    fval = objective(A, B)
    for _ in range(100):
        fApB = A * scores + B
        p = 1.0 / (1.0 + np.exp(np.clip(fApB, -500, 500)))
        q = 1.0 - p
        d1 = t - p
        g1 = float((scores * d1).sum())
        g2 = float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        pq = p * q
        h11 = float((scores * scores * pq).sum()) + sigma
        h22 = float(pq.sum()) + sigma
        h21 = float((scores * pq).sum())
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        stepsize = 1.0
        while stepsize >= 1e-10:
            newA = A + stepsize * dA
            newB = B + stepsize * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * stepsize * gd:
                A, B, fval = newA, newB, newf
                break
            stepsize /= 2.0
        else:
            break  # line search failed; accept current parameters
    return A, B


class LinearSvmModel(TrainedClassifier):
    def __init__(
        self,
        weights: np.ndarray,  # (n_classifiers, d+1) augmented weights
        platt: list[tuple[float, float]],
        class_count: int,
        n_features: int,
    ):
        self.weights = weights
        self.platt = platt
        self.class_count = class_count
        self.n_features = n_features

    def _scores(self, X: np.ndarray) -> np.ndarray:
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        return Xa @ self.weights.T

    def _proba(self, X: np.ndarray) -> np.ndarray:
        S = self._scores(X)
        if self.class_count == 2:
            A, B = self.platt[0]
            p1 = 1.0 / (1.0 + np.exp(np.clip(A * S[:, 0] + B, -500, 500)))
            return np.column_stack([1.0 - p1, p1])
        cols = []
        for c in range(self.class_count):
            A, B = self.platt[c]
            cols.append(1.0 / (1.0 + np.exp(np.clip(A * S[:, c] + B, -500, 500))))
        P = np.column_stack(cols)
        P = np.clip(P, 1e-12, None)
        return P / P.sum(axis=1, keepdims=True)


def fit_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    config: SvmConfig = SvmConfig(),
) -> LinearSvmModel:
    X, y = check_training_inputs(X, y, class_count)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    if class_count == 2:
        # Single classifier: class 1 vs class 0.
        t = np.where(y == 1, 1.0, -1.0)
        w = _fit_hinge(Xa, t, config)
        scores = Xa @ w
        platt = [fit_platt(scores, y == 1)]
        weights = w[None, :]
    else:
        rows = []
        platt = []
        for c in range(class_count):
            t = np.where(y == c, 1.0, -1.0)
            w = _fit_hinge(Xa, t, config)
            rows.append(w)
            platt.append(fit_platt(Xa @ w, y == c))
        weights = np.vstack(rows)
    return LinearSvmModel(weights, platt, class_count, X.shape[1])
