"""Multinomial logistic regression trained by full-batch gradient descent.

The objective is the mean softmax cross-entropy plus an L2 penalty on the
weights (never the bias):

    J(W, b) = (1/n) * [ sum_i -log p(y_i | x_i) + (l2/2) * ||W||^2 ]

Optimization is plain gradient descent with Armijo backtracking, stopping
when the gradient max-norm drops below ``tol`` or after ``max_iter`` steps.
Zero initialization makes training fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import TrainedClassifier, check_training_inputs

__all__ = ["LogisticConfig", "LogisticModel", "fit_logistic", "loss_and_grad", "softmax"]


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-5  # gradient max-norm


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    W: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Objective value and its gradient w.r.t. (W, b)."""
    n = X.shape[0]
    P = softmax(X @ W + b)
    # Clip only inside the log; the gradient term uses the exact P.
    nll = -np.log(np.clip(P[np.arange(n), y], 1e-300, None)).sum()
    loss = (nll + 0.5 * l2 * float((W * W).sum())) / n
    D = P.copy()
    D[np.arange(n), y] -= 1.0
    gW = (X.T @ D + l2 * W) / n
    gb = D.sum(axis=0) / n
    return loss, gW, gb


class LogisticModel(TrainedClassifier):
    def __init__(self, W: np.ndarray, b: np.ndarray, loss_history: list[float]):
        self.W = W
        self.b = b
        self.loss_history = loss_history
        self.n_features = W.shape[0]
        self.class_count = W.shape[1]

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(X @ self.W + self.b)


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    config: LogisticConfig = LogisticConfig(),
) -> LogisticModel:
    X, y = check_training_inputs(X, y, class_count)
    d = X.shape[1]
    W = np.zeros((d, class_count))
    b = np.zeros(class_count)
    step = 1.0
    loss, gW, gb = loss_and_grad(W, b, X, y, config.l2)
    history = [loss]
    for _ in range(config.max_iter):
        gmax = max(np.abs(gW).max(), np.abs(gb).max())
        if gmax < config.tol:
            break
        gnorm2 = float((gW * gW).sum() + (gb * gb).sum())
        # Armijo backtracking: halve until sufficient decrease.
        accepted = False
        for _ in range(60):
            W_new = W - step * gW
            b_new = b - step * gb
            new_loss, gW_new, gb_new = loss_and_grad(W_new, b_new, X, y, config.l2)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # step underflow: no further progress possible
        W, b, loss, gW, gb = W_new, b_new, new_loss, gW_new, gb_new
        history.append(loss)
        step = min(step * 2.0, 1024.0)
    return LogisticModel(W, b, history)
