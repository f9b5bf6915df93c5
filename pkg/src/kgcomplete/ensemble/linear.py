"""Multiclass logistic regression trained with proximal gradient descent.

Objective: mean cross-entropy + strength * penalty(W), bias unpenalized.
L1 uses soft-threshold proximal steps, L2 folds into the gradient. The step
size comes from a power-iteration bound on the curvature, and the zero init
makes fits fully deterministic.
"""

from typing import Optional

import numpy as np


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(z: np.ndarray, y: np.ndarray) -> float:
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(logsum - shifted[np.arange(z.shape[0]), y]))


class LogisticRegression:
    def __init__(self, penalty: str = "l2", strength: float = 1e-3,
                 max_iter: int = 2000, tol: float = 1e-10):
        if penalty not in ("l1", "l2"):
            raise ValueError(f"penalty must be 'l1' or 'l2', got {penalty!r}")
        self.penalty = penalty
        self.strength = float(strength)
        self.max_iter = max_iter
        self.tol = tol
        self.weights: Optional[np.ndarray] = None
        self.bias: Optional[np.ndarray] = None
        self.n_classes = 0

    def _objective(self, z, y, w):
        obj = log_loss(z, y)
        if self.penalty == "l2":
            return obj + self.strength * float(np.sum(w * w))
        return obj + self.strength * float(np.sum(np.abs(w)))

    def fit(self, x, y, n_classes: Optional[int] = None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = x.shape
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
        w = np.zeros((d, c))
        b = np.zeros(c)
        onehot = np.zeros((n, c))
        onehot[np.arange(n), y] = 1.0
        # top eigenvalue of X^T X bounds the data curvature; softmax adds a
        # factor 1/2, L2 adds 2*strength.
        v = np.ones(d) / np.sqrt(d)
        lam = 0.0
        for _ in range(50):
            u = x.T @ (x @ v)
            norm = float(np.linalg.norm(u))
            if norm == 0.0:
                break
            v = u / norm
            lam = norm
        lip = 0.5 * lam / n + 1e-12
        if self.penalty == "l2":
            lip += 2.0 * self.strength
        step = 1.0 / lip
        prev_obj = np.inf
        for _ in range(self.max_iter):
            z = x @ w + b
            obj = self._objective(z, y, w)
            if abs(prev_obj - obj) < self.tol:
                break
            prev_obj = obj
            p = softmax(z)
            grad_w = x.T @ (p - onehot) / n
            grad_b = (p - onehot).sum(axis=0) / n
            if self.penalty == "l2":
                grad_w = grad_w + 2.0 * self.strength * w
                w = w - step * grad_w
            else:
                w = w - step * grad_w
                thresh = step * self.strength
                w = np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)
            b = b - step * grad_b
        self.weights, self.bias, self.n_classes = w, b, c
        return self

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return softmax(x @ self.weights + self.bias)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)
