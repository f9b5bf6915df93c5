"""Small fully-connected networks trained with mini-batch Adam.

Shared core: ReLU hidden layers, per-feature z-scoring fitted on the
training data (kept with the parameters), 200-epoch budget with early
stopping on the epoch-mean training loss. The classifier head is softmax
cross-entropy; the weighter in weighter.py reuses the same primitives with
a margin loss.
"""

from typing import List, Optional

import numpy as np

from .linear import softmax, log_loss


class Scaler:
    def __init__(self, mean=None, std=None):
        self.mean = mean
        self.std = std

    def fit(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        self.std = np.where(std < 1e-12, 1.0, std)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def init_params(sizes: List[int], rng) -> List[List[np.ndarray]]:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append([w, np.zeros(fan_out)])
    return params


def forward(params, x: np.ndarray) -> List[np.ndarray]:
    """Activations per layer; the last entry holds raw output logits."""
    acts = [x]
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = acts[-1] @ w + b
        if i < last:
            z = np.maximum(z, 0.0)
        acts.append(z)
    return acts


def backward(params, acts, dlogits: np.ndarray):
    grads = []
    delta = dlogits
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        grads.append([acts[i].T @ delta, delta.sum(axis=0)])
        if i > 0:
            delta = (delta @ w.T) * (acts[i] > 0)
    grads.reverse()
    return grads


class Adam:
    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [[np.zeros_like(t) for t in p] for p in params]
        self.v = [[np.zeros_like(t) for t in p] for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for j in range(len(p)):
                m[j] *= self.beta1
                m[j] += (1.0 - self.beta1) * g[j]
                v[j] *= self.beta2
                v[j] += (1.0 - self.beta2) * g[j] * g[j]
                p[j] -= self.lr * (m[j] / bias1) / (np.sqrt(v[j] / bias2) + self.eps)


def clone_params(params):
    return [[t.copy() for t in p] for p in params]


class MlpClassifier:
    def __init__(self, layers: int = 1, width: int = 128, batch_size: int = 64,
                 lr: float = 1e-3, epochs: int = 200, patience: int = 10,
                 tol: float = 1e-4, seed: int = 0):
        self.layers = layers
        self.width = width
        self.batch_size = batch_size
        self.lr = lr
        self.epochs = epochs
        self.patience = patience
        self.tol = tol
        self.seed = seed
        self.params = None
        self.scaler = None
        self.n_classes = 0

    def fit(self, x, y, n_classes: Optional[int] = None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = x.shape
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
        self.n_classes = c
        self.scaler = Scaler().fit(x)
        z = self.scaler.transform(x)
        onehot = np.zeros((n, c))
        onehot[np.arange(n), y] = 1.0
        sizes = [d] + [self.width] * self.layers + [c]
        params = init_params(sizes, np.random.default_rng([self.seed, 0]))
        shuffle_rng = np.random.default_rng([self.seed, 1])
        opt = Adam(params, self.lr)
        best_loss = np.inf
        best = clone_params(params)
        bad = 0
        for _ in range(self.epochs):
            perm = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = perm[start:start + self.batch_size]
                acts = forward(params, z[idx])
                logits = acts[-1]
                total += log_loss(logits, y[idx]) * idx.size
                dlogits = (softmax(logits) - onehot[idx]) / idx.size
                opt.step(params, backward(params, acts, dlogits))
            epoch_loss = total / n
            if epoch_loss < best_loss - self.tol:
                best_loss = epoch_loss
                best = clone_params(params)
                bad = 0
            else:
                bad += 1
                if bad >= self.patience:
                    break
        self.params = best
        return self

    def predict_proba(self, x) -> np.ndarray:
        z = self.scaler.transform(np.asarray(x, dtype=np.float64))
        return softmax(forward(self.params, z)[-1])

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)
