"""Gradient-boosted decision trees for multiclass classification.

Softmax objective with one regression tree per class per boosting round.
Splits are exact greedy scans over sorted feature values using the
second-order gain; there is no row or column subsampling, and ties pick the
first maximum, so a fit is fully determined by the data.
"""

from typing import List, Optional

import numpy as np

from ..kernels import split_scan
from .linear import softmax


class Tree:
    """Binary regression tree stored as parallel arrays. feature[i] < 0
    marks a leaf; rows with x[feature] <= threshold go left."""

    def __init__(self):
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.gain: List[float] = []

    def _add(self, feature, threshold, value, gain):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(gain)
        return len(self.feature) - 1

    def add_leaf(self, value: float) -> int:
        return self._add(-1, 0.0, value, 0.0)

    def add_split(self, feature: int, threshold: float, gain: float) -> int:
        return self._add(feature, threshold, 0.0, gain)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.feature[node] < 0:
                out[idx] = self.value[node]
            else:
                mask = x[idx, self.feature[node]] <= self.threshold[node]
                stack.append((self.left[node], idx[mask]))
                stack.append((self.right[node], idx[~mask]))
        return out

    def add_feature_gains(self, gains: np.ndarray):
        for node, feat in enumerate(self.feature):
            if feat >= 0:
                gains[feat] += self.gain[node]

    def to_dict(self):
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
            "gain": self.gain,
        }

    @classmethod
    def from_dict(cls, d):
        tree = cls()
        tree.feature = [int(v) for v in d["feature"]]
        tree.threshold = [float(v) for v in d["threshold"]]
        tree.left = [int(v) for v in d["left"]]
        tree.right = [int(v) for v in d["right"]]
        tree.value = [float(v) for v in d["value"]]
        tree.gain = [float(v) for v in d["gain"]]
        return tree


class Gbdt:
    def __init__(self, n_rounds: int = 100, max_depth: int = 4, lr: float = 0.1,
                 reg_lambda: float = 1.0, gamma: float = 0.0,
                 min_child_weight: float = 1.0):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.lr = lr
        self.reg_lambda = reg_lambda
        self.gamma = gamma
        self.min_child_weight = min_child_weight
        self.trees: List[List[Tree]] = []
        self.n_classes = 0
        self.n_features = 0

    def _leaf_value(self, g_sum, h_sum):
        return -g_sum / (h_sum + self.reg_lambda)

    def _grow(self, tree: Tree, x, g, h, idx, depth) -> int:
        g_sum = float(g[idx].sum())
        h_sum = float(h[idx].sum())
        if depth >= self.max_depth or idx.size < 2:
            return tree.add_leaf(self._leaf_value(g_sum, h_sum))
        best_gain = -np.inf
        best_feat = -1
        best_pos = -1
        best_order = None
        for j in range(x.shape[1]):
            order = np.argsort(x[idx, j], kind="stable")
            vals = np.ascontiguousarray(x[idx[order], j])
            gain, pos = split_scan(vals, np.ascontiguousarray(g[idx[order]]),
                                   np.ascontiguousarray(h[idx[order]]),
                                   self.reg_lambda, self.min_child_weight)
            if gain > best_gain:
                best_gain, best_feat, best_pos, best_order = gain, j, pos, order
        if best_feat < 0 or best_gain <= self.gamma:
            return tree.add_leaf(self._leaf_value(g_sum, h_sum))
        sorted_idx = idx[best_order]
        vals = x[sorted_idx, best_feat]
        threshold = 0.5 * (float(vals[best_pos]) + float(vals[best_pos + 1]))
        node = tree.add_split(best_feat, threshold, best_gain)
        tree.left[node] = self._grow(tree, x, g, h, sorted_idx[:best_pos + 1], depth + 1)
        tree.right[node] = self._grow(tree, x, g, h, sorted_idx[best_pos + 1:], depth + 1)
        return node

    def fit(self, x, y, n_classes: Optional[int] = None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = x.shape[0]
        c = int(n_classes) if n_classes is not None else int(y.max()) + 1
        self.n_classes = c
        self.n_features = x.shape[1]
        onehot = np.zeros((n, c))
        onehot[np.arange(n), y] = 1.0
        raw = np.zeros((n, c))
        self.trees = []
        all_idx = np.arange(n)
        for _ in range(self.n_rounds):
            p = softmax(raw)
            round_trees = []
            for cls in range(c):
                g = p[:, cls] - onehot[:, cls]
                h = p[:, cls] * (1.0 - p[:, cls])
                tree = Tree()
                self._grow(tree, x, g, h, all_idx, 0)
                raw[:, cls] += self.lr * tree.predict(x)
                round_trees.append(tree)
            self.trees.append(round_trees)
        return self

    def predict_raw(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        raw = np.zeros((x.shape[0], self.n_classes))
        for round_trees in self.trees:
            for cls, tree in enumerate(round_trees):
                raw[:, cls] += self.lr * tree.predict(x)
        return raw

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.predict_raw(x))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def feature_gains(self) -> np.ndarray:
        gains = np.zeros(self.n_features)
        for round_trees in self.trees:
            for tree in round_trees:
                tree.add_feature_gains(gains)
        return gains

    def to_dict(self):
        return {
            "n_rounds": self.n_rounds,
            "max_depth": self.max_depth,
            "lr": self.lr,
            "reg_lambda": self.reg_lambda,
            "gamma": self.gamma,
            "min_child_weight": self.min_child_weight,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "trees": [[t.to_dict() for t in rnd] for rnd in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(n_rounds=int(d["n_rounds"]), max_depth=int(d["max_depth"]),
                    lr=float(d["lr"]), reg_lambda=float(d["reg_lambda"]),
                    gamma=float(d["gamma"]),
                    min_child_weight=float(d["min_child_weight"]))
        model.n_classes = int(d["n_classes"])
        model.n_features = int(d["n_features"])
        model.trees = [[Tree.from_dict(t) for t in rnd] for rnd in d["trees"]]
        return model
