"""CART-style decision tree with class-frequency leaves.

Greedy binary splits on single features, thresholds at midpoints between
consecutive distinct sorted values, impurity measured by Gini or entropy.
Ties between equal-gain splits go to the lowest feature index and then the
lowest threshold, so fitting is fully deterministic. Leaves store training
class counts; predicted probabilities are the empirical frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from ..staterep import StateMatrix
from .base import PolicyModel, register_model

_MIN_GAIN = 1e-12


@dataclass
class _Node:
    counts: np.ndarray  # per-class training counts reaching this node
    feature: int | None = None
    threshold: float | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        d: dict = {"counts": [int(c) for c in self.counts]}
        if not self.is_leaf:
            d.update(
                feature=int(self.feature),
                threshold=float(self.threshold),
                left=self.left.to_dict(),
                right=self.right.to_dict(),
            )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "_Node":
        node = cls(counts=np.asarray(d["counts"], dtype=float))
        if "feature" in d:
            node.feature = d["feature"]
            node.threshold = d["threshold"]
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


def _impurity(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity of count rows (..., K); gini or entropy in bits."""
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
    if criterion == "gini":
        return 1.0 - (p**2).sum(axis=-1)
    logp = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logp).sum(axis=-1)


def _best_split(X: np.ndarray, Y: np.ndarray, criterion: str):
    """Best (gain, feature, threshold) over all features, or None.

    Scans features in index order and thresholds in ascending order with a
    strict improvement test, which makes tie-breaking deterministic.
    """
    n = X.shape[0]
    total = Y.sum(axis=0)
    parent = float(_impurity(total, criterion))
    best = None
    best_gain = _MIN_GAIN
    for j in range(X.shape[1]):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        cum = np.cumsum(Y[order], axis=0)
        boundary = np.flatnonzero(vals[:-1] != vals[1:])
        if boundary.size == 0:
            continue
        left = cum[boundary]
        right = total - left
        n_left = (boundary + 1).astype(float)
        n_right = n - n_left
        child = (
            n_left * _impurity(left, criterion)
            + n_right * _impurity(right, criterion)
        ) / n
        gains = parent - child
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            pos = boundary[i]
            best = (best_gain, j, float((vals[pos] + vals[pos + 1]) / 2.0))
    return best


@register_model
class TreePolicy(PolicyModel):
    kind = "tree"

    def __init__(self, feature_names, class_labels, root: _Node):
        super().__init__(feature_names, class_labels)
        self.root = root

    def _predict_proba_impl(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((X.shape[0], self.n_classes))
        for i, x in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if x[node.feature] <= node.threshold else node.right
            out[i] = node.counts / node.counts.sum()
        return out

    @property
    def n_leaves(self) -> int:
        def count(node: _Node) -> int:
            if node.is_leaf:
                return 1
            return count(node.left) + count(node.right)

        return count(self.root)

    @property
    def depth(self) -> int:
        def walk(node: _Node) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def to_dot(self) -> str:
        """Graphviz representation for inspection."""
        lines = ["digraph policy_tree {", "  node [shape=box];"]
        counter = [0]

        def emit(node: _Node) -> int:
            nid = counter[0]
            counter[0] += 1
            if node.is_leaf:
                probs = node.counts / node.counts.sum()
                top = int(np.argmax(probs))
                lines.append(
                    f'  n{nid} [label="{self.class_labels[top]}\\n'
                    f'p={probs[top]:.3f} n={int(node.counts.sum())}"];'
                )
            else:
                name = self.feature_names[node.feature]
                lines.append(f'  n{nid} [label="{name} <= {node.threshold:.4g}"];')
                left = emit(node.left)
                right = emit(node.right)
                lines.append(f'  n{nid} -> n{left} [label="yes"];')
                lines.append(f'  n{nid} -> n{right} [label="no"];')
            return nid

        emit(self.root)
        lines.append("}")
        return "\n".join(lines)

    def _params_dict(self) -> dict:
        return {"root": self.root.to_dict()}

    @classmethod
    def _from_params(cls, feature_names, class_labels, params) -> "TreePolicy":
        return cls(feature_names, class_labels, _Node.from_dict(params["root"]))


def fit_tree(
    train: StateMatrix,
    criterion: str = "gini",
    max_depth: int = 8,
    min_samples_split: int = 2,
) -> TreePolicy:
    """Grow a CART tree; single-class data yields a valid depth-0 tree."""
    if criterion not in ("gini", "entropy"):
        raise FitError(f"unknown split criterion {criterion!r}")
    if max_depth < 0:
        raise FitError("max_depth must be >= 0")
    X, y = train.X, train.y
    K = train.n_actions
    n = X.shape[0]
    if n == 0:
        raise FitError("cannot fit a tree on empty data")
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0

    def build(rows: np.ndarray, depth: int) -> _Node:
        counts = Y[rows].sum(axis=0)
        node = _Node(counts=counts)
        if (
            depth >= max_depth
            or rows.size < min_samples_split
            or np.count_nonzero(counts) < 2
        ):
            return node
        found = _best_split(X[rows], Y[rows], criterion)
        if found is None:
            return node
        _, j, threshold = found
        mask = X[rows, j] <= threshold
        node.feature = j
        node.threshold = threshold
        node.left = build(rows[mask], depth + 1)
        node.right = build(rows[~mask], depth + 1)
        return node

    return TreePolicy(
        train.feature_names, train.action_labels, build(np.arange(n), 0)
    )
