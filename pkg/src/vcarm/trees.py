"""Decision trees and random forests over mixed numeric/categorical tables.

Feature matrices are float64 with categorical columns holding category
indices; `ncats[j]` gives the cardinality of column j (0 for numeric).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _tree_kernel as tk
from ._seeding import derive_seed

MAX_CATEGORIES = 63


@dataclass
class Tree:
    """A fitted tree: packed node arrays plus the feature-cardinality vector."""

    feature: np.ndarray
    threshold: np.ndarray
    catmask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray
    ncats: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return tk.apply_tree(
            self.feature, self.threshold, self.catmask,
            self.left, self.right, self.ncats, np.ascontiguousarray(X, dtype=np.float64),
        )

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Leaf value rows (class fractions / mean / Newton value)."""
        return self.value[self.apply(X)]

    @property
    def leaf_ids(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def leaf_boxes(self, lo: np.ndarray, hi: np.ndarray):
        """Per-leaf numeric bounds and allowed-category masks from the split path.

        Returns {leaf_id: (lo_vec, hi_vec, catmask_vec)} where catmask_vec[j]
        is a bitmask of categories that can reach the leaf (full mask for
        numeric columns).
        """
        p = len(self.ncats)
        full = np.array(
            [(1 << int(k)) - 1 if k > 0 else 0 for k in self.ncats], dtype=np.int64
        )
        boxes = {}

        def descend(node, lo_v, hi_v, cat_v):
            f = self.feature[node]
            if f < 0:
                boxes[node] = (lo_v, hi_v, cat_v)
                return
            if self.ncats[f] > 0:
                lcat = cat_v.copy()
                rcat = cat_v.copy()
                lcat[f] &= self.catmask[node]
                rcat[f] &= ~self.catmask[node]
                descend(self.left[node], lo_v, hi_v, lcat)
                descend(self.right[node], lo_v, hi_v, rcat)
            else:
                llo, lhi = lo_v.copy(), hi_v.copy()
                rlo, rhi = lo_v.copy(), hi_v.copy()
                lhi[f] = min(lhi[f], self.threshold[node])
                rlo[f] = max(rlo[f], self.threshold[node])
                descend(self.left[node], llo, lhi, cat_v)
                descend(self.right[node], rlo, rhi, cat_v)

        descend(0, lo.astype(float).copy(), hi.astype(float).copy(), full.copy())
        return boxes


def fit_tree(
    X: np.ndarray,
    T: np.ndarray,
    ncats: np.ndarray,
    rows: np.ndarray,
    crit: int,
    mode: int = tk.MODE_FULL,
    max_leaves: int = 0,
    max_depth: int = 10_000,
    min_bucket: int = 1,
    min_node_size: int = 2,
    min_child_weight: float = 0.0,
    lam: float = 0.0,
    min_gain: float = 1e-12,
    mtry: Optional[int] = None,
    seed: int = 0,
) -> Tree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    ncats = np.ascontiguousarray(ncats, dtype=np.int64)
    if np.any(ncats > MAX_CATEGORIES):
        raise ValueError(f"categorical cardinality above {MAX_CATEGORIES} unsupported")
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if mtry is None:
        mtry = X.shape[1]
    if mode != tk.MODE_FULL and max_leaves < 2:
        raise ValueError("leaf-capped growth needs max_leaves >= 2")
    out = tk.grow_tree(
        X, T, ncats, rows, crit, mode,
        max_leaves if max_leaves else 2 * len(rows),
        max_depth, min_bucket, max(min_node_size, 2),
        min_child_weight, lam, min_gain, mtry, seed,
    )
    n_nodes, feature, threshold, catmask, left, right, n_samples, value = out
    return Tree(feature, threshold, catmask, left, right, n_samples, value, ncats)


def onehot_targets(y: np.ndarray, n_classes: int) -> np.ndarray:
    T = np.zeros((len(y), n_classes))
    T[np.arange(len(y)), y.astype(int)] = 1.0
    return T


class RandomForest:
    """Bagged CART trees; classification (Gini) or regression (variance).

    Per-split feature subsampling defaults to round(sqrt(p)). Classification
    probabilities are the mean of member-tree leaf class fractions.
    """

    def __init__(
        self,
        n_trees: int = 100,
        task: str = "classify",
        max_depth: int = 10_000,
        min_node_size: int = 2,
        min_bucket: int = 1,
        mtry: Optional[int] = None,
        bootstrap: bool = True,
        seed: int = 0,
    ):
        if task not in ("classify", "regress"):
            raise ValueError(f"unknown task {task!r}")
        self.n_trees = int(n_trees)
        self.task = task
        self.max_depth = int(max_depth)
        self.min_node_size = int(min_node_size)
        self.min_bucket = int(min_bucket)
        self.mtry = mtry
        self.bootstrap = bootstrap
        self.seed = int(seed)
        self.trees: list[Tree] = []
        self.n_classes = 0
        self.oob_proba_: Optional[np.ndarray] = None

    def fit(self, X: np.ndarray, y: np.ndarray, ncats: np.ndarray,
            track_oob: bool = False) -> "RandomForest":
        X = np.ascontiguousarray(X, dtype=np.float64)
        n, p = X.shape
        if n == 0:
            raise ValueError("empty training table")
        mtry = self.mtry if self.mtry is not None else max(1, round(np.sqrt(p)))
        if self.task == "classify":
            y_int = np.ascontiguousarray(y, dtype=np.int64)
            self.n_classes = int(y_int.max()) + 1 if len(y_int) else 0
            T = onehot_targets(y_int, self.n_classes)
            crit = tk.CRIT_GINI
        else:
            T = np.ascontiguousarray(y, dtype=np.float64).reshape(-1, 1)
            crit = tk.CRIT_REG
        rng = np.random.default_rng(derive_seed(self.seed, "forest"))
        self.trees = []
        oob_sum = np.zeros((n, T.shape[1] if self.task == "classify" else 1))
        oob_cnt = np.zeros(n)
        for t in range(self.n_trees):
            if self.bootstrap:
                rows = rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            tree = fit_tree(
                X, T, ncats, rows, crit,
                mode=tk.MODE_FULL,
                max_depth=self.max_depth,
                min_bucket=self.min_bucket,
                min_node_size=self.min_node_size,
                mtry=mtry,
                seed=derive_seed(self.seed, "tree", t),
            )
            self.trees.append(tree)
            if track_oob and self.bootstrap:
                out = np.ones(n, dtype=bool)
                out[np.unique(rows)] = False
                if out.any():
                    oob_sum[out] += tree.predict_value(X[out])
                    oob_cnt[out] += 1
        if track_oob:
            with np.errstate(invalid="ignore"):
                self.oob_proba_ = oob_sum / oob_cnt[:, None]
            self.oob_mask_ = oob_cnt > 0
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classify":
            raise ValueError("predict_proba requires a classification forest")
        acc = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.predict_value(X)
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.task == "classify":
            return np.argmax(self.predict_proba(X), axis=1)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict_value(X)[:, 0]
        return acc / len(self.trees)

    def oob_accuracy(self, y: np.ndarray) -> float:
        if self.oob_proba_ is None:
            raise ValueError("fit with track_oob=True first")
        have = self.oob_mask_
        pred = np.argmax(self.oob_proba_[have], axis=1)
        return float(np.mean(pred == np.asarray(y)[have]))
