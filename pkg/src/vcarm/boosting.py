"""Gradient-boosted trees for binary outcomes, leaf-wise and depth-wise.

Both styles boost on the logistic loss with second-order (Newton) leaf
values and stop early on an internal validation split carved from the
training rows. The leaf-wise grower splits whichever open leaf offers the
largest gain until the leaf budget is exhausted and supports gradient-based
one-side sampling (keep the top-`a` fraction by |gradient|, subsample the
rest at rate `b`, reweighting by (1-a)/b). The depth-wise grower expands
nodes breadth-first under a leaf cap with a minimum split gain `gamma` and
a minimum child hessian mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _tree_kernel as tk
from ._seeding import derive_seed
from .logistic import FitError, sigmoid
from .trees import Tree, fit_tree

GOSS_TOP_FRACTION = 0.2
GOSS_OTHER_RATE = 0.1
VALIDATION_FRACTION = 0.1
MAX_ROUNDS = 200


def logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


@dataclass
class BoostedModel:
    style: str
    base_score: float
    learning_rate: float
    trees: list[Tree] = field(default_factory=list)
    best_rounds: int = 0
    val_losses: list[float] = field(default_factory=list)

    def decision(self, X: np.ndarray) -> np.ndarray:
        F = np.full(X.shape[0], self.base_score)
        for tree in self.trees[: self.best_rounds]:
            F += self.learning_rate * tree.predict_value(X)[:, 0]
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if X.shape[0] == 0:
            return np.empty(0)
        return sigmoid(self.decision(X))


def _validation_split(y: np.ndarray, seed: int):
    """Stratified ~10% holdout; guarantees both classes stay in training."""
    n = len(y)
    rng = np.random.default_rng(derive_seed(seed, "boost-val"))
    val = np.zeros(n, dtype=bool)
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        take = int(round(VALIDATION_FRACTION * len(members)))
        take = min(take, len(members) - 1)
        val[members[:take]] = True
    return ~val, val


def fit_boosted(
    X: np.ndarray,
    y: np.ndarray,
    ncats: np.ndarray,
    style: str = "leafwise",
    learning_rate: float = 0.3,
    num_leaves: int = 15,
    max_depth: int = 6,
    min_data_in_leaf: int = 10,
    min_child_weight: float = 1.0,
    gamma: float = 0.0,
    booster: str = "gbdt",
    early_stopping_rounds: int = 7,
    max_rounds: int = MAX_ROUNDS,
    lam: float = 1.0,
    seed: int = 0,
) -> BoostedModel:
    if style not in ("leafwise", "depthwise"):
        raise ValueError(f"unknown boosting style {style!r}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)

    train_mask, val_mask = _validation_split(y.astype(int), seed)
    tr = np.flatnonzero(train_mask)
    va = np.flatnonzero(val_mask)

    p_bar = np.clip(y[tr].mean(), 1e-6, 1 - 1e-6)
    base = float(np.log(p_bar / (1 - p_bar)))
    model = BoostedModel(style=style, base_score=base, learning_rate=learning_rate)

    F = np.full(n, base)
    rng = np.random.default_rng(derive_seed(seed, "boost-goss"))
    best_loss, best_round, since_best = np.inf, 0, 0

    for r in range(1, max_rounds + 1):
        p = sigmoid(F)
        g = p - y
        # keep hessians strictly positive so Newton leaf values stay defined
        # once predictions saturate
        h = np.maximum(p * (1 - p), 1e-12)
        if not np.all(np.isfinite(g)):
            raise FitError(f"non-finite loss at boosting round {r}")

        rows = tr
        g_r, h_r = g, h
        if booster == "goss" and style == "leafwise":
            k_top = int(round(GOSS_TOP_FRACTION * len(tr)))
            order = tr[np.argsort(-np.abs(g[tr]), kind="stable")]
            top = order[:k_top]
            rest = order[k_top:]
            k_other = int(round(GOSS_OTHER_RATE * len(rest)))
            sampled = rest[rng.permutation(len(rest))[:k_other]] if k_other else rest[:0]
            rows = np.sort(np.concatenate([top, sampled]))
            amplify = (1.0 - GOSS_TOP_FRACTION) / GOSS_OTHER_RATE
            g_r = g.copy()
            h_r = h.copy()
            g_r[sampled] *= amplify
            h_r[sampled] *= amplify

        T = np.column_stack([g_r, h_r])
        if style == "leafwise":
            tree = fit_tree(
                X, T, ncats, rows, tk.CRIT_BOOST, mode=tk.MODE_LEAFWISE,
                max_leaves=num_leaves, max_depth=max_depth,
                min_bucket=min_data_in_leaf, min_child_weight=1e-3,
                lam=0.0, min_gain=0.0,
                seed=derive_seed(seed, "boost-tree", r),
            )
        else:
            tree = fit_tree(
                X, T, ncats, rows, tk.CRIT_BOOST, mode=tk.MODE_DEPTHWISE,
                max_leaves=num_leaves, max_depth=max_depth,
                min_bucket=1, min_child_weight=min_child_weight,
                lam=lam, min_gain=gamma,
                seed=derive_seed(seed, "boost-tree", r),
            )
        model.trees.append(tree)
        F += learning_rate * tree.predict_value(X)[:, 0]

        if len(va):
            loss = logloss(y[va], sigmoid(F[va]))
        else:
            loss = logloss(y[tr], sigmoid(F[tr]))
        model.val_losses.append(loss)
        if loss < best_loss - 1e-12:
            best_loss, best_round, since_best = loss, r, 0
        else:
            since_best += 1
            if since_best >= early_stopping_rounds:
                break
        # A tree that found no split contributes nothing; further rounds won't either.
        if len(tree.feature) == 1:
            break

    model.best_rounds = max(best_round, 1)
    return model
