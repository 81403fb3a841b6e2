"""Adversarial random forest density estimation and sampling.

Alternates rounds of synthetic-data generation and real-vs-synthetic
discrimination: round 1 permutes each column independently, later rounds
draw from the current forest's leaves, and the loop stops once the
discriminator's out-of-bag accuracy falls below the convergence threshold
(it can no longer tell real from synthetic). The converged forest then
becomes a density model: per leaf, numeric columns get a truncated normal
over the leaf's split-path bounds with the leaf members' mean and spread,
and categoricals get add-one-smoothed member frequencies. Leaves are drawn
with probability proportional to their real-data coverage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from scipy.special import ndtr, ndtri

from ._seeding import derive_seed
from .cohort import CohortError
from .impute import ImputedTable
from .trees import RandomForest

CONVERGENCE_ACCURACY = 0.55
MAX_ROUNDS = 10
DISCRIMINATOR_TREES = 50
MIN_LEAF = 5
MIN_FIT_ROWS = 50


@dataclass
class LeafDensities:
    """Flattened per-leaf density parameters across all trees."""

    weights: np.ndarray                 # (L,) sums to 1
    num_mean: np.ndarray                # (L, n_numeric)
    num_sd: np.ndarray
    num_lo: np.ndarray
    num_hi: np.ndarray
    cat_probs: List[np.ndarray]         # per categorical column: (L, K)
    num_cols: np.ndarray                # column indices into the table
    cat_cols: np.ndarray


@dataclass
class ArfModel:
    densities: LeafDensities
    n_columns: int
    rounds_run: int = 0
    final_oob_accuracy: float = 1.0
    converged: bool = False
    diagnostics: Dict = field(default_factory=dict)


def _forest_sample(forest: RandomForest, X_real: np.ndarray, m: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Adversarial-round generator: draw a leaf by real coverage, then draw
    each feature independently from the leaf's real members."""
    n, p = X_real.shape
    member_lists = []
    weights = []
    for tree in forest.trees:
        leaf_of = tree.apply(X_real)
        for leaf in np.unique(leaf_of):
            members = np.flatnonzero(leaf_of == leaf)
            member_lists.append(members)
            weights.append(len(members))
    weights = np.asarray(weights, dtype=float)
    weights /= weights.sum()
    picks = rng.choice(len(member_lists), size=m, p=weights)
    out = np.empty((m, p))
    for i, leaf_idx in enumerate(picks):
        members = member_lists[leaf_idx]
        rows = members[rng.integers(0, len(members), size=p)]
        out[i] = X_real[rows, np.arange(p)]
    return out


def fit_arf(table: ImputedTable, seed: int = 0,
            n_trees: int = DISCRIMINATOR_TREES,
            max_rounds: int = MAX_ROUNDS) -> ArfModel:
    """Fit the adversarial loop and leaf densities on a complete table."""
    X_real = np.ascontiguousarray(table.values)
    n, p = X_real.shape
    if n < MIN_FIT_ROWS:
        raise CohortError(f"adversarial forest needs >= {MIN_FIT_ROWS} rows, got {n}")
    schema = table.schema
    ncats = np.array(
        [len(c.categories) if c.kind == "categorical" else 0 for c in schema.columns],
        dtype=np.int64,
    )
    rng = np.random.default_rng(derive_seed(seed, "arf"))

    X_syn = np.column_stack([rng.permutation(X_real[:, j]) for j in range(p)])
    forest = None
    acc = 1.0
    rounds = 0
    converged = False
    for rounds in range(1, max_rounds + 1):
        X_all = np.vstack([X_real, X_syn])
        y_all = np.concatenate([np.ones(n, dtype=np.int64),
                                np.zeros(len(X_syn), dtype=np.int64)])
        forest = RandomForest(
            n_trees=n_trees, task="classify", min_bucket=MIN_LEAF,
            seed=derive_seed(seed, "arf-round", rounds),
        ).fit(X_all, y_all, ncats, track_oob=True)
        acc = forest.oob_accuracy(y_all)
        if acc < CONVERGENCE_ACCURACY:
            converged = True
            break
        X_syn = _forest_sample(forest, X_real, n,
                               np.random.default_rng(derive_seed(seed, "arf-gen", rounds)))
    if not converged:
        warnings.warn(
            f"adversarial loop did not converge in {max_rounds} rounds "
            f"(final OOB accuracy {acc:.3f}); using the last forest",
            RuntimeWarning,
        )

    num_cols = np.flatnonzero(ncats == 0)
    cat_cols = np.flatnonzero(ncats > 0)
    lo_glob = np.full(p, -np.inf)
    hi_glob = np.full(p, np.inf)

    weights = []
    means, sds, los, his = [], [], [], []
    cat_tables = [[] for _ in cat_cols]
    for tree in forest.trees:
        leaf_of = tree.apply(X_real)
        boxes = tree.leaf_boxes(lo_glob, hi_glob)
        for leaf in np.unique(leaf_of):
            members = X_real[leaf_of == leaf]
            if len(members) == 0:
                continue
            weights.append(len(members))
            lo_v, hi_v, _ = boxes[leaf]
            means.append(members[:, num_cols].mean(axis=0))
            sds.append(members[:, num_cols].std(axis=0))
            los.append(lo_v[num_cols])
            his.append(hi_v[num_cols])
            for ci, col in enumerate(cat_cols):
                counts = np.bincount(members[:, col].astype(int),
                                     minlength=ncats[col]).astype(float)
                cat_tables[ci].append((counts + 1.0) / (counts.sum() + ncats[col]))

    weights = np.asarray(weights, dtype=float)
    densities = LeafDensities(
        weights=weights / weights.sum(),
        num_mean=np.asarray(means) if means else np.empty((len(weights), 0)),
        num_sd=np.asarray(sds) if sds else np.empty((len(weights), 0)),
        num_lo=np.asarray(los) if los else np.empty((len(weights), 0)),
        num_hi=np.asarray(his) if his else np.empty((len(weights), 0)),
        cat_probs=[np.asarray(tbl) for tbl in cat_tables],
        num_cols=num_cols,
        cat_cols=cat_cols,
    )
    return ArfModel(
        densities=densities,
        n_columns=p,
        rounds_run=rounds,
        final_oob_accuracy=float(acc),
        converged=converged,
        diagnostics={"rounds": rounds, "oob_accuracy": float(acc),
                     "converged": converged, "n_leaves": len(weights)},
    )


def _truncated_normal(mean, sd, lo, hi, u):
    """Inverse-CDF truncated normal; degenerate spread collapses to the mean."""
    sd_safe = np.where(sd > 0, sd, 1.0)
    a = ndtr((lo - mean) / sd_safe)
    b = ndtr((hi - mean) / sd_safe)
    q = np.clip(a + u * (b - a), 1e-12, 1 - 1e-12)
    x = mean + sd_safe * ndtri(q)
    x = np.clip(x, lo, hi)
    return np.where(sd > 0, x, mean)


def sample_arf(model: ArfModel, m: int, seed: int = 0) -> np.ndarray:
    """Draw m rows from the fitted leaf densities."""
    d = model.densities
    out = np.empty((m, model.n_columns))
    if m == 0:
        return out
    rng = np.random.default_rng(derive_seed(seed, "arf-sample"))
    leaves = rng.choice(len(d.weights), size=m, p=d.weights)
    if len(d.num_cols):
        u = rng.random((m, len(d.num_cols)))
        out[:, d.num_cols] = _truncated_normal(
            d.num_mean[leaves], d.num_sd[leaves],
            d.num_lo[leaves], d.num_hi[leaves], u,
        )
    for ci, col in enumerate(d.cat_cols):
        probs = d.cat_probs[ci][leaves]
        cum = np.cumsum(probs, axis=1)
        u = rng.random((m, 1))
        out[:, col] = np.argmax(u <= cum, axis=1)
    return out
