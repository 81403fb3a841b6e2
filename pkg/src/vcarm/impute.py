"""Iterative random-forest completion of missing cells (missForest-style).

Imputation is leakage-safe by API shape: one cohort in, one completed table
out, so training and testing partitions are always completed independently.
Missing numerics start at the column mean, categoricals at the mode; columns
are then revisited in ascending-missingness order, each fitted with a random
forest on all other columns, until the relative change in the imputed cells
rises (missForest's stopping statistic) or `max_iters` is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ._seeding import derive_seed
from .cohort import CATEGORICAL, Cohort, CohortError, CohortSchema
from .trees import RandomForest

IMPUTE_TREES = 100
IMPUTE_MIN_BUCKET = 5


@dataclass(frozen=True)
class ImputedTable:
    """A cohort with no missing cells plus imputation diagnostics."""

    cohort: Cohort
    iterations_run: int = 0
    per_column_change: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.cohort.mask.any():
            raise CohortError("ImputedTable requires a fully observed cohort")

    @property
    def schema(self) -> CohortSchema:
        return self.cohort.schema

    @property
    def values(self) -> np.ndarray:
        return self.cohort.values

    @property
    def n_rows(self) -> int:
        return self.cohort.n_rows


def complete_table(cohort: Cohort) -> ImputedTable:
    """Wrap an already-complete cohort without running any imputation."""
    return ImputedTable(cohort=cohort, iterations_run=0, per_column_change={})


def concat_tables(a: ImputedTable, b: ImputedTable) -> ImputedTable:
    """Stack two complete tables over the same schema (a's rows first)."""
    if a.schema.fingerprint() != b.schema.fingerprint():
        raise CohortError("cannot concatenate tables with different schemas")
    values = np.vstack([a.values, b.values])
    mask = np.zeros(values.shape, dtype=bool)
    return complete_table(Cohort(a.schema, values, mask))


def fit_impute(cohort: Cohort, max_iters: int = 5, seed: int = 0,
               n_trees: int = IMPUTE_TREES) -> ImputedTable:
    """Complete a cohort's missing cells with iterative per-column forests.

    Deterministic given the seed: the forest for column `name` at iteration
    `t` uses sub-seed derive_seed(seed, "impute", t, name).
    """
    if cohort.n_rows == 0:
        raise CohortError("cannot impute a cohort with zero rows")
    if max_iters < 1:
        raise CohortError("max_iters must be >= 1")
    mask = cohort.mask
    for j, spec in enumerate(cohort.schema.columns):
        if mask[:, j].all():
            raise CohortError(f"column {spec.name!r} has no observed values")

    if not mask.any():
        return complete_table(cohort)

    schema = cohort.schema
    values = cohort.values.copy()
    is_cat = np.array([c.kind == CATEGORICAL for c in schema.columns])
    ncats_all = np.array(
        [len(c.categories) if c.kind == CATEGORICAL else 0 for c in schema.columns],
        dtype=np.int64,
    )

    for j in range(values.shape[1]):
        miss = mask[:, j]
        if not miss.any():
            continue
        obs = values[~miss, j]
        if is_cat[j]:
            counts = np.bincount(obs.astype(int), minlength=ncats_all[j])
            values[miss, j] = np.argmax(counts)
        else:
            values[miss, j] = obs.mean()

    miss_counts = mask.sum(axis=0)
    order = [j for j in np.argsort(miss_counts, kind="stable") if miss_counts[j] > 0]

    num_cells = mask & ~is_cat[None, :]
    cat_cells = mask & is_cat[None, :]

    def deltas(new, old):
        d_num = np.nan
        if num_cells.any():
            denom = float(np.sum(new[num_cells] ** 2))
            d_num = float(np.sum((new[num_cells] - old[num_cells]) ** 2)) / max(denom, 1e-300)
        d_cat = np.nan
        if cat_cells.any():
            d_cat = float(np.mean(new[cat_cells] != old[cat_cells]))
        return d_num, d_cat

    def column_changes(new, old):
        out = {}
        for j in order:
            name = schema.columns[j].name
            cells = mask[:, j]
            if is_cat[j]:
                out[name] = float(np.mean(new[cells, j] != old[cells, j]))
            else:
                denom = float(np.sum(new[cells, j] ** 2))
                out[name] = float(np.sum((new[cells, j] - old[cells, j]) ** 2)) / max(denom, 1e-300)
        return out

    prev_num, prev_cat = np.inf, np.inf
    accepted = values.copy()
    accepted_iter = 0
    accepted_changes: Dict[str, float] = {}

    for t in range(1, max_iters + 1):
        old = values.copy()
        for j in order:
            miss = mask[:, j]
            feats = [c for c in range(values.shape[1]) if c != j]
            X = values[:, feats]
            ncats = ncats_all[feats]
            y = values[~miss, j]
            rf_seed = derive_seed(seed, "impute", t, schema.columns[j].name)
            if is_cat[j]:
                rf = RandomForest(n_trees=n_trees, task="classify",
                                  min_bucket=IMPUTE_MIN_BUCKET, seed=rf_seed)
                rf.fit(X[~miss], y.astype(np.int64), ncats)
                values[miss, j] = rf.predict(X[miss])
            else:
                rf = RandomForest(n_trees=n_trees, task="regress",
                                  min_bucket=IMPUTE_MIN_BUCKET, seed=rf_seed)
                rf.fit(X[~miss], y, ncats)
                values[miss, j] = rf.predict(X[miss])

        d_num, d_cat = deltas(values, old)
        num_rose = np.isnan(d_num) or d_num > prev_num
        cat_rose = np.isnan(d_cat) or d_cat > prev_cat
        if t >= 2 and num_rose and cat_rose:
            break
        accepted = values.copy()
        accepted_iter = t
        accepted_changes = column_changes(values, old)
        prev_num = d_num if not np.isnan(d_num) else prev_num
        prev_cat = d_cat if not np.isnan(d_cat) else prev_cat

    completed = Cohort(schema, accepted, np.zeros(mask.shape, dtype=bool))
    return ImputedTable(cohort=completed, iterations_run=accepted_iter,
                        per_column_change=accepted_changes)
