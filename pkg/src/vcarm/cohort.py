"""Typed tabular cohort data model, CSV ingestion, and fold planning.

A Cohort couples a typed schema with a row-major cell matrix and an explicit
missingness mask. Categorical cells are stored as category indices, numeric
cells as floats; missing cells are flagged in the mask and their stored value
is NaN. Cohorts are immutable after construction so they can be shared freely
across concurrent readers.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class CohortError(ValueError):
    """Schema violations and malformed input files."""


@dataclass(frozen=True)
class ColumnSpec:
    """One column of a cohort: a numeric measurement or a coded categorical."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    units: str = ""

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise CohortError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise CohortError(
                    f"categorical column {self.name!r} needs >=2 category labels"
                )
            if len(set(self.categories)) != len(self.categories):
                raise CohortError(f"column {self.name!r}: duplicate category labels")
        elif self.categories:
            raise CohortError(f"numeric column {self.name!r} cannot declare categories")

    @property
    def is_binary(self) -> bool:
        return self.kind == CATEGORICAL and len(self.categories) == 2


@dataclass(frozen=True)
class CohortSchema:
    """Ordered column specs plus designated outcome / treatment columns."""

    columns: tuple[ColumnSpec, ...]
    outcome_cols: tuple[str, ...] = ()
    treatment_col: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "outcome_cols", tuple(self.outcome_cols))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise CohortError("duplicate column names in schema")
        by_name = {c.name: c for c in self.columns}
        for role, cols in (("outcome", self.outcome_cols),
                           ("treatment", (self.treatment_col,) if self.treatment_col else ())):
            for name in cols:
                spec = by_name.get(name)
                if spec is None:
                    raise CohortError(f"{role} column {name!r} not in schema")
                if not spec.is_binary:
                    raise CohortError(
                        f"{role} column {name!r} must be categorical with exactly 2 categories"
                    )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise CohortError(f"unknown column {name!r}")

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise CohortError(f"unknown column {name!r}")

    @property
    def primary_outcome(self) -> Optional[str]:
        return self.outcome_cols[0] if self.outcome_cols else None

    def drop(self, names: Sequence[str]) -> "CohortSchema":
        """Schema without the given columns (role designations pruned too)."""
        dropped = set(names)
        return CohortSchema(
            columns=tuple(c for c in self.columns if c.name not in dropped),
            outcome_cols=tuple(n for n in self.outcome_cols if n not in dropped),
            treatment_col=None if self.treatment_col in dropped else self.treatment_col,
        )

    def fingerprint(self) -> str:
        """Stable hash of column names, kinds, and category sets."""
        parts = [f"{c.name}|{c.kind}|{','.join(c.categories)}" for c in self.columns]
        return hashlib.sha256(";".join(parts).encode("utf-8")).hexdigest()[:16]


class Cohort:
    """Immutable typed table with an explicit missingness mask.

    values[i, j] holds a float for numeric columns and a category index for
    categorical ones; masked (missing) cells hold NaN.
    """

    def __init__(self, schema: CohortSchema, values: np.ndarray, mask: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if values.shape != mask.shape:
            raise CohortError("values and mask dimensions differ")
        if values.ndim != 2 or values.shape[1] != len(schema.columns):
            raise CohortError(
                f"expected {len(schema.columns)} columns, got shape {values.shape}"
            )
        for j, spec in enumerate(schema.columns):
            observed = values[~mask[:, j], j]
            if not np.all(np.isfinite(observed)):
                raise CohortError(f"column {spec.name!r}: non-finite observed cell")
            if spec.kind == CATEGORICAL and observed.size:
                ok = (observed == np.round(observed)) & (observed >= 0) \
                    & (observed < len(spec.categories))
                if not np.all(ok):
                    raise CohortError(
                        f"column {spec.name!r}: cell outside declared categories"
                    )
        values = values.copy()
        values[mask] = np.nan
        values.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        self.schema = schema
        self.values = values
        self.mask = mask

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column_values(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index_of(name)]

    def column_mask(self, name: str) -> np.ndarray:
        return self.mask[:, self.schema.index_of(name)]

    def select_rows(self, rows: np.ndarray) -> "Cohort":
        rows = np.asarray(rows)
        return Cohort(self.schema, self.values[rows], self.mask[rows])

    def drop_columns(self, names: Sequence[str]) -> "Cohort":
        keep = [j for j, c in enumerate(self.schema.columns) if c.name not in set(names)]
        return Cohort(self.schema.drop(names), self.values[:, keep], self.mask[:, keep])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values[~self.mask], other.values[~other.mask])
        )


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic row-to-fold assignment for k-fold cross-validation."""

    k: int
    assignments: np.ndarray = field(compare=False)
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)


def load_cohort(path, schema: CohortSchema) -> Cohort:
    """Read a header-bearing CSV into a Cohort; empty cells are missing.

    Numeric cells are parsed as decimal floats; categorical cells must match
    a declared label exactly (case-sensitive). Errors carry 1-based row and
    the column name.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: empty file") from None
        declared = set(schema.names)
        seen = set(header)
        for name in schema.names:
            if name not in seen:
                raise CohortError(f"{path}: header missing column {name!r}")
        for name in header:
            if name not in declared:
                raise CohortError(f"{path}: unknown column {name!r}")
        order = [header.index(name) for name in schema.names]

        rows, masks = [], []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise CohortError(
                    f"{path}:{lineno}: ragged row ({len(record)} cells, expected {len(header)})"
                )
            vals = np.empty(len(schema.columns))
            miss = np.zeros(len(schema.columns), dtype=bool)
            for j, spec in enumerate(schema.columns):
                cell = record[order[j]]
                if cell == "":
                    vals[j], miss[j] = np.nan, True
                elif spec.kind == NUMERIC:
                    try:
                        vals[j] = float(cell)
                    except ValueError:
                        raise CohortError(
                            f"{path}:{lineno}: column {spec.name!r}: "
                            f"unparseable numeric {cell!r}"
                        ) from None
                else:
                    try:
                        vals[j] = spec.categories.index(cell)
                    except ValueError:
                        raise CohortError(
                            f"{path}:{lineno}: column {spec.name!r}: "
                            f"undeclared category label {cell!r}"
                        ) from None
            rows.append(vals)
            masks.append(miss)

    values = np.array(rows) if rows else np.empty((0, len(schema.columns)))
    mask = np.array(masks) if masks else np.empty((0, len(schema.columns)), dtype=bool)
    return Cohort(schema, values, mask)


def write_cohort(cohort: Cohort, path) -> None:
    """Write a Cohort back to CSV; missing cells become empty strings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cohort.schema.names)
        for i in range(cohort.n_rows):
            record = []
            for j, spec in enumerate(cohort.schema.columns):
                if cohort.mask[i, j]:
                    record.append("")
                elif spec.kind == NUMERIC:
                    record.append(repr(float(cohort.values[i, j])))
                else:
                    record.append(spec.categories[int(cohort.values[i, j])])
            writer.writerow(record)


def split_folds(cohort: Cohort, k: int, seed: int,
                stratify_on: Optional[str] = None) -> FoldPlan:
    """Stratified k-fold assignment, deterministic in the seed.

    Stratification uses the designated outcome column (the schema's primary
    outcome unless overridden); rows with a missing outcome form their own
    stratum. Fold sizes differ by at most one row, and within each stratum
    per-fold counts differ by at most one.
    """
    n = cohort.n_rows
    if k < 2:
        raise CohortError("k must be >= 2")
    if k > n:
        raise CohortError(f"k={k} exceeds row count {n}")
    if stratify_on is None:
        stratify_on = cohort.schema.primary_outcome

    if stratify_on is not None:
        col = cohort.column_values(stratify_on)
        miss = cohort.column_mask(stratify_on)
        if miss.all():
            raise CohortError(f"outcome column {stratify_on!r} entirely missing")
        keys = np.where(miss, -1, np.nan_to_num(col, nan=-1)).astype(np.int64)
    else:
        keys = np.zeros(n, dtype=np.int64)

    rng = np.random.default_rng(derive_seed(seed, "folds", k))
    assignments = np.empty(n, dtype=np.int64)
    position = 0
    for key in np.unique(keys):
        members = np.flatnonzero(keys == key)
        members = members[rng.permutation(len(members))]
        for row in members:
            assignments[row] = position % k
            position += 1
    return FoldPlan(k=k, assignments=assignments, seed=seed)
