"""Unified generator interface over the tabular synthesis backends.

Two built-in generators (adversarial random forest and Bayesian network)
model the full joint distribution of a complete table, outcomes included.
Third-party generators participate through pre-sampled CSV files in the
same schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ._seeding import derive_seed
from .arf import fit_arf as _fit_arf, sample_arf
from .bn import DEFAULT_BINS, fit_bn as _fit_bn, sample_bn
from .cohort import Cohort, CohortError, CohortSchema, load_cohort
from .impute import ImputedTable, complete_table

GENERATOR_KINDS = ("arf", "bn", "external")


@dataclass
class Generator:
    """A fitted sampler bound to the schema of its source table."""

    kind: str
    model: object
    schema: CohortSchema
    fingerprint: str
    diagnostics: Dict = field(default_factory=dict)


def fit_arf(table: ImputedTable, seed: int = 0, **kwargs) -> Generator:
    model = _fit_arf(table, seed=seed, **kwargs)
    return Generator(
        kind="arf", model=model, schema=table.schema,
        fingerprint=table.schema.fingerprint(),
        diagnostics=dict(model.diagnostics),
    )


def fit_bn(table: ImputedTable, bins: int = DEFAULT_BINS, seed: int = 0) -> Generator:
    model = _fit_bn(table, bins=bins, seed=seed)
    return Generator(
        kind="bn", model=model, schema=table.schema,
        fingerprint=table.schema.fingerprint(),
        diagnostics={"edges": model.edges, "bic": model.bic},
    )


def fit_generator(kind: str, table: ImputedTable, seed: int = 0, **kwargs) -> Generator:
    if kind == "arf":
        return fit_arf(table, seed=seed, **kwargs)
    if kind == "bn":
        return fit_bn(table, seed=seed, **kwargs)
    raise CohortError(f"unknown generator kind {kind!r}")


def from_external_csv(path, schema: CohortSchema) -> Generator:
    """Wrap a file of pre-generated records as a sampling source."""
    cohort = load_cohort(path, schema)
    if cohort.mask.any():
        raise CohortError(f"{path}: external synthetic records must be complete")
    return Generator(
        kind="external", model=cohort, schema=schema,
        fingerprint=schema.fingerprint(),
        diagnostics={"available_rows": cohort.n_rows, "path": str(path)},
    )


def sample(gen: Generator, m: int, seed: int = 0) -> ImputedTable:
    """Draw m schema-conforming complete rows; deterministic given the seed."""
    if m < 0:
        raise CohortError("sample size must be >= 0")
    if gen.kind == "arf":
        values = sample_arf(gen.model, m, seed=seed)
    elif gen.kind == "bn":
        values = sample_bn(gen.model, m, seed=seed)
    elif gen.kind == "external":
        pool: Cohort = gen.model
        if m > pool.n_rows:
            raise CohortError(
                f"requested {m} rows but the external file holds {pool.n_rows}"
            )
        rng = np.random.default_rng(derive_seed(seed, "external-sample"))
        rows = rng.permutation(pool.n_rows)[:m]
        values = pool.values[np.sort(rows)]
    else:
        raise CohortError(f"unknown generator kind {gen.kind!r}")

    for j, spec in enumerate(gen.schema.columns):
        col = values[:, j]
        if spec.kind == "categorical":
            assert np.all((col >= 0) & (col < len(spec.categories))), (
                f"generator produced an out-of-range category in {spec.name!r}"
            )
        else:
            assert np.all(np.isfinite(col)), (
                f"generator produced a non-finite value in {spec.name!r}"
            )
    cohort = Cohort(gen.schema, values, np.zeros(values.shape, dtype=bool))
    return complete_table(cohort)
