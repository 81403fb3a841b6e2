"""Geometric augmentation schedules, the synthetic-size grid search, and
construction of the final augmented training set.

The schedule draws multipliers b ~ N(mu, sigma) and builds, for each draw,
the geometric series of synthetic sample sizes ceil(b**(i+4)) for
i = 1..n_sizes (a nearest-integer variant is available behind `rounding`).
The grid search evaluates each unique size with the nested-CV harness,
refitting the generator per fold on that fold's imputed training partition,
and picks the size with the best cross-validated AUC (ICI as tie-break,
then the smaller size). Fitted generators and fold imputations are cached
across sizes, which is sound because both are deterministic in their seeds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ._seeding import derive_seed
from .cohort import Cohort, CohortError, FoldPlan
from .crossval import nested_cv
from .impute import ImputedTable, concat_tables, fit_impute
from .learners import LearnerSpec
from .syngen import Generator, fit_generator, sample
from .tune import (
    DEFAULT_INIT_POINTS,
    DEFAULT_INNER_FOLDS,
    DEFAULT_ITERS,
    HyperSpace,
)

SCHEDULE_MU = 1.5
SCHEDULE_SIGMA = 0.005
SCHEDULE_DRAWS = 10
SCHEDULE_SIZES = 23
SIZE_EXPONENT_OFFSET = 4
DEFAULT_SIZE_CAP_FACTOR = 20


@dataclass(frozen=True)
class AugmentationSchedule:
    """Drawn multipliers and the synthetic-size grid they imply."""

    mu: float
    sigma: float
    n_draws: int
    b_values: Tuple[float, ...]
    sizes: Tuple[Tuple[int, ...], ...]
    seed: int
    rounding: str = "ceil"

    def all_sizes(self) -> Tuple[int, ...]:
        """Unique grid sizes across draws, ascending."""
        return tuple(sorted({s for row in self.sizes for s in row}))

    def n_grid_points(self) -> int:
        return sum(len(row) for row in self.sizes)


def build_schedule(mu: float = SCHEDULE_MU, sigma: float = SCHEDULE_SIGMA,
                   n_draws: int = SCHEDULE_DRAWS, n_sizes: int = SCHEDULE_SIZES,
                   seed: int = 0, rounding: str = "ceil") -> AugmentationSchedule:
    if mu <= 1.0:
        raise CohortError("schedule multiplier mean must exceed 1 (series must grow)")
    if sigma < 0:
        raise CohortError("schedule sigma must be >= 0")
    if rounding not in ("ceil", "nearest"):
        raise CohortError(f"unknown rounding {rounding!r}")
    rng = np.random.default_rng(derive_seed(seed, "schedule"))
    b_values = mu + sigma * rng.standard_normal(n_draws)
    if sigma > 0:
        b_values = np.clip(b_values, mu - 5 * sigma, mu + 5 * sigma)
    if np.any(b_values <= 1.0):
        raise CohortError("drawn multiplier <= 1; shrink sigma or raise mu")
    rows = []
    for b in b_values:
        row = []
        for i in range(1, n_sizes + 1):
            power = float(b) ** (i + SIZE_EXPONENT_OFFSET)
            row.append(int(math.ceil(power)) if rounding == "ceil"
                       else int(round(power)))
        if any(nxt <= cur for cur, nxt in zip(row, row[1:])):
            raise CohortError(
                "schedule sizes are not strictly increasing; "
                "mu is too close to 1 for integer rounding"
            )
        rows.append(tuple(row))
    return AugmentationSchedule(
        mu=mu, sigma=sigma, n_draws=n_draws,
        b_values=tuple(float(b) for b in b_values),
        sizes=tuple(rows), seed=seed, rounding=rounding,
    )


@dataclass(frozen=True)
class AugSelection:
    """Grid-search outcome for one (generator, learner) pair."""

    generator: str
    learner: str
    n_opt: int
    grid: Tuple[Tuple[int, float, float], ...]   # (size, auc, ici)

    def metrics_at(self, size: int) -> Tuple[float, float]:
        for s, a, i in self.grid:
            if s == size:
                return a, i
        raise KeyError(size)


def select_best(grid: Sequence[Tuple[int, float, float]]) -> int:
    """Highest AUC wins; ties break to lower ICI, then to the smaller size."""
    ranked = sorted(grid, key=lambda row: (-row[1], row[2], row[0]))
    return ranked[0][0]


def make_fold_augmentor(kind: str, m: int, seed: int,
                        gen_cache: Optional[Dict[int, Generator]] = None,
                        **fit_kwargs):
    """Augmentor for nested_cv: fits the generator on each fold's imputed
    training partition (cached across sizes) and samples m rows."""
    cache = gen_cache if gen_cache is not None else {}

    def augmentor(imp_train: ImputedTable, fold: int) -> ImputedTable:
        if fold not in cache:
            cache[fold] = fit_generator(
                kind, imp_train, seed=derive_seed(seed, "fold-gen", fold), **fit_kwargs
            )
        return sample(cache[fold], m, seed=derive_seed(seed, "fold-sample", fold, m))

    return augmentor


def augment_search(
    cohort: Cohort,
    generator_kind: str,
    spec_template: LearnerSpec,
    space: HyperSpace,
    schedule: Union[AugmentationSchedule, Sequence[int]],
    plan: FoldPlan,
    seed: int = 0,
    target: Optional[str] = None,
    size_cap: Optional[int] = None,
    init_points: int = DEFAULT_INIT_POINTS,
    iters: int = DEFAULT_ITERS,
    k_inner: int = DEFAULT_INNER_FOLDS,
    impute_max_iters: int = 5,
    impute_cache: Optional[dict] = None,
    generator_kwargs: Optional[dict] = None,
) -> AugSelection:
    if isinstance(schedule, AugmentationSchedule):
        sizes = schedule.all_sizes()
    else:
        sizes = tuple(sorted(set(int(s) for s in schedule)))
    if not sizes:
        raise CohortError("augmentation grid is empty")
    if size_cap is None:
        size_cap = DEFAULT_SIZE_CAP_FACTOR * cohort.n_rows
    kept = tuple(s for s in sizes if s <= size_cap)
    skipped = tuple(s for s in sizes if s > size_cap)
    if skipped:
        warnings.warn(
            f"skipping {len(skipped)} grid sizes above cap {size_cap}: {skipped}",
            RuntimeWarning,
        )
    if not kept:
        raise CohortError("no grid sizes under the size cap")

    if impute_cache is None:
        impute_cache = {}
    gen_cache: Dict[int, Generator] = {}
    grid = []
    for size in kept:
        augmentor = make_fold_augmentor(
            generator_kind, size, seed, gen_cache, **(generator_kwargs or {})
        )
        metrics = nested_cv(
            cohort, spec_template, space, plan, seed=seed,
            augmentor=augmentor, target=target,
            init_points=init_points, iters=iters, k_inner=k_inner,
            impute_max_iters=impute_max_iters, impute_cache=impute_cache,
        )
        grid.append((size, metrics.auc, metrics.ici))

    return AugSelection(
        generator=generator_kind,
        learner=spec_template.algorithm,
        n_opt=select_best(grid),
        grid=tuple(grid),
    )


@dataclass(frozen=True)
class AugmentedDataset:
    """The final training table: imputed originals plus synthetic rows."""

    n0: int
    n_prime: int
    table: ImputedTable
    generator: str
    origin_synthetic: np.ndarray = field(compare=False)   # bool per row

    @property
    def n_total(self) -> int:
        return self.n0 + self.n_prime


def make_final_augmented(cohort_full: Cohort, generator_kind: str, n_opt: int,
                         seed: int = 0, impute_max_iters: int = 5,
                         generator_kwargs: Optional[dict] = None,
                         imputed: Optional[ImputedTable] = None) -> AugmentedDataset:
    """Impute the full cohort, fit the generator on it, append n_opt rows.

    A pre-imputed table may be supplied to share the completion step with
    other pipeline stages.
    """
    if n_opt < 0:
        raise CohortError("n_opt must be >= 0")
    if imputed is None:
        imputed = fit_impute(cohort_full, max_iters=impute_max_iters,
                             seed=derive_seed(seed, "final-impute"))
    if n_opt == 0:
        return AugmentedDataset(
            n0=imputed.n_rows, n_prime=0, table=imputed,
            generator=generator_kind,
            origin_synthetic=np.zeros(imputed.n_rows, dtype=bool),
        )
    gen = fit_generator(generator_kind, imputed,
                        seed=derive_seed(seed, "final-gen"),
                        **(generator_kwargs or {}))
    synth = sample(gen, n_opt, seed=derive_seed(seed, "final-sample"))
    combined = concat_tables(imputed, synth)
    origin = np.zeros(combined.n_rows, dtype=bool)
    origin[imputed.n_rows:] = True
    return AugmentedDataset(
        n0=imputed.n_rows, n_prime=n_opt, table=combined,
        generator=generator_kind, origin_synthetic=origin,
    )
