import numpy as np
import pytest

from vcarm._seeding import derive_seed
from vcarm.cohort import Cohort, CohortError, CohortSchema, ColumnSpec
from vcarm.impute import IMPUTE_MIN_BUCKET, concat_tables, fit_impute
from vcarm.trees import RandomForest

from conftest import make_mixed_cohort


def test_complete_cohort_is_identity():
    cohort = make_mixed_cohort(50, seed=1)
    table = fit_impute(cohort, seed=0)
    assert table.iterations_run == 0
    assert not table.cohort.mask.any()
    assert np.array_equal(table.values, cohort.values)


def test_observed_cells_preserved():
    cohort = make_mixed_cohort(120, seed=2, missing_rate=0.2)
    table = fit_impute(cohort, seed=3)
    obs = ~cohort.mask
    assert np.array_equal(table.values[obs], cohort.values[obs])
    assert not table.cohort.mask.any()


def test_single_missing_cell_matches_external_forest():
    # One missing numeric cell, one iteration: the filled value must equal
    # the prediction of the same forest fitted on the complete rows.
    cohort = make_mixed_cohort(80, seed=4)
    values = cohort.values.copy()
    mask = cohort.mask.copy()
    mask[10, 0] = True  # x0 of row 10
    cohort = Cohort(cohort.schema, values, mask)

    seed = 99
    table = fit_impute(cohort, max_iters=1, seed=seed)
    assert table.iterations_run == 1

    feats = [j for j in range(values.shape[1]) if j != 0]
    ncats = np.array([0, 0, 0, 2, 3, 2], dtype=np.int64)[feats]
    init = values.copy()
    init[10, 0] = values[~mask[:, 0], 0].mean()
    X = init[:, feats]
    rf = RandomForest(n_trees=100, task="regress", min_bucket=IMPUTE_MIN_BUCKET,
                      seed=derive_seed(seed, "impute", 1, "x0"))
    rf.fit(X[~mask[:, 0]], init[~mask[:, 0], 0], ncats)
    expected = rf.predict(X[mask[:, 0]])[0]
    assert table.values[10, 0] == pytest.approx(expected, abs=0)


def test_beats_mean_imputation_on_linear_data():
    rng = np.random.default_rng(7)
    n = 300
    z = rng.normal(size=n)
    X = np.column_stack([z + 0.3 * rng.normal(size=n) for _ in range(4)])
    schema = CohortSchema(columns=tuple(ColumnSpec(f"x{j}", "numeric") for j in range(4)))
    truth = Cohort(schema, X, np.zeros(X.shape, dtype=bool))

    mask = rng.random(X.shape) < 0.2
    mask[0] = False
    masked = Cohort(schema, X, mask)

    table = fit_impute(masked, seed=11)
    rf_err = np.sqrt(np.mean((table.values[mask] - truth.values[mask]) ** 2))

    mean_filled = X.copy()
    for j in range(4):
        mean_filled[mask[:, j], j] = X[~mask[:, j], j].mean()
    mean_err = np.sqrt(np.mean((mean_filled[mask] - truth.values[mask]) ** 2))
    assert rf_err < mean_err


def test_categorical_cells_get_valid_levels():
    cohort = make_mixed_cohort(150, seed=8, missing_rate=0.25)
    table = fit_impute(cohort, seed=9)
    for j, spec in enumerate(cohort.schema.columns):
        if spec.kind == "categorical":
            col = table.values[:, j]
            assert np.all((col >= 0) & (col < len(spec.categories)))
            assert np.all(col == np.round(col))


def test_deterministic_given_seed():
    cohort = make_mixed_cohort(100, seed=10, missing_rate=0.15)
    a = fit_impute(cohort, seed=21)
    b = fit_impute(cohort, seed=21)
    assert np.array_equal(a.values, b.values)
    assert a.iterations_run == b.iterations_run


def test_errors():
    cohort = make_mixed_cohort(10, seed=1)
    with pytest.raises(CohortError):
        fit_impute(cohort.select_rows(np.array([], dtype=int)), seed=0)

    mask = cohort.mask.copy()
    mask[:, 1] = True
    broken = Cohort(cohort.schema, cohort.values, mask)
    with pytest.raises(CohortError, match="x1"):
        fit_impute(broken, seed=0)


def test_concat_tables():
    a = fit_impute(make_mixed_cohort(10, seed=1), seed=0)
    b = fit_impute(make_mixed_cohort(6, seed=2), seed=0)
    both = concat_tables(a, b)
    assert both.n_rows == 16
    assert np.array_equal(both.values[:10], a.values)
    assert np.array_equal(both.values[10:], b.values)
