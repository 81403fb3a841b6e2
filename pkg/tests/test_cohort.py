import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcarm.cohort import (
    Cohort,
    CohortError,
    CohortSchema,
    ColumnSpec,
    load_cohort,
    split_folds,
    write_cohort,
)


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestColumnSpec:
    def test_categorical_needs_two_labels(self):
        with pytest.raises(CohortError):
            ColumnSpec("c", "categorical", ("only",))

    def test_numeric_rejects_categories(self):
        with pytest.raises(CohortError):
            ColumnSpec("x", "numeric", ("a", "b"))

    def test_duplicate_schema_names_rejected(self):
        with pytest.raises(CohortError):
            CohortSchema(columns=(ColumnSpec("x", "numeric"), ColumnSpec("x", "numeric")))

    def test_outcome_must_be_binary(self):
        cols = (ColumnSpec("y", "categorical", ("a", "b", "c")),)
        with pytest.raises(CohortError):
            CohortSchema(columns=cols, outcome_cols=("y",))


class TestLoadCohort:
    def test_empty_cell_becomes_missing(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission\n"
                      "10,1.5,F,1\n"
                      "11,,M,0\n"
                      "12,2.5,F,1\n"
                      "13,3.5,M,0\n")
        cohort = load_cohort(p, toy_schema)
        expected = np.zeros((4, 4), dtype=bool)
        expected[1, 1] = True
        assert np.array_equal(cohort.mask, expected)
        assert cohort.values[0, 0] == 10.0
        assert cohort.values[0, 2] == 0.0  # "F" is category index 0

    def test_missing_header_column_named(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv", "Age,CRP,Remission\n10,1.5,1\n")
        with pytest.raises(CohortError, match="Sex"):
            load_cohort(p, toy_schema)

    def test_undeclared_category_label(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission\n10,1.5,F,Maybe\n")
        with pytest.raises(CohortError, match="Maybe"):
            load_cohort(p, toy_schema)

    def test_unparseable_numeric_has_position(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission\n10,1.5,F,1\nten,2,M,0\n")
        with pytest.raises(CohortError, match=r":3:.*Age"):
            load_cohort(p, toy_schema)

    def test_ragged_row(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission\n10,1.5,F\n")
        with pytest.raises(CohortError, match="ragged"):
            load_cohort(p, toy_schema)

    def test_unknown_column(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission,Extra\n10,1.5,F,1,9\n")
        with pytest.raises(CohortError, match="Extra"):
            load_cohort(p, toy_schema)

    def test_round_trip_identical(self, tmp_path, toy_schema):
        p = write_csv(tmp_path / "c.csv",
                      "Age,CRP,Sex,Remission\n"
                      "10.25,1.5,F,1\n"
                      "11,,M,\n"
                      ",2.5,F,1\n")
        first = load_cohort(p, toy_schema)
        out = tmp_path / "out.csv"
        write_cohort(first, out)
        second = load_cohort(out, toy_schema)
        assert np.array_equal(first.mask, second.mask)
        obs = ~first.mask
        assert np.array_equal(first.values[obs], second.values[obs])


class TestCohortInvariants:
    def test_mask_shape_checked(self, toy_schema):
        with pytest.raises(CohortError):
            Cohort(toy_schema, np.zeros((2, 4)), np.zeros((3, 4), dtype=bool))

    def test_category_index_out_of_range(self, toy_schema):
        values = np.array([[10.0, 1.0, 5.0, 0.0]])
        with pytest.raises(CohortError):
            Cohort(toy_schema, values, np.zeros((1, 4), dtype=bool))

    def test_non_finite_rejected(self, toy_schema):
        values = np.array([[np.inf, 1.0, 0.0, 0.0]])
        with pytest.raises(CohortError):
            Cohort(toy_schema, values, np.zeros((1, 4), dtype=bool))

    def test_immutable(self, toy_schema):
        cohort = Cohort(toy_schema, np.array([[10.0, 1.0, 0.0, 1.0]]),
                        np.zeros((1, 4), dtype=bool))
        with pytest.raises(ValueError):
            cohort.values[0, 0] = 99.0


def _schema():
    return CohortSchema(
        columns=(
            ColumnSpec("Age", "numeric"),
            ColumnSpec("CRP", "numeric"),
            ColumnSpec("Sex", "categorical", ("F", "M")),
            ColumnSpec("Remission", "categorical", ("0", "1")),
        ),
        outcome_cols=("Remission",),
    )


def balanced_cohort(n, schema, seed=0):
    rng = np.random.default_rng(seed)
    values = np.column_stack([
        rng.normal(10, 2, n),
        rng.normal(2, 1, n),
        rng.integers(0, 2, n).astype(float),
        np.tile([0.0, 1.0], n // 2 + 1)[:n],
    ])
    return Cohort(schema, values, np.zeros((n, 4), dtype=bool))


class TestSplitFolds:
    def test_even_split_sizes(self, toy_schema):
        cohort = balanced_cohort(10, toy_schema)
        plan = split_folds(cohort, 5, seed=1)
        sizes = np.bincount(plan.assignments, minlength=5)
        assert np.array_equal(sizes, [2, 2, 2, 2, 2])

    def test_stratified_event_counts(self, toy_schema):
        # 10 rows, 5 events, k=5: exactly one event per fold
        cohort = balanced_cohort(10, toy_schema)
        plan = split_folds(cohort, 5, seed=7)
        y = cohort.column_values("Remission")
        for f in range(5):
            assert y[plan.assignments == f].sum() == 1

    def test_deterministic(self, toy_schema):
        cohort = balanced_cohort(20, toy_schema)
        a = split_folds(cohort, 4, seed=42)
        b = split_folds(cohort, 4, seed=42)
        assert np.array_equal(a.assignments, b.assignments)

    def test_k_exceeds_rows(self, toy_schema):
        cohort = balanced_cohort(4, toy_schema)
        with pytest.raises(CohortError):
            split_folds(cohort, 5, seed=0)

    def test_outcome_entirely_missing(self, toy_schema):
        values = np.array([[10.0, 1.0, 0.0, 0.0]] * 6)
        mask = np.zeros((6, 4), dtype=bool)
        mask[:, 3] = True
        cohort = Cohort(toy_schema, values, mask)
        with pytest.raises(CohortError, match="entirely missing"):
            split_folds(cohort, 2, seed=0)

    @settings(max_examples=25, deadline=None)
    @given(k=st.integers(2, 17), seed=st.integers(0, 10_000))
    def test_partition_property(self, k, seed):
        cohort = balanced_cohort(17, _schema(), seed=3)
        plan = split_folds(cohort, k, seed=seed)
        assert len(plan.assignments) == 17
        sizes = np.bincount(plan.assignments, minlength=k)
        assert sizes.sum() == 17
        assert sizes.max() - sizes.min() <= 1

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_stratification_within_one_event(self, seed):
        cohort = balanced_cohort(30, _schema(), seed=5)
        k = 4
        plan = split_folds(cohort, k, seed=seed)
        y = cohort.column_values("Remission")
        global_rate = y.mean()
        for f in range(k):
            members = plan.assignments == f
            expected = global_rate * members.sum()
            assert abs(y[members].sum() - expected) < 1.0
