import numpy as np
import pytest

from vcarm.cohort import Cohort, CohortSchema, ColumnSpec


@pytest.fixture
def toy_schema():
    return CohortSchema(
        columns=(
            ColumnSpec("Age", "numeric"),
            ColumnSpec("CRP", "numeric"),
            ColumnSpec("Sex", "categorical", ("F", "M")),
            ColumnSpec("Remission", "categorical", ("0", "1")),
        ),
        outcome_cols=("Remission",),
    )


def make_mixed_cohort(n, seed=0, missing_rate=0.0, n_numeric=3, n_cat=2,
                      outcome_signal=1.0):
    """Synthetic mixed-type cohort with a logistic outcome for tests."""
    rng = np.random.default_rng(seed)
    cols = []
    values = []
    for j in range(n_numeric):
        cols.append(ColumnSpec(f"x{j}", "numeric"))
        values.append(rng.normal(size=n))
    for j in range(n_cat):
        k = 2 + j % 2
        cols.append(ColumnSpec(f"c{j}", "categorical", tuple(str(i) for i in range(k))))
        values.append(rng.integers(0, k, size=n).astype(float))
    X = np.column_stack(values)
    logits = outcome_signal * (X[:, 0] - 0.8 * X[:, 1] + 0.6 * (X[:, n_numeric] == 1))
    y = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)
    cols.append(ColumnSpec("y", "categorical", ("0", "1")))
    X = np.column_stack([X, y])
    mask = np.zeros(X.shape, dtype=bool)
    if missing_rate > 0:
        mask[:, :-1] = rng.random((n, X.shape[1] - 1)) < missing_rate
        # keep every column partially observed
        mask[0, :] = False
    schema = CohortSchema(columns=tuple(cols), outcome_cols=("y",))
    return Cohort(schema, X, mask)
