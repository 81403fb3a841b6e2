"""The four outcome models plus Bayesian hyperparameter search.

Run: python demos/03_learners_and_tuning.py
"""

import numpy as np

from vcarm import (
    LearnerSpec,
    auc,
    bayes_opt,
    complete_table,
    default_space,
    fit,
    inner_cv_objective,
    predict_proba,
)
from vcarm.cohort import Cohort, CohortSchema, ColumnSpec

rng = np.random.default_rng(3)
n = 400
x0 = rng.normal(size=n)
x1 = rng.normal(size=n)
c0 = rng.integers(0, 3, n).astype(float)
logits = 1.2 * x0 - 0.8 * x1 + 0.9 * (c0 == 2)
y = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)

schema = CohortSchema(
    columns=(ColumnSpec("x0", "numeric"), ColumnSpec("x1", "numeric"),
             ColumnSpec("c0", "categorical", ("a", "b", "c")),
             ColumnSpec("y", "categorical", ("0", "1"))),
    outcome_cols=("y",),
)
values = np.column_stack([x0, x1, c0, y])
table = complete_table(Cohort(schema, values, np.zeros(values.shape, bool)))
labels = values[:, 3].astype(int)

print("training AUC with default hyperparameters:")
for algo in ("logistic", "random_forest", "gbt_leafwise", "gbt_depthwise"):
    spec = LearnerSpec(algo, {"num.trees": 200} if algo == "random_forest" else {})
    model = fit(spec, table, "y", seed=4)
    print(f"  {algo:15s} {auc(predict_proba(model, table), labels):.3f}")

print("\nBayesian optimization of the leaf-wise booster (3 inner folds):")
objective = inner_cv_objective(LearnerSpec("gbt_leafwise"), table, "y",
                               k_inner=3, seed=5)
result = bayes_opt(default_space("gbt_leafwise"), objective,
                   init_points=6, iters=10, seed=6)
print(f"  best inner-CV AUC {result.best_value:.3f} at")
for name, value in sorted(result.best_params.items()):
    print(f"    {name} = {value:.3f}")
running = np.maximum.accumulate([s for _, s in result.log])
print("  best-so-far trace:", " ".join(f"{v:.3f}" for v in running))
