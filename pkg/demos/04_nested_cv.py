"""Leakage-safe nested cross-validation on a simulated cohort.

Each outer fold imputes its training and testing partitions independently,
tunes by Bayesian optimization over inner folds, and scores the untouched
test fold.

Run: python demos/04_nested_cv.py
"""

from vcarm import LearnerSpec, default_space, nested_cv, split_folds
from vcarm.simlab import (
    CategoricalMarginal,
    MissingSpec,
    NumericMarginal,
    OutcomeModel,
    SimCohortConfig,
    TreatmentModel,
    simulate_cohort,
)

config = SimCohortConfig(
    predictors=(
        NumericMarginal("biomarker", 10.0, 3.0),
        NumericMarginal("activity", 6.0, 2.0),
        CategoricalMarginal("stage", ("I", "II", "III"), (0.3, 0.4, 0.3)),
    ),
    outcomes=(OutcomeModel("remission", 0.2,
                           {"biomarker": 0.8, "activity": -0.6, "stage": 0.3}),),
    treatment=TreatmentModel("agent", -0.8),
    missingness={"biomarker": MissingSpec(0.15), "activity": MissingSpec(0.1)},
)

cohort, _ = simulate_cohort(config, 300, seed=0)
control = cohort.drop_columns(["agent"])
plan = split_folds(control, 5, seed=1)

metrics = nested_cv(
    control, LearnerSpec("logistic"), default_space("logistic"), plan,
    seed=2, init_points=4, iters=4, k_inner=3,
)
print("per-fold metrics:")
for f, (a, i) in enumerate(metrics.fold_values):
    print(f"  fold {f}: AUC {a:.3f}  ICI {i:.3f}")
print(f"cross-validated AUC {metrics.auc:.3f}, ICI {metrics.ici:.3f}")
