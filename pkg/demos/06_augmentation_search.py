"""The geometric synthetic-size schedule and the augmentation grid search.

Sizes follow ceil(b**(i+4)) with b drawn near 1.5; each candidate size is
scored by nested cross-validation with the generator refitted per fold, and
the best size is carried into the final augmented training set.

Run: python demos/06_augmentation_search.py
"""

from vcarm import (
    LearnerSpec,
    augment_search,
    build_schedule,
    default_space,
    make_final_augmented,
    split_folds,
)
from vcarm.simlab import (
    CategoricalMarginal,
    NumericMarginal,
    OutcomeModel,
    SimCohortConfig,
    TreatmentModel,
    simulate_cohort,
)

schedule = build_schedule(mu=1.5, sigma=0.005, n_draws=2, n_sizes=8, seed=0)
print("drawn multipliers:", [f"{b:.4f}" for b in schedule.b_values])
print("size grid:", schedule.all_sizes())

config = SimCohortConfig(
    predictors=(
        NumericMarginal("biomarker", 0.0, 1.0),
        CategoricalMarginal("stage", ("I", "II"), (0.5, 0.5)),
    ),
    outcomes=(OutcomeModel("remission", 0.1, {"biomarker": 1.0, "stage": 0.5}),),
    treatment=TreatmentModel("agent", -0.9),
)
cohort, _ = simulate_cohort(config, 220, seed=1)
control = cohort.drop_columns(["agent"])
plan = split_folds(control, 5, seed=2)

selection = augment_search(
    control, "bn", LearnerSpec("logistic"), default_space("logistic"),
    schedule, plan, seed=3, init_points=3, iters=2, k_inner=2,
)
print("\ngrid results (synthetic size -> AUC / ICI):")
for size, a, i in selection.grid:
    marker = "  <- selected" if size == selection.n_opt else ""
    print(f"  {size:4d} -> {a:.3f} / {i:.3f}{marker}")

final = make_final_augmented(control, "bn", selection.n_opt, seed=4)
print(f"\nfinal augmented set: {final.n0} real + {final.n_prime} synthetic "
      f"= {final.n_total} rows")
