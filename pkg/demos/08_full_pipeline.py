"""End-to-end run: simulate a cohort, execute the full comparison pipeline,
and print the emitted report table.

The same flow is available from the command line:
  vcarm simulate --n 550 --seed 0 --out cohort.csv
  vcarm run --config run.json

Run: python demos/08_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from vcarm import RunConfig, run_pipeline, write_cohort
from vcarm.report import ScheduleConfig, TuningConfig
from vcarm.simlab import (
    CategoricalMarginal,
    MissingSpec,
    NumericMarginal,
    OutcomeModel,
    SimCohortConfig,
    TreatmentModel,
    simulate_cohort,
)

sim = SimCohortConfig(
    predictors=(
        NumericMarginal("biomarker", 10.0, 3.0),
        NumericMarginal("activity", 6.0, 2.0),
        CategoricalMarginal("stage", ("I", "II"), (0.5, 0.5)),
    ),
    outcomes=(OutcomeModel("remission", 0.2,
                           {"biomarker": 0.7, "activity": -0.5, "stage": 0.4}),),
    treatment=TreatmentModel("agent", -0.9),
    missingness={"activity": MissingSpec(0.1)},
)
cohort, _ = simulate_cohort(sim, 320, seed=0)

with tempfile.TemporaryDirectory() as tmp:
    data = Path(tmp) / "cohort.csv"
    write_cohort(cohort, data)
    config = RunConfig(
        schema=cohort.schema,
        data_csv=str(data),
        master_seed=42,
        out_dir=str(Path(tmp) / "results"),
        learners=("logistic", "gbt_leafwise"),
        generators=("bn",),
        schedule=ScheduleConfig(draws=1, sizes=4),
        tuning=TuningConfig(init_points=3, iters=3, k_inner=2),
        k_folds=5,
        bootstrap_b=500,
    )
    manifest = run_pipeline(config)
    print(f"status: {manifest['status']}, artifacts: {manifest['artifacts']}\n")
    print((Path(config.out_dir) / "report.md").read_text())
    effects = json.loads((Path(config.out_dir) / "effects.json").read_text())
    print("effect records:")
    for e in effects:
        print(f"  {e['learner']:13s} {e['kind']:9s} OR {e['or']:.2f} "
              f"({e['ci_low']:.2f}, {e['ci_high']:.2f})")
