"""vcarm: virtual control arms from counterfactual outcome models.

Train outcome models on a control cohort (optionally augmented with
synthetic records), predict counterfactual outcomes for a treatment arm,
and estimate treatment effects as odds ratios with bootstrap confidence
intervals. A built-in cohort simulator with known ground truth backs the
test suite.
"""

from .augment import (
    AugmentationSchedule,
    AugmentedDataset,
    AugSelection,
    augment_search,
    build_schedule,
    make_final_augmented,
)
from .cohort import (
    CATEGORICAL,
    NUMERIC,
    Cohort,
    CohortError,
    CohortSchema,
    ColumnSpec,
    FoldPlan,
    load_cohort,
    split_folds,
    write_cohort,
)
from .crossval import nested_cv
from .effect import (
    EffectEstimate,
    EffectError,
    MatchedSet,
    bootstrap_ci,
    counterfactual_predict,
    odds_ratio,
    psm_match,
)
from .impute import ImputedTable, complete_table, concat_tables, fit_impute
from .learners import (
    LearnerSpec,
    TrainedModel,
    fit,
    load_model,
    predict_proba,
    save_model,
)
from .metrics import Metrics, auc, ici
from .report import (
    ReportRow,
    RunConfig,
    emit_table,
    load_run_config,
    run_pipeline,
    split_arms,
)
from .simlab import (
    SimCohortConfig,
    cidscann_like,
    load_sim_config,
    simulate_cohort,
    true_marginal_or,
)
from .syngen import Generator, fit_generator, from_external_csv, sample
from .tune import HyperSpace, TuneResult, bayes_opt, default_space, inner_cv_objective

__all__ = [
    "AugmentationSchedule", "AugmentedDataset", "AugSelection",
    "augment_search", "build_schedule", "make_final_augmented",
    "CATEGORICAL", "NUMERIC", "Cohort", "CohortError", "CohortSchema",
    "ColumnSpec", "FoldPlan", "load_cohort", "split_folds", "write_cohort",
    "nested_cv",
    "EffectEstimate", "EffectError", "MatchedSet", "bootstrap_ci",
    "counterfactual_predict", "odds_ratio", "psm_match",
    "ImputedTable", "complete_table", "concat_tables", "fit_impute",
    "LearnerSpec", "TrainedModel", "fit", "load_model", "predict_proba",
    "save_model",
    "Metrics", "auc", "ici",
    "ReportRow", "RunConfig", "emit_table", "load_run_config",
    "run_pipeline", "split_arms",
    "SimCohortConfig", "cidscann_like", "load_sim_config", "simulate_cohort",
    "true_marginal_or",
    "Generator", "fit_generator", "from_external_csv", "sample",
    "HyperSpace", "TuneResult", "bayes_opt", "default_space",
    "inner_cv_objective",
]

__version__ = "0.1.0"
