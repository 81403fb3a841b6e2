"""Nested cross-validation: leakage-safe imputation, optional augmentation,
per-fold Bayesian tuning, and fold-averaged AUC/ICI.

Each outer fold imputes its training and testing partitions independently,
optionally appends generator-produced synthetic rows to the training side,
tunes hyperparameters by Bayesian optimization over inner folds of that
(augmented) training table, fits, and scores the untouched test fold. Test
rows whose outcome was originally missing are excluded from the metrics;
their features still participate in test-side imputation.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass
from typing import Callable, Dict, Optional


from ._seeding import derive_seed
from .cohort import Cohort, FoldPlan
from .impute import ImputedTable, concat_tables, fit_impute
from .learners import LearnerSpec, fit, predict_proba
from .metrics import Metrics, auc, ici
from .tune import (
    DEFAULT_INIT_POINTS,
    DEFAULT_INNER_FOLDS,
    DEFAULT_ITERS,
    HyperSpace,
    bayes_opt,
    inner_cv_objective,
)

Augmentor = Callable[[ImputedTable, int], ImputedTable]


class FoldError(RuntimeError):
    pass


@dataclass
class FoldDetail:
    """Per-fold audit record (hyperparameters, sizes, model signature)."""

    fold: int
    best_params: Dict[str, float]
    n_train: int
    n_synth: int
    model_signature: str
    auc: float
    ici: float


def _signature(model) -> str:
    return hashlib.sha256(pickle.dumps(model.inner)).hexdigest()[:16]


def nested_cv(
    cohort: Cohort,
    spec_template: LearnerSpec,
    space: HyperSpace,
    plan: FoldPlan,
    seed: int = 0,
    augmentor: Optional[Augmentor] = None,
    target: Optional[str] = None,
    init_points: int = DEFAULT_INIT_POINTS,
    iters: int = DEFAULT_ITERS,
    k_inner: int = DEFAULT_INNER_FOLDS,
    impute_max_iters: int = 5,
    impute_cache: Optional[dict] = None,
    details_out: Optional[list] = None,
) -> Metrics:
    if target is None:
        target = cohort.schema.primary_outcome
    if target is None:
        raise FoldError("no outcome column designated")
    t_idx = cohort.schema.index_of(target)

    fold_values = []
    for f in range(plan.k):
        try:
            train = cohort.select_rows(plan.train_rows(f))
            test = cohort.select_rows(plan.test_rows(f))

            if impute_cache is not None and ("train", f) in impute_cache:
                imp_train = impute_cache[("train", f)]
                imp_test = impute_cache[("test", f)]
            else:
                imp_train = fit_impute(train, max_iters=impute_max_iters,
                                       seed=derive_seed(seed, "impute-train", f))
                imp_test = fit_impute(test, max_iters=impute_max_iters,
                                      seed=derive_seed(seed, "impute-test", f))
                if impute_cache is not None:
                    impute_cache[("train", f)] = imp_train
                    impute_cache[("test", f)] = imp_test

            n_synth = 0
            train_table = imp_train
            if augmentor is not None:
                synth = augmentor(imp_train, f)
                n_synth = synth.n_rows
                if n_synth:
                    train_table = concat_tables(imp_train, synth)

            objective = inner_cv_objective(
                spec_template, train_table, target, k_inner=k_inner,
                seed=derive_seed(seed, "inner", f),
            )
            result = bayes_opt(space, objective, init_points=init_points,
                               iters=iters, seed=derive_seed(seed, "bo", f))
            merged = dict(spec_template.hyperparams)
            merged.update(result.best_params)
            best_spec = LearnerSpec(spec_template.algorithm, merged)
            model = fit(best_spec, train_table, target,
                        seed=derive_seed(seed, "fit", f))

            probs = predict_proba(model, imp_test)
            observed = ~test.mask[:, t_idx]
            labels = imp_test.values[observed, t_idx].astype(int)
            fold_auc = auc(probs[observed], labels)
            fold_ici = ici(probs[observed], labels)
            fold_values.append((fold_auc, fold_ici))
            if details_out is not None:
                details_out.append(FoldDetail(
                    fold=f, best_params=dict(result.best_params),
                    n_train=train_table.n_rows, n_synth=n_synth,
                    model_signature=_signature(model),
                    auc=fold_auc, ici=fold_ici,
                ))
        except Exception as exc:
            raise FoldError(f"outer fold {f}: {exc}") from exc

    return Metrics.from_folds(fold_values)
