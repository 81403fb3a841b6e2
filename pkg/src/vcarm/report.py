"""Pipeline orchestration, run configuration, artifacts, and report tables.

`run_pipeline` executes, per learner and generator: baseline nested CV, the
augmentation-size grid search, final (augmented) model fitting, and
counterfactual odds-ratio estimation on the treated arm, then writes
comparison rows shaped like the published tables along with every
intermediate artifact. All sub-seeds derive from the master seed by stable
hashing, so reruns are byte-identical; fold imputations and the full-cohort
completion are keyed only by stage and fold so they can be shared across
learners and generators.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ._seeding import derive_seed
from .augment import (
    AugmentationSchedule,
    augment_search,
    build_schedule,
    make_final_augmented,
)
from .cohort import Cohort, CohortError, CohortSchema, ColumnSpec, \
    load_cohort, split_folds
from .crossval import nested_cv
from .effect import EffectEstimate, bootstrap_ci
from .impute import ImputedTable, complete_table, fit_impute
from .learners import LearnerSpec, fit
from .metrics import Metrics
from .tune import bayes_opt, default_space, inner_cv_objective


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScheduleConfig:
    mu: float = 1.5
    sigma: float = 0.005
    draws: int = 1          # desk-scale default; the full design uses 10
    sizes: int = 12         # and 23 sizes
    rounding: str = "ceil"


@dataclass(frozen=True)
class TuningConfig:
    init_points: int = 10
    iters: int = 25
    k_inner: int = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything a reproducible pipeline run needs."""

    schema: CohortSchema
    data_csv: str
    master_seed: int
    out_dir: str
    outcome: Optional[str] = None          # default: schema's primary outcome
    control_level: Optional[str] = None    # default: first treatment category
    learners: Tuple[str, ...] = ("logistic",)
    generators: Tuple[str, ...] = ()
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    k_folds: int = 5
    bootstrap_b: int = 1000
    alpha: float = 0.05
    jobs: int = 1
    size_cap_factor: int = 20
    impute_max_iters: int = 5
    virtual_outcomes: str = "expected"   # "sampled" draws Bernoulli virtual arms
    bootstrap_refit: bool = False        # refit the model per replicate (expensive;
                                         # propagates training-side uncertainty)
    reference_or: Optional[Tuple[float, float, float]] = None  # (or, lo, hi)

    def __post_init__(self):
        if self.master_seed is None:
            raise CohortError("master seed is required (reproducibility)")
        target = self.outcome or self.schema.primary_outcome
        if target is None:
            raise CohortError("no outcome column designated")
        self.schema.index_of(target)
        if self.schema.treatment_col is None:
            raise CohortError("run config needs a treatment column in the schema")


def schema_from_dict(raw: Dict) -> CohortSchema:
    cols = tuple(
        ColumnSpec(
            name=c["name"], kind=c["kind"],
            categories=tuple(c.get("categories", ())),
            units=c.get("units", ""),
        )
        for c in raw["columns"]
    )
    return CohortSchema(
        columns=cols,
        outcome_cols=tuple(raw.get("outcome_cols", ())),
        treatment_col=raw.get("treatment_col"),
    )


def load_run_config(path, **overrides) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base = Path(path).parent
    data_csv = raw["data_csv"]
    if not Path(data_csv).is_absolute():
        data_csv = str(base / data_csv)
    ref = raw.get("reference_or")
    cfg = dict(
        schema=schema_from_dict(raw["schema"]),
        data_csv=data_csv,
        master_seed=raw["master_seed"],
        out_dir=raw.get("out_dir", "results"),
        outcome=raw.get("outcome"),
        control_level=raw.get("control_level"),
        learners=tuple(raw.get("learners", ("logistic",))),
        generators=tuple(raw.get("generators", ())),
        schedule=ScheduleConfig(**raw.get("schedule", {})),
        tuning=TuningConfig(**raw.get("tuning", {})),
        k_folds=raw.get("k_folds", 5),
        bootstrap_b=raw.get("bootstrap_b", 1000),
        alpha=raw.get("alpha", 0.05),
        jobs=raw.get("jobs", 1),
        size_cap_factor=raw.get("size_cap_factor", 20),
        impute_max_iters=raw.get("impute_max_iters", 5),
        virtual_outcomes=raw.get("virtual_outcomes", "expected"),
        bootstrap_refit=raw.get("bootstrap_refit", False),
        reference_or=tuple(ref) if ref else None,
    )
    cfg.update(overrides)
    return RunConfig(**cfg)


@dataclass(frozen=True)
class ReportRow:
    """One comparison line: a learner under one generator (or none)."""

    learner: str
    generator: Optional[str]
    baseline_auc: float
    baseline_ici: float
    augmented_auc: Optional[float] = None
    augmented_ici: Optional[float] = None
    reference_or: Optional[Tuple[float, float, float]] = None
    baseline_or: Optional[Tuple[float, float, float]] = None
    augmented_or: Optional[Tuple[float, float, float]] = None


EMPTY_CELL = "—"   # em dash placeholder for absent cells
REPORT_HEADER = (
    "Learner", "Generator", "Baseline AUC/ICI", "Augmented AUC/ICI",
    "Original OR", "Baseline OR", "Augmented OR",
)


def format_metric_cell(auc_value: Optional[float], ici_value: Optional[float]) -> str:
    if auc_value is None or ici_value is None:
        return EMPTY_CELL
    return f"{auc_value:.2f}/{ici_value:.2f}"


def format_or_cell(triple: Optional[Tuple[float, float, float]]) -> str:
    if triple is None:
        return EMPTY_CELL
    point, lo, hi = triple
    return f"{point:.1f} ({lo:.1f}, {hi:.1f})"


def row_cells(row: ReportRow) -> Tuple[str, ...]:
    return (
        row.learner,
        row.generator if row.generator else EMPTY_CELL,
        format_metric_cell(row.baseline_auc, row.baseline_ici),
        format_metric_cell(row.augmented_auc, row.augmented_ici),
        format_or_cell(row.reference_or),
        format_or_cell(row.baseline_or),
        format_or_cell(row.augmented_or),
    )


def emit_table(rows, fmt: str, path) -> Path:
    """Write the comparison table as csv, markdown, or json."""
    if not rows:
        raise PipelineError("no report rows to emit")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_HEADER)
            for row in rows:
                writer.writerow(row_cells(row))
    elif fmt == "markdown":
        lines = ["| " + " | ".join(REPORT_HEADER) + " |",
                 "|" + "|".join([" --- "] * len(REPORT_HEADER)) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(row_cells(row)) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        payload = [
            {"cells": dict(zip(REPORT_HEADER, row_cells(row))),
             "values": asdict(row)}
            for row in rows
        ]
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                        encoding="utf-8")
    else:
        raise PipelineError(f"unknown report format {fmt!r}")
    return path


def split_arms(cohort: Cohort, control_level: Optional[str] = None
               ) -> Tuple[Cohort, Cohort]:
    """Control rows (treatment column dropped) and treated rows."""
    schema = cohort.schema
    if schema.treatment_col is None:
        raise CohortError("cohort has no treatment column")
    spec = schema.column(schema.treatment_col)
    level = control_level if control_level is not None else spec.categories[0]
    try:
        control_idx = spec.categories.index(level)
    except ValueError:
        raise CohortError(
            f"control level {level!r} not among {spec.categories}"
        ) from None
    t = cohort.column_values(schema.treatment_col)
    t_miss = cohort.column_mask(schema.treatment_col)
    if t_miss.any():
        raise CohortError("treatment column has missing cells")
    control = cohort.select_rows(np.flatnonzero(t == control_idx))
    treated = cohort.select_rows(np.flatnonzero(t != control_idx))
    return control.drop_columns([schema.treatment_col]), treated


def prepare_treated(treated: Cohort, target: str, seed: int,
                    impute_max_iters: int = 5) -> Cohort:
    """Impute the treated arm's predictor columns once, leaving outcomes raw."""
    schema = treated.schema
    drop = list(schema.outcome_cols)
    if schema.treatment_col:
        drop.append(schema.treatment_col)
    predictors = treated.drop_columns(drop)
    if not predictors.mask.any():
        return treated
    table = fit_impute(predictors, max_iters=impute_max_iters,
                       seed=derive_seed(seed, "treated-impute"))
    values = treated.values.copy()
    mask = treated.mask.copy()
    for j, col in enumerate(predictors.schema.columns):
        full_j = schema.index_of(col.name)
        values[:, full_j] = table.values[:, j]
        mask[:, full_j] = False
    return Cohort(schema, values, mask)


def _tune_and_fit(learner: str, table: ImputedTable, target: str,
                  tuning: TuningConfig, seed: int):
    spec = LearnerSpec(learner)
    objective = inner_cv_objective(spec, table, target, k_inner=tuning.k_inner,
                                   seed=derive_seed(seed, "final-inner"))
    result = bayes_opt(default_space(learner), objective,
                       init_points=tuning.init_points, iters=tuning.iters,
                       seed=derive_seed(seed, "final-bo"))
    model = fit(LearnerSpec(learner, result.best_params), table, target,
                seed=derive_seed(seed, "final-fit"))
    return model, result


def _make_refit(learner: str, tuned_params: Dict, table: ImputedTable,
                target: str, seed: int):
    """Per-replicate model refits on resampled training rows, tuned
    hyperparameters held fixed."""
    def refit(replicate: int):
        rng = np.random.default_rng(derive_seed(seed, "refit-rows", replicate))
        rows = rng.integers(0, table.n_rows, table.n_rows)
        boot = complete_table(table.cohort.select_rows(rows))
        return fit(LearnerSpec(learner, tuned_params), boot, target,
                   seed=derive_seed(seed, "refit-fit", replicate))
    return refit


def _learner_block(config: RunConfig, learner: str, control: Cohort,
                   treated_prep: Cohort, plan, target: str,
                   schedule: AugmentationSchedule,
                   impute_cache: Optional[dict] = None) -> Dict:
    """Baseline CV + effect, then one grid search + effect per generator."""
    seed = config.master_seed
    cv_seed = derive_seed(seed, "cv")
    space = default_space(learner)
    spec = LearnerSpec(learner)
    cache = impute_cache if impute_cache is not None else {}
    tuning = config.tuning

    block: Dict = {"learner": learner}
    baseline = nested_cv(
        control, spec, space, plan, seed=cv_seed, target=target,
        init_points=tuning.init_points, iters=tuning.iters,
        k_inner=tuning.k_inner, impute_max_iters=config.impute_max_iters,
        impute_cache=cache,
    )
    block["baseline_metrics"] = baseline

    if ("full",) in cache:
        full_imputed = cache[("full",)]
    else:
        full_imputed = fit_impute(control, max_iters=config.impute_max_iters,
                                  seed=derive_seed(seed, "full-impute"))
        cache[("full",)] = full_imputed

    base_model, base_tune = _tune_and_fit(
        learner, full_imputed, target, tuning, derive_seed(seed, "base", learner)
    )
    block["baseline_tune"] = base_tune.best_params
    base_refit = None
    if config.bootstrap_refit:
        base_refit = _make_refit(learner, base_tune.best_params, full_imputed,
                                 target, derive_seed(seed, "base", learner))
    block["baseline_effect"] = bootstrap_ci(
        base_model, treated_prep, target, B=config.bootstrap_b,
        alpha=config.alpha, seed=derive_seed(seed, "boot"),
        impute_max_iters=config.impute_max_iters,
        virtual_outcomes=config.virtual_outcomes, refit=base_refit,
    )

    block["generators"] = {}
    for gen in config.generators:
        selection = augment_search(
            control, gen, spec, space, schedule, plan, seed=cv_seed,
            target=target, size_cap=config.size_cap_factor * control.n_rows,
            init_points=tuning.init_points, iters=tuning.iters,
            k_inner=tuning.k_inner, impute_max_iters=config.impute_max_iters,
            impute_cache=cache,
        )
        dataset = make_final_augmented(
            control, gen, selection.n_opt,
            seed=derive_seed(seed, "final-aug", gen),
            impute_max_iters=config.impute_max_iters, imputed=full_imputed,
        )
        aug_model, aug_tune = _tune_and_fit(
            learner, dataset.table, target, tuning,
            derive_seed(seed, "aug", learner, gen),
        )
        aug_refit = None
        if config.bootstrap_refit:
            aug_refit = _make_refit(learner, aug_tune.best_params, dataset.table,
                                    target, derive_seed(seed, "aug", learner, gen))
        effect = bootstrap_ci(
            aug_model, treated_prep, target, B=config.bootstrap_b,
            alpha=config.alpha, seed=derive_seed(seed, "boot"),
            impute_max_iters=config.impute_max_iters,
            virtual_outcomes=config.virtual_outcomes, refit=aug_refit,
        )
        block["generators"][gen] = {
            "selection": selection,
            "n_opt": selection.n_opt,
            "augmented_effect": effect,
            "augmented_tune": aug_tune.best_params,
        }
    return block


def _grid_csv_rows(learner: str, gen: str, schedule: AugmentationSchedule,
                   selection) -> list:
    by_size = {size: (a, i) for size, a, i in selection.grid}
    rows = []
    for draw_idx, sizes in enumerate(schedule.sizes):
        for i, size in enumerate(sizes, start=1):
            if size in by_size:
                a, c = by_size[size]
                rows.append([gen, learner, draw_idx, i, size,
                             f"{a:.6f}", f"{c:.6f}"])
    return rows


def _metrics_payload(metrics: Metrics) -> Dict:
    return {"auc": metrics.auc, "ici": metrics.ici,
            "folds": [{"auc": a, "ici": i} for a, i in metrics.fold_values]}


def run_pipeline(config: RunConfig) -> Dict:
    """Execute the full comparison and write all artifacts to out_dir.

    Returns a manifest dict (also written to manifest.json). Any stage
    failure aborts with the stage name, the master seed, and the manifest of
    artifacts completed so far.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = config.outcome or config.schema.primary_outcome
    seed = config.master_seed
    artifacts: list = []
    manifest = {"master_seed": seed, "artifacts": artifacts, "status": "running"}

    def fail(stage, exc):
        manifest["status"] = f"failed at stage {stage}"
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        raise PipelineError(
            f"stage {stage} failed (seed {seed}): {exc}"
        ) from exc

    try:
        cohort = load_cohort(config.data_csv, config.schema)
        control, treated = split_arms(cohort, config.control_level)
        plan = split_folds(control, config.k_folds,
                           seed=derive_seed(seed, "folds"), stratify_on=target)
        treated_prep = prepare_treated(treated, target, derive_seed(seed, "boot"),
                                       config.impute_max_iters)
        schedule = build_schedule(
            mu=config.schedule.mu, sigma=config.schedule.sigma,
            n_draws=config.schedule.draws, n_sizes=config.schedule.sizes,
            seed=derive_seed(seed, "schedule"), rounding=config.schedule.rounding,
        ) if config.generators else None
    except Exception as exc:
        fail("setup", exc)

    blocks = []
    try:
        if config.jobs > 1 and len(config.learners) > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                futures = [
                    pool.submit(_learner_block, config, learner, control,
                                treated_prep, plan, target, schedule)
                    for learner in config.learners
                ]
                blocks = [f.result() for f in futures]
        else:
            cache: dict = {}
            for learner in config.learners:
                blocks.append(_learner_block(config, learner, control,
                                             treated_prep, plan, target,
                                             schedule, impute_cache=cache))
    except Exception as exc:
        fail("modeling", exc)

    try:
        rows = []
        effects = []
        fold_metrics = {}
        grid_rows = []
        for block in blocks:
            learner = block["learner"]
            base: Metrics = block["baseline_metrics"]
            base_eff: EffectEstimate = block["baseline_effect"]
            fold_metrics[learner] = {"baseline": _metrics_payload(base)}
            effects.append(base_eff.to_record(
                outcome=target, learner=learner, generator=None, kind="baseline"))
            if not config.generators:
                rows.append(ReportRow(
                    learner=learner, generator=None,
                    baseline_auc=base.auc, baseline_ici=base.ici,
                    reference_or=config.reference_or,
                    baseline_or=(base_eff.or_point, base_eff.ci_low, base_eff.ci_high),
                ))
            for gen in config.generators:
                info = block["generators"][gen]
                sel = info["selection"]
                aug_eff: EffectEstimate = info["augmented_effect"]
                aug_auc, aug_ici = sel.metrics_at(sel.n_opt)
                fold_metrics[learner][gen] = {
                    "n_opt": sel.n_opt,
                    "grid": [{"n_prime": s, "auc": a, "ici": i} for s, a, i in sel.grid],
                }
                grid_rows.extend(_grid_csv_rows(learner, gen, schedule, sel))
                effects.append(aug_eff.to_record(
                    outcome=target, learner=learner, generator=gen,
                    kind="augmented", n_opt=sel.n_opt))
                rows.append(ReportRow(
                    learner=learner, generator=gen,
                    baseline_auc=base.auc, baseline_ici=base.ici,
                    augmented_auc=aug_auc, augmented_ici=aug_ici,
                    reference_or=config.reference_or,
                    baseline_or=(base_eff.or_point, base_eff.ci_low, base_eff.ci_high),
                    augmented_or=(aug_eff.or_point, aug_eff.ci_low, aug_eff.ci_high),
                ))

        (out / "fold_metrics.json").write_text(
            json.dumps(fold_metrics, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        artifacts.append("fold_metrics.json")
        (out / "effects.json").write_text(
            json.dumps(effects, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        artifacts.append("effects.json")
        if grid_rows:
            with open(out / "augmentation_grid.csv", "w", encoding="utf-8",
                      newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["generator", "learner", "draw", "i",
                                 "n_prime", "auc", "ici"])
                writer.writerows(grid_rows)
            artifacts.append("augmentation_grid.csv")
        for fmt, name in (("csv", "report.csv"), ("markdown", "report.md"),
                          ("json", "report.json")):
            emit_table(rows, fmt, out / name)
            artifacts.append(name)
    except Exception as exc:
        fail("reporting", exc)

    manifest["status"] = "ok"
    manifest["n_rows"] = len(rows)
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
