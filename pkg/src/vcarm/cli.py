"""Command-line entry points: each pipeline stage is independently invocable.

Subcommands: simulate, impute, cv, augment-search, estimate, psm, sample,
report, run. Every command takes a JSON config carrying the schema and data
path; --seed, --jobs, and --out override the config. Exit code 0 on
success, 2 on failure with a stage-tagged message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from ._seeding import derive_seed
from .augment import augment_search, build_schedule, make_final_augmented
from .cohort import CohortError, load_cohort, split_folds, write_cohort
from .crossval import nested_cv
from .effect import EffectError, bootstrap_ci, psm_match
from .impute import fit_impute
from .learners import LearnerSpec, fit
from .metrics import MetricError
from .report import (
    PipelineError,
    ReportRow,
    emit_table,
    load_run_config,
    prepare_treated,
    run_pipeline,
    split_arms,
)
from .simlab import cidscann_like, load_sim_config, simulate_cohort, \
    write_potential_outcomes
from .syngen import fit_generator, sample
from .tune import TuneError, bayes_opt, default_space, inner_cv_objective


def _write_json(payload, path):
    text = json.dumps(payload, indent=1, sort_keys=True, default=str) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config(args, **overrides):
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "jobs", None):
        overrides["jobs"] = args.jobs
    return load_run_config(args.config, **overrides)


def cmd_simulate(args):
    cfg = cidscann_like() if args.sim_config is None else load_sim_config(args.sim_config)
    cohort, hidden = simulate_cohort(cfg, args.n, seed=args.seed or 0)
    write_cohort(cohort, args.out)
    if args.sidecar:
        write_potential_outcomes(hidden, args.sidecar)
    print(f"wrote {cohort.n_rows} rows x {cohort.n_cols} columns to {args.out}")


def cmd_impute(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    table = fit_impute(cohort, max_iters=config.impute_max_iters,
                       seed=derive_seed(config.master_seed, "cli-impute"))
    write_cohort(table.cohort, args.out)
    print(f"imputed {cohort.mask.sum()} cells in {table.iterations_run} iterations")


def cmd_cv(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    control, _ = split_arms(cohort, config.control_level)
    target = config.outcome or config.schema.primary_outcome
    plan = split_folds(control, config.k_folds,
                       seed=derive_seed(config.master_seed, "folds"),
                       stratify_on=target)
    metrics = nested_cv(
        control, LearnerSpec(args.learner), default_space(args.learner), plan,
        seed=derive_seed(config.master_seed, "cv"), target=target,
        init_points=config.tuning.init_points, iters=config.tuning.iters,
        k_inner=config.tuning.k_inner, impute_max_iters=config.impute_max_iters,
    )
    _write_json({"learner": args.learner, "auc": metrics.auc, "ici": metrics.ici,
                 "folds": [{"auc": a, "ici": i} for a, i in metrics.fold_values]},
                args.out)


def cmd_augment_search(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    control, _ = split_arms(cohort, config.control_level)
    target = config.outcome or config.schema.primary_outcome
    plan = split_folds(control, config.k_folds,
                       seed=derive_seed(config.master_seed, "folds"),
                       stratify_on=target)
    schedule = build_schedule(
        mu=config.schedule.mu, sigma=config.schedule.sigma,
        n_draws=config.schedule.draws, n_sizes=config.schedule.sizes,
        seed=derive_seed(config.master_seed, "schedule"),
        rounding=config.schedule.rounding,
    )
    selection = augment_search(
        control, args.generator, LearnerSpec(args.learner),
        default_space(args.learner), schedule, plan,
        seed=derive_seed(config.master_seed, "cv"), target=target,
        size_cap=config.size_cap_factor * control.n_rows,
        init_points=config.tuning.init_points, iters=config.tuning.iters,
        k_inner=config.tuning.k_inner, impute_max_iters=config.impute_max_iters,
    )
    _write_json({"generator": selection.generator, "learner": selection.learner,
                 "n_opt": selection.n_opt,
                 "grid": [{"n_prime": s, "auc": a, "ici": i}
                          for s, a, i in selection.grid]}, args.out)


def cmd_estimate(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    control, treated = split_arms(cohort, config.control_level)
    target = config.outcome or config.schema.primary_outcome
    seed = config.master_seed
    imputed = fit_impute(control, max_iters=config.impute_max_iters,
                         seed=derive_seed(seed, "full-impute"))
    if args.generator:
        if args.n_opt is None:
            raise PipelineError("--n-opt is required with --generator")
        dataset = make_final_augmented(
            control, args.generator, args.n_opt,
            seed=derive_seed(seed, "final-aug", args.generator), imputed=imputed)
        table = dataset.table
        kind = "augmented"
    else:
        table, kind = imputed, "baseline"
    spec = LearnerSpec(args.learner)
    objective = inner_cv_objective(spec, table, target,
                                   k_inner=config.tuning.k_inner,
                                   seed=derive_seed(seed, "final-inner"))
    result = bayes_opt(default_space(args.learner), objective,
                       init_points=config.tuning.init_points,
                       iters=config.tuning.iters,
                       seed=derive_seed(seed, "final-bo"))
    model = fit(LearnerSpec(args.learner, result.best_params), table, target,
                seed=derive_seed(seed, "final-fit"))
    treated_prep = prepare_treated(treated, target, derive_seed(seed, "boot"),
                                   config.impute_max_iters)
    estimate = bootstrap_ci(model, treated_prep, target, B=config.bootstrap_b,
                            alpha=config.alpha, seed=derive_seed(seed, "boot"))
    _write_json(estimate.to_record(outcome=target, learner=args.learner,
                                   generator=args.generator, kind=kind), args.out)


def cmd_psm(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    target = config.outcome or config.schema.primary_outcome
    complete = prepare_treated(cohort, target, derive_seed(config.master_seed, "psm"),
                               config.impute_max_iters)
    covariates = args.covariates.split(",")
    matched, estimate = psm_match(
        complete, covariates, caliper=args.caliper,
        seed=derive_seed(config.master_seed, "psm-match"),
        outcome=target, B=config.bootstrap_b, alpha=config.alpha,
    )
    _write_json({
        "n_pairs": len(matched.pairs),
        "n_treated": matched.n_treated,
        "caliper": matched.caliper,
        "balance": {k: {"smd_before": b, "smd_after": a}
                    for k, (b, a) in matched.balance.items()},
        "effect": estimate.to_record(outcome=target, method="psm"),
    }, args.out)


def cmd_sample(args):
    config = _config(args)
    cohort = load_cohort(config.data_csv, config.schema)
    control, _ = split_arms(cohort, config.control_level)
    imputed = fit_impute(control, max_iters=config.impute_max_iters,
                         seed=derive_seed(config.master_seed, "full-impute"))
    gen = fit_generator(args.generator, imputed,
                        seed=derive_seed(config.master_seed, "cli-gen"))
    table = sample(gen, args.m, seed=derive_seed(config.master_seed, "cli-sample"))
    write_cohort(table.cohort, args.out)
    print(f"wrote {args.m} synthetic rows to {args.out}")


def cmd_report(args):
    with open(args.rows, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    rows = []
    for item in raw:
        rows.append(ReportRow(
            learner=item["learner"],
            generator=item.get("generator"),
            baseline_auc=item["baseline_auc"],
            baseline_ici=item["baseline_ici"],
            augmented_auc=item.get("augmented_auc"),
            augmented_ici=item.get("augmented_ici"),
            reference_or=tuple(item["reference_or"]) if item.get("reference_or") else None,
            baseline_or=tuple(item["baseline_or"]) if item.get("baseline_or") else None,
            augmented_or=tuple(item["augmented_or"]) if item.get("augmented_or") else None,
        ))
    emit_table(rows, args.format, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")


def cmd_run(args):
    overrides = {}
    if args.out:
        overrides["out_dir"] = args.out
    config = _config(args, **overrides)
    manifest = run_pipeline(config)
    print(f"pipeline ok: {len(manifest['artifacts'])} artifacts in {config.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcarm",
        description="Virtual control arms: counterfactual models, synthetic "
                    "augmentation, and odds-ratio effect estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--jobs", type=int, default=None, help="concurrent jobs")

    p = sub.add_parser("simulate", help="draw a ground-truth cohort")
    p.add_argument("--sim-config", default=None,
                   help="simulator config JSON (default: packaged cidscann_like)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", default=None,
                   help="write hidden potential outcomes to this CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("impute", help="complete missing cells of the data file")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("cv", help="baseline nested cross-validation")
    common(p)
    p.add_argument("--learner", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("augment-search", help="synthetic-size grid search")
    common(p)
    p.add_argument("--learner", required=True)
    p.add_argument("--generator", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_augment_search)

    p = sub.add_parser("estimate", help="counterfactual odds ratio with bootstrap CI")
    common(p)
    p.add_argument("--learner", required=True)
    p.add_argument("--generator", default=None)
    p.add_argument("--n-opt", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("psm", help="propensity-score-matched comparator")
    common(p)
    p.add_argument("--covariates", required=True, help="comma-separated columns")
    p.add_argument("--caliper", type=float, default=0.2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_psm)

    p = sub.add_parser("sample", help="fit a generator and write synthetic rows")
    common(p)
    p.add_argument("--generator", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("report", help="format precomputed rows as a table")
    p.add_argument("--rows", required=True, help="JSON list of report rows")
    p.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline")
    common(p)
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CohortError, PipelineError, EffectError, TuneError, MetricError) as exc:
        print(f"vcarm {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
