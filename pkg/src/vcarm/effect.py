"""Treatment-effect estimation from virtual controls, plus the
propensity-score-matched comparator.

The virtual-vs-observed odds ratio uses the expected-event construction: the
counterfactual arm contributes the sum of predicted event probabilities, the
observed arm its actual event count, and the ratio of the implied odds is the
point estimate. All sampling variance is then isolated in a patient-level
percentile bootstrap with fixed (not refitted) model predictions. Rows with
a missing observed outcome are dropped before estimation; outcomes are never
imputed on the estimation side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ._seeding import derive_seed
from .cohort import CATEGORICAL, Cohort
from .impute import complete_table, fit_impute
from .learners import TrainedModel, predict_proba
from .logistic import fit_logistic_table

MIN_BOOTSTRAP = 200
MAX_DEGENERATE_FRACTION = 0.10
DEFAULT_CALIPER = 0.2


class EffectError(ValueError):
    pass


@dataclass(frozen=True)
class EffectEstimate:
    """Odds ratio (control vs treatment) with a percentile bootstrap CI."""

    or_point: float
    ci_low: float
    ci_high: float
    alpha: float
    n_boot: int
    n_treated: int
    degenerate_replicates: int = 0

    def to_record(self, **context) -> Dict:
        rec = dict(context)
        rec.update({
            "or": self.or_point, "ci_low": self.ci_low, "ci_high": self.ci_high,
            "alpha": self.alpha, "n_boot": self.n_boot,
            "n_treated": self.n_treated,
            "degenerate_replicates": self.degenerate_replicates,
        })
        return rec


def counterfactual_predict(model: TrainedModel, treated: Cohort,
                           seed: int = 0, impute_max_iters: int = 5) -> np.ndarray:
    """Predicted control-therapy event probability for each treated patient.

    Outcome and treatment columns are dropped; remaining missing predictor
    cells are completed by imputing the treated cohort alone.
    """
    drop = list(treated.schema.outcome_cols)
    if treated.schema.treatment_col:
        drop.append(treated.schema.treatment_col)
    predictors = treated.drop_columns(drop) if drop else treated
    if predictors.n_rows == 0:
        return np.empty(0)
    if predictors.mask.any():
        table = fit_impute(predictors, max_iters=impute_max_iters,
                           seed=derive_seed(seed, "treated-impute"))
    else:
        table = complete_table(predictors)
    return predict_proba(model, table)


def odds_ratio(virtual_probs: Sequence[float], observed: Sequence[int]) -> float:
    """Expected-event odds of the virtual arm over the observed arm's odds."""
    probs = np.asarray(virtual_probs, dtype=float)
    obs = np.asarray(observed, dtype=float)
    n = len(obs)
    if n < 1 or len(probs) != n:
        raise EffectError("virtual and observed arms must be equal-length, n >= 1")
    events = obs.sum()
    if events == 0 or events == n:
        raise EffectError("observed arm is degenerate (all events or none)")
    expected = probs.sum()
    if expected <= 0 or expected >= n:
        raise EffectError("virtual arm has degenerate expected events")
    odds_virtual = expected / (n - expected)
    odds_observed = events / (n - events)
    return float(odds_virtual / odds_observed)


def bootstrap_ci(model: TrainedModel, treated: Cohort, target: str,
                 B: int = 1000, alpha: float = 0.05, seed: int = 0,
                 impute_max_iters: int = 5, virtual_outcomes: str = "expected",
                 refit=None) -> EffectEstimate:
    """Patient-resampling bootstrap of the virtual-vs-observed odds ratio.

    The point estimate is always the plug-in expected-event odds ratio on
    the full sample. `virtual_outcomes="sampled"` makes each replicate draw
    Bernoulli virtual outcomes instead of summing probabilities (a
    sensitivity mode). `refit`, when given, is called as refit(replicate)
    and must return a model to use for that replicate's predictions: an
    expensive opt-in that propagates training-side uncertainty.
    """
    if B < MIN_BOOTSTRAP:
        raise EffectError(f"B must be >= {MIN_BOOTSTRAP}")
    if virtual_outcomes not in ("expected", "sampled"):
        raise EffectError(f"unknown virtual-outcome mode {virtual_outcomes!r}")
    t_idx = treated.schema.index_of(target)
    keep = ~treated.mask[:, t_idx]
    kept = treated.select_rows(np.flatnonzero(keep))
    n = kept.n_rows
    if n < 2:
        raise EffectError("too few treated rows with observed outcomes")
    observed = kept.values[:, t_idx].astype(int)
    probs = counterfactual_predict(model, kept, seed=seed,
                                   impute_max_iters=impute_max_iters)

    point = odds_ratio(probs, observed)

    rng = np.random.default_rng(derive_seed(seed, "bootstrap"))
    idx = rng.integers(0, n, size=(B, n))
    if refit is not None:
        prob_rows = np.empty((B, n))
        for b in range(B):
            model_b = refit(b)
            prob_rows[b] = counterfactual_predict(
                model_b, kept, seed=seed, impute_max_iters=impute_max_iters)
        rep_probs = np.take_along_axis(prob_rows, idx, axis=1)
    else:
        rep_probs = probs[idx]
    events = observed[idx].sum(axis=1)
    if virtual_outcomes == "sampled":
        expected = (rng.random((B, n)) < rep_probs).sum(axis=1).astype(float)
    else:
        expected = rep_probs.sum(axis=1)
    good = (events > 0) & (events < n) & (expected > 0) & (expected < n)
    degenerate = int(B - good.sum())
    if degenerate > MAX_DEGENERATE_FRACTION * B:
        raise EffectError(
            f"{degenerate}/{B} bootstrap replicates degenerate; sample too small"
        )
    stats = (expected[good] / (n - expected[good])) / (events[good] / (n - events[good]))
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return EffectEstimate(
        or_point=point, ci_low=float(lo), ci_high=float(hi),
        alpha=alpha, n_boot=B, n_treated=n, degenerate_replicates=degenerate,
    )


@dataclass(frozen=True)
class MatchedSet:
    """1:1 matched pairs with covariate balance diagnostics."""

    pairs: Tuple[Tuple[int, int], ...]          # (treated row, control row)
    caliper: float
    balance: Dict[str, Tuple[float, float]]     # covariate -> (|SMD| pre, post)
    n_treated: int
    n_controls: int
    low_match_warning: bool = field(default=False)


def _smd(x_t: np.ndarray, x_c: np.ndarray) -> float:
    pooled = np.sqrt((x_t.var(ddof=1) + x_c.var(ddof=1)) / 2)
    if pooled < 1e-12:
        return 0.0
    return float((x_t.mean() - x_c.mean()) / pooled)


def _covariate_smd(values: np.ndarray, spec, t_rows, c_rows, j) -> float:
    if spec.kind == CATEGORICAL:
        worst = 0.0
        for level in range(len(spec.categories)):
            ind = (values[:, j] == level).astype(float)
            worst = max(worst, abs(_smd(ind[t_rows], ind[c_rows])))
        return worst
    return abs(_smd(values[t_rows, j], values[c_rows, j]))


def psm_match(cohort: Cohort, covariates: Sequence[str], caliper: float = DEFAULT_CALIPER,
              seed: int = 0, outcome: Optional[str] = None, B: int = 1000,
              alpha: float = 0.05) -> Tuple[MatchedSet, EffectEstimate]:
    """Greedy 1:1 nearest-neighbor matching on the propensity logit.

    The caliper is in standard deviations of the logit score; treated
    subjects are processed in seeded random order and each consumes its
    nearest unmatched control. The odds ratio (control vs treatment) comes
    from the matched two-by-two table, with a pair-resampling bootstrap CI.
    """
    schema = cohort.schema
    if schema.treatment_col is None:
        raise EffectError("cohort has no treatment column")
    if outcome is None:
        outcome = schema.primary_outcome
    if outcome is None:
        raise EffectError("no outcome column designated")

    o_idx = schema.index_of(outcome)
    rows = np.flatnonzero(~cohort.mask[:, o_idx])
    sub = cohort.select_rows(rows)

    cov_idx = [schema.index_of(c) for c in covariates]
    if sub.mask[:, cov_idx].any():
        raise EffectError("covariates contain missing cells; impute first")

    t_col = schema.index_of(schema.treatment_col)
    if sub.mask[:, t_col].any():
        raise EffectError("treatment column contains missing cells")
    treatment = sub.values[:, t_col].astype(int)
    y = sub.values[:, o_idx].astype(int)

    ncats = np.array(
        [len(schema.columns[j].categories) if schema.columns[j].kind == CATEGORICAL else 0
         for j in cov_idx],
        dtype=np.int64,
    )
    X = sub.values[:, cov_idx]
    prop = fit_logistic_table(X, treatment, ncats, lam=1e-6)
    p = np.clip(prop.predict_proba(X), 1e-12, 1 - 1e-12)
    logit = np.log(p / (1 - p))
    sd = logit.std()
    radius = caliper * sd if sd > 0 else np.inf

    treated_rows = np.flatnonzero(treatment == 1)
    control_rows = np.flatnonzero(treatment == 0)
    if len(treated_rows) == 0 or len(control_rows) == 0:
        raise EffectError("need both treated and control rows to match")

    rng = np.random.default_rng(derive_seed(seed, "psm-order"))
    order = treated_rows[rng.permutation(len(treated_rows))]
    available = np.ones(len(control_rows), dtype=bool)
    control_logit = logit[control_rows]
    pairs = []
    for t in order:
        dist = np.abs(control_logit - logit[t])
        dist[~available] = np.inf
        best = int(np.argmin(dist))
        if dist[best] <= radius:
            pairs.append((int(t), int(control_rows[best])))
            available[best] = False
    if not pairs:
        raise EffectError("no treated subject matched within the caliper")
    low_match = len(pairs) < 0.5 * len(treated_rows)
    if low_match:
        warnings.warn(
            f"only {len(pairs)}/{len(treated_rows)} treated subjects matched",
            RuntimeWarning,
        )

    mt = np.array([a for a, _ in pairs])
    mc = np.array([b for _, b in pairs])
    balance = {}
    for name, j in zip(covariates, cov_idx):
        pre = _covariate_smd(sub.values, schema.columns[j], treated_rows, control_rows, j)
        post = _covariate_smd(sub.values, schema.columns[j], mt, mc, j)
        balance[name] = (pre, post)

    matched = MatchedSet(
        pairs=tuple((int(rows[a]), int(rows[b])) for a, b in pairs),
        caliper=caliper, balance=balance,
        n_treated=len(treated_rows), n_controls=len(control_rows),
        low_match_warning=low_match,
    )

    yt, yc = y[mt].astype(float), y[mc].astype(float)
    m = len(pairs)

    def table_or(et, nt, ec, nc):
        if et in (0, nt) or ec in (0, nc):
            raise EffectError("degenerate matched event table")
        return (ec / (nc - ec)) / (et / (nt - et))

    point = table_or(yt.sum(), m, yc.sum(), m)

    rng_b = np.random.default_rng(derive_seed(seed, "psm-bootstrap"))
    idx = rng_b.integers(0, m, size=(B, m))
    et = yt[idx].sum(axis=1)
    ec = yc[idx].sum(axis=1)
    good = (et > 0) & (et < m) & (ec > 0) & (ec < m)
    degenerate = int(B - good.sum())
    if degenerate == B:
        raise EffectError("every matched bootstrap replicate was degenerate")
    stats = (ec[good] / (m - ec[good])) / (et[good] / (m - et[good]))
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    estimate = EffectEstimate(
        or_point=point, ci_low=float(lo), ci_high=float(hi),
        alpha=alpha, n_boot=B, n_treated=m, degenerate_replicates=degenerate,
    )
    return matched, estimate
