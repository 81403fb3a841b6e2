"""Ground-truth cohort simulator and the marginal odds-ratio oracle.

Covariates are drawn through a Gaussian copula (correlated normals pushed
through per-column marginals: location/scale with optional bound clipping
for numerics, quantile thresholding for categoricals). Binary potential
outcomes under control and treatment come from a logistic model over
standardized covariate scores, with the treatment effect entering as a log
conditional odds ratio; treatment itself is assigned by a logistic
propensity model (zero coefficients = randomized). Potential outcomes
travel on a side channel that pipeline code never sees.

The covariate score feeding the outcome/propensity models is
(x - mean) / sd for numeric columns and the raw category index for
categorical columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import ndtr

from ._seeding import derive_seed
from .cohort import CATEGORICAL, NUMERIC, Cohort, CohortError, CohortSchema, ColumnSpec
from .logistic import sigmoid


@dataclass(frozen=True)
class NumericMarginal:
    name: str
    mean: float
    sd: float
    lower: float = -np.inf
    upper: float = np.inf

    @property
    def kind(self):
        return NUMERIC


@dataclass(frozen=True)
class CategoricalMarginal:
    name: str
    categories: Tuple[str, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.categories) != len(self.probs):
            raise CohortError(f"{self.name}: categories/probs length mismatch")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise CohortError(f"{self.name}: category probabilities must sum to 1")

    @property
    def kind(self):
        return CATEGORICAL


@dataclass(frozen=True)
class MissingSpec:
    rate: float
    mechanism: str = "mcar"            # "mcar" | "mar"
    condition_on: Optional[str] = None  # fully observed column, for "mar"

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0):
            raise CohortError(f"missingness rate {self.rate} outside [0, 1)")
        if self.mechanism not in ("mcar", "mar"):
            raise CohortError(f"unknown missingness mechanism {self.mechanism!r}")
        if self.mechanism == "mar" and not self.condition_on:
            raise CohortError("mar mechanism needs a conditioning column")


@dataclass(frozen=True)
class OutcomeModel:
    name: str
    intercept: float
    coefs: Dict[str, float]
    treatment_effect: float = 0.0      # log conditional odds ratio for arm 1
    categories: Tuple[str, str] = ("0", "1")


@dataclass(frozen=True)
class TreatmentModel:
    name: str
    intercept: float
    coefs: Dict[str, float] = field(default_factory=dict)
    categories: Tuple[str, str] = ("0", "1")   # index 0 = control, 1 = treated


@dataclass(frozen=True)
class SimCohortConfig:
    predictors: Tuple
    outcomes: Tuple[OutcomeModel, ...]
    treatment: TreatmentModel
    correlation: Optional[np.ndarray] = None   # identity when omitted
    missingness: Dict[str, MissingSpec] = field(default_factory=dict)

    def schema(self) -> CohortSchema:
        cols = []
        for m in self.predictors:
            if m.kind == NUMERIC:
                cols.append(ColumnSpec(m.name, NUMERIC))
            else:
                cols.append(ColumnSpec(m.name, CATEGORICAL, m.categories))
        cols.append(ColumnSpec(self.treatment.name, CATEGORICAL,
                               self.treatment.categories))
        for om in self.outcomes:
            cols.append(ColumnSpec(om.name, CATEGORICAL, om.categories))
        return CohortSchema(
            columns=tuple(cols),
            outcome_cols=tuple(om.name for om in self.outcomes),
            treatment_col=self.treatment.name,
        )


@dataclass(frozen=True)
class PotentialOutcomes:
    """Hidden ground truth: both potential outcomes per subject and outcome."""

    treatment: np.ndarray                       # assigned arm (0/1)
    y0: Dict[str, np.ndarray]
    y1: Dict[str, np.ndarray]
    p0: Dict[str, np.ndarray]
    p1: Dict[str, np.ndarray]


def _correlation_root(config: SimCohortConfig, p: int) -> Optional[np.ndarray]:
    if config.correlation is None:
        return None
    R = np.asarray(config.correlation, dtype=float)
    if R.shape != (p, p) or not np.allclose(R, R.T, atol=1e-10):
        raise CohortError("correlation matrix must be symmetric p x p")
    w, V = np.linalg.eigh(R)
    if w.min() < -1e-8:
        raise CohortError("correlation matrix is not positive semi-definite")
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def _draw_predictors(config: SimCohortConfig, n: int,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (values, scores): realized covariates and model scores."""
    p = len(config.predictors)
    Z = rng.standard_normal((n, p))
    root = _correlation_root(config, p)
    if root is not None:
        Z = Z @ root.T
    values = np.empty((n, p))
    scores = np.empty((n, p))
    for j, m in enumerate(config.predictors):
        if m.kind == NUMERIC:
            x = np.clip(m.mean + m.sd * Z[:, j], m.lower, m.upper)
            values[:, j] = x
            scores[:, j] = (x - m.mean) / m.sd
        else:
            u = ndtr(Z[:, j])
            thresholds = np.cumsum(m.probs)
            idx = np.minimum(np.searchsorted(thresholds, u, side="right"),
                             len(m.probs) - 1)
            values[:, j] = idx
            scores[:, j] = idx
    return values, scores


def _linear_score(scores: np.ndarray, names: list, coefs: Dict[str, float],
                  intercept: float) -> np.ndarray:
    eta = np.full(scores.shape[0], float(intercept))
    for name, beta in coefs.items():
        if name not in names:
            raise CohortError(f"model coefficient references unknown column {name!r}")
        eta += beta * scores[:, names.index(name)]
    return eta


def simulate_cohort(config: SimCohortConfig, n: int,
                    seed: int = 0) -> Tuple[Cohort, PotentialOutcomes]:
    """Draw a cohort plus its hidden potential outcomes."""
    if n < 1:
        raise CohortError("n must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, "simulate"))
    names = [m.name for m in config.predictors]
    values, scores = _draw_predictors(config, n, rng)

    eta_t = _linear_score(scores, names, config.treatment.coefs,
                          config.treatment.intercept)
    treatment = (rng.random(n) < sigmoid(eta_t)).astype(np.int64)

    y0, y1, p0, p1 = {}, {}, {}, {}
    observed_cols = []
    for om in config.outcomes:
        eta0 = _linear_score(scores, names, om.coefs, om.intercept)
        p0[om.name] = sigmoid(eta0)
        p1[om.name] = sigmoid(eta0 + om.treatment_effect)
        y0[om.name] = (rng.random(n) < p0[om.name]).astype(np.int64)
        y1[om.name] = (rng.random(n) < p1[om.name]).astype(np.int64)
        observed_cols.append(np.where(treatment == 1, y1[om.name], y0[om.name]))

    full = np.column_stack([values, treatment.astype(float)]
                           + [c.astype(float) for c in observed_cols])
    schema = config.schema()

    mask = np.zeros(full.shape, dtype=bool)
    col_index = {c.name: j for j, c in enumerate(schema.columns)}
    for name, spec in config.missingness.items():
        if name not in col_index:
            raise CohortError(f"missingness names unknown column {name!r}")
        j = col_index[name]
        if spec.rate == 0.0:
            continue
        if spec.mechanism == "mcar":
            mask[:, j] = rng.random(n) < spec.rate
        else:
            cj = col_index[spec.condition_on]
            if config.missingness.get(spec.condition_on, MissingSpec(0.0)).rate > 0:
                raise CohortError(
                    f"mar condition column {spec.condition_on!r} must be fully observed"
                )
            cond = full[:, cj]
            above = cond > np.median(cond)
            prob = np.where(above, min(2 * spec.rate, 0.999), 0.0)
            mask[:, j] = rng.random(n) < prob

    cohort = Cohort(schema, full, mask)
    hidden = PotentialOutcomes(treatment=treatment, y0=y0, y1=y1, p0=p0, p1=p1)
    return cohort, hidden


def true_marginal_or(config: SimCohortConfig, n_mc: int = 100_000, seed: int = 0,
                     outcome: Optional[str] = None) -> float:
    """Monte-Carlo oracle for the marginal control-vs-treatment odds ratio.

    Averages the outcome-model probabilities over the covariate distribution
    (no Bernoulli noise), so the only error is covariate sampling error.
    Accounts for the non-collapsibility of the odds ratio.
    """
    if n_mc < 100_000:
        raise CohortError("oracle needs n_mc >= 100000")
    if outcome is None:
        outcome = config.outcomes[0].name
    om = next(o for o in config.outcomes if o.name == outcome)
    rng = np.random.default_rng(derive_seed(seed, "oracle"))
    names = [m.name for m in config.predictors]
    _, scores = _draw_predictors(config, n_mc, rng)
    eta0 = _linear_score(scores, names, om.coefs, om.intercept)
    P0 = float(np.mean(sigmoid(eta0)))
    P1 = float(np.mean(sigmoid(eta0 + om.treatment_effect)))
    if not (0.0 < P0 < 1.0 and 0.0 < P1 < 1.0):
        raise CohortError("degenerate outcome probabilities")
    return (P0 / (1 - P0)) / (P1 / (1 - P1))


def write_potential_outcomes(hidden: PotentialOutcomes, path) -> None:
    """Sidecar CSV so pipeline code cannot accidentally read the ground truth."""
    outcomes = sorted(hidden.y0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["treatment"]
        for name in outcomes:
            header += [f"{name}_y0", f"{name}_y1"]
        writer.writerow(header)
        for i in range(len(hidden.treatment)):
            row = [int(hidden.treatment[i])]
            for name in outcomes:
                row += [int(hidden.y0[name][i]), int(hidden.y1[name][i])]
            writer.writerow(row)


def exchangeable_correlation(p: int, rho: float) -> np.ndarray:
    return np.full((p, p), rho) + (1 - rho) * np.eye(p)


def load_sim_config(source) -> SimCohortConfig:
    """Build a config from a JSON file path or an already-parsed dict."""
    if isinstance(source, dict):
        raw = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)

    predictors = []
    for item in raw["predictors"]:
        if item["kind"] == NUMERIC:
            predictors.append(NumericMarginal(
                name=item["name"], mean=item["mean"], sd=item["sd"],
                lower=item.get("lower", -np.inf), upper=item.get("upper", np.inf),
            ))
        else:
            predictors.append(CategoricalMarginal(
                name=item["name"], categories=tuple(item["categories"]),
                probs=tuple(item["probs"]),
            ))

    corr_spec = raw.get("correlation")
    correlation = None
    if corr_spec:
        if corr_spec.get("type") == "exchangeable":
            correlation = exchangeable_correlation(len(predictors), corr_spec["rho"])
        else:
            correlation = np.asarray(corr_spec["matrix"], dtype=float)

    missingness = {
        name: MissingSpec(rate=m["rate"], mechanism=m.get("mechanism", "mcar"),
                          condition_on=m.get("condition_on"))
        for name, m in raw.get("missingness", {}).items()
    }
    t = raw["treatment"]
    treatment = TreatmentModel(
        name=t["name"], intercept=t["intercept"], coefs=dict(t.get("coefs", {})),
        categories=tuple(t.get("categories", ("0", "1"))),
    )
    outcomes = tuple(
        OutcomeModel(
            name=o["name"], intercept=o["intercept"], coefs=dict(o.get("coefs", {})),
            treatment_effect=o.get("treatment_effect", 0.0),
            categories=tuple(o.get("categories", ("0", "1"))),
        )
        for o in raw["outcomes"]
    )
    return SimCohortConfig(
        predictors=tuple(predictors), outcomes=outcomes, treatment=treatment,
        correlation=correlation, missingness=missingness,
    )


def cidscann_like() -> SimCohortConfig:
    """The packaged default config shaped like the inception-cohort summary."""
    text = resources.files("vcarm.data").joinpath("cidscann_like.json").read_text()
    return load_sim_config(json.loads(text))
